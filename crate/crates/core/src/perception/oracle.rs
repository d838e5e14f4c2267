use serde::{Deserialize, Serialize};

use super::noise::{NoiseProfile, NoiseStream};
use super::{
    Backend, BuildingBoxQuery, ChoiceAnswer, ChoiceQuery, FloorCountAnswer, FloorQuery, PerceptionError,
    RecognitionAnswer, RecognitionQuery, RequestInterpretation, RequestQuery,
};
use crate::world::{Color, ObjectTag, PixelBox, View, VisibleFeature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoicePolicy {
    /// Largest newly visible facade length among feasible points.
    #[default]
    MaxGain,
    CenterOnly,
}

/// Tie preference among marked points: middle, then leftward, then right.
pub const CHOICE_TIE_ORDER: [u8; 5] = [3, 2, 1, 4, 5];

/// Occlusion share below which a window counts as recognizable.
pub const VISIBILITY_THRESHOLD: f64 = 0.5;
/// Smallest box height, as a share of the image height, that a recognizer
/// can resolve.
pub const MIN_BOX_FRACTION: f64 = 0.03;

/// Ground-truth perception with seeded error injection.
#[derive(Clone, Debug)]
pub struct OracleBackend {
    profile: NoiseProfile,
    noise: NoiseStream,
    choice: ChoicePolicy,
}

impl OracleBackend {
    pub fn new(profile: NoiseProfile) -> Result<Self, PerceptionError> {
        profile.validate()?;
        let noise = NoiseStream::new(profile.seed);
        Ok(Self { profile, noise, choice: ChoicePolicy::MaxGain })
    }

    pub fn exact() -> Self {
        Self::new(NoiseProfile::exact()).expect("exact profile is valid")
    }

    pub fn with_choice(mut self, choice: ChoicePolicy) -> Self {
        self.choice = choice;
        self
    }

    pub fn profile(&self) -> &NoiseProfile {
        &self.profile
    }
}

fn missing(what: &str) -> PerceptionError {
    PerceptionError::Grammar(format!("oracle query without {what} annotation"))
}

fn recognizable(f: &VisibleFeature, image_height: usize) -> bool {
    f.occluded_fraction < VISIBILITY_THRESHOLD && f.pixel_box.height() as f64 >= MIN_BOX_FRACTION * image_height as f64
}

/// The true detection: the first recognizable window carrying `target`, in
/// rig order.
pub fn true_detection<'a>(
    views: &'a [super::ViewObservation],
    target: &ObjectTag,
) -> Option<(View, &'a VisibleFeature)> {
    let mut sorted: Vec<&super::ViewObservation> = views.iter().collect();
    sorted.sort_by_key(|v| v.view);
    sorted.into_iter().find_map(|v| {
        v.features
            .iter()
            .find(|f| recognizable(f, v.depth.height) && f.decorations.contains(target))
            .map(|f| (v.view, f))
    })
}

/// First recognizable window with a same-color decoration other than the
/// target, by view order then window id.
pub fn decoy_detection<'a>(
    views: &'a [super::ViewObservation],
    target: &ObjectTag,
) -> Option<(View, &'a VisibleFeature)> {
    let mut sorted: Vec<&super::ViewObservation> = views.iter().collect();
    sorted.sort_by_key(|v| v.view);
    sorted.into_iter().find_map(|v| {
        v.features
            .iter()
            .filter(|f| recognizable(f, v.depth.height) && !f.decorations.contains(target))
            .find(|f| f.decorations.iter().any(|d| d.color == target.color))
            .map(|f| (v.view, f))
    })
}

/// Max-gain choice among points whose distance clears the deadlock
/// threshold; ties and the all-blocked case follow [`CHOICE_TIE_ORDER`].
pub fn max_gain_choice(distances: &[f64; 5], gains: &[f64; 5], deadlock_threshold: f64) -> u8 {
    let mut best: Option<(u8, f64)> = None;
    for &k in &CHOICE_TIE_ORDER {
        let i = usize::from(k - 1);
        if distances[i] < deadlock_threshold {
            continue;
        }
        if best.is_none_or(|(_, g)| gains[i] > g + 1e-9) {
            best = Some((k, gains[i]));
        }
    }
    best.map_or(CHOICE_TIE_ORDER[0], |(k, _)| k)
}

impl Backend for OracleBackend {
    fn parse_request(&mut self, q: RequestQuery<'_>) -> Result<RequestInterpretation, PerceptionError> {
        let truth = q.truth.ok_or_else(|| missing("request"))?;
        let [u_err, u_mode, u_pick] = self.noise.draw::<3>();
        let mut out = truth.clone();
        if u_err < self.profile.parse_error_rate {
            if u_mode < self.profile.parse_color_swap_share {
                let i = Color::ALL.iter().position(|&c| c == truth.target_object.color).unwrap_or(0);
                let shift = 1 + (u_pick * 7.0).floor().min(6.0) as usize;
                out.target_object =
                    ObjectTag { color: Color::ALL[(i + shift) % Color::ALL.len()], ..truth.target_object.clone() };
            } else {
                let off = self.profile.parse_floor_offsets.pick(u_pick);
                out.target_floor = (i64::from(truth.target_floor) + i64::from(off)).max(1) as u32;
            }
        }
        Ok(out)
    }

    fn count_floors(&mut self, q: FloorQuery<'_>) -> Result<FloorCountAnswer, PerceptionError> {
        let band = q.band.ok_or_else(|| missing("floor band"))?;
        let [u_refuse, u_off] = self.noise.draw::<2>();
        if u_refuse < self.profile.refusal_rate {
            return Ok(FloorCountAnswer::refusal());
        }
        let off = self.profile.floor_count_error_dist.pick(u_off);
        let mult = self.profile.resolution_multiplier(band.floor_fraction);
        let n = i64::from(band.floors_visible) + i64::from(off) * i64::from(mult);
        Ok(FloorCountAnswer::count(n.max(0) as u32))
    }

    fn building_box(&mut self, q: BuildingBoxQuery<'_>) -> Result<Option<PixelBox>, PerceptionError> {
        Ok(q.truth)
    }

    fn recognize(&mut self, q: RecognitionQuery<'_>) -> Result<RecognitionAnswer, PerceptionError> {
        let [u_fp, u_fn] = self.noise.draw::<2>();
        if let Some((view, f)) = true_detection(q.views, q.target) {
            if u_fn >= self.profile.or_false_negative_rate {
                return Ok(RecognitionAnswer::found(view, f.pixel_box, Some(f.window_id.clone())));
            }
        }
        if u_fp < self.profile.or_false_positive_rate {
            if let Some((view, f)) = decoy_detection(q.views, q.target) {
                return Ok(RecognitionAnswer::found(view, f.pixel_box, Some(f.window_id.clone())));
            }
        }
        Ok(RecognitionAnswer::not_found())
    }

    fn choose(&mut self, q: ChoiceQuery<'_>) -> Result<ChoiceAnswer, PerceptionError> {
        let point_index = match self.choice {
            ChoicePolicy::CenterOnly => 3,
            ChoicePolicy::MaxGain => {
                let gains = q.gains.ok_or_else(|| missing("facade gain"))?;
                max_gain_choice(&q.distances, &gains, q.deadlock_threshold)
            }
        };
        Ok(ChoiceAnswer { point_index })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{OffsetDist, ViewObservation};
    use crate::world::{Category, DepthImage, FloorBand};

    fn tag(color: Color, label: &str) -> ObjectTag {
        ObjectTag::new(Category::for_label(label).unwrap(), color, label)
    }

    fn feature(id: &str, deco: Vec<ObjectTag>) -> VisibleFeature {
        VisibleFeature {
            window_id: id.into(),
            pixel_box: PixelBox { x_min: 10, x_max: 20, y_min: 30, y_max: 40 },
            floor: 2,
            decorations: deco,
            occluded_fraction: 0.0,
        }
    }

    fn obs(view: View, features: Vec<VisibleFeature>) -> ViewObservation {
        ViewObservation { view, depth: DepthImage::filled(128, 128, 100.0, 100.0), features }
    }

    fn band(n: u32) -> FloorBand {
        FloorBand {
            building: 0,
            distance: 10.0,
            lo: 0.0,
            hi: 20.0,
            floors_visible: n,
            floor_fraction: 0.15,
            total_floors: 8,
        }
    }

    #[test]
    fn request_identity_and_forced_offset() {
        let truth = RequestInterpretation { target_floor: 4, target_object: tag(Color::Green, "flower pot") };
        let mut exact = OracleBackend::exact();
        let got = exact.parse_request(RequestQuery { text: "", truth: Some(&truth) }).unwrap();
        assert_eq!(got, truth);
        let p = NoiseProfile {
            parse_error_rate: 1.0,
            parse_color_swap_share: 0.0,
            parse_floor_offsets: OffsetDist::constant(1),
            ..NoiseProfile::exact()
        };
        let mut noisy = OracleBackend::new(p).unwrap();
        let got = noisy.parse_request(RequestQuery { text: "", truth: Some(&truth) }).unwrap();
        assert_eq!(got.target_floor, 5);
        assert_eq!(got.target_object, truth.target_object);
    }

    #[test]
    fn perturbation_count_is_binomial() {
        let truth = RequestInterpretation { target_floor: 4, target_object: tag(Color::Green, "flower pot") };
        let p = NoiseProfile { parse_error_rate: 0.5, seed: 99, ..NoiseProfile::exact() };
        let mut b = OracleBackend::new(p).unwrap();
        let perturbed = (0..1000)
            .filter(|_| b.parse_request(RequestQuery { text: "", truth: Some(&truth) }).unwrap() != truth)
            .count();
        // sd of Binomial(1000, 0.5) is 15.8
        assert!((460..=540).contains(&perturbed), "{perturbed}");
    }

    #[test]
    fn forced_refusal() {
        let p = NoiseProfile { refusal_rate: 1.0, ..NoiseProfile::exact() };
        let mut b = OracleBackend::new(p).unwrap();
        let d = DepthImage::filled(16, 16, 100.0, 10.0);
        let ans = b.count_floors(FloorQuery { depth: &d, band: Some(&band(4)) }).unwrap();
        assert!(ans.refused());
    }

    #[test]
    fn target_visible_and_absent() {
        let target = tag(Color::Green, "flower pot");
        let views = vec![obs(View::RIGHT, vec![feature("b00-e00-f02-w01", vec![target.clone()])])];
        let mut b = OracleBackend::exact();
        let a = b.recognize(RecognitionQuery { views: &views, target: &target }).unwrap();
        assert!(a.found);
        assert_eq!(a.view, Some(View::RIGHT));
        assert_eq!(a.window_id.as_deref(), Some("b00-e00-f02-w01"));
        let empty = vec![obs(View::FRONT, vec![])];
        let a = b.recognize(RecognitionQuery { views: &empty, target: &target }).unwrap();
        assert_eq!(a, RecognitionAnswer::not_found());
    }

    #[test]
    fn forced_false_positive_picks_decoy() {
        let target = tag(Color::Green, "flower pot");
        let views = vec![
            obs(View::FRONT, vec![feature("b00-e01-f03-w00", vec![tag(Color::Red, "lamp")])]),
            obs(View::LEFT, vec![feature("b00-e02-f01-w02", vec![tag(Color::Green, "kite")])]),
        ];
        let p = NoiseProfile { or_false_positive_rate: 1.0, ..NoiseProfile::exact() };
        let mut b = OracleBackend::new(p).unwrap();
        let a = b.recognize(RecognitionQuery { views: &views, target: &target }).unwrap();
        assert_eq!(a.window_id.as_deref(), Some("b00-e02-f01-w02"));
        assert_eq!(a.view, Some(View::LEFT));
    }

    #[test]
    fn choice_rules() {
        let open = [10.0; 5];
        let flat = [0.0; 5];
        assert_eq!(max_gain_choice(&open, &flat, 1.0), 3);
        assert_eq!(max_gain_choice(&[0.3, 5.0, 0.3, 0.3, 0.3], &flat, 1.0), 2);
        assert_eq!(max_gain_choice(&open, &[1.0, 4.0, 2.0, 4.0, 0.0], 1.0), 2);
        let mut centre = OracleBackend::exact().with_choice(ChoicePolicy::CenterOnly);
        let d = DepthImage::filled(16, 16, 100.0, 10.0);
        let q = ChoiceQuery {
            view: View::RIGHT,
            depth: &d,
            marks: [3, 5, 8, 11, 13],
            distances: [0.3, 9.0, 0.3, 0.3, 0.3],
            deadlock_threshold: 1.0,
            task: "",
            gains: None,
        };
        assert_eq!(centre.choose(q).unwrap().point_index, 3);
    }
}
