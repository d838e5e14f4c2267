//! Depth-discontinuity exploration: crop and slice the five depth views,
//! search each for the split where near facade meets open space on the
//! left, pick the view with the rightmost split, and move toward one of five
//! marked points at a depth-clamped distance.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Vec2, Vec3};
use crate::perception::ViewObservation;
use crate::world::{Action, CameraRig, DepthImage, DronePose, PinholeCamera, PixelBox, View};

#[derive(Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error("crop rows {0}..={1} leave no image")]
    EmptyCrop(usize, usize),
    #[error("recognition answer carries no box")]
    NoBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewpointStrategy {
    /// Rightmost valid depth discontinuity across views.
    #[default]
    Ours,
    Random,
    /// Always the right-facing camera.
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploreParams {
    /// Minimum left-minus-right mean depth of a valid split, meters.
    pub delta: f64,
    pub d_max: f64,
    pub max_escalations: u32,
    /// Share of right-partition slices allowed beyond `d_max`.
    pub overflow_fraction: f64,
    pub slices: usize,
    pub l_max: f64,
    pub deadlock_threshold: f64,
    pub safety_radius: f64,
    /// Extra lateral clearance for the swept corridor.
    pub corridor_margin: f64,
    pub standoff: f64,
    /// Bearing error above which an approach starts with a yaw alignment.
    pub align_tolerance_deg: f64,
}

impl Default for ExploreParams {
    fn default() -> Self {
        Self {
            delta: 5.0,
            d_max: 40.0,
            max_escalations: 2,
            overflow_fraction: 0.2,
            slices: 20,
            l_max: 10.0,
            deadlock_threshold: 1.0,
            safety_radius: 0.5,
            corridor_margin: 0.2,
            standoff: 1.5,
            align_tolerance_deg: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    pub view: View,
    pub means: Vec<f64>,
}

impl SliceProfile {
    pub fn x(&self) -> usize {
        self.means.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    /// 1-based split index; the left partition is slices `1..=j`.
    pub j_star: Option<usize>,
    pub objective: Option<f64>,
}

impl SplitResult {
    pub const NONE: SplitResult = SplitResult { j_star: None, objective: None };
}

/// Keeps rows `y_min..=y_max` of `depth`.
pub fn crop_depth(depth: &DepthImage, bbox: &PixelBox) -> Result<DepthImage, ExploreError> {
    let y_max = bbox.y_max.min(depth.height - 1);
    if bbox.y_min >= y_max {
        return Err(ExploreError::EmptyCrop(bbox.y_min, bbox.y_max));
    }
    let data = depth.data[bbox.y_min * depth.width..(y_max + 1) * depth.width].to_vec();
    Ok(DepthImage::new(depth.width, y_max - bbox.y_min + 1, depth.max_range, data))
}

/// Column widths of `x` contiguous groups; the leftmost groups take the
/// remainder columns.
pub fn slice_widths(width: usize, x: usize) -> Vec<usize> {
    let (base, extra) = (width / x, width % x);
    (0..x).map(|g| base + usize::from(g < extra)).collect()
}

/// Mean depth of each of `x` column groups.
pub fn slice_means(view: View, depth: &DepthImage, x: usize) -> SliceProfile {
    assert!(x >= 1 && depth.width >= x, "need at least one column per slice");
    let mut means = Vec::with_capacity(x);
    let mut col = 0;
    for w in slice_widths(depth.width, x) {
        let mut sum = 0.0;
        for j in 0..depth.height {
            for &v in &depth.row(j)[col..col + w] {
                sum += v;
            }
        }
        means.push(sum / (w * depth.height) as f64);
        col += w;
    }
    SliceProfile { view, means }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pvar(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|&a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64
}

/// Slices allowed above `d_max` in a right partition of `n` slices.
pub fn overflow_limit(overflow_fraction: f64, n: usize) -> usize {
    (overflow_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Minimum-variance split among those where the left side is at least
/// `delta` farther than the right and the right side rarely exceeds `d_max`.
/// Ties go to the smallest index.
pub fn find_split(means: &[f64], delta: f64, d_max: f64, overflow_fraction: f64) -> SplitResult {
    let x = means.len();
    let mut best = SplitResult::NONE;
    for j in 1..x {
        let (left, right) = means.split_at(j);
        if mean(left) - mean(right) < delta {
            continue;
        }
        let over = right.iter().filter(|&&v| v > d_max).count();
        if over > overflow_limit(overflow_fraction, right.len()) {
            continue;
        }
        let obj = pvar(left) + pvar(right);
        if best.objective.is_none_or(|b| obj < b) {
            best = SplitResult { j_star: Some(j), objective: Some(obj) };
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub view: View,
    pub split: SplitResult,
    pub escalations: u32,
    pub d_max: f64,
}

/// View with the highest valid split. Ties follow rig order; with no valid
/// split `d_max` doubles up to `max_escalations` times before falling back to
/// the right-facing view.
pub fn select_viewpoint(profiles: &[SliceProfile], p: &ExploreParams) -> Selection {
    let mut sorted: Vec<&SliceProfile> = profiles.iter().collect();
    sorted.sort_by_key(|s| s.view);
    let mut d_max = p.d_max;
    for esc in 0..=p.max_escalations {
        let mut best: Option<(View, SplitResult)> = None;
        for prof in &sorted {
            let split = find_split(&prof.means, p.delta, d_max, p.overflow_fraction);
            if let Some(j) = split.j_star {
                if best.is_none_or(|(_, b)| j > b.j_star.unwrap_or(0)) {
                    best = Some((prof.view, split));
                }
            }
        }
        if let Some((view, split)) = best {
            return Selection { view, split, escalations: esc, d_max };
        }
        if esc < p.max_escalations {
            d_max *= 2.0;
        }
    }
    Selection { view: View::RIGHT, split: SplitResult::NONE, escalations: p.max_escalations, d_max }
}

/// Viewpoint under an ablation strategy. `Ours` runs the split search on the
/// cropped views; the baselines skip it.
pub fn choose_viewpoint<R: Rng>(
    strategy: ViewpointStrategy,
    views: &[ViewObservation],
    bbox: &PixelBox,
    p: &ExploreParams,
    rng: &mut R,
) -> Result<Selection, ExploreError> {
    match strategy {
        ViewpointStrategy::Ours => {
            let mut profiles = Vec::with_capacity(views.len());
            for v in views {
                let cropped = crop_depth(&v.depth, bbox)?;
                profiles.push(slice_means(v.view, &cropped, p.slices));
            }
            Ok(select_viewpoint(&profiles, p))
        }
        ViewpointStrategy::Random => {
            let view = View::ALL[rng.gen_range(0..View::ALL.len())];
            Ok(Selection { view, split: SplitResult::NONE, escalations: 0, d_max: p.d_max })
        }
        ViewpointStrategy::Default => {
            Ok(Selection { view: View::RIGHT, split: SplitResult::NONE, escalations: 0, d_max: p.d_max })
        }
    }
}

/// Columns of five evenly spaced points on the middle row:
/// `round(width * k / 6)` for k = 1..=5.
pub fn mark_points(width: usize) -> [usize; 5] {
    std::array::from_fn(|k| (width as f64 * (k + 1) as f64 / 6.0).round() as usize)
}

/// Depth at a pixel less the safety radius, floored at zero, capped at
/// `l_max`.
pub fn safe_distance(depth: &DepthImage, col: usize, row: usize, l_max: f64, safety_radius: f64) -> f64 {
    (depth.get(col, row) - safety_radius).max(0.0).min(l_max)
}

/// World points of every hit pixel of every view.
pub fn obstacle_points(views: &[ViewObservation], rig: &CameraRig, pose: &DronePose) -> Vec<Vec3> {
    let mut out = Vec::new();
    for v in views {
        let cam = rig.camera(pose, v.view);
        for j in 0..v.depth.height {
            for i in 0..v.depth.width {
                if !v.depth.is_hit(i, j) {
                    continue;
                }
                let ray = cam.pixel_ray(i, j);
                out.push(cam.origin + ray * (v.depth.get(i, j) / ray.norm()));
            }
        }
    }
    out
}

/// Longest move along `bearing` whose swept disc stays clear of `points`.
/// Each point blocks within `radius` plus `spread` times its distance, the
/// gap between neighboring depth samples at that range. Buildings stand on
/// the ground, so any point at or above `min_z - radius` blocks a move whose
/// lowest altitude is `min_z`.
pub fn corridor_clearance(origin: Vec2, bearing: f64, points: &[Vec3], radius: f64, spread: f64, min_z: f64) -> f64 {
    let dir = Vec2::from_angle(bearing);
    let mut limit = f64::INFINITY;
    for p in points {
        if p.z < min_z - radius {
            continue;
        }
        let rel = p.xy() - origin;
        let along = rel.dot(dir);
        let lat = rel.cross(dir).abs();
        let radius = radius + spread * rel.norm();
        if along <= 0.0 || lat >= radius {
            continue;
        }
        limit = limit.min((along - (radius * radius - lat * lat).sqrt()).max(0.0));
    }
    limit
}

/// Safe distances l_1..l_5 for the marked points of the selected view: the
/// depth clamp at each mark, further limited by the swept corridor.
pub fn mark_distances(
    depth: &DepthImage,
    cam: &PinholeCamera,
    marks: &[usize; 5],
    obstacles: &[Vec3],
    p: &ExploreParams,
) -> [f64; 5] {
    let row = depth.height / 2;
    std::array::from_fn(|k| {
        let col = marks[k].min(depth.width - 1);
        let l = safe_distance(depth, col, row, p.l_max, p.safety_radius);
        let bearing = cam.column_bearing(marks[k] as f64);
        let r = p.safety_radius + p.corridor_margin;
        l.min(corridor_clearance(cam.origin.xy(), bearing, obstacles, r, cam.pixel_pitch(), cam.origin.z))
    })
}

/// Action for the chosen point: rotate left 30 degrees when its distance is
/// below the deadlock threshold, else translate toward the point's bearing.
pub fn decide_action(
    cam: &PinholeCamera,
    marks: &[usize; 5],
    distances: &[f64; 5],
    point: u8,
    p: &ExploreParams,
) -> Action {
    let k = usize::from(point.clamp(1, 5) - 1);
    if distances[k] < p.deadlock_threshold {
        return Action::rotate_left_30();
    }
    Action::translate(cam.column_bearing(marks[k] as f64), distances[k])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproachPlan {
    pub actions: Vec<Action>,
    /// Standoff point the plan flies to.
    pub target: Vec3,
    /// The first action only turns the drone toward the target.
    pub aligns_first: bool,
}

fn depth_point(depth: &DepthImage, cam: &PinholeCamera, col: usize, row: usize) -> Option<Vec3> {
    if !depth.is_hit(col, row) {
        return None;
    }
    let ray = cam.pixel_ray(col, row);
    Some(cam.origin + ray * (depth.get(col, row) / ray.norm()))
}

/// Horizontal facade normal at `center`, facing the camera: principal
/// direction of the depth points on the same row within `radius` of the
/// center, rotated a quarter turn. Falls back to the direction toward the
/// camera when too few points support a fit.
pub fn facade_normal(depth: &DepthImage, cam: &PinholeCamera, row: usize, center: Vec3, radius: f64) -> Vec2 {
    let toward_cam = (cam.origin.xy() - center.xy()).normalized();
    let pts: Vec<Vec2> = (0..depth.width)
        .filter_map(|c| depth_point(depth, cam, c, row))
        .map(|q| q.xy())
        .filter(|q| q.dist(center.xy()) <= radius)
        .collect();
    if pts.len() < 2 {
        return toward_cam;
    }
    let m = pts.iter().fold(Vec2::new(0.0, 0.0), |a, &q| a + q) * (1.0 / pts.len() as f64);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for q in &pts {
        let d = *q - m;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    if sxx + syy < 1e-12 {
        return toward_cam;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let n = Vec2::new(-theta.sin(), theta.cos());
    if n.dot(toward_cam) >= 0.0 {
        n
    } else {
        n * -1.0
    }
}

/// Radius around a window center whose depth points are assumed to lie on
/// its facade; windows keep at least this far from facade corners.
pub const NORMAL_FIT_RADIUS: f64 = 1.8;

/// Flight plan to the standoff point in front of a recognized window: an
/// optional yaw alignment, level-and-climb steps of at most `l_max`, then
/// stop. When the swept corridor toward the standoff point is blocked the
/// plan only advances to the blockage and carries no stop; a blockage
/// closer than the deadlock threshold yields an empty plan.
pub fn approach_target(
    bbox: &PixelBox,
    depth: &DepthImage,
    cam: &PinholeCamera,
    pose: &DronePose,
    obstacles: &[Vec3],
    p: &ExploreParams,
) -> ApproachPlan {
    let (cu, cv) = bbox.center();
    let stop_here = |target: Vec3| ApproachPlan { actions: vec![Action::stop()], target, aligns_first: false };
    // a box seen edge-on can straddle the silhouette; use the hit pixel
    // nearest its center
    let hit = (bbox.y_min..=bbox.y_max.min(depth.height - 1))
        .flat_map(|j| (bbox.x_min..=bbox.x_max.min(depth.width - 1)).map(move |i| (i, j)))
        .filter(|&(i, j)| depth.is_hit(i, j))
        .min_by(|a, b| {
            let d = |(i, j): (usize, usize)| (i as f64 + 0.5 - cu).powi(2) + (j as f64 + 0.5 - cv).powi(2);
            d(*a).total_cmp(&d(*b))
        });
    let Some((col, row)) = hit else {
        return ApproachPlan { actions: Vec::new(), target: pose.position, aligns_first: false };
    };
    let center = depth_point(depth, cam, col, row).expect("pixel is a hit");
    if depth.get(col, row) < p.standoff {
        return stop_here(pose.position);
    }
    let normal = facade_normal(depth, cam, row, center, NORMAL_FIT_RADIUS);
    let target = Vec3::new(center.x + normal.x * p.standoff, center.y + normal.y * p.standoff, center.z);
    let delta = target - pose.position;
    let horizontal = delta.xy().norm();
    if delta.norm() <= p.safety_radius {
        return stop_here(target);
    }
    let bearing = if horizontal > 1e-9 { delta.xy().angle() } else { pose.yaw };
    let mut actions = Vec::new();
    let aligns_first = wrap_angle(bearing - pose.yaw).abs() > p.align_tolerance_deg.to_radians();
    if aligns_first {
        actions.push(Action::approach(bearing, 0.0, 0.0));
    }
    let r = p.safety_radius + p.corridor_margin;
    let clear =
        corridor_clearance(pose.position.xy(), bearing, obstacles, r, cam.pixel_pitch(), pose.position.z.min(target.z));
    let reach = horizontal <= clear;
    let travel = if reach { horizontal } else { clear };
    if !reach && travel < p.deadlock_threshold {
        return ApproachPlan { actions: Vec::new(), target, aligns_first: false };
    }
    let n = (travel / p.l_max).ceil().max(1.0);
    let climb = if horizontal > 1e-9 { delta.z * travel / horizontal } else { delta.z };
    for _ in 0..n as usize {
        actions.push(Action::approach(bearing, travel / n, climb / n));
    }
    if reach {
        actions.push(Action::stop());
    }
    ApproachPlan { actions, target, aligns_first }
}
