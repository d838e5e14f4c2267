use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PerceptionError;

/// Discrete distribution over integer offsets, as `(offset, weight)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OffsetDist(pub Vec<(i32, f64)>);

impl OffsetDist {
    pub fn exact() -> Self {
        Self(vec![(0, 1.0)])
    }

    /// Uniform over {-1, 0, +1}.
    pub fn plus_minus_one() -> Self {
        Self(vec![(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)])
    }

    pub fn constant(k: i32) -> Self {
        Self(vec![(k, 1.0)])
    }

    fn validate(&self) -> Result<(), String> {
        if self.0.is_empty() {
            return Err("offset distribution is empty".into());
        }
        if self.0.iter().any(|&(_, w)| !(w >= 0.0 && w.is_finite())) {
            return Err("offset weights must be finite and non-negative".into());
        }
        if self.0.iter().map(|&(_, w)| w).sum::<f64>() <= 0.0 {
            return Err("offset weights sum to zero".into());
        }
        Ok(())
    }

    /// Inverse-CDF draw from a uniform `u` in [0, 1).
    pub fn pick(&self, u: f64) -> i32 {
        let total: f64 = self.0.iter().map(|&(_, w)| w).sum();
        let mut acc = 0.0;
        for &(k, w) in &self.0 {
            acc += w / total;
            if u < acc {
                return k;
            }
        }
        self.0.iter().rev().find(|&&(_, w)| w > 0.0).map_or(0, |&(k, _)| k)
    }
}

/// Error model of the oracle backend.
///
/// Floor-count offsets grow when floors are small in the image: the drawn
/// offset is multiplied by `ceil(floor_count_min_fraction / f)` (at least 1),
/// where `f` is one floor's share of the image height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseProfile {
    pub or_false_positive_rate: f64,
    pub or_false_negative_rate: f64,
    pub floor_count_error_dist: OffsetDist,
    pub floor_count_min_fraction: f64,
    pub refusal_rate: f64,
    pub parse_error_rate: f64,
    /// Share of request perturbations that swap the object color instead of
    /// shifting the floor.
    pub parse_color_swap_share: f64,
    pub parse_floor_offsets: OffsetDist,
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::exact()
    }
}

impl NoiseProfile {
    /// Noise-free oracle.
    pub fn exact() -> Self {
        Self {
            or_false_positive_rate: 0.0,
            or_false_negative_rate: 0.0,
            floor_count_error_dist: OffsetDist::exact(),
            floor_count_min_fraction: 0.12,
            refusal_rate: 0.0,
            parse_error_rate: 0.0,
            parse_color_swap_share: 0.5,
            parse_floor_offsets: OffsetDist(vec![(-1, 0.5), (1, 0.5)]),
            seed: 0,
        }
    }

    /// Recognition error rate in line with a small open VLM.
    pub fn calibrated() -> Self {
        Self { or_false_positive_rate: 0.16, or_false_negative_rate: 0.05, ..Self::exact() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_exact(&self) -> bool {
        self.or_false_positive_rate == 0.0
            && self.or_false_negative_rate == 0.0
            && self.refusal_rate == 0.0
            && self.parse_error_rate == 0.0
            && self.floor_count_error_dist.0.iter().all(|&(k, w)| k == 0 || w == 0.0)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let rates = [
            ("or_false_positive_rate", self.or_false_positive_rate),
            ("or_false_negative_rate", self.or_false_negative_rate),
            ("refusal_rate", self.refusal_rate),
            ("parse_error_rate", self.parse_error_rate),
            ("parse_color_swap_share", self.parse_color_swap_share),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(PerceptionError::InvalidProfile(format!("{name} = {r} outside [0, 1]")));
            }
        }
        if !(self.floor_count_min_fraction >= 0.0 && self.floor_count_min_fraction.is_finite()) {
            return Err(PerceptionError::InvalidProfile("floor_count_min_fraction must be >= 0".into()));
        }
        self.floor_count_error_dist.validate().map_err(PerceptionError::InvalidProfile)?;
        self.parse_floor_offsets.validate().map_err(PerceptionError::InvalidProfile)?;
        Ok(())
    }

    /// Offset multiplier for a floor occupying `floor_fraction` of the image.
    pub fn resolution_multiplier(&self, floor_fraction: f64) -> i32 {
        if floor_fraction <= 0.0 {
            return 1;
        }
        ((self.floor_count_min_fraction / floor_fraction) - 1e-12).ceil().max(1.0) as i32
    }
}

/// Seeded uniform source. Each query kind draws a fixed number of values so
/// that answer sequences depend only on the seed and the query sequence.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn draw<const N: usize>(&mut self) -> [f64; N] {
        std::array::from_fn(|_| self.uniform())
    }
}
