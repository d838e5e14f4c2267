use serde::{Deserialize, Serialize};

use super::{CameraRig, DronePose, PinholeCamera, View, WorldError, WorldModel};
use crate::geometry::{ray_convex_interval, Vec2, Vec3};

/// Row-major range image. Every sample lies in `(0, max_range]`; pixels
/// whose ray hits nothing within range hold `max_range` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, max_range: f64, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "depth buffer size mismatch");
        Self { width, height, max_range, data }
    }

    pub fn filled(width: usize, height: usize, max_range: f64, value: f64) -> Self {
        Self::new(width, height, max_range, vec![value; width * height])
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn is_hit(&self, col: usize, row: usize) -> bool {
        self.get(col, row) < self.max_range
    }
}

/// Entry parameter of the ray `origin + t * (h, slope)` into the prism
/// `[t_in, t_out] x [0, height]`, if any.
fn clip_vertical(t_in: f64, t_out: f64, z0: f64, slope: f64, height: f64) -> Option<f64> {
    let mut lo = t_in.max(0.0);
    let mut hi = t_out;
    if slope > 0.0 {
        hi = hi.min((height - z0) / slope);
        lo = lo.max(-z0 / slope);
    } else if slope < 0.0 {
        lo = lo.max((height - z0) / slope);
        hi = hi.min(z0 / -slope);
    } else if !(0.0..=height).contains(&z0) {
        return None;
    }
    (lo <= hi).then_some(lo)
}

/// First building surface hit by `origin + t * dir`, as `(t, building)`.
/// `t` is in units of `dir`.
pub fn cast_ray(world: &WorldModel, origin: Vec3, dir: Vec3) -> Option<(f64, usize)> {
    let h = dir.xy();
    let mut best: Option<(f64, usize)> = None;
    for (bi, b) in world.buildings.iter().enumerate() {
        let Some((t_in, t_out)) = ray_convex_interval(origin.xy(), h, &b.footprint) else {
            continue;
        };
        if t_out < 0.0 {
            continue;
        }
        if let Some(t) = clip_vertical(t_in, t_out, origin.z, dir.z, b.height()) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, bi));
            }
        }
    }
    best
}

fn check_outside(world: &WorldModel, pose: &DronePose) -> Result<(), WorldError> {
    match world.building_containing(pose.position) {
        Some(b) => Err(WorldError::PoseInsideGeometry(pose.position, b)),
        None => Ok(()),
    }
}

/// Range image of one rig camera by per-pixel ray casting against the
/// extruded footprints. The ground plane is not rendered.
pub fn render_depth(
    world: &WorldModel,
    pose: &DronePose,
    rig: &CameraRig,
    view: View,
) -> Result<DepthImage, WorldError> {
    check_outside(world, pose)?;
    let cam = rig.camera(pose, view);
    Ok(render_with(world, &cam, rig.max_range))
}

pub(crate) fn render_with(world: &WorldModel, cam: &PinholeCamera, max_range: f64) -> DepthImage {
    let (w, h) = (cam.width, cam.height);
    let mut img = DepthImage::filled(w, h, max_range, max_range);
    let slopes: Vec<f64> = (0..h).map(|j| cam.row_slope(j as f64 + 0.5)).collect();
    let mut spans: Vec<(f64, f64, f64)> = Vec::with_capacity(world.buildings.len());
    for i in 0..w {
        let dir: Vec2 = cam.column_dir(i as f64 + 0.5);
        spans.clear();
        for b in &world.buildings {
            if let Some((t_in, t_out)) = ray_convex_interval(cam.origin.xy(), dir, &b.footprint) {
                if t_out >= 0.0 {
                    spans.push((t_in, t_out, b.height()));
                }
            }
        }
        if spans.is_empty() {
            continue;
        }
        let hnorm2 = dir.dot(dir);
        for (j, &slope) in slopes.iter().enumerate() {
            let best = spans
                .iter()
                .filter_map(|&(t_in, t_out, ht)| clip_vertical(t_in, t_out, cam.origin.z, slope, ht))
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                let range = best * (hnorm2 + slope * slope).sqrt();
                if range < max_range {
                    img.set(i, j, range);
                }
            }
        }
    }
    img
}

/// Range along the ray through a continuous image position, clamped to
/// `max_range`.
pub fn sample_range(world: &WorldModel, cam: &PinholeCamera, px: f64, py: f64, max_range: f64) -> f64 {
    let dir = cam.ray_at(px, py);
    match cast_ray(world, cam.origin, dir) {
        Some((t, _)) => (t * dir.norm()).min(max_range),
        None => max_range,
    }
}
