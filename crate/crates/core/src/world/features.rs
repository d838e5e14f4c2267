use serde::{Deserialize, Serialize};

use super::render::cast_ray;
use super::{CameraRig, DronePose, ObjectTag, View, WorldError, WorldModel};
use crate::geometry::{ray_convex_interval, Vec3};

/// Inclusive pixel rectangle, serialized as `[x_min, x_max, y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct PixelBox {
    pub x_min: usize,
    pub x_max: usize,
    pub y_min: usize,
    pub y_max: usize,
}

impl From<[usize; 4]> for PixelBox {
    fn from(a: [usize; 4]) -> Self {
        Self { x_min: a[0], x_max: a[1], y_min: a[2], y_max: a[3] }
    }
}

impl From<PixelBox> for [usize; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x_min, b.x_max, b.y_min, b.y_max]
    }
}

impl PixelBox {
    /// Rounds continuous extents with floor for the minimum and ceil - 1 for
    /// the maximum, clamped to the image. `None` when the result is empty.
    pub fn from_extents(u: (f64, f64), v: (f64, f64), width: usize, height: usize) -> Option<Self> {
        let round_lo = |x: f64| x.floor().max(0.0);
        let round_hi = |x: f64, n: usize| (x.ceil() - 1.0).min(n as f64 - 1.0);
        let x_min = round_lo(u.0);
        let x_max = round_hi(u.1, width);
        let y_min = round_lo(v.0);
        let y_max = round_hi(v.1, height);
        if x_min >= x_max || y_min >= y_max {
            return None;
        }
        Some(Self { x_min: x_min as usize, x_max: x_max as usize, y_min: y_min as usize, y_max: y_max as usize })
    }

    /// Continuous center of the covered pixels.
    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max + 1) as f64 * 0.5, (self.y_min + self.y_max + 1) as f64 * 0.5)
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max && self.x_max < width && self.y_max < height
    }

    pub fn iou(&self, o: &PixelBox) -> f64 {
        let ix = (self.x_max.min(o.x_max) + 1).saturating_sub(self.x_min.max(o.x_min));
        let iy = (self.y_max.min(o.y_max) + 1).saturating_sub(self.y_min.max(o.y_min));
        let inter = (ix * iy) as f64;
        let area = |b: &PixelBox| (b.width() * b.height()) as f64;
        inter / (area(self) + area(o) - inter)
    }
}

/// Ground-truth annotation of one window seen by one camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleFeature {
    pub window_id: String,
    pub pixel_box: PixelBox,
    pub floor: u32,
    pub decorations: Vec<ObjectTag>,
    pub occluded_fraction: f64,
}

const OCCLUSION_TOLERANCE: f64 = 1e-6;

/// Windows whose center projects inside the frustum and which are not fully
/// occluded, sorted by window id. Occlusion is sampled at the center and the
/// four (slightly inset) corners.
pub fn visible_features(
    world: &WorldModel,
    pose: &DronePose,
    rig: &CameraRig,
    view: View,
) -> Result<Vec<VisibleFeature>, WorldError> {
    if let Some(b) = world.building_containing(pose.position) {
        return Err(WorldError::PoseInsideGeometry(pose.position, b));
    }
    let cam = rig.camera(pose, view);
    let (w_px, h_px) = (cam.width as f64, cam.height as f64);
    let mut out = Vec::new();
    for b in &world.buildings {
        for win in &b.windows {
            let normal = b.outward_normal(win.facade_index);
            if normal.dot(cam.origin.xy() - win.center.xy()) <= 0.0 {
                continue;
            }
            let Some((u, v)) = cam.project(win.center) else { continue };
            if !(0.0..w_px).contains(&u) || !(0.0..h_px).contains(&v) {
                continue;
            }
            let (fa, fb) = b.facade(win.facade_index);
            let along = (fb - fa).normalized();
            let half_w = along.with_z(0.0) * (win.extent.0 * 0.5);
            let half_h = Vec3::new(0.0, 0.0, win.extent.1 * 0.5);
            let corners = [
                win.center - half_w - half_h,
                win.center + half_w - half_h,
                win.center + half_w + half_h,
                win.center - half_w + half_h,
            ];
            let mut us = (f64::INFINITY, f64::NEG_INFINITY);
            let mut vs = (f64::INFINITY, f64::NEG_INFINITY);
            let mut behind = false;
            for c in &corners {
                match cam.project(*c) {
                    Some((cu, cv)) => {
                        us = (us.0.min(cu), us.1.max(cu));
                        vs = (vs.0.min(cv), vs.1.max(cv));
                    }
                    None => behind = true,
                }
            }
            if behind {
                continue;
            }
            let Some(pixel_box) = PixelBox::from_extents(us, vs, cam.width, cam.height) else {
                continue;
            };
            let samples =
                std::iter::once(win.center).chain(corners.iter().map(|c| win.center + (*c - win.center) * 0.98));
            let mut blocked = 0usize;
            for q in samples {
                let dir = q - cam.origin;
                if let Some((t, _)) = cast_ray(world, cam.origin, dir) {
                    if t < 1.0 - OCCLUSION_TOLERANCE {
                        blocked += 1;
                    }
                }
            }
            if blocked == 5 {
                continue;
            }
            out.push(VisibleFeature {
                window_id: win.id.clone(),
                pixel_box,
                floor: win.floor,
                decorations: win.decorations.clone(),
                occluded_fraction: blocked as f64 / 5.0,
            });
        }
    }
    out.sort_by(|a, b| a.window_id.cmp(&b.window_id));
    Ok(out)
}

/// Tight pixel box of a building's projected silhouette, clamped to the
/// image. Occlusion by other buildings is ignored.
pub fn building_pixel_box(
    world: &WorldModel,
    pose: &DronePose,
    rig: &CameraRig,
    view: View,
    building: usize,
) -> Result<PixelBox, WorldError> {
    const NEAR: f64 = 1e-6;
    let b = world.buildings.get(building).ok_or_else(|| WorldError::Invalid(format!("no building {building}")))?;
    let cam = rig.camera(pose, view);
    let h = b.height();
    let n = b.footprint.len();
    let mut edges: Vec<(Vec3, Vec3)> = Vec::with_capacity(3 * n);
    for i in 0..n {
        let a = b.footprint[i];
        let c = b.footprint[(i + 1) % n];
        edges.push((a.with_z(0.0), c.with_z(0.0)));
        edges.push((a.with_z(h), c.with_z(h)));
        edges.push((a.with_z(0.0), a.with_z(h)));
    }
    let mut us = (f64::INFINITY, f64::NEG_INFINITY);
    let mut vs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for (p, q) in edges {
        let (dp, dq) = (cam.forward_depth(p), cam.forward_depth(q));
        if dp < NEAR && dq < NEAR {
            continue;
        }
        let clip = |inside: Vec3, outside: Vec3, di: f64, dout: f64| {
            let t = (di - NEAR) / (di - dout);
            inside + (outside - inside) * t
        };
        let (p, q) = match (dp >= NEAR, dq >= NEAR) {
            (true, true) => (p, q),
            (true, false) => (p, clip(p, q, dp, dq)),
            (false, true) => (clip(q, p, dq, dp), q),
            (false, false) => unreachable!(),
        };
        for pt in [p, q] {
            if let Some((u, v)) = cam.project(pt) {
                any = true;
                us = (us.0.min(u), us.1.max(u));
                vs = (vs.0.min(v), vs.1.max(v));
            }
        }
    }
    let (w_px, h_px) = (cam.width as f64, cam.height as f64);
    if !any || us.1 <= 0.0 || us.0 >= w_px || vs.1 <= 0.0 || vs.0 >= h_px {
        return Err(WorldError::NotInView(building));
    }
    PixelBox::from_extents(us, vs, cam.width, cam.height).ok_or(WorldError::NotInView(building))
}

/// Geometric floor-count annotation of the building straight ahead of a
/// camera: floors whose mid-height lies in the vertical band the frustum
/// covers at the facade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorBand {
    pub building: usize,
    /// Horizontal distance along the optical axis to the facade.
    pub distance: f64,
    pub lo: f64,
    pub hi: f64,
    pub floors_visible: u32,
    /// Height of one floor as a fraction of the image height.
    pub floor_fraction: f64,
    pub total_floors: u32,
}

pub fn floor_band(world: &WorldModel, pose: &DronePose, rig: &CameraRig, view: View) -> Result<FloorBand, WorldError> {
    let cam = rig.camera(pose, view);
    let axis = cam.forward();
    let mut best: Option<(f64, usize)> = None;
    for (bi, b) in world.buildings.iter().enumerate() {
        if let Some((t_in, t_out)) = ray_convex_interval(cam.origin.xy(), axis, &b.footprint) {
            if t_out >= 0.0 && t_in >= 0.0 && best.is_none_or(|(t, _)| t_in < t) {
                best = Some((t_in, bi));
            }
        }
    }
    let (distance, building) = best.ok_or(WorldError::NoBuildingInView)?;
    let b = &world.buildings[building];
    let half = distance * cam.tan_v;
    let (lo, hi) = (cam.origin.z - half, cam.origin.z + half);
    let floors_visible = (1..=b.num_floors)
        .filter(|&k| {
            let mid = b.floor_mid_height(k);
            lo < mid && mid <= hi
        })
        .count() as u32;
    Ok(FloorBand {
        building,
        distance,
        lo,
        hi,
        floors_visible,
        floor_fraction: b.floor_height / (2.0 * half),
        total_floors: b.num_floors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::world::test_support::{box_world, box_world_with_window};

    fn facing_north(x: f64, y: f64, z: f64) -> DronePose {
        DronePose::new(Vec3::new(x, y, z), std::f64::consts::FRAC_PI_2)
    }

    #[test]
    fn dead_center_window_box() {
        // 2 m wide window centered on the optical axis at 10 m
        let world = box_world_with_window(2.0, 1.5);
        let pose = facing_north(0.0, -10.0, 12.0);
        let feats = visible_features(&world, &pose, &CameraRig::default(), View::FRONT).unwrap();
        assert_eq!(feats.len(), 1);
        let b = feats[0].pixel_box;
        // edges at 64 -+ 6.4 px: floor(57.6) = 57, ceil(70.4) - 1 = 70
        assert_eq!((b.x_min, b.x_max), (57, 70));
        assert_eq!(feats[0].occluded_fraction, 0.0);
    }

    #[test]
    fn window_behind_camera_absent() {
        let world = box_world_with_window(2.0, 1.5);
        let pose = DronePose::new(Vec3::new(0.0, -10.0, 12.0), -std::f64::consts::FRAC_PI_2);
        let feats = visible_features(&world, &pose, &CameraRig::default(), View::FRONT).unwrap();
        assert!(feats.is_empty());
    }

    #[test]
    fn full_facade_box_is_clamped() {
        let world = box_world(Vec2::new(-50.0, 0.0), Vec2::new(50.0, 20.0), 60.0);
        let pose = facing_north(0.0, -10.0, 12.0);
        let b = building_pixel_box(&world, &pose, &CameraRig::default(), View::FRONT, 0).unwrap();
        assert_eq!(<[usize; 4]>::from(b), [0, 127, 0, 127]);
    }

    #[test]
    fn building_out_of_view() {
        let world = box_world(Vec2::new(-5.0, 0.0), Vec2::new(5.0, 10.0), 10.0);
        let pose = DronePose::new(Vec3::new(0.0, -10.0, 5.0), -std::f64::consts::FRAC_PI_2);
        assert!(matches!(
            building_pixel_box(&world, &pose, &CameraRig::default(), View::FRONT, 0),
            Err(WorldError::NotInView(0))
        ));
    }

    #[test]
    fn floor_band_counts_mid_heights() {
        // 10 floors of 3 m; camera at 12 m, 6 m from the facade: band [6, 18]
        // holds floors 3..=6 (mids 7.5 .. 16.5).
        let mut world = box_world(Vec2::new(-50.0, 0.0), Vec2::new(50.0, 20.0), 30.0);
        world.buildings[0].num_floors = 10;
        world.buildings[0].floor_height = 3.0;
        let band = floor_band(&world, &facing_north(0.0, -6.0, 12.0), &CameraRig::default(), View::FRONT).unwrap();
        assert_eq!(band.floors_visible, 4);
        assert!((band.distance - 6.0).abs() < 1e-12);
    }
}
