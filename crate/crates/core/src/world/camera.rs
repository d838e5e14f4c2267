use serde::{Deserialize, Serialize};

use super::DronePose;
use crate::geometry::{Vec2, Vec3};

/// One of the five rig cameras, numbered 1..=5 in rig order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct View(u8);

impl View {
    pub const FRONT: View = View(1);
    pub const FRONT_RIGHT: View = View(2);
    pub const RIGHT: View = View(3);
    pub const FRONT_LEFT: View = View(4);
    pub const LEFT: View = View(5);

    /// Rig order, which doubles as the tie-break preference.
    pub const ALL: [View; 5] = [View(1), View(2), View(3), View(4), View(5)];

    pub fn new(index: u8) -> Option<View> {
        (1..=5).contains(&index).then_some(View(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn slot(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for View {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        View::new(v).ok_or_else(|| format!("camera index {v} outside 1..=5"))
    }
}

impl From<View> for u8 {
    fn from(v: View) -> u8 {
        v.0
    }
}

/// Five level cameras at the drone position. Offsets are measured clockwise
/// from the heading, so `+90` looks to the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub yaw_offsets_deg: [f64; 5],
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            yaw_offsets_deg: [0.0, 45.0, 90.0, -45.0, -90.0],
            hfov_deg: 90.0,
            vfov_deg: 90.0,
            width: 128,
            height: 128,
            max_range: 100.0,
        }
    }
}

impl CameraRig {
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for i in 0..5 {
            for j in i + 1..5 {
                if self.yaw_offsets_deg[i] == self.yaw_offsets_deg[j] {
                    return Err("camera yaw offsets must be distinct".into());
                }
            }
        }
        if self.width < 16 || self.height < 16 {
            return Err(format!("resolution {}x{} below 16x16", self.width, self.height));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0 && self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            return Err("fields of view must lie in (0, 180) degrees".into());
        }
        if self.max_range <= 0.0 {
            return Err("max_range must be positive".into());
        }
        Ok(())
    }

    /// World yaw of a camera's optical axis.
    pub fn camera_yaw(&self, pose: &DronePose, view: View) -> f64 {
        pose.yaw - self.yaw_offsets_deg[view.slot()].to_radians()
    }

    pub fn camera(&self, pose: &DronePose, view: View) -> PinholeCamera {
        PinholeCamera::new(
            pose.position,
            self.camera_yaw(pose, view),
            self.hfov_deg,
            self.vfov_deg,
            self.width,
            self.height,
        )
    }
}

/// Level pinhole camera. Pixel `(i, j)` covers the continuous square
/// `[i, i+1) x [j, j+1)`; rows grow downward.
#[derive(Clone, Copy, Debug)]
pub struct PinholeCamera {
    pub origin: Vec3,
    pub yaw: f64,
    pub tan_h: f64,
    pub tan_v: f64,
    pub width: usize,
    pub height: usize,
    forward: Vec2,
    right: Vec2,
}

impl PinholeCamera {
    pub fn new(origin: Vec3, yaw: f64, hfov_deg: f64, vfov_deg: f64, width: usize, height: usize) -> Self {
        let forward = Vec2::from_angle(yaw);
        Self {
            origin,
            yaw,
            tan_h: (hfov_deg.to_radians() * 0.5).tan(),
            tan_v: (vfov_deg.to_radians() * 0.5).tan(),
            width,
            height,
            forward,
            right: Vec2::new(forward.y, -forward.x),
        }
    }

    /// Angle between neighboring columns at the image center, radians.
    pub fn pixel_pitch(&self) -> f64 {
        2.0 * self.tan_h / self.width as f64
    }

    pub fn forward(&self) -> Vec2 {
        self.forward
    }

    pub fn right(&self) -> Vec2 {
        self.right
    }

    /// Normalized horizontal image coordinate in [-1, 1] for a continuous
    /// column position.
    pub fn nx(&self, px: f64) -> f64 {
        px / self.width as f64 * 2.0 - 1.0
    }

    pub fn ny(&self, py: f64) -> f64 {
        1.0 - py / self.height as f64 * 2.0
    }

    /// Horizontal component of the ray through continuous column `px`
    /// (unit forward part, not normalized).
    pub fn column_dir(&self, px: f64) -> Vec2 {
        self.forward + self.right * (self.nx(px) * self.tan_h)
    }

    /// Vertical slope (dz per unit of forward travel) of row `py`.
    pub fn row_slope(&self, py: f64) -> f64 {
        self.ny(py) * self.tan_v
    }

    /// Unnormalized ray direction through a continuous image position. The
    /// forward component is 1.
    pub fn ray_at(&self, px: f64, py: f64) -> Vec3 {
        self.column_dir(px).with_z(self.row_slope(py))
    }

    pub fn pixel_ray(&self, i: usize, j: usize) -> Vec3 {
        self.ray_at(i as f64 + 0.5, j as f64 + 0.5)
    }

    /// World bearing of a continuous column position.
    pub fn column_bearing(&self, px: f64) -> f64 {
        self.column_dir(px).angle()
    }

    /// Continuous image coordinates of a world point, or `None` when the
    /// point is not in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let rel = p - self.origin;
        let depth = self.forward.dot(rel.xy());
        if depth <= 1e-9 {
            return None;
        }
        let x = self.right.dot(rel.xy()) / depth / self.tan_h;
        let y = rel.z / depth / self.tan_v;
        Some(((x + 1.0) * 0.5 * self.width as f64, (1.0 - y) * 0.5 * self.height as f64))
    }

    /// Forward (optical-axis) distance of a world point.
    pub fn forward_depth(&self, p: Vec3) -> f64 {
        self.forward.dot((p - self.origin).xy())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_camera_center_bearing() {
        let rig = CameraRig::default();
        let pose = DronePose::new(Vec3::new(0.0, 0.0, 10.0), 0.0);
        let cam = rig.camera(&pose, View::RIGHT);
        let b = cam.column_bearing(64.0);
        assert!((b + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn projection_inverts_ray() {
        let cam = PinholeCamera::new(Vec3::new(1.0, 2.0, 3.0), 0.7, 90.0, 60.0, 128, 96);
        let d = cam.ray_at(40.25, 70.5);
        let p = cam.origin + d * 7.0;
        let (u, v) = cam.project(p).unwrap();
        assert!((u - 40.25).abs() < 1e-9 && (v - 70.5).abs() < 1e-9);
    }

    #[test]
    fn rig_validation() {
        let mut rig = CameraRig::default();
        assert!(rig.validate().is_ok());
        rig.yaw_offsets_deg[4] = 90.0;
        assert!(rig.validate().is_err());
        let rig = CameraRig::default().with_resolution(8, 128);
        assert!(rig.validate().is_err());
    }
}
