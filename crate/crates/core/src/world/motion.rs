use serde::{Deserialize, Serialize};

use super::{DronePose, WindowRef, WorldError, WorldModel};
use crate::geometry::{segment_polygon_distance, wrap_angle, Vec2, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// Level flight along `bearing` for `distance` meters.
    Translate,
    /// Yaw +30 degrees in place.
    RotateLeft30,
    /// Approach maneuver toward a recognized window: turn to `bearing`,
    /// fly `distance` meters horizontally while changing altitude by `climb`.
    Approach,
    /// Vertical move by `climb` meters (floor localization).
    Climb,
    Stop,
}

/// One drone command. Headings follow the direction of travel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// World bearing in radians (translate and approach only).
    pub bearing: f64,
    pub distance: f64,
    #[serde(default)]
    pub climb: f64,
}

impl Action {
    pub fn translate(bearing: f64, distance: f64) -> Self {
        Self { kind: ActionKind::Translate, bearing: wrap_angle(bearing), distance, climb: 0.0 }
    }

    pub fn rotate_left_30() -> Self {
        Self { kind: ActionKind::RotateLeft30, bearing: 0.0, distance: 0.0, climb: 0.0 }
    }

    pub fn approach(bearing: f64, distance: f64, climb: f64) -> Self {
        Self { kind: ActionKind::Approach, bearing: wrap_angle(bearing), distance, climb }
    }

    pub fn climb(dz: f64) -> Self {
        Self { kind: ActionKind::Climb, bearing: 0.0, distance: 0.0, climb: dz }
    }

    pub fn stop() -> Self {
        Self { kind: ActionKind::Stop, bearing: 0.0, distance: 0.0, climb: 0.0 }
    }

    /// Length of the flown segment.
    pub fn path_length(&self) -> f64 {
        match self.kind {
            ActionKind::Translate => self.distance,
            ActionKind::Approach | ActionKind::Climb => self.distance.hypot(self.climb),
            ActionKind::RotateLeft30 | ActionKind::Stop => 0.0,
        }
    }
}

/// Kinematic limits enforced by [`apply_action`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    pub l_max: f64,
    pub safety_radius: f64,
}

impl Default for MotionLimits {
    fn default() -> Self {
        Self { l_max: 10.0, safety_radius: 0.5 }
    }
}

fn check_segment(world: &WorldModel, from: Vec3, to: Vec3, radius: f64) -> Result<(), WorldError> {
    let z_low = from.z.min(to.z);
    for (bi, b) in world.buildings.iter().enumerate() {
        if z_low > b.height() + radius {
            continue;
        }
        if segment_polygon_distance(from.xy(), to.xy(), &b.footprint) < radius {
            return Err(WorldError::Collision { building: bi, from, to });
        }
    }
    Ok(())
}

/// Applies one action. Translations are checked against every footprint
/// inflated by the safety radius; a hit is an episode-fatal collision.
pub fn apply_action(
    world: &WorldModel,
    pose: &DronePose,
    action: &Action,
    limits: &MotionLimits,
) -> Result<DronePose, WorldError> {
    let invalid = |m: &str| Err(WorldError::InvalidAction(m.to_string()));
    if !action.distance.is_finite() || !action.climb.is_finite() || !action.bearing.is_finite() {
        return invalid("non-finite action parameter");
    }
    let p = pose.position;
    match action.kind {
        ActionKind::Stop => Ok(*pose),
        ActionKind::RotateLeft30 => {
            if action.distance != 0.0 || action.climb != 0.0 {
                return invalid("rotation carries a translation");
            }
            Ok(DronePose::new(p, pose.yaw + std::f64::consts::FRAC_PI_6))
        }
        ActionKind::Translate | ActionKind::Approach => {
            if action.distance < 0.0 || action.distance > limits.l_max + 1e-9 {
                return invalid("distance outside [0, L_max]");
            }
            if action.kind == ActionKind::Translate && action.climb != 0.0 {
                return invalid("translation changes altitude");
            }
            let step = Vec2::from_angle(action.bearing) * action.distance;
            let to = Vec3::new(p.x + step.x, p.y + step.y, p.z + action.climb);
            if to.z < 0.0 {
                return invalid("altitude below ground");
            }
            check_segment(world, p, to, limits.safety_radius)?;
            Ok(DronePose::new(to, action.bearing))
        }
        ActionKind::Climb => {
            let to = Vec3::new(p.x, p.y, p.z + action.climb);
            if to.z < 0.0 {
                return invalid("altitude below ground");
            }
            check_segment(world, p, to, limits.safety_radius)?;
            Ok(DronePose::new(to, pose.yaw))
        }
    }
}

/// Delivery succeeds when the drone is within `radius` of the window's
/// standoff point.
pub fn check_success(pose: &DronePose, world: &WorldModel, target: WindowRef, radius: f64, standoff: f64) -> bool {
    pose.position.dist(world.standoff_point(target, standoff)) <= radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::test_support::{box_world, box_world_with_window};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    #[test]
    fn translate_kinematics() {
        let world = box_world(Vec2::new(50.0, 50.0), Vec2::new(60.0, 60.0), 10.0);
        let pose = DronePose::new(Vec3::new(0.0, 0.0, 12.0), 0.0);
        let next = apply_action(&world, &pose, &Action::translate(0.0, 5.0), &MotionLimits::default()).unwrap();
        assert_eq!(next.position, Vec3::new(5.0, 0.0, 12.0));
    }

    #[test]
    fn rotate_left_keeps_position() {
        let world = box_world(Vec2::new(50.0, 50.0), Vec2::new(60.0, 60.0), 10.0);
        let pose = DronePose::new(Vec3::new(1.0, 2.0, 3.0), 0.25);
        let next = apply_action(&world, &pose, &Action::rotate_left_30(), &MotionLimits::default()).unwrap();
        assert_eq!(next.position, pose.position);
        assert!((next.yaw - (0.25 + FRAC_PI_6)).abs() < 1e-12);
    }

    #[test]
    fn grazing_segment_collides() {
        // wall along y = 0; pass 0.2 m south of it
        let world = box_world(Vec2::new(-5.0, 0.0), Vec2::new(5.0, 10.0), 10.0);
        let pose = DronePose::new(Vec3::new(-8.0, -0.2, 3.0), 0.0);
        let r = apply_action(&world, &pose, &Action::translate(0.0, 10.0), &MotionLimits::default());
        assert!(matches!(r, Err(WorldError::Collision { building: 0, .. })));
    }

    #[test]
    fn over_limit_rejected() {
        let world = box_world(Vec2::new(50.0, 50.0), Vec2::new(60.0, 60.0), 10.0);
        let pose = DronePose::new(Vec3::new(0.0, 0.0, 3.0), 0.0);
        let r = apply_action(&world, &pose, &Action::translate(FRAC_PI_2, 10.5), &MotionLimits::default());
        assert!(matches!(r, Err(WorldError::InvalidAction(_))));
    }

    #[test]
    fn success_neighborhood() {
        let world = box_world_with_window(2.0, 1.5);
        let target = WindowRef { building: 0, window: 0 };
        let sp = world.standoff_point(target, 1.5);
        let at = DronePose::new(sp, 0.0);
        assert!(check_success(&at, &world, target, 3.0, 1.5));
        let off = DronePose::new(sp - Vec3::new(0.0, 3.0 + 1e-6, 0.0), 0.0);
        assert!(!check_success(&off, &world, target, 3.0, 1.5));
    }

    #[test]
    fn one_floor_below_fails() {
        // adjacent to the facade but a floor (3 m) lower, radius 2 m
        let world = box_world_with_window(2.0, 1.5);
        let target = WindowRef { building: 0, window: 0 };
        let sp = world.standoff_point(target, 1.5);
        let below = DronePose::new(sp - Vec3::new(0.0, 0.0, 3.0), FRAC_PI_2);
        let d = below.position.dist(sp);
        assert_eq!(d, 3.0);
        assert!(!check_success(&below, &world, target, 2.0, 1.5));
    }
}
