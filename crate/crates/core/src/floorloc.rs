//! Floor localization: non-overlapping vertical waypoints, the interpolated
//! fine adjustment onto the target floor, building-box acquisition, and the
//! whole-building direct-count baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{Backend, BuildingBoxQuery, FloorCountAnswer, FloorQuery, PerceptionError, Sensors};
use crate::world::{
    apply_action, Action, DepthImage, DronePose, MotionLimits, PinholeCamera, PixelBox, View, WorldError,
};

#[derive(Debug, Error)]
pub enum FloorLocError {
    #[error("no facade straight ahead of the front camera")]
    NoFacade,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("floor count of zero leaves the interpolation undefined")]
pub struct DivisionUndefined;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WaypointStep {
    /// Fine adjustment to this height.
    Adjust(f64),
    /// Keep ascending to the next waypoint.
    Ascend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorLocStatus {
    Adjusted,
    /// The roof came into view before the count reached the target floor.
    Overshoot,
    /// Too many consecutive refusals, or an unusable count.
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloorLocConfig {
    pub max_refusals: u32,
    pub max_waypoints: u32,
    pub min_altitude: f64,
    /// Clearance kept below an estimated roof.
    pub roof_margin: f64,
    pub max_retreats: u32,
}

impl Default for FloorLocConfig {
    fn default() -> Self {
        Self { max_refusals: 3, max_waypoints: 64, min_altitude: 1.0, roof_margin: 0.5, max_retreats: 30 }
    }
}

/// One floor-count query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorQueryRecord {
    pub waypoint: u32,
    pub altitude: f64,
    pub answer: FloorCountAnswer,
    /// Geometric count the oracle would give without noise.
    pub floors_true: Option<u32>,
    pub f_cur: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorLocResult {
    pub status: FloorLocStatus,
    pub h_final: f64,
    pub bbox_buil: PixelBox,
    pub queries_used: u32,
    /// Band tops h_1, h_2, ... that were visited.
    pub waypoints: Vec<f64>,
    pub spacing: f64,
    pub standoff: f64,
    pub queries: Vec<FloorQueryRecord>,
    /// Motion executed, in order; replaying it from the start pose reaches
    /// `pose`.
    pub actions: Vec<Action>,
    pub pose: DronePose,
}

/// Vertical facade extent one level view covers at `standoff` meters.
pub fn next_waypoint_spacing(vfov_deg: f64, standoff: f64) -> f64 {
    2.0 * standoff * (vfov_deg.to_radians() * 0.5).tan()
}

/// Waypoint update: interpolate inside the band `[h_prev, h_i]` once the
/// running count reaches the target, otherwise ascend.
pub fn interpolate_floor_height(
    h_prev: f64,
    h_i: f64,
    f_new: u32,
    f_cur: u32,
    f_tar: u32,
) -> Result<WaypointStep, DivisionUndefined> {
    if f_new == 0 {
        return Err(DivisionUndefined);
    }
    if f_cur < f_tar {
        return Ok(WaypointStep::Ascend);
    }
    let over = f64::from(f_cur - f_tar);
    Ok(WaypointStep::Adjust(h_i - (h_i - h_prev) / f64::from(f_new) * over))
}

/// |h_final - h_tar| above the threshold counts as a localization failure.
pub fn fl_failed(h_final: f64, h_tar_true: f64, threshold: f64) -> bool {
    (h_final - h_tar_true).abs() > threshold
}

pub const FL_FAIL_THRESHOLD: f64 = 7.0;

/// Mid-height of the target floor.
pub fn target_height(f_tar: u32, floor_height: f64) -> f64 {
    (f64::from(f_tar) - 0.5) * floor_height
}

/// Facade geometry read off the front camera's center column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacadeProfile {
    /// Horizontal distance to the facade.
    pub distance: f64,
    /// Height of the facade top when it is inside the view.
    pub roof: Option<f64>,
}

/// Reads the facade distance on the center column (middle row, or the first
/// hit below it) and the topmost row that still hits the same facade. `None` when nothing is straight ahead.
pub fn facade_profile(depth: &DepthImage, cam: &PinholeCamera) -> Option<FacadeProfile> {
    let col = depth.width / 2;
    let horiz = |j: usize| -> Option<f64> {
        if !depth.is_hit(col, j) {
            return None;
        }
        let ray = cam.pixel_ray(col, j);
        Some(depth.get(col, j) * ray.xy().norm() / ray.norm())
    };
    // rows below the middle still see the facade once the camera is above
    // the roof
    let distance = (depth.height / 2..depth.height).find_map(horiz)?;
    let tol = 0.05 + 0.01 * distance;
    let top = (0..depth.height).find(|&j| horiz(j).is_some_and(|h| (h - distance).abs() <= tol))?;
    let roof = (top > 0).then(|| cam.origin.z + distance * cam.row_slope(top as f64));
    Some(FacadeProfile { distance, roof })
}

struct Flight<'a> {
    limits: &'a MotionLimits,
    sensors: Sensors<'a>,
    pose: DronePose,
    actions: Vec<Action>,
}

impl Flight<'_> {
    fn act(&mut self, a: Action) -> Result<(), WorldError> {
        self.pose = apply_action(self.sensors.world, &self.pose, &a, self.limits)?;
        self.actions.push(a);
        Ok(())
    }

    fn climb_to(&mut self, z: f64) -> Result<(), WorldError> {
        let dz = z - self.pose.position.z;
        if dz != 0.0 {
            self.act(Action::climb(dz))?;
        }
        Ok(())
    }

    fn camera(&self) -> PinholeCamera {
        self.sensors.rig.camera(&self.pose, View::FRONT)
    }
}

fn acquire_box<B: Backend + ?Sized>(flight: &Flight<'_>, backend: &mut B) -> Result<PixelBox, FloorLocError> {
    let (depth, band) = flight.sensors.floor_frame(&flight.pose)?;
    let truth = match band {
        Some(b) => flight.sensors.building_box(&flight.pose, b.building)?,
        None => None,
    };
    let full = PixelBox { x_min: 0, x_max: depth.width - 1, y_min: 0, y_max: depth.height - 1 };
    Ok(backend.building_box(BuildingBoxQuery { depth: &depth, truth })?.unwrap_or(full))
}

/// Ascends the facade in front of `start` and settles at the target floor.
pub fn localize_floor<B: Backend + ?Sized>(
    sensors: Sensors<'_>,
    start: &DronePose,
    f_tar: u32,
    backend: &mut B,
    cfg: &FloorLocConfig,
    limits: &MotionLimits,
) -> Result<FloorLocResult, FloorLocError> {
    let mut flight = Flight { limits, sensors, pose: *start, actions: Vec::new() };
    let depth = sensors.depth(start, View::FRONT)?;
    let first = facade_profile(&depth, &flight.camera()).ok_or(FloorLocError::NoFacade)?;
    let standoff = first.distance;
    let spacing = next_waypoint_spacing(sensors.rig.vfov_deg, standoff);

    let mut f_cur: u32 = 0;
    let mut queries: Vec<FloorQueryRecord> = Vec::new();
    let mut waypoints = Vec::new();
    let mut roof_seen: Option<f64> = first.roof;
    let mut status = FloorLocStatus::Overshoot;
    let mut h_final = None;

    'waypoints: for i in 1..=cfg.max_waypoints {
        let h_prev = spacing * f64::from(i - 1);
        let h_i = spacing * f64::from(i);
        if roof_seen.is_some_and(|r| r <= h_prev) {
            break;
        }
        flight.climb_to(h_prev + spacing * 0.5)?;
        waypoints.push(h_i);
        let (depth, band) = sensors.floor_frame(&flight.pose)?;
        let profile = facade_profile(&depth, &flight.camera());
        let Some(profile) = profile else {
            break;
        };
        if profile.roof.is_some() {
            roof_seen = profile.roof;
        }
        let h_top = profile.roof.map_or(h_i, |r| r.min(h_i));

        let mut refusals = 0;
        let f_new = loop {
            let answer = backend.count_floors(FloorQuery { depth: &depth, band: band.as_ref() })?;
            if let Some(n) = answer.floors_visible {
                f_cur += n;
            }
            queries.push(FloorQueryRecord {
                waypoint: i,
                altitude: flight.pose.position.z,
                answer,
                floors_true: band.as_ref().map(|b| b.floors_visible),
                f_cur,
            });
            match answer.floors_visible {
                Some(n) => break n,
                None => {
                    refusals += 1;
                    if refusals >= cfg.max_refusals {
                        status = FloorLocStatus::Aborted;
                        break 'waypoints;
                    }
                }
            }
        };

        match interpolate_floor_height(h_prev, h_top, f_new, f_cur, f_tar) {
            Ok(WaypointStep::Adjust(h)) => {
                status = FloorLocStatus::Adjusted;
                h_final = Some(h);
                break;
            }
            Ok(WaypointStep::Ascend) | Err(DivisionUndefined) => {
                if profile.roof.is_some_and(|r| r <= h_i) {
                    break;
                }
            }
        }
    }

    let queries_used;
    if status == FloorLocStatus::Aborted {
        queries_used = queries.len() as u32;
        return Ok(FloorLocResult {
            status,
            h_final: flight.pose.position.z,
            bbox_buil: PixelBox { x_min: 0, x_max: sensors.rig.width - 1, y_min: 0, y_max: sensors.rig.height - 1 },
            queries_used,
            waypoints,
            spacing,
            standoff,
            queries,
            actions: flight.actions,
            pose: flight.pose,
        });
    }

    let ceiling = roof_seen.map_or(f64::INFINITY, |r| r - cfg.roof_margin);
    let h = h_final.unwrap_or(ceiling).min(ceiling).max(cfg.min_altitude);
    if !h.is_finite() {
        return Ok(FloorLocResult {
            status: FloorLocStatus::Aborted,
            h_final: flight.pose.position.z,
            bbox_buil: PixelBox { x_min: 0, x_max: sensors.rig.width - 1, y_min: 0, y_max: sensors.rig.height - 1 },
            queries_used: queries.len() as u32,
            waypoints,
            spacing,
            standoff,
            queries,
            actions: flight.actions,
            pose: flight.pose,
        });
    }
    flight.climb_to(h)?;
    let bbox_buil = acquire_box(&flight, backend)?;
    queries_used = queries.len() as u32 + 1;
    Ok(FloorLocResult {
        status,
        h_final: h,
        bbox_buil,
        queries_used,
        waypoints,
        spacing,
        standoff,
        queries,
        actions: flight.actions,
        pose: flight.pose,
    })
}

/// Height guess of the direct-count baseline: the target floor's share of the
/// estimated building height, kept below the roof.
pub fn direct_count_formula(height_est: f64, f_total_est: u32, f_tar: u32) -> f64 {
    let h = height_est * (f64::from(f_tar) - 0.5) / f64::from(f_total_est.max(1));
    h.min(height_est)
}

/// Building height implied by the top of its pixel box at a known standoff.
pub fn height_from_box(cam: &PinholeCamera, standoff: f64, y_min: usize) -> f64 {
    cam.origin.z + standoff * cam.row_slope(y_min as f64)
}

/// Direct-count baseline: back off until the whole facade fits one view, ask
/// for the total floor count once, and scale the estimated height.
pub fn direct_count_height<B: Backend + ?Sized>(
    sensors: Sensors<'_>,
    start: &DronePose,
    f_tar: u32,
    backend: &mut B,
    cfg: &FloorLocConfig,
    limits: &MotionLimits,
) -> Result<FloorLocResult, FloorLocError> {
    let mut flight = Flight { limits, sensors, pose: *start, actions: Vec::new() };
    let depth = sensors.depth(start, View::FRONT)?;
    let standoff = facade_profile(&depth, &flight.camera()).ok_or(FloorLocError::NoFacade)?.distance;
    let heading = start.yaw;
    let mut retreated = 0.0;
    let mut retreats = 0;
    loop {
        let cam = flight.camera();
        let depth = sensors.depth(&flight.pose, View::FRONT)?;
        let profile = facade_profile(&depth, &cam).ok_or(FloorLocError::NoFacade)?;
        if profile.roof.is_some() || retreats >= cfg.max_retreats {
            break;
        }
        flight.act(Action::translate(heading + std::f64::consts::PI, limits.l_max))?;
        retreated += limits.l_max;
        retreats += 1;
        for _ in 0..6 {
            flight.act(Action::rotate_left_30())?;
        }
    }

    let (depth, band) = sensors.floor_frame(&flight.pose)?;
    let cam = flight.camera();
    let far = facade_profile(&depth, &cam).ok_or(FloorLocError::NoFacade)?;
    let truth_box = match band.as_ref() {
        Some(b) => sensors.building_box(&flight.pose, b.building)?,
        None => None,
    };
    let answer = backend.count_floors(FloorQuery { depth: &depth, band: band.as_ref() })?;
    let bbox = backend.building_box(BuildingBoxQuery { depth: &depth, truth: truth_box })?;
    let queries = vec![FloorQueryRecord {
        waypoint: 1,
        altitude: flight.pose.position.z,
        answer,
        floors_true: band.as_ref().map(|b| b.floors_visible),
        f_cur: answer.floors_visible.unwrap_or(0),
    }];

    let estimate = match (answer.floors_visible, bbox) {
        (Some(n), Some(b)) if n > 0 => {
            let height_est = height_from_box(&cam, far.distance, b.y_min);
            let h = direct_count_formula(height_est, n, f_tar);
            Some(h.min(height_est - cfg.roof_margin).max(cfg.min_altitude))
        }
        _ => None,
    };

    if retreated > 0.0 {
        let mut left = retreated;
        while left > 1e-9 {
            let step = left.min(limits.l_max);
            flight.act(Action::translate(heading, step))?;
            left -= step;
        }
    }

    let Some(h) = estimate else {
        return Ok(FloorLocResult {
            status: FloorLocStatus::Aborted,
            h_final: flight.pose.position.z,
            bbox_buil: PixelBox { x_min: 0, x_max: sensors.rig.width - 1, y_min: 0, y_max: sensors.rig.height - 1 },
            queries_used: 2,
            waypoints: Vec::new(),
            spacing: 0.0,
            standoff,
            queries,
            actions: flight.actions,
            pose: flight.pose,
        });
    };
    flight.climb_to(h)?;
    let bbox_buil = acquire_box(&flight, backend)?;
    Ok(FloorLocResult {
        status: FloorLocStatus::Adjusted,
        h_final: h,
        bbox_buil,
        queries_used: 3,
        waypoints: Vec::new(),
        spacing: 0.0,
        standoff,
        queries,
        actions: flight.actions,
        pose: flight.pose,
    })
}
