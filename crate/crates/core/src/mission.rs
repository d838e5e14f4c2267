//! Episode runner: request understanding, floor localization, then
//! explore/approach steps under a step budget. Every decision lands in a
//! line-delimited JSON trace that is enough to recompute the outcome.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explore::{
    approach_target, choose_viewpoint, decide_action, mark_distances, mark_points, obstacle_points, ExploreParams,
    Selection, ViewpointStrategy,
};
use crate::floorloc::{
    direct_count_height, localize_floor, FloorLocConfig, FloorLocError, FloorLocResult, FloorLocStatus,
};
use crate::geometry::{point_segment_distance, Vec2, Vec3};
use crate::metrics::shortest_path_length;
use crate::perception::{
    Backend, ChoiceQuery, PerceptionError, RecognitionAnswer, RecognitionQuery, RequestInterpretation, RequestQuery,
    Sensors, ViewObservation,
};
use crate::tasks::{TaskError, TaskSpec};
use crate::world::{
    apply_action, check_success, Action, ActionKind, Building, CameraRig, DronePose, MotionLimits, PixelBox,
    WorldError, WorldModel,
};

pub const TRACE_SCHEMA: &str = "vld-trace/1";

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("perception failure")]
    Perception(#[from] PerceptionError),
    #[error("world error")]
    World(#[from] WorldError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    BudgetExhausted,
    Collision,
    FloorlocAbort,
    Misdelivery,
}

impl Outcome {
    pub const ALL: [Outcome; 5] =
        [Outcome::Success, Outcome::BudgetExhausted, Outcome::Collision, Outcome::FloorlocAbort, Outcome::Misdelivery];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::BudgetExhausted => "budget_exhausted",
            Outcome::Collision => "collision",
            Outcome::FloorlocAbort => "floorloc_abort",
            Outcome::Misdelivery => "misdelivery",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Understand,
    Ascend,
    Explore,
    Approach,
    Done,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorLocMode {
    #[default]
    Ours,
    DirectCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceMode {
    /// Ask the backend which marked point to fly to.
    #[default]
    Backend,
    /// Always the middle point.
    CenterOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub step_budget: u32,
    pub success_radius: f64,
    pub explore: ExploreParams,
    pub floorloc: FloorLocConfig,
    pub floorloc_mode: FloorLocMode,
    pub viewpoint: ViewpointStrategy,
    pub choice: ChoiceMode,
    /// Range within which a facade counts as seen, for the choice
    /// annotation.
    pub facade_view_range: f64,
    /// Distance from the footprint the choice annotation tolerates without
    /// penalty.
    pub orbit_distance: f64,
    /// Score lost per meter beyond `orbit_distance`.
    pub drift_penalty: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            step_budget: 30,
            success_radius: 3.0,
            explore: ExploreParams::default(),
            floorloc: FloorLocConfig::default(),
            floorloc_mode: FloorLocMode::Ours,
            viewpoint: ViewpointStrategy::Ours,
            choice: ChoiceMode::Backend,
            facade_view_range: 25.0,
            orbit_distance: 12.0,
            drift_penalty: 0.0,
        }
    }
}

impl MissionConfig {
    pub fn limits(&self) -> MotionLimits {
        MotionLimits { l_max: self.explore.l_max, safety_radius: self.explore.safety_radius }
    }
}

/// Live state of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct MissionState {
    pub phase: Phase,
    pub step: u32,
    pub pose: DronePose,
    pub interpretation: Option<RequestInterpretation>,
    pub floor_result: Option<FloorLocResult>,
}

/// A positive recognition answer and whether it named the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub window_id: Option<String>,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub task_id: String,
    pub task: TaskSpec,
    pub config: MissionConfig,
    pub seed: u64,
    #[serde(default)]
    pub backend: String,
    /// Effective run configuration, filled in by the caller.
    #[serde(default)]
    pub run: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnderstandRecord {
    pub interpretation: Option<RequestInterpretation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscendRecord {
    pub mode: FloorLocMode,
    /// Mid-height of the true target floor.
    pub h_target: f64,
    pub result: Option<FloorLocResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub collided: bool,
}

impl AscendRecord {
    pub fn h_final(&self) -> Option<f64> {
        self.result.as_ref().filter(|r| r.status != FloorLocStatus::Aborted).map(|r| r.h_final)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub phase: Phase,
    pub pose: DronePose,
    pub recognition: RecognitionAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<Claim>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<[usize; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<[f64; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<[f64; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Actions sent this step. With `collided`, the last one hit a building
    /// and was not executed.
    pub actions: Vec<Action>,
    #[serde(default)]
    pub collided: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub outcome: Outcome,
    pub steps_used: u32,
    pub path_length: f64,
    pub shortest_path: f64,
    pub final_pose: DronePose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceRecord {
    Header(TraceHeader),
    Understand(UnderstandRecord),
    Ascend(AscendRecord),
    Step(StepRecord),
    Footer(TraceFooter),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub understand: UnderstandRecord,
    pub ascend: Option<AscendRecord>,
    pub steps: Vec<StepRecord>,
    pub footer: TraceFooter,
}

impl EpisodeTrace {
    pub fn outcome(&self) -> Outcome {
        self.footer.outcome
    }

    pub fn claims(&self) -> impl Iterator<Item = &Claim> {
        self.steps.iter().filter_map(|s| s.claim.as_ref())
    }

    /// Every executed action in order, floor localization first.
    pub fn executed_actions(&self) -> Vec<Action> {
        let mut out: Vec<Action> =
            self.ascend.iter().filter_map(|a| a.result.as_ref()).flat_map(|r| r.actions.iter().copied()).collect();
        for s in &self.steps {
            let n = s.actions.len() - usize::from(s.collided);
            out.extend_from_slice(&s.actions[..n]);
        }
        out
    }

    pub fn to_jsonl(&self) -> Result<String, serde_json::Error> {
        let mut out = String::new();
        let mut push = |r: TraceRecord| -> Result<(), serde_json::Error> {
            out.push_str(&serde_json::to_string(&r)?);
            out.push('\n');
            Ok(())
        };
        push(TraceRecord::Header(self.header.clone()))?;
        push(TraceRecord::Understand(self.understand.clone()))?;
        if let Some(a) = &self.ascend {
            push(TraceRecord::Ascend(a.clone()))?;
        }
        for s in &self.steps {
            push(TraceRecord::Step(s.clone()))?;
        }
        push(TraceRecord::Footer(self.footer.clone()))?;
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, MissionError> {
        let bad = |m: String| MissionError::MalformedTrace(m);
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: TraceRecord = serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
            records.push(r);
        }
        let mut it = records.into_iter();
        let header = match it.next() {
            Some(TraceRecord::Header(h)) => h,
            _ => return Err(bad("missing header".into())),
        };
        if header.schema != TRACE_SCHEMA {
            return Err(bad(format!("schema {}", header.schema)));
        }
        let understand = match it.next() {
            Some(TraceRecord::Understand(u)) => u,
            _ => return Err(bad("missing understand record".into())),
        };
        let mut ascend = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for r in it {
            if footer.is_some() {
                return Err(bad("records after footer".into()));
            }
            match r {
                TraceRecord::Ascend(a) if ascend.is_none() && steps.is_empty() => ascend = Some(a),
                TraceRecord::Step(s) => {
                    if s.step as usize != steps.len() + 1 {
                        return Err(bad(format!("step {} out of order", s.step)));
                    }
                    steps.push(s);
                }
                TraceRecord::Footer(f) => footer = Some(f),
                _ => return Err(bad("unexpected record".into())),
            }
        }
        let footer = footer.ok_or_else(|| bad("missing footer".into()))?;
        Ok(Self { header, understand, ascend, steps, footer })
    }
}

/// Facades of `b` seen from `q`: on their outer side and within `range`.
fn facade_visible(b: &Building, e: usize, q: Vec2, range: f64) -> bool {
    let (a, c) = b.facade(e);
    b.outward_normal(e).dot(q - a) > 1e-9 && point_segment_distance(q, a, c) <= range
}

/// Score of each marked point's destination: length of not-yet-seen facade
/// that becomes visible there, less a drift penalty per meter beyond the
/// orbit distance from the footprint.
fn facade_gains(
    b: &Building,
    seen: &[bool],
    origin: Vec2,
    bearings: &[f64; 5],
    distances: &[f64; 5],
    cfg: &MissionConfig,
) -> [f64; 5] {
    std::array::from_fn(|k| {
        let q = origin + Vec2::from_angle(bearings[k]) * distances[k];
        let new: f64 = (0..b.num_facades())
            .filter(|&e| !seen[e] && facade_visible(b, e, q, cfg.facade_view_range))
            .map(|e| b.facade_length(e))
            .sum();
        let off = (0..b.num_facades())
            .map(|e| point_segment_distance(q, b.facade(e).0, b.facade(e).1))
            .fold(f64::INFINITY, f64::min);
        new - cfg.drift_penalty * (off - cfg.orbit_distance).max(0.0)
    })
}

/// Window id of a claimed box: the backend's own id, else the visible window
/// overlapping the box most.
fn resolve_claim(answer: &RecognitionAnswer, views: &[ViewObservation]) -> Option<String> {
    if answer.window_id.is_some() {
        return answer.window_id.clone();
    }
    let (view, bx) = (answer.view?, answer.pixel_box?);
    let obs = views.iter().find(|v| v.view == view)?;
    obs.features
        .iter()
        .map(|f| (f.pixel_box.iou(&bx), f))
        .filter(|(iou, _)| *iou > 0.0)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, f)| f.window_id.clone())
}

fn facing_building(world: &WorldModel, pose: &DronePose) -> Option<usize> {
    let o = pose.position.xy();
    let d = Vec2::from_angle(pose.yaw);
    world
        .buildings
        .iter()
        .enumerate()
        .filter_map(|(i, b)| crate::geometry::ray_convex_interval(o, d, &b.footprint).map(|(t, _)| (i, t)))
        .filter(|&(_, t)| t >= 0.0)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// Obstacle points seen at earlier steps, kept within reach of the next
/// move, merged with the current observation. The cameras do not cover the
/// rear, so a corner passed a moment ago is only known from memory. Past
/// points collapse to the highest one per grid cell.
struct ObstacleMemory {
    reach: f64,
    past: Vec<Vec3>,
    current: Vec<Vec3>,
}

impl ObstacleMemory {
    /// Grid used to merge near-duplicate points, meters.
    const CELL: f64 = 0.05;

    fn new(reach: f64) -> Self {
        Self { reach, past: Vec::new(), current: Vec::new() }
    }

    /// Moves the previous observation into the memory and returns the
    /// points to check a move from `at` against.
    fn observe(&mut self, fresh: Vec<Vec3>, at: Vec2) -> &[Vec3] {
        let mut past = std::mem::replace(&mut self.current, fresh);
        past.append(&mut self.past);
        past.retain(|p| p.xy().dist(at) <= self.reach);
        let key = |p: &Vec3| ((p.x / Self::CELL).round() as i64, (p.y / Self::CELL).round() as i64);
        past.sort_by(|a, b| key(a).cmp(&key(b)).then(b.z.total_cmp(&a.z)));
        past.dedup_by(|a, b| key(a) == key(b));
        self.past = past;
        self.current.extend_from_slice(&self.past);
        &self.current
    }
}

struct Runner<'a, B: ?Sized> {
    world: &'a WorldModel,
    sensors: Sensors<'a>,
    limits: MotionLimits,
    backend: &'a mut B,
    state: MissionState,
    path_length: f64,
}

impl<B: Backend + ?Sized> Runner<'_, B> {
    /// Executes actions in order; stops at the first collision and reports
    /// it.
    fn execute(&mut self, actions: &[Action], rec: &mut StepRecord) -> Result<bool, MissionError> {
        for a in actions {
            rec.actions.push(*a);
            match apply_action(self.world, &self.state.pose, a, &self.limits) {
                Ok(p) => {
                    self.path_length += a.path_length();
                    self.state.pose = p;
                }
                Err(WorldError::Collision { .. }) => {
                    rec.collided = true;
                    return Ok(false);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(true)
    }
}

/// Runs one delivery episode. Task failures are outcomes; only transport,
/// configuration and world-consistency problems are errors.
pub fn run_episode<B: Backend + ?Sized>(
    task: &TaskSpec,
    world: &WorldModel,
    rig: &CameraRig,
    backend: &mut B,
    cfg: &MissionConfig,
    seed: u64,
) -> Result<EpisodeTrace, MissionError> {
    let target = task.target(world)?;
    let h_target = world.window(target).center.z;
    let goal = world.standoff_point(target, cfg.explore.standoff);
    let shortest = shortest_path_length(task.start_pose.position, goal, &world.buildings[target.building].footprint);
    let header = TraceHeader {
        schema: TRACE_SCHEMA.to_string(),
        task_id: task.task_id.clone(),
        task: task.clone(),
        config: *cfg,
        seed,
        backend: String::new(),
        run: serde_json::Value::Null,
    };
    let mut run = Runner {
        world,
        sensors: Sensors::new(world, rig),
        limits: cfg.limits(),
        backend,
        state: MissionState {
            phase: Phase::Understand,
            step: 0,
            pose: task.start_pose,
            interpretation: None,
            floor_result: None,
        },
        path_length: 0.0,
    };
    let mut steps = Vec::new();
    let finish = |run: &Runner<'_, B>, outcome, understand, ascend, steps| EpisodeTrace {
        header: header.clone(),
        understand,
        ascend,
        steps,
        footer: TraceFooter {
            outcome,
            steps_used: run.state.step,
            path_length: run.path_length,
            shortest_path: shortest,
            final_pose: run.state.pose,
        },
    };

    let truth = task.interpretation();
    let interp = match run.backend.parse_request(RequestQuery { text: &task.request_text, truth: Some(&truth) }) {
        Ok(i) => i,
        Err(PerceptionError::Grammar(m)) => {
            run.state.phase = Phase::Failed;
            let u = UnderstandRecord { interpretation: None, error: Some(m) };
            return Ok(finish(&run, Outcome::FloorlocAbort, u, None, steps));
        }
        Err(e) => return Err(e.into()),
    };
    let understand = UnderstandRecord { interpretation: Some(interp.clone()), error: None };
    run.state.interpretation = Some(interp.clone());

    run.state.phase = Phase::Ascend;
    let fl = match cfg.floorloc_mode {
        FloorLocMode::Ours => {
            localize_floor(run.sensors, &task.start_pose, interp.target_floor, run.backend, &cfg.floorloc, &run.limits)
        }
        FloorLocMode::DirectCount => direct_count_height(
            run.sensors,
            &task.start_pose,
            interp.target_floor,
            run.backend,
            &cfg.floorloc,
            &run.limits,
        ),
    };
    let mut ascend = AscendRecord { mode: cfg.floorloc_mode, h_target, result: None, error: None, collided: false };
    let fl = match fl {
        Ok(r) => r,
        Err(FloorLocError::World(WorldError::Collision { .. })) => {
            ascend.collided = true;
            return Ok(finish(&run, Outcome::Collision, understand, Some(ascend), steps));
        }
        Err(e @ (FloorLocError::NoFacade | FloorLocError::Perception(PerceptionError::Grammar(_)))) => {
            ascend.error = Some(e.to_string());
            return Ok(finish(&run, Outcome::FloorlocAbort, understand, Some(ascend), steps));
        }
        Err(FloorLocError::World(e)) => return Err(e.into()),
        Err(FloorLocError::Perception(e)) => return Err(e.into()),
    };
    for a in &fl.actions {
        run.path_length += a.path_length();
    }
    run.state.pose = fl.pose;
    let aborted = fl.status == FloorLocStatus::Aborted;
    ascend.result = Some(fl.clone());
    run.state.floor_result = Some(fl.clone());
    if aborted {
        return Ok(finish(&run, Outcome::FloorlocAbort, understand, Some(ascend), steps));
    }

    let bbox = fl.bbox_buil;
    let explored = facing_building(world, &task.start_pose).unwrap_or(target.building);
    let building = &world.buildings[explored];
    let mut seen = vec![false; building.num_facades()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = cfg.explore.safety_radius + cfg.explore.corridor_margin;
    let mut memory = ObstacleMemory::new(cfg.explore.l_max + band + 1.0);
    run.state.phase = Phase::Explore;

    while run.state.step < cfg.step_budget {
        run.state.step += 1;
        let pose = run.state.pose;
        for (e, s) in seen.iter_mut().enumerate() {
            *s |= facade_visible(building, e, pose.position.xy(), cfg.facade_view_range);
        }
        let views = run.sensors.observe(&pose)?;
        let obstacles = memory.observe(obstacle_points(&views, rig, &pose), pose.position.xy());
        let answer = run.backend.recognize(RecognitionQuery { views: &views, target: &interp.target_object })?;
        let mut rec = StepRecord {
            step: run.state.step,
            phase: run.state.phase,
            pose,
            recognition: answer.clone(),
            claim: None,
            selection: None,
            marks: None,
            distances: None,
            gains: None,
            choice: None,
            note: None,
            actions: Vec::new(),
            collided: false,
        };

        if let (true, Some(view), Some(bx)) = (answer.found, answer.view, answer.pixel_box) {
            let id = resolve_claim(&answer, &views);
            let correct = id.as_deref() == Some(task.target_window_id.as_str());
            rec.claim = Some(Claim { window_id: id, correct });
            rec.phase = Phase::Approach;
            run.state.phase = Phase::Approach;
            let obs = &views[view.slot()];
            let cam = rig.camera(&pose, view);
            let plan = approach_target(&bx, &obs.depth, &cam, &pose, obstacles, &cfg.explore);
            if !plan.actions.is_empty() {
                let actions = if plan.aligns_first { &plan.actions[..1] } else { &plan.actions[..] };
                let ok = run.execute(actions, &mut rec)?;
                steps.push(rec);
                if !ok {
                    run.state.phase = Phase::Failed;
                    return Ok(finish(&run, Outcome::Collision, understand, Some(ascend), steps));
                }
                if actions.last().is_some_and(|a| a.kind == ActionKind::Stop) {
                    let success =
                        check_success(&run.state.pose, world, target, cfg.success_radius, cfg.explore.standoff);
                    run.state.phase = if success { Phase::Done } else { Phase::Failed };
                    let outcome = if success { Outcome::Success } else { Outcome::Misdelivery };
                    return Ok(finish(&run, outcome, understand, Some(ascend), steps));
                }
                continue;
            }
            rec.note = Some("approach blocked".into());
        }

        if run.state.phase == Phase::Approach && rec.note.is_none() {
            rec.note = Some("target lost".into());
        }
        run.state.phase = Phase::Explore;
        rec.phase = Phase::Explore;
        let crop = if bbox.y_min < bbox.y_max {
            bbox
        } else {
            PixelBox { x_min: 0, x_max: rig.width - 1, y_min: 0, y_max: rig.height - 1 }
        };
        let sel = choose_viewpoint(cfg.viewpoint, &views, &crop, &cfg.explore, &mut rng)
            .map_err(|e| MissionError::MalformedTrace(e.to_string()))?;
        let obs = &views[sel.view.slot()];
        let cam = rig.camera(&pose, sel.view);
        let marks = mark_points(rig.width);
        let distances = mark_distances(&obs.depth, &cam, &marks, obstacles, &cfg.explore);
        let bearings: [f64; 5] = std::array::from_fn(|k| cam.column_bearing(marks[k] as f64));
        let gains = facade_gains(building, &seen, pose.position.xy(), &bearings, &distances, cfg);
        let choice = match cfg.choice {
            ChoiceMode::CenterOnly => Some(3),
            ChoiceMode::Backend => {
                let q = ChoiceQuery {
                    view: sel.view,
                    depth: &obs.depth,
                    marks,
                    distances,
                    deadlock_threshold: cfg.explore.deadlock_threshold,
                    task: &task.request_text,
                    gains: Some(gains),
                };
                match run.backend.choose(q) {
                    Ok(c) => Some(c.point_index),
                    Err(PerceptionError::Grammar(m)) => {
                        rec.note = Some(format!("choice unusable: {m}"));
                        None
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        let action = match choice {
            Some(k) => decide_action(&cam, &marks, &distances, k, &cfg.explore),
            None => Action::rotate_left_30(),
        };
        rec.selection = Some(sel);
        rec.marks = Some(marks);
        rec.distances = Some(distances);
        rec.gains = Some(gains);
        rec.choice = choice;
        let ok = run.execute(&[action], &mut rec)?;
        steps.push(rec);
        if !ok {
            run.state.phase = Phase::Failed;
            return Ok(finish(&run, Outcome::Collision, understand, Some(ascend), steps));
        }
    }
    run.state.phase = Phase::Failed;
    Ok(finish(&run, Outcome::BudgetExhausted, understand, Some(ascend), steps))
}

/// Replays the executed actions from the task's start pose. Returns the
/// final pose, or the collision the replay ran into.
pub fn replay(trace: &EpisodeTrace, world: &WorldModel, limits: &MotionLimits) -> Result<DronePose, WorldError> {
    let mut pose = trace.header.task.start_pose;
    for a in trace.executed_actions() {
        pose = apply_action(world, &pose, &a, limits)?;
    }
    Ok(pose)
}

/// Outcome recomputed from the trace and the world alone.
pub fn classify_outcome(trace: &EpisodeTrace, task: &TaskSpec, world: &WorldModel) -> Result<Outcome, MissionError> {
    let bad = |m: &str| MissionError::MalformedTrace(m.to_string());
    if trace.header.task_id != task.task_id {
        return Err(bad("trace belongs to another task"));
    }
    let cfg = &trace.header.config;
    let limits = cfg.limits();
    let final_pose = replay(trace, world, &limits).map_err(|e| bad(&format!("replay failed: {e}")))?;
    if final_pose.position.dist(trace.footer.final_pose.position) > 1e-9 {
        return Err(bad("replayed pose disagrees with footer"));
    }
    if trace.understand.interpretation.is_none() {
        return Ok(Outcome::FloorlocAbort);
    }
    let Some(ascend) = &trace.ascend else {
        return Err(bad("missing ascend record"));
    };
    if ascend.collided {
        return Ok(Outcome::Collision);
    }
    if ascend.h_final().is_none() {
        return Ok(Outcome::FloorlocAbort);
    }
    if trace.steps.len() as u32 > cfg.step_budget || trace.footer.steps_used != trace.steps.len() as u32 {
        return Err(bad("step count inconsistent with budget"));
    }
    if let Some(last) = trace.steps.last() {
        if last.collided {
            let a = last.actions.last().ok_or_else(|| bad("collision without action"))?;
            return match apply_action(world, &final_pose, a, &limits) {
                Err(WorldError::Collision { .. }) => Ok(Outcome::Collision),
                _ => Err(bad("recorded collision does not reproduce")),
            };
        }
        if last.actions.last().is_some_and(|a| a.kind == ActionKind::Stop) {
            let target = task.target(world)?;
            return Ok(if check_success(&final_pose, world, target, cfg.success_radius, cfg.explore.standoff) {
                Outcome::Success
            } else {
                Outcome::Misdelivery
            });
        }
    }
    if (trace.steps.len() as u32) < cfg.step_budget {
        return Err(bad("episode ended before the budget without a terminal action"));
    }
    Ok(Outcome::BudgetExhausted)
}
