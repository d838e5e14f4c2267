//! Delivery tasks: a decorated target window, a start pose facing one facade
//! of its building, a templated request, and a difficulty label from the
//! number of corners between the start facade and the target facade.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Vec2, Vec3};
use crate::perception::RequestInterpretation;
use crate::seed::derive_seed;
use crate::world::{generate_world, Building, DronePose, ObjectTag, WindowRef, WorldError, WorldModel, WorldParams};

pub const TASK_SCHEMA: &str = "vld-task/1";

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("world has no decorated window")]
    NoDecoratedWindow,
    #[error("no task matches the requested constraints")]
    NoMatchingTask,
    #[error("target window {0} not found in world")]
    UnknownWindow(String),
    #[error("task schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }
}

/// Fewer than 2 turns is easy, 2 to 3 moderate, more hard.
pub fn difficulty_label(turns: u32) -> Difficulty {
    match turns {
        0 | 1 => Difficulty::Easy,
        2 | 3 => Difficulty::Moderate,
        _ => Difficulty::Hard,
    }
}

/// Where a task's world comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldRef {
    pub seed: u64,
    /// World file, relative to the task file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub world: WorldRef,
    pub target_window_id: String,
    pub target_floor: u32,
    pub target_object: ObjectTag,
    pub request_text: String,
    pub start_pose: DronePose,
    pub difficulty: Difficulty,
    pub min_turns: u32,
}

impl TaskSpec {
    pub fn interpretation(&self) -> RequestInterpretation {
        RequestInterpretation { target_floor: self.target_floor, target_object: self.target_object.clone() }
    }

    pub fn target(&self, world: &WorldModel) -> Result<WindowRef, TaskError> {
        world.find_window(&self.target_window_id).ok_or_else(|| TaskError::UnknownWindow(self.target_window_id.clone()))
    }
}

/// Optional constraints on a generated task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskConstraints {
    pub difficulty: Option<Difficulty>,
    /// Required target floor.
    pub floor: Option<u32>,
    /// Minimum floor count of the target building.
    pub min_building_floors: Option<u32>,
}

/// Start distance from the facade, meters.
pub const START_DISTANCE: (f64, f64) = (8.0, 10.0);
pub const START_ALTITUDE: f64 = 1.5;
/// Shortest facade a task may start in front of.
pub const MIN_START_FACADE: f64 = 6.0;

/// Index of the facade the ray along the pose heading enters first.
pub fn facing_facade(b: &Building, pose: &DronePose) -> Option<usize> {
    let o = pose.position.xy();
    let d = Vec2::from_angle(pose.yaw);
    let mut best: Option<(usize, f64)> = None;
    for e in 0..b.num_facades() {
        let (a, c) = b.facade(e);
        if b.outward_normal(e).dot(d) >= 0.0 {
            continue;
        }
        let s = c - a;
        let denom = d.cross(s);
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = (a - o).cross(s) / denom;
        let u = (a - o).cross(d) / denom;
        if t > 0.0 && (-1e-9..=1.0 + 1e-9).contains(&u) && best.is_none_or(|(_, bt)| t < bt) {
            best = Some((e, t));
        }
    }
    best.map(|(e, _)| e)
}

/// Cyclic facade distance between two facades of an `n`-gon.
pub fn facade_turns(n: usize, from: usize, to: usize) -> u32 {
    let d = (to + n - from) % n;
    d.min(n - d) as u32
}

/// Corners rounded on the shorter way around from the facade the start pose
/// faces to the target window's facade. A start that faces no facade of the
/// target building counts from its nearest facade.
pub fn min_turns(world: &WorldModel, start: &DronePose, target: WindowRef) -> u32 {
    let b = &world.buildings[target.building];
    let from = facing_facade(b, start).unwrap_or_else(|| {
        (0..b.num_facades())
            .min_by(|&i, &j| {
                let di = crate::geometry::point_segment_distance(start.position.xy(), b.facade(i).0, b.facade(i).1);
                let dj = crate::geometry::point_segment_distance(start.position.xy(), b.facade(j).0, b.facade(j).1);
                di.total_cmp(&dj)
            })
            .unwrap_or(0)
    });
    facade_turns(b.num_facades(), from, b.windows[target.window].facade_index)
}

const TEMPLATES: [&str; 8] = [
    "Please deliver this package to the window on the {ord} floor that has a {obj} outside it.",
    "Drop the parcel at the {ord}-floor window with the {obj}.",
    "The delivery goes to floor {n}. Look for the window with a {obj} by it.",
    "Bring my order up to the {ord} floor, the window where a {obj} sits.",
    "I live on the {ord} floor. You will see a {obj} at my window.",
    "Floor {n}, window with the {obj}. Leave the box there please.",
    "Can you fly this to the {ord} floor? My window is the one with a {obj}.",
    "Target: the window decorated with a {obj}, {ord} floor.",
];

const DISTRACTORS: [&str; 10] = [
    "It might rain later, so please hurry.",
    "My neighbour on the {dn} floor has a {dobj}, do not mix them up.",
    "The building has a cafe at street level.",
    "There is a {dobj} somewhere on the roof, ignore it.",
    "Thanks a lot, the last courier got lost.",
    "The package is fragile.",
    "My friend on floor {dn} also ordered something last week.",
    "The front door code is 4821 but you will not need it.",
    "Watch out for the trees near the parking lot.",
    "Please avoid waking the baby.",
];

pub fn ordinal(n: u32) -> String {
    let suffix = match (n % 10, n % 100) {
        (1, r) if r != 11 => "st",
        (2, r) if r != 12 => "nd",
        (3, r) if r != 13 => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Request text for a floor and object, with zero to two distracting clauses.
pub fn request_text<R: Rng>(rng: &mut R, floor: u32, object: &ObjectTag, decoy: &ObjectTag) -> String {
    let fill = |s: &str, dn: u32| {
        s.replace("{ord}", &ordinal(floor))
            .replace("{n}", &floor.to_string())
            .replace("{obj}", &object.description())
            .replace("{dobj}", &decoy.description())
            .replace("{dn}", &ordinal(dn))
    };
    let main = fill(TEMPLATES[rng.gen_range(0..TEMPLATES.len())], floor);
    let n_extra = rng.gen_range(0..=2);
    let mut parts = vec![main];
    for _ in 0..n_extra {
        let dn = if floor > 1 && rng.gen_bool(0.5) { floor - 1 } else { floor + 1 };
        parts.push(fill(DISTRACTORS[rng.gen_range(0..DISTRACTORS.len())], dn));
    }
    let k = parts.len();
    if k > 1 {
        // distractors may precede the request
        let at = rng.gen_range(0..k);
        parts.swap(0, at);
    }
    parts.join(" ")
}

fn start_pose<R: Rng>(rng: &mut R, b: &Building, facade: usize) -> DronePose {
    let (a, c) = b.facade(facade);
    let n = b.outward_normal(facade);
    let t = rng.gen_range(0.4..=0.6);
    let s = rng.gen_range(START_DISTANCE.0..=START_DISTANCE.1);
    let p = a + (c - a) * t + n * s;
    DronePose::new(Vec3::new(p.x, p.y, START_ALTITUDE), (n * -1.0).angle())
}

/// One task on `world`. Candidates are every (decorated window, start facade)
/// pair that meets the constraints; one is drawn uniformly.
pub fn generate_task(world: &WorldModel, seed: u64, c: &TaskConstraints) -> Result<TaskSpec, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut any_decorated = false;
    let mut candidates = Vec::new();
    for (bi, b) in world.buildings.iter().enumerate() {
        for (wi, w) in b.windows.iter().enumerate() {
            if w.decorations.is_empty() {
                continue;
            }
            any_decorated = true;
            if c.floor.is_some_and(|f| f != w.floor) || c.min_building_floors.is_some_and(|m| b.num_floors < m) {
                continue;
            }
            for f in 0..b.num_facades() {
                if b.facade_length(f) < MIN_START_FACADE {
                    continue;
                }
                let turns = facade_turns(b.num_facades(), f, w.facade_index);
                if c.difficulty.is_some_and(|d| d != difficulty_label(turns)) {
                    continue;
                }
                candidates.push((WindowRef { building: bi, window: wi }, f));
            }
        }
    }
    if !any_decorated {
        return Err(TaskError::NoDecoratedWindow);
    }
    let &(target, facade) = candidates.choose(&mut rng).ok_or(TaskError::NoMatchingTask)?;
    let b = &world.buildings[target.building];
    let w = &b.windows[target.window];
    let start = start_pose(&mut rng, b, facade);
    let turns = min_turns(world, &start, target);
    let object = w.decorations[0].clone();
    let decoy = world
        .buildings
        .iter()
        .flat_map(|b| b.windows.iter().flat_map(|w| w.decorations.iter()))
        .find(|t| **t != object)
        .cloned()
        .unwrap_or_else(|| object.clone());
    let request = request_text(&mut rng, w.floor, &object, &decoy);
    Ok(TaskSpec {
        task_id: String::new(),
        world: WorldRef { seed: world.seed, file: None },
        target_window_id: w.id.clone(),
        target_floor: w.floor,
        target_object: object,
        request_text: request,
        start_pose: start,
        difficulty: difficulty_label(turns),
        min_turns: turns,
    })
}

/// Share of each difficulty in a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifficultyMix {
    pub easy: f64,
    pub moderate: f64,
    pub hard: f64,
}

impl Default for DifficultyMix {
    fn default() -> Self {
        Self { easy: 0.4, moderate: 0.4, hard: 0.2 }
    }
}

impl DifficultyMix {
    pub fn only(d: Difficulty) -> Self {
        let mut m = Self { easy: 0.0, moderate: 0.0, hard: 0.0 };
        match d {
            Difficulty::Easy => m.easy = 1.0,
            Difficulty::Moderate => m.moderate = 1.0,
            Difficulty::Hard => m.hard = 1.0,
        }
        m
    }

    /// Per-task difficulties for `n` tasks: largest-remainder rounding of the
    /// shares, laid out round-robin so any prefix stays mixed.
    pub fn assign(&self, n: usize) -> Vec<Difficulty> {
        let shares = [self.easy, self.moderate, self.hard];
        let total: f64 = shares.iter().sum();
        let exact: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let mut missing = n - counts.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            counts[i] += 1;
            missing -= 1;
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            for (i, d) in Difficulty::ALL.iter().enumerate() {
                if counts[i] > 0 {
                    counts[i] -= 1;
                    out.push(*d);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchParams {
    pub n_tasks: usize,
    pub mix: DifficultyMix,
    pub tasks_per_world: usize,
    pub floor: Option<u32>,
    pub min_building_floors: Option<u32>,
    pub world: WorldParams,
    /// Worlds tried per task before giving up.
    pub max_world_attempts: usize,
}

impl Default for BatchParams {
    fn default() -> Self {
        Self {
            n_tasks: 100,
            mix: DifficultyMix::default(),
            tasks_per_world: 4,
            floor: None,
            min_building_floors: None,
            world: WorldParams::default(),
            max_world_attempts: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskBatch {
    pub worlds: Vec<WorldModel>,
    pub tasks: Vec<TaskSpec>,
}

impl TaskBatch {
    pub fn world_for(&self, task: &TaskSpec) -> Option<&WorldModel> {
        self.worlds.iter().find(|w| w.seed == task.world.seed)
    }
}

/// Deterministic batch from a root seed. World `k` uses seed
/// `derive_seed(root, "world", k)` and task `i` draws from
/// `derive_seed(root, "task", i)`.
pub fn generate_batch(root: u64, p: &BatchParams) -> Result<TaskBatch, TaskError> {
    let difficulties = p.mix.assign(p.n_tasks);
    let mut worlds: Vec<WorldModel> = Vec::new();
    let mut tasks = Vec::with_capacity(p.n_tasks);
    let mut k: u64 = 0;
    let mut used = 0;
    for (i, &d) in difficulties.iter().enumerate() {
        let c = TaskConstraints { difficulty: Some(d), floor: p.floor, min_building_floors: p.min_building_floors };
        let mut attempts = 0;
        let task = loop {
            if used >= p.tasks_per_world.max(1) {
                k += 1;
                used = 0;
            }
            let seed = derive_seed(root, "world", k);
            if worlds.last().is_none_or(|w| w.seed != seed) {
                worlds.push(generate_world(seed, &p.world)?);
            }
            let world = worlds.last().expect("world pushed above");
            match generate_task(world, derive_seed(root, "task", i as u64), &c) {
                Ok(t) => break t,
                Err(TaskError::NoMatchingTask | TaskError::NoDecoratedWindow) => {
                    attempts += 1;
                    if attempts >= p.max_world_attempts {
                        return Err(TaskError::NoMatchingTask);
                    }
                    if used == 0 {
                        worlds.pop();
                    }
                    k += 1;
                    used = 0;
                }
                Err(e) => return Err(e),
            }
        };
        used += 1;
        tasks.push(TaskSpec { task_id: format!("t{i:04}"), ..task });
    }
    Ok(TaskBatch { worlds, tasks })
}

/// On-disk task set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub schema: String,
    pub root_seed: u64,
    pub params: BatchParams,
    pub tasks: Vec<TaskSpec>,
}

impl TaskFile {
    pub fn new(root_seed: u64, params: BatchParams, tasks: Vec<TaskSpec>) -> Self {
        Self { schema: TASK_SCHEMA.to_string(), root_seed, params, tasks }
    }

    pub fn to_json(&self) -> Result<String, TaskError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let f: TaskFile = serde_json::from_str(text)?;
        if f.schema != TASK_SCHEMA {
            return Err(TaskError::Schema(f.schema));
        }
        Ok(f)
    }
}
