//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances and batch
//! sizes are pinned here; the process fails if any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use vld_core::explore::{find_split, ViewpointStrategy};
use vld_core::floorloc::{fl_failed, localize_floor, target_height, FloorLocConfig, FL_FAIL_THRESHOLD};
use vld_core::geometry::{Vec2, Vec3};
use vld_core::metrics::{compute_avg_steps, compute_spl, compute_sr, report, summarize, EpisodeSummary, MetricReport};
use vld_core::mission::{run_episode, FloorLocMode, MissionConfig, Outcome};
use vld_core::perception::{NoiseProfile, OffsetDist, OracleBackend, Sensors};
use vld_core::seed::derive_seed;
use vld_core::tasks::{difficulty_label, generate_batch, BatchParams, Difficulty, TaskBatch};
use vld_core::world::{
    generate_world, render_depth, Bounds, Building, CameraRig, DronePose, MotionLimits, View, WorldModel, WorldParams,
};

const ORACLE_TASKS: usize = 100;
const ORACLE_MIN_SR: f64 = 0.95;
const ORACLE_MAX_STEPS: u32 = 30;
const ORACLE_MAX_RUNTIME: Duration = Duration::from_secs(120);
const SPLIT_PROFILES: usize = 10_000;
const SPLIT_SLICES: usize = 20;
const CENTER_RANGE_TOL: f64 = 1e-6;
const RENDER_POSES: usize = 50;
/// Relative; the reference intersects walls in a different arithmetic order.
const RENDER_TOL: f64 = 1e-9;
const CONVERGENCE_BUILDINGS: u64 = 200;
const FL_TASKS: usize = 200;
const FL_MIN_FLOORS: u32 = 8;
const ABLATION_TASKS: usize = 50;
const ABLATION_SEEDS: [u64; 3] = [1, 2, 3];
const SAFETY_EPISODES: usize = 500;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn episodes(batch: &TaskBatch, cfg: &MissionConfig, noise: &NoiseProfile, root: u64) -> Vec<EpisodeSummary> {
    let rig = CameraRig::default();
    batch
        .tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut backend =
                OracleBackend::new(noise.clone().with_seed(derive_seed(root, "noise", i as u64))).unwrap();
            let w = batch.world_for(t).unwrap();
            summarize(&run_episode(t, w, &rig, &mut backend, cfg, derive_seed(root, "episode", i as u64)).unwrap())
        })
        .collect()
}

fn collisions(s: &[EpisodeSummary]) -> usize {
    s.iter().filter(|e| e.outcome == Outcome::Collision).count()
}

fn oracle_end_to_end(reports: &mut Vec<MetricReport>) -> Verdict {
    let t0 = Instant::now();
    let batch = generate_batch(7, &BatchParams { n_tasks: ORACLE_TASKS, ..BatchParams::default() }).unwrap();
    let rig = CameraRig::default();
    let cfg = MissionConfig::default();
    // sequential, so the runtime is a single-core figure
    let s: Vec<EpisodeSummary> = batch
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut backend = OracleBackend::exact();
            let w = batch.world_for(t).unwrap();
            summarize(&run_episode(t, w, &rig, &mut backend, &cfg, derive_seed(7, "episode", i as u64)).unwrap())
        })
        .collect();
    let elapsed = t0.elapsed();
    let r = report(&s).unwrap();
    let max_steps = s.iter().map(|e| e.steps_used).max().unwrap_or(0);
    let c = collisions(&s);
    let mixed = Difficulty::ALL.iter().all(|d| s.iter().any(|e| e.difficulty == *d));
    let pass =
        r.sr >= ORACLE_MIN_SR && c == 0 && max_steps <= ORACLE_MAX_STEPS && elapsed < ORACLE_MAX_RUNTIME && mixed;
    reports.push(r.clone());
    verdict(
        pass,
        format!(
            "SR {:.3} (>= {ORACLE_MIN_SR}), collisions {c}, max steps {max_steps} (<= {ORACLE_MAX_STEPS}), {:.1} s, all difficulties {mixed}",
            r.sr,
            elapsed.as_secs_f64()
        ),
    )
}

fn split_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = 0;
    let mut valid = 0;
    for k in 0..SPLIT_PROFILES {
        // half coarse (ties, exact step profiles), half continuous
        let means: Vec<f64> = (0..SPLIT_SLICES)
            .map(|_| if k % 2 == 0 { f64::from(rng.gen_range(1u32..=12)) * 5.0 } else { rng.gen_range(0.5..100.0) })
            .collect();
        let delta = rng.gen_range(0.0..30.0);
        let d_max = rng.gen_range(10.0..80.0);
        let got = find_split(&means, delta, d_max, 0.2);
        let want = oracles::brute_split(&means, delta, d_max, 1, 5);
        valid += usize::from(want.0.is_some());
        if (got.j_star, got.objective) != want {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} mismatches in {SPLIT_PROFILES} profiles ({valid} with a valid split)"),
    )
}

fn renderer() -> Verdict {
    let rig = CameraRig::default().with_resolution(129, 129);
    let mut worst: f64 = 0.0;
    for d in [2.5, 7.0, 13.25, 41.0, 99.0] {
        let (min, max) = (Vec2::new(-50.0, d), Vec2::new(50.0, d + 10.0));
        let world = WorldModel {
            seed: 0,
            bounds: Bounds { min: Vec2::new(-100.0, -100.0), max: Vec2::new(100.0, 100.0) },
            buildings: vec![Building {
                footprint: vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
                floor_height: 3.0,
                num_floors: 10,
                windows: Vec::new(),
            }],
        };
        let pose = DronePose::new(Vec3::new(0.0, 0.0, 12.0), std::f64::consts::FRAC_PI_2);
        let img = render_depth(&world, &pose, &rig, View::FRONT).unwrap();
        worst = worst.max((img.get(64, 64) - d).abs());
    }
    let params =
        WorldParams { num_buildings: 3, extent: 60.0, min_gap: 8.0, radius: (5.0, 12.0), ..WorldParams::default() };
    let world = generate_world(11, &params).unwrap();
    let small = CameraRig::default().with_resolution(16, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let (mut poses, mut bad, mut hits) = (0, 0, 0);
    while poses < RENDER_POSES {
        let p = Vec3::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0), rng.gen_range(0.5..45.0));
        if world.building_containing(p).is_some() {
            continue;
        }
        let pose = DronePose::new(p, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let view = View::ALL[rng.gen_range(0..5)];
        let img = render_depth(&world, &pose, &small, view).unwrap();
        let reference = oracles::naive_render(&world, &small.camera(&pose, view), small.max_range);
        for (&a, &b) in img.data.iter().zip(&reference) {
            hits += usize::from(b < small.max_range);
            bad += usize::from((a - b).abs() > RENDER_TOL * b.max(1.0));
        }
        poses += 1;
    }
    verdict(
        worst <= CENTER_RANGE_TOL && bad == 0 && hits > 0,
        format!("center error {worst:.2e} m (<= {CENTER_RANGE_TOL:e}); {bad} pixels off in {RENDER_POSES} poses at 16x16 ({hits} hit pixels)"),
    )
}

fn convergence() -> Verdict {
    let rig = CameraRig::default();
    let (mut tasks, mut failed) = (0, 0);
    for seed in 0..CONVERGENCE_BUILDINGS {
        let world = oracles::lone_building(seed, (1, 12), (2.5, 4.0));
        let b = &world.buildings[0];
        let (_, start) = oracles::facing_longest_facade(b, 9.0);
        for f_tar in 1..=b.num_floors {
            let r = localize_floor(
                Sensors::new(&world, &rig),
                &start,
                f_tar,
                &mut OracleBackend::exact(),
                &FloorLocConfig::default(),
                &MotionLimits::default(),
            )
            .unwrap();
            tasks += 1;
            failed += usize::from(fl_failed(r.h_final, target_height(f_tar, b.floor_height), FL_FAIL_THRESHOLD));
        }
    }
    verdict(failed == 0, format!("{failed} of {tasks} targets off by more than {FL_FAIL_THRESHOLD} m"))
}

fn floorloc_ordering(reports: &mut Vec<MetricReport>) -> Verdict {
    let mut params =
        BatchParams { n_tasks: FL_TASKS, min_building_floors: Some(FL_MIN_FLOORS), ..BatchParams::default() };
    params.world.floors = (FL_MIN_FLOORS, 12);
    let batch = generate_batch(31, &params).unwrap();
    let noise = NoiseProfile { floor_count_error_dist: OffsetDist::plus_minus_one(), ..NoiseProfile::exact() };
    let mut rate = |mode| {
        let cfg = MissionConfig { floorloc_mode: mode, ..MissionConfig::default() };
        let r = report(&episodes(&batch, &cfg, &noise, 31)).unwrap();
        let f = r.fl_fail_rate.unwrap_or(f64::NAN);
        reports.push(r);
        f
    };
    let (ours, direct) = (rate(FloorLocMode::Ours), rate(FloorLocMode::DirectCount));
    verdict(ours < direct, format!("FL fail ours {ours:.3} < direct-count {direct:.3} on {FL_TASKS} tasks"))
}

fn viewpoint_ordering(reports: &mut Vec<MetricReport>) -> Verdict {
    let batch = generate_batch(21, &BatchParams { n_tasks: ABLATION_TASKS, ..BatchParams::default() }).unwrap();
    let strategies = [ViewpointStrategy::Ours, ViewpointStrategy::Random, ViewpointStrategy::Default];
    let cfg = |v| MissionConfig { viewpoint: v, ..MissionConfig::default() };
    let mut ordered = true;
    let mut rows = Vec::new();
    for seed in ABLATION_SEEDS {
        let sr: Vec<f64> = strategies
            .iter()
            .map(|&v| {
                let r = report(&episodes(&batch, &cfg(v), &NoiseProfile::calibrated(), seed)).unwrap();
                let sr = r.sr;
                reports.push(r);
                sr
            })
            .collect();
        ordered &= sr[0] > sr[1] && sr[0] > sr[2];
        rows.push(format!("s{seed} {:.2}/{:.2}/{:.2}", sr[0], sr[1], sr[2]));
    }
    let mut easy_only = true;
    let mut beyond = Vec::new();
    for &v in &strategies[1..] {
        let s = episodes(&batch, &cfg(v), &NoiseProfile::exact(), 21);
        let n = s.iter().filter(|e| e.success() && e.min_turns >= 2).count();
        easy_only &= n == 0;
        beyond.push(format!("{v:?} {n}"));
        reports.push(report(&s).unwrap());
    }
    verdict(
        ordered && easy_only,
        format!(
            "calibrated SR ours/random/default {}; noise-free successes with >= 2 turns: {}",
            rows.join(", "),
            beyond.join(", ")
        ),
    )
}

fn metric_identities(reports: &[MetricReport]) -> Verdict {
    let ep = |outcome, steps, path, shortest| EpisodeSummary {
        task_id: "t".into(),
        difficulty: Difficulty::Easy,
        min_turns: 0,
        outcome,
        steps_used: steps,
        path_length: path,
        shortest_path: shortest,
        h_final: None,
        h_target: None,
        claims: 0,
        wrong_claims: 0,
    };
    let spl =
        compute_spl(&[ep(Outcome::Success, 5, 20.0, 10.0), ep(Outcome::BudgetExhausted, 30, 50.0, 10.0)]).unwrap();
    let three =
        [ep(Outcome::Success, 10, 1.0, 1.0), ep(Outcome::Success, 14, 1.0, 1.0), ep(Outcome::Collision, 3, 1.0, 1.0)];
    let sr = compute_sr(&three).unwrap();
    let avg = compute_avg_steps(&three);
    let none = compute_avg_steps(&three[2..]);
    let labels = [
        (0, Difficulty::Easy),
        (1, Difficulty::Easy),
        (2, Difficulty::Moderate),
        (3, Difficulty::Moderate),
        (4, Difficulty::Hard),
        (9, Difficulty::Hard),
    ];
    let thresholds = labels.iter().all(|&(t, d)| difficulty_label(t) == d);
    let ordered = reports.iter().all(|r| r.spl <= r.sr && r.sr <= 1.0 && r.spl >= 0.0);
    verdict(
        spl == 0.25 && sr == 2.0 / 3.0 && avg == Some(12.0) && none.is_none() && thresholds && ordered && !reports.is_empty(),
        format!(
            "SPL example {spl}, SR {sr:.4}, avg steps {avg:?}, thresholds {thresholds}, SPL <= SR on {} batches {ordered}",
            reports.len()
        ),
    )
}

fn tree(dir: &Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    fn walk(root: &Path, p: &Path, out: &mut Vec<(std::path::PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                walk(root, &e, out);
            } else {
                out.push((e.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&e).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Drives the command layer exactly as the `vld` binary does, in process.
fn vld(args: &[&str]) -> Option<String> {
    vld_cli::run_args(std::iter::once("vld").chain(args.iter().copied())).ok()
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let data = data.to_str().unwrap();
    if vld(&["gen", "--out", data, "--seed", "12", "--tasks", "20"]).is_none() {
        return verdict(false, "gen failed");
    }
    let mut identical = true;
    let mut files = 0;
    for noise in ["exact", "calibrated"] {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{noise}-{k}"));
            let stdout = vld(&["run", "--data", data, "--out", out.to_str().unwrap(), "--noise", noise, "--seed", "5"]);
            outputs.push((stdout, tree(&out)));
        }
        files += outputs[0].1.len();
        identical &= outputs[0].0.is_some() && outputs[0] == outputs[1] && outputs[0].1.len() == 20 + 2;
    }
    verdict(identical, format!("{files} trace and report files compared across repeated runs"))
}

fn safety(reports: &mut Vec<MetricReport>) -> Verdict {
    let per = 100;
    let mut all = Vec::new();
    for root in 0..(SAFETY_EPISODES / per) as u64 {
        let batch = generate_batch(500 + root, &BatchParams { n_tasks: per, ..BatchParams::default() }).unwrap();
        all.extend(episodes(&batch, &MissionConfig::default(), &NoiseProfile::exact(), 500 + root));
    }
    let c = collisions(&all);
    reports.push(report(&all).unwrap());
    verdict(c == 0 && all.len() == SAFETY_EPISODES, format!("{c} collisions in {} episodes", all.len()))
}

fn main() {
    let mut reports = Vec::new();
    let oracle = oracle_end_to_end(&mut reports);
    let split = split_equivalence();
    let render = renderer();
    let converge = convergence();
    let floorloc = floorloc_ordering(&mut reports);
    let viewpoint = viewpoint_ordering(&mut reports);
    let safe = safety(&mut reports);
    let results = [
        ("oracle end-to-end", oracle),
        ("split search equals exhaustive search", split),
        ("depth renderer", render),
        ("floor localization converges with exact counts", converge),
        ("floor localization beats direct counting", floorloc),
        ("viewpoint selection beats random and default", viewpoint),
        ("metric identities", metric_identities(&reports)),
        ("determinism of repeated runs", determinism()),
        ("safety of clamped actions", safe),
    ];
    let mut failed = 0;
    for (k, (name, v)) in results.iter().enumerate() {
        println!("{} {}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
