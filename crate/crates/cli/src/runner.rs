use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vld_core::metrics::{report, summarize, EpisodeSummary, MetricReport};
use vld_core::mission::{classify_outcome, run_episode, EpisodeTrace};
use vld_core::perception::{Backend, OracleBackend, RemoteBackend};
use vld_core::seed::derive_seed;
use vld_core::world::CameraRig;

use crate::config::{BackendKind, RunConfig};
use crate::dataset::{write_atomic, Dataset};

pub const REPORT_SCHEMA: &str = "vld-report/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: String,
    pub run: Value,
    pub rows: Vec<ReportRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub report: MetricReport,
}

impl ReportFile {
    pub fn new(run: Value, rows: Vec<(String, MetricReport)>) -> Self {
        let rows = rows.into_iter().map(|(method, report)| ReportRow { method, report }).collect();
        Self { schema: REPORT_SCHEMA.into(), run, rows }
    }

    pub fn table(&self) -> String {
        let rows: Vec<(String, MetricReport)> =
            self.rows.iter().map(|r| (r.method.clone(), r.report.clone())).collect();
        vld_core::metrics::render_table(&rows)
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{stem}.json")), &(serde_json::to_string_pretty(self)? + "\n"))?;
        write_atomic(&dir.join(format!("{stem}.txt")), &self.table())
    }
}

fn backend_for(cfg: &RunConfig, index: usize) -> Result<Box<dyn Backend>> {
    Ok(match cfg.backend {
        BackendKind::Oracle => {
            let noise = cfg.noise_profile()?.with_seed(derive_seed(cfg.seed, "noise", index as u64));
            Box::new(OracleBackend::new(noise)?)
        }
        BackendKind::Remote => Box::new(RemoteBackend::new(&cfg.remote()?)),
    })
}

/// Runs every task of the dataset, writes one trace per task under
/// `out/traces`, and returns the summaries in task order.
pub fn run_batch(cfg: &RunConfig, data: &Dataset, out: &Path) -> Result<Vec<EpisodeSummary>> {
    cfg.validate()?;
    let mission = cfg.mission();
    let effective = cfg.effective()?;
    let label = cfg.backend_label();
    let rig = CameraRig::default();
    let traces = out.join("traces");
    std::fs::create_dir_all(&traces).with_context(|| format!("creating {}", traces.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    pool.install(|| {
        data.tasks()
            .par_iter()
            .enumerate()
            .map(|(i, task)| {
                let mut backend = backend_for(cfg, i)?;
                let seed = derive_seed(cfg.seed, "episode", i as u64);
                let mut trace = run_episode(task, data.world(task), &rig, &mut backend, &mission, seed)
                    .with_context(|| format!("task {}", task.task_id))?;
                trace.header.backend = label.clone();
                trace.header.run = effective.clone();
                write_atomic(&traces.join(format!("{}.jsonl", task.task_id)), &trace.to_jsonl()?)?;
                Ok(summarize(&trace))
            })
            .collect()
    })
}

/// `run`: one batch, its traces and its report.
pub fn run(cfg: &RunConfig) -> Result<ReportFile> {
    let data = Dataset::load(cfg.data_dir()?)?;
    let out = cfg.out_dir()?;
    let summaries = run_batch(cfg, &data, out)?;
    let file = ReportFile::new(cfg.effective()?, vec![(method_name(cfg), report(&summaries)?)]);
    file.write(out, "report")?;
    Ok(file)
}

/// Serialized name of a unit enum value.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => String::from("?"),
    }
}

fn method_name(cfg: &RunConfig) -> String {
    format!("{}/{}/{}", tag(&cfg.viewpoint), tag(&cfg.choice), tag(&cfg.floorloc))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Study {
    /// Viewpoint strategy: ours, random, default.
    Viewpoint,
    /// Marked-point choice: backend, center-only.
    Choice,
    /// Floor localization: ours, direct-count.
    Floorloc,
}

fn variants(study: Study, base: &RunConfig) -> Vec<(String, RunConfig)> {
    use vld_core::explore::ViewpointStrategy as V;
    use vld_core::mission::{ChoiceMode as C, FloorLocMode as F};
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match study {
        Study::Viewpoint => vec![
            ("ours".into(), with(&|c| c.viewpoint = V::Ours)),
            ("random".into(), with(&|c| c.viewpoint = V::Random)),
            ("default".into(), with(&|c| c.viewpoint = V::Default)),
        ],
        Study::Choice => vec![
            ("choice".into(), with(&|c| c.choice = C::Backend)),
            ("center-only".into(), with(&|c| c.choice = C::CenterOnly)),
        ],
        Study::Floorloc => vec![
            ("ours".into(), with(&|c| c.floorloc = F::Ours)),
            ("direct-count".into(), with(&|c| c.floorloc = F::DirectCount)),
        ],
    }
}

/// `ablate`: the same dataset under each variant of a study and each seed.
/// With several seeds every variant also gets a pooled row.
pub fn ablate(base: &RunConfig, study: Study, seeds: &[u64]) -> Result<ReportFile> {
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }
    let data = Dataset::load(base.data_dir()?)?;
    let out = base.out_dir()?;
    let mut rows = Vec::new();
    let mut pooled = Vec::new();
    for (name, cfg) in variants(study, base) {
        let mut all = Vec::new();
        for &seed in seeds {
            let cfg = RunConfig { seed, ..cfg.clone() };
            let dir: PathBuf = if seeds.len() == 1 { out.join(&name) } else { out.join(format!("{name}-s{seed}")) };
            let s = run_batch(&cfg, &data, &dir)?;
            let r = report(&s)?;
            ReportFile::new(cfg.effective()?, vec![(name.clone(), r.clone())]).write(&dir, "report")?;
            let label = if seeds.len() == 1 { name.clone() } else { format!("{name} (seed {seed})") };
            rows.push((label, r));
            all.extend(s);
        }
        if seeds.len() > 1 {
            pooled.push((format!("{name} (pooled)"), report(&all)?));
        }
    }
    rows.extend(pooled);
    let mut run = base.effective()?;
    if let Value::Object(m) = &mut run {
        m.insert("study".into(), Value::from(format!("{study:?}").to_lowercase()));
        m.insert("seeds".into(), serde_json::to_value(seeds)?);
    }
    let file = ReportFile::new(run, rows);
    file.write(out, "ablation")?;
    Ok(file)
}

/// Trace files under each path, recursively, in sorted order.
fn trace_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> =
                std::fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            for e in entries {
                walk(&e, out)?;
            }
        } else if p.extension().is_some_and(|e| e == "jsonl") {
            out.push(p.to_path_buf());
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in paths {
        if !p.exists() {
            bail!("{} does not exist", p.display());
        }
        walk(p, &mut out)?;
    }
    Ok(out)
}

/// `report`: metrics recomputed from trace files. With a dataset every
/// outcome is re-derived from the world and must match the trace.
pub fn report_traces(paths: &[PathBuf], data: Option<&Path>) -> Result<ReportFile> {
    let files = trace_files(paths)?;
    if files.is_empty() {
        bail!("no trace files found");
    }
    let data = data.map(Dataset::load).transpose()?;
    let mut summaries = Vec::with_capacity(files.len());
    for f in &files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let trace = EpisodeTrace::from_jsonl(&text).with_context(|| format!("parsing {}", f.display()))?;
        if let Some(d) = &data {
            let task = d
                .tasks()
                .iter()
                .find(|t| t.task_id == trace.header.task_id)
                .with_context(|| format!("{}: task {} not in dataset", f.display(), trace.header.task_id))?;
            let outcome = classify_outcome(&trace, task, d.world(task)).with_context(|| format!("{}", f.display()))?;
            if outcome != trace.outcome() {
                bail!("{}: recorded {:?}, replay gives {:?}", f.display(), trace.outcome(), outcome);
            }
        }
        summaries.push(summarize(&trace));
    }
    let paths: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    Ok(ReportFile::new(serde_json::json!({ "traces": paths }), vec![("traces".into(), report(&summaries)?)]))
}
