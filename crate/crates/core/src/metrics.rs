//! Batch metrics: success rate, success weighted by path length, average
//! steps over successes, floor-localization and recognition failure rates,
//! and the vertex-path shortest distance SPL is measured against.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floorloc::{fl_failed, FL_FAIL_THRESHOLD};
use crate::geometry::{convex_hull, ray_convex_interval, Vec2, Vec3};
use crate::mission::{EpisodeTrace, Outcome};
use crate::tasks::Difficulty;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("task {0}: success with zero traveled path but positive shortest path")]
    ZeroPath(String),
    #[error("no episodes")]
    Empty,
}

fn straight_is_clear(s: Vec2, g: Vec2, poly: &[Vec2]) -> bool {
    let len = s.dist(g);
    if len < 1e-12 {
        return true;
    }
    let dir = (g - s) * (1.0 / len);
    match ray_convex_interval(s, dir, poly) {
        None => true,
        Some((t0, t1)) => {
            let (a, b) = (t0.max(0.0), t1.min(len));
            b - a <= 1e-9
        }
    }
}

/// Horizontal shortest path from `s` to `g` around a convex footprint: the
/// straight segment when it clears the footprint, else the shorter of the
/// two hull chains through the footprint's vertices.
pub fn shortest_horizontal(s: Vec2, g: Vec2, footprint: &[Vec2]) -> f64 {
    if straight_is_clear(s, g, footprint) {
        return s.dist(g);
    }
    let mut pts = footprint.to_vec();
    pts.push(s);
    pts.push(g);
    let hull = convex_hull(&pts);
    let (Some(i), Some(j)) = (hull.iter().position(|&p| p == s), hull.iter().position(|&p| p == g)) else {
        return s.dist(g);
    };
    let n = hull.len();
    let chain = |from: usize, to: usize| {
        let mut len = 0.0;
        let mut k = from;
        while k != to {
            len += hull[k].dist(hull[(k + 1) % n]);
            k = (k + 1) % n;
        }
        len
    };
    chain(i, j).min(chain(j, i))
}

/// Horizontal vertex path plus one vertical leg.
pub fn shortest_path_length(start: Vec3, goal: Vec3, footprint: &[Vec2]) -> f64 {
    shortest_horizontal(start.xy(), goal.xy(), footprint) + (goal.z - start.z).abs()
}

/// Metric-relevant facts of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub task_id: String,
    pub difficulty: Difficulty,
    pub min_turns: u32,
    pub outcome: Outcome,
    pub steps_used: u32,
    pub path_length: f64,
    pub shortest_path: f64,
    /// `None` when floor localization aborted or never ran.
    pub h_final: Option<f64>,
    pub h_target: Option<f64>,
    pub claims: u32,
    pub wrong_claims: u32,
}

impl EpisodeSummary {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    /// Aborted localization counts as a failure.
    pub fn fl_failed(&self) -> Option<bool> {
        let target = self.h_target?;
        Some(self.h_final.is_none_or(|h| fl_failed(h, target, FL_FAIL_THRESHOLD)))
    }
}

pub fn summarize(t: &EpisodeTrace) -> EpisodeSummary {
    let claims: Vec<_> = t.claims().collect();
    EpisodeSummary {
        task_id: t.header.task_id.clone(),
        difficulty: t.header.task.difficulty,
        min_turns: t.header.task.min_turns,
        outcome: t.footer.outcome,
        steps_used: t.footer.steps_used,
        path_length: t.footer.path_length,
        shortest_path: t.footer.shortest_path,
        h_final: t.ascend.as_ref().and_then(|a| a.h_final()),
        h_target: t.ascend.as_ref().map(|a| a.h_target),
        claims: claims.len() as u32,
        wrong_claims: claims.iter().filter(|c| !c.correct).count() as u32,
    }
}

pub fn compute_sr(eps: &[EpisodeSummary]) -> Result<f64, MetricError> {
    if eps.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(eps.iter().filter(|e| e.success()).count() as f64 / eps.len() as f64)
}

/// Mean of S_i * l_i / max(p_i, l_i).
pub fn compute_spl(eps: &[EpisodeSummary]) -> Result<f64, MetricError> {
    if eps.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sum = 0.0;
    for e in eps.iter().filter(|e| e.success()) {
        if e.shortest_path <= 0.0 {
            sum += 1.0;
            continue;
        }
        if e.path_length <= 0.0 {
            return Err(MetricError::ZeroPath(e.task_id.clone()));
        }
        sum += e.shortest_path / e.path_length.max(e.shortest_path);
    }
    Ok(sum / eps.len() as f64)
}

/// Mean steps over successful episodes; `None` without successes.
pub fn compute_avg_steps(eps: &[EpisodeSummary]) -> Option<f64> {
    let s: Vec<f64> = eps.iter().filter(|e| e.success()).map(|e| f64::from(e.steps_used)).collect();
    (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
}

/// Share of episodes with a positive recognition claim in which some claim
/// named a non-target window.
pub fn or_fail_rate(eps: &[EpisodeSummary]) -> Option<f64> {
    let claimed: Vec<_> = eps.iter().filter(|e| e.claims > 0).collect();
    (!claimed.is_empty()).then(|| claimed.iter().filter(|e| e.wrong_claims > 0).count() as f64 / claimed.len() as f64)
}

/// Share of episodes with a localization record whose final height misses
/// the target floor by more than the threshold.
pub fn fl_fail_rate(eps: &[EpisodeSummary]) -> Option<f64> {
    let flags: Vec<bool> = eps.iter().filter_map(|e| e.fl_failed()).collect();
    (!flags.is_empty()).then(|| flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub n_tasks: usize,
    pub sr: f64,
    pub spl: f64,
    pub avg_steps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_tasks: usize,
    pub sr: f64,
    pub spl: f64,
    pub avg_steps: Option<f64>,
    pub fl_fail_rate: Option<f64>,
    pub or_fail_rate: Option<f64>,
    pub outcomes: BTreeMap<Outcome, usize>,
    pub by_difficulty: BTreeMap<Difficulty, Breakdown>,
    /// How the SPL reference path treats altitude.
    pub shortest_path_rule: String,
}

pub const SHORTEST_PATH_RULE: &str = "horizontal vertex path around the target footprint plus one vertical leg";

pub fn report(eps: &[EpisodeSummary]) -> Result<MetricReport, MetricError> {
    let mut outcomes = BTreeMap::new();
    for e in eps {
        *outcomes.entry(e.outcome).or_insert(0) += 1;
    }
    let mut by_difficulty = BTreeMap::new();
    for d in Difficulty::ALL {
        let sub: Vec<EpisodeSummary> = eps.iter().filter(|e| e.difficulty == d).cloned().collect();
        if sub.is_empty() {
            continue;
        }
        by_difficulty.insert(
            d,
            Breakdown {
                n_tasks: sub.len(),
                sr: compute_sr(&sub)?,
                spl: compute_spl(&sub)?,
                avg_steps: compute_avg_steps(&sub),
            },
        );
    }
    Ok(MetricReport {
        n_tasks: eps.len(),
        sr: compute_sr(eps)?,
        spl: compute_spl(eps)?,
        avg_steps: compute_avg_steps(eps),
        fl_fail_rate: fl_fail_rate(eps),
        or_fail_rate: or_fail_rate(eps),
        outcomes,
        by_difficulty,
        shortest_path_rule: SHORTEST_PATH_RULE.to_string(),
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", x * 100.0))
}

/// Aligned plain-text table, one row per labelled report.
pub fn render_table(rows: &[(String, MetricReport)]) -> String {
    let header = ["Method", "Tasks", "SR (%)", "SPL (%)", "Average Steps", "FL fail (%)", "OR fail (%)"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (name, r) in rows {
        cells.push(vec![
            name.clone(),
            r.n_tasks.to_string(),
            pct(Some(r.sr)),
            pct(Some(r.spl)),
            r.avg_steps.map_or_else(|| "-".to_string(), |s| format!("{s:.2}")),
            pct(r.fl_fail_rate),
            pct(r.or_fail_rate),
        ]);
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}
