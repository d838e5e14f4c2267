use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{Context, Result};
use vld_core::tasks::{generate_batch, TaskBatch};
use vld_core::world::Category;

use crate::config::GenConfig;
use crate::dataset;

/// Writes the dataset and returns the statistics text.
pub fn gen(cfg: &GenConfig) -> Result<String> {
    let out = cfg.out.as_deref().context("no output directory given (--out)")?;
    let params = cfg.batch_params()?;
    let batch = generate_batch(cfg.seed, &params)?;
    dataset::save(out, cfg.seed, params, &batch)?;
    Ok(statistics(&batch))
}

fn histogram<K: Ord + std::fmt::Display>(title: &str, counts: &BTreeMap<K, usize>, total: usize) -> String {
    let mut s = format!("{title}\n");
    for (k, &n) in counts {
        let bar = "#".repeat((n * 40).div_ceil(total.max(1)));
        let _ = writeln!(s, "  {k:>10} {n:>5}  {bar}");
    }
    s
}

pub fn statistics(batch: &TaskBatch) -> String {
    let n = batch.tasks.len();
    let mut category: BTreeMap<String, usize> =
        Category::ALL.iter().map(|c| (format!("{c:?}").to_lowercase(), 0)).collect();
    let mut floor: BTreeMap<u32, usize> = BTreeMap::new();
    let mut difficulty: BTreeMap<String, usize> = BTreeMap::new();
    for t in &batch.tasks {
        *category.entry(format!("{:?}", t.target_object.category).to_lowercase()).or_default() += 1;
        *floor.entry(t.target_floor).or_default() += 1;
        *difficulty.entry(t.difficulty.name().to_string()).or_default() += 1;
    }
    let mut s = format!("{n} tasks in {} worlds\n", batch.worlds.len());
    s += &histogram("target object category", &category, n);
    s += &histogram("target floor", &floor, n);
    s += &histogram("difficulty", &difficulty, n);
    s
}
