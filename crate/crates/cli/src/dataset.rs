//! On-disk dataset: `tasks.json` plus one world file per generated world.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use vld_core::tasks::{TaskBatch, TaskFile, TaskSpec};
use vld_core::world::{generate_world, WorldModel};

pub const TASKS_FILE: &str = "tasks.json";

/// Writes `text` next to `path` and renames it into place, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn world_file_name(k: usize) -> String {
    format!("worlds/w{k:04}.json")
}

/// Saves a generated batch; tasks point at their world files.
pub fn save(dir: &Path, root_seed: u64, params: vld_core::tasks::BatchParams, batch: &TaskBatch) -> Result<()> {
    let mut names = HashMap::new();
    for (k, w) in batch.worlds.iter().enumerate() {
        let name = world_file_name(k);
        write_atomic(&dir.join(&name), &w.to_json()?)?;
        names.insert(w.seed, name);
    }
    let tasks: Vec<TaskSpec> = batch
        .tasks
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.world.file = names.get(&t.world.seed).cloned();
            t
        })
        .collect();
    write_atomic(&dir.join(TASKS_FILE), &TaskFile::new(root_seed, params, tasks).to_json()?)
}

pub struct Dataset {
    pub file: TaskFile,
    worlds: HashMap<u64, WorldModel>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(TASKS_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file = TaskFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut worlds = HashMap::new();
        for t in &file.tasks {
            if worlds.contains_key(&t.world.seed) {
                continue;
            }
            let w = match &t.world.file {
                Some(name) => {
                    let p = dir.join(name);
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    WorldModel::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => generate_world(t.world.seed, &file.params.world)?,
            };
            worlds.insert(t.world.seed, w);
        }
        Ok(Self { file, worlds })
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.file.tasks
    }

    pub fn world(&self, t: &TaskSpec) -> &WorldModel {
        &self.worlds[&t.world.seed]
    }
}
