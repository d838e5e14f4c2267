//! Layered settings. Each command's settings struct starts from its
//! defaults, then `VLD_<FIELD>` environment variables, then a JSON config
//! file, then command-line flags; later layers win field by field.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use vld_core::explore::{ExploreParams, ViewpointStrategy};
use vld_core::mission::{ChoiceMode, FloorLocMode, MissionConfig};
use vld_core::perception::remote::{RemoteConfig, ENV_TOKEN, ENV_URL};
use vld_core::perception::NoiseProfile;
use vld_core::tasks::{BatchParams, Difficulty, DifficultyMix};

pub const ENV_CONFIG: &str = "VLD_CONFIG";

/// Environment variables that feed a field under a different name.
const ENV_ALIASES: [(&str, &str); 2] = [(ENV_URL, "endpoint"), (ENV_TOKEN, "token")];

fn env_layer(defaults: &Map<String, Value>) -> Map<String, Value> {
    let mut out = Map::new();
    for key in defaults.keys() {
        if let Ok(raw) = std::env::var(format!("VLD_{}", key.to_uppercase())) {
            out.insert(key.clone(), scalar(&raw));
        }
    }
    for (var, key) in ENV_ALIASES {
        if defaults.contains_key(key) {
            if let Ok(raw) = std::env::var(var) {
                out.insert(key.to_string(), Value::String(raw));
            }
        }
    }
    out
}

/// Numbers and booleans parse as JSON; anything else stays text.
fn scalar(raw: &str) -> Value {
    match serde_json::from_str::<Value>(raw) {
        Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::Null)) => v,
        _ => Value::String(raw.to_string()),
    }
}

fn file_layer(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(m) => Ok(m),
        _ => bail!("config {} is not a JSON object", path.display()),
    }
}

/// Merges the layers over `T::default()` and deserializes the result.
/// `flags` serializes only the options given on the command line.
pub fn resolve<T, F>(config: Option<&Path>, flags: &F) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let Value::Object(mut merged) = serde_json::to_value(T::default())? else {
        bail!("settings must serialize to an object");
    };
    let env = env_layer(&merged);
    let config = config.map(Path::to_path_buf).or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from));
    let file = config.as_deref().map(file_layer).transpose()?.unwrap_or_default();
    let Value::Object(flags) = serde_json::to_value(flags)? else {
        bail!("flags must serialize to an object");
    };
    for layer in [env, file, flags] {
        for (k, v) in layer {
            if !merged.contains_key(&k) {
                bail!("unknown setting {k:?}");
            }
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).context("invalid settings")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Oracle,
    Remote,
}

/// Everything that determines a batch run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory written by `gen`.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub backend: BackendKind,
    /// `exact`, `calibrated`, or a path to a noise profile JSON file.
    pub noise: String,
    pub endpoint: Option<String>,
    pub token: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub viewpoint: ViewpointStrategy,
    pub choice: ChoiceMode,
    pub floorloc: FloorLocMode,
    pub step_budget: u32,
    pub delta: f64,
    pub d_max: f64,
    pub l_max: f64,
    pub slices: usize,
    pub safety_radius: f64,
    pub standoff: f64,
    pub success_radius: f64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MissionConfig::default();
        Self {
            data: None,
            out: None,
            backend: BackendKind::Oracle,
            noise: "exact".into(),
            endpoint: None,
            token: None,
            model: "default".into(),
            timeout_secs: 60,
            viewpoint: m.viewpoint,
            choice: m.choice,
            floorloc: m.floorloc_mode,
            step_budget: m.step_budget,
            delta: m.explore.delta,
            d_max: m.explore.d_max,
            l_max: m.explore.l_max,
            slices: m.explore.slices,
            safety_radius: m.explore.safety_radius,
            standoff: m.explore.standoff,
            success_radius: m.success_radius,
            seed: 0,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("d_max", self.d_max),
            ("l_max", self.l_max),
            ("safety_radius", self.safety_radius),
            ("standoff", self.standoff),
            ("success_radius", self.success_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if self.slices < 2 {
            bail!("slices must be at least 2");
        }
        if self.backend == BackendKind::Remote && self.endpoint.is_none() {
            bail!("the remote backend needs --endpoint or {ENV_URL}");
        }
        Ok(())
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data.as_deref().context("no dataset given (--data)")
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("no output directory given (--out)")
    }

    pub fn mission(&self) -> MissionConfig {
        let d = MissionConfig::default();
        MissionConfig {
            step_budget: self.step_budget,
            success_radius: self.success_radius,
            explore: ExploreParams {
                delta: self.delta,
                d_max: self.d_max,
                l_max: self.l_max,
                slices: self.slices,
                safety_radius: self.safety_radius,
                standoff: self.standoff,
                ..d.explore
            },
            floorloc_mode: self.floorloc,
            viewpoint: self.viewpoint,
            choice: self.choice,
            ..d
        }
    }

    pub fn noise_profile(&self) -> Result<NoiseProfile> {
        let p = match self.noise.as_str() {
            "exact" => NoiseProfile::exact(),
            "calibrated" => NoiseProfile::calibrated(),
            path => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading noise profile {path}"))?;
                serde_json::from_str(&text).with_context(|| format!("parsing noise profile {path}"))?
            }
        };
        p.validate()?;
        Ok(p)
    }

    pub fn remote(&self) -> Result<RemoteConfig> {
        let mut c = RemoteConfig::new(self.endpoint.clone().context("no remote endpoint")?);
        c.token = self.token.clone();
        c.model = self.model.clone();
        c.timeout_secs = self.timeout_secs;
        Ok(c)
    }

    /// Settings recorded in output headers: the run minus where it writes,
    /// how many threads it used, and the credential.
    pub fn effective(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(m) = &mut v {
            m.remove("out");
            m.remove("jobs");
            m.remove("token");
            if self.backend == BackendKind::Oracle {
                m.insert("noise_profile".into(), serde_json::to_value(self.noise_profile()?)?);
            }
        }
        Ok(v)
    }

    pub fn backend_label(&self) -> String {
        match self.backend {
            BackendKind::Oracle => format!("oracle:{}", self.noise),
            BackendKind::Remote => format!("remote:{}", self.model),
        }
    }
}

/// Dataset generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub tasks: usize,
    /// Every task targets this floor.
    pub floor: Option<u32>,
    pub min_building_floors: Option<u32>,
    /// Every task has this difficulty instead of the mix.
    pub difficulty: Option<Difficulty>,
    pub mix: DifficultyMix,
    pub buildings: usize,
    pub floors_min: u32,
    pub floors_max: u32,
    pub tasks_per_world: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        let b = BatchParams::default();
        Self {
            out: None,
            seed: 0,
            tasks: b.n_tasks,
            floor: None,
            min_building_floors: None,
            difficulty: None,
            mix: b.mix,
            buildings: b.world.num_buildings,
            floors_min: b.world.floors.0,
            floors_max: b.world.floors.1,
            tasks_per_world: b.tasks_per_world,
        }
    }
}

impl GenConfig {
    pub fn batch_params(&self) -> Result<BatchParams> {
        if self.tasks == 0 {
            bail!("tasks must be positive");
        }
        let mut p = BatchParams {
            n_tasks: self.tasks,
            mix: self.difficulty.map_or(self.mix, DifficultyMix::only),
            tasks_per_world: self.tasks_per_world,
            floor: self.floor,
            min_building_floors: self.min_building_floors,
            ..BatchParams::default()
        };
        p.world.num_buildings = self.buildings;
        p.world.floors = (self.floors_min, self.floors_max.max(self.floor.unwrap_or(0)));
        p.world.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        viewpoint: Option<String>,
    }

    #[test]
    fn later_layers_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 4, "step_budget": 12, "viewpoint": "default"}"#).unwrap();
        let c: RunConfig = resolve(Some(&path), &Flags { seed: Some(9), viewpoint: None }).unwrap();
        assert_eq!((c.seed, c.step_budget, c.viewpoint), (9, 12, ViewpointStrategy::Default));
        let c: RunConfig = resolve(Some(&path), &Flags { seed: None, viewpoint: Some("random".into()) }).unwrap();
        assert_eq!((c.seed, c.viewpoint), (4, ViewpointStrategy::Random));
    }

    #[test]
    fn typos_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"step_bugdet": 12}"#).unwrap();
        assert!(resolve::<RunConfig, _>(Some(&path), &Flags { seed: None, viewpoint: None }).is_err());
    }

    #[test]
    fn scalars_from_env_text() {
        assert_eq!(scalar("12"), Value::from(12));
        assert_eq!(scalar("ours"), Value::from("ours"));
        assert_eq!(scalar("0.5"), Value::from(0.5));
    }

    #[test]
    fn effective_config_drops_destination_and_secret() {
        let c = RunConfig { token: Some("s3cret".into()), out: Some("x".into()), ..RunConfig::default() };
        let v = c.effective().unwrap();
        assert!(v.get("token").is_none() && v.get("out").is_none() && v.get("jobs").is_none());
        assert!(v.get("noise_profile").is_some());
    }
}
