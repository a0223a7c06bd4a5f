//! Run configuration: TOML files with `include` support, strict schema and a
//! single seed from which every section's seed is derived.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use doanet::acoustics::BankPlan;
use doanet::baselines::BaselineMethod;
use doanet::dataset::TrainingPlan;
use doanet::eval::{default_schedule, AblationConfig, DynamicConfig, ExperimentConfig, NoiseType, SourceKind};
use doanet::rng::derive_seed;
use doanet::{DoaGrid, StftParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::failure::Failure;

/// Locations inside the config where the derived seed is injected, with the
/// derivation tag of each.
const SEED_SLOTS: &[(&[&str], &[u64])] = &[
    (&["simulate"], &[1]),
    (&["train", "schedule"], &[3]),
    (&["infer", "mixture"], &[4]),
    (&["eval", "experiment"], &[5]),
    (&["ablate", "config", "train"], &[6, 0]),
    (&["ablate", "config", "experiment"], &[6, 1]),
    (&["dynamic", "scenario"], &[7]),
];

/// Seed tag of the training-set synthesis.
pub const SYNTH_TAG: u64 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub resolution: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { resolution: 5.0 }
    }
}

fn default_stft() -> StftParams {
    StftParams::half_overlap(512)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub bank: PathBuf,
    pub plan: TrainingPlan,
}

/// Topology knobs; microphone, bin and class counts come from the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub conv_filters: Vec<usize>,
    pub dense: Vec<usize>,
    pub dropout: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: PathBuf,
    pub model: ModelSection,
    pub schedule: doanet::nnet::TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    pub bank: PathBuf,
    pub room: String,
    #[serde(default)]
    pub position: usize,
    pub distance: f64,
    pub doas: Vec<f64>,
    pub snr_db: f64,
    #[serde(default = "white")]
    pub noise: NoiseType,
    #[serde(default)]
    pub source: SourceKind,
    pub seed: u64,
}

fn white() -> NoiseType {
    NoiseType::White
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferSection {
    pub model: PathBuf,
    /// Multichannel WAV recording; exclusive with `mixture`.
    #[serde(default)]
    pub wav: Option<PathBuf>,
    #[serde(default)]
    pub mixture: Option<MixtureSection>,
    /// Number of sources `L` to report.
    pub sources: usize,
    /// First frame of the block (WAV input only).
    #[serde(default)]
    pub start_frame: usize,
    /// Block length; the rest of the WAV or 50 frames of a mixture when absent.
    #[serde(default)]
    pub block_frames: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub bank: PathBuf,
    /// Trained networks by method name.
    #[serde(default)]
    pub models: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub baselines: Vec<BaselineMethod>,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainedModel {
    pub mics: usize,
    pub conv_layers: usize,
    pub model: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSection {
    pub train_bank: PathBuf,
    pub test_bank: PathBuf,
    #[serde(default)]
    pub pretrained: Vec<PretrainedModel>,
    pub config: AblationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicSection {
    pub bank: PathBuf,
    pub model: PathBuf,
    pub scenario: DynamicConfig,
}

/// The whole resolved configuration. Every command reads the shared
/// sections plus its own.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_stft")]
    pub stft: StftParams,
    #[serde(default)]
    pub simulate: Option<BankPlan>,
    #[serde(default)]
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub infer: Option<InferSection>,
    #[serde(default)]
    pub eval: Option<EvalSection>,
    #[serde(default)]
    pub ablate: Option<AblateSection>,
    #[serde(default)]
    pub dynamic: Option<DynamicSection>,
}

/// A loaded configuration and the canonical text it was parsed from.
pub struct Loaded {
    pub config: RunConfig,
    pub canonical: String,
}

impl Loaded {
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical.as_bytes()))
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<DoaGrid, Failure> {
        DoaGrid::new(self.grid.resolution).map_err(|e| Failure::config("grid.resolution", e.to_string()))
    }

    pub fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
        opt.as_ref().ok_or_else(|| Failure::config(name, format!("missing [{name}] section")))
    }
}

fn read_table(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Table, Failure> {
    let canonical = path.canonicalize().map_err(|e| Failure::input(path, format!("cannot read config: {e}")))?;
    if stack.contains(&canonical) {
        return Err(Failure::config("include", format!("include cycle through {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(path, format!("cannot read config: {e}")))?;
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Failure::config("", format!("{}: {}", path.display(), e.message())))?;
    let includes = match table.remove("include") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(Failure::config("include", "include entries must be strings")),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(Failure::config("include", "include must be an array of paths")),
    };
    stack.push(canonical);
    let base = path.parent().unwrap_or(Path::new("."));
    let mut merged = Table::new();
    for inc in includes {
        let sub = read_table(&base.join(inc), stack)?;
        merge(&mut merged, sub);
    }
    stack.pop();
    merge(&mut merged, table);
    Ok(merged)
}

/// Deep-merges `over` into `base`; tables merge key by key, anything else is
/// replaced.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn table_at<'a>(root: &'a mut Table, path: &[&str]) -> Option<&'a mut Table> {
    let mut t = root;
    for p in path {
        t = t.get_mut(*p)?.as_table_mut()?;
    }
    Some(t)
}

/// Loads `path` (with includes), applies the seed override and the derived
/// seeds, and validates the schema.
pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Loaded, Failure> {
    let mut table = read_table(path, &mut Vec::new())?;
    if let Some(seed) = seed_override {
        table.insert("seed".into(), Value::Integer(seed_to_toml(seed)?));
    }
    let seed = match table.get("seed") {
        Some(Value::Integer(s)) if *s >= 0 => *s as u64,
        Some(_) => return Err(Failure::config("seed", "seed must be an integer in 0..=2^63-1")),
        None => return Err(Failure::config("seed", "missing seed (set `seed` or pass --seed)")),
    };
    for (slot, tags) in SEED_SLOTS {
        if let Some(t) = table_at(&mut table, slot) {
            let key = slot.join(".");
            if t.contains_key("seed") {
                return Err(Failure::config(
                    &format!("{key}.seed"),
                    "section seeds are derived from the top-level seed",
                ));
            }
            t.insert("seed".into(), Value::Integer((derive_seed(seed, tags) >> 1) as i64));
        }
    }
    if let Some(t) = table_at(&mut table, &["dynamic", "scenario"]) {
        if !t.contains_key("segments") {
            let segments = Value::try_from(default_schedule()).expect("segments serialize");
            t.insert("segments".into(), segments);
        }
    }
    let canonical = toml::to_string(&table).map_err(|e| Failure::config("", e.to_string()))?;
    let config: RunConfig = serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
        let mut key = e.path().to_string();
        let msg = e.inner().to_string();
        if let Some(field) = unknown_field(&msg) {
            // the path may or may not already end at the offending key
            if key == "." {
                key = field;
            } else if key.rsplit('.').next() != Some(field.as_str()) {
                key = format!("{key}.{field}");
            }
        }
        Failure::config(&key, msg)
    })?;
    Ok(Loaded { config, canonical })
}

/// TOML integers are signed, so seeds are limited to 63 bits; derived
/// section seeds drop their lowest bit to fit.
fn seed_to_toml(seed: u64) -> Result<i64, Failure> {
    i64::try_from(seed).map_err(|_| Failure::config("seed", "seed must be an integer in 0..=2^63-1"))
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn include_merges_and_local_wins() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "shared.toml", "seed = 1\n[grid]\nresolution = 15.0\n");
        let main = write(dir.path(), "main.toml", "include = [\"shared.toml\"]\nseed = 9\n");
        let loaded = load(&main, None).unwrap();
        assert_eq!(loaded.config.seed, 9);
        assert_eq!(loaded.config.grid.resolution, 15.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let main = write(dir.path(), "main.toml", "seed = 1\n[grid]\nresolution = 15.0\nbogus = 2\n");
        let err = load(&main, None).err().unwrap();
        assert_eq!(err.key.as_deref(), Some("grid.bogus"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn seed_is_mandatory_and_overridable() {
        let dir = tempfile::tempdir().unwrap();
        let main = write(dir.path(), "main.toml", "[grid]\nresolution = 15.0\n");
        assert_eq!(load(&main, None).err().unwrap().key.as_deref(), Some("seed"));
        assert_eq!(load(&main, Some(77)).unwrap().config.seed, 77);
        assert_eq!(load(&main, Some(u64::MAX)).err().unwrap().key.as_deref(), Some("seed"));
    }

    #[test]
    fn section_seeds_are_derived_not_given() {
        let dir = tempfile::tempdir().unwrap();
        let text =
            "seed = 4\n[train]\ndataset = \"d\"\n[train.model]\nconv_filters = [8]\ndense = [8]\ndropout = 0.0\n\
                    [train.schedule]\nepochs = 1\n";
        let main = write(dir.path(), "main.toml", text);
        let loaded = load(&main, None).unwrap();
        assert_eq!(loaded.config.train.unwrap().schedule.seed, derive_seed(4, &[3]) >> 1);
        let bad = write(dir.path(), "bad.toml", &format!("{text}seed = 3\n"));
        assert_eq!(load(&bad, None).err().unwrap().key.as_deref(), Some("train.schedule.seed"));
    }

    #[test]
    fn include_cycle_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.toml", "include = [\"b.toml\"]\nseed = 1\n");
        let b = write(dir.path(), "b.toml", "include = [\"a.toml\"]\n");
        assert!(load(&b, None).err().unwrap().message.contains("cycle"));
    }

    #[test]
    fn canonical_text_tracks_seed() {
        let dir = tempfile::tempdir().unwrap();
        let main = write(dir.path(), "main.toml", "seed = 1\n");
        let a = load(&main, None).unwrap().sha256();
        assert_eq!(a, load(&main, None).unwrap().sha256());
        assert_ne!(a, load(&main, Some(2)).unwrap().sha256());
    }
}
