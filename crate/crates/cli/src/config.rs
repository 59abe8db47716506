use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabsynth::attacks::{AttributeAttackConfig, MembershipAttackConfig};
use tabsynth::gan::TrainConfig;
use tabsynth::ml::ModelKind;
use tabsynth::privacy::PrivacySpec;

use crate::error::CliError;

/// One experiment: inputs, seed and every module's settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<PathBuf>,
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub privacy: Option<PrivacySpec>,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub attack: AttackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub similarity: bool,
    pub distance: bool,
    /// Held-out real rows; utility is skipped without them.
    pub test_data: Option<PathBuf>,
    pub models: Vec<ModelKind>,
    /// Min-max scale Wasserstein distances by the real range.
    pub normalize_wd: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            similarity: true,
            distance: true,
            test_data: None,
            models: ModelKind::ALL.to_vec(),
            normalize_wd: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackTarget {
    Membership,
    Attribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Gan,
    DpGan,
    Replay,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackTarget,
    pub generator: GeneratorKind,
    /// Rows the attacker's reference set is drawn from.
    pub reference_rows: usize,
    /// Held-out rows attacked one at a time.
    pub targets: usize,
    pub membership: MembershipAttackConfig,
    /// Column the attribute attack predicts.
    pub sensitive: Option<String>,
    pub attribute: AttributeAttackConfig,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            kind: AttackTarget::Membership,
            generator: GeneratorKind::Gan,
            reference_rows: 400,
            targets: 5,
            membership: MembershipAttackConfig::default(),
            sensitive: None,
            attribute: AttributeAttackConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub schema: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

/// A validated config with its mandatory fields resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    /// Present when the command reads the training table.
    pub inputs: Option<(PathBuf, PathBuf)>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Resolved {
    /// SHA-256 of the effective config, excluding the output directory.
    pub fn hash(&self) -> String {
        config_hash(&self.config)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("output_dir");
    }
    let text = serde_json::to_string(&v).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig {
            schema: None,
            data: None,
            output_dir: None,
            seed: None,
            train: TrainConfig::default(),
            privacy: None,
            evaluate: EvaluateConfig::default(),
            attack: AttackConfig::default(),
        });
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

fn existing(label: &str, p: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let p = p.ok_or_else(|| CliError::Config(format!("no {label} path given")))?;
    if !p.exists() {
        return Err(CliError::Config(format!("{label} path {} does not exist", p.display())));
    }
    Ok(p)
}

/// Applies overrides and checks that a seed is set and, when `inputs`
/// is requested, that the schema and data paths exist.
pub fn resolve(mut config: RunConfig, o: Overrides, default_out: PathBuf, inputs: bool) -> Result<Resolved, CliError> {
    config.schema = o.schema.or(config.schema);
    config.data = o.data.or(config.data);
    config.output_dir = o.output_dir.or(config.output_dir);
    config.seed = o.seed.or(config.seed);
    if let Some(e) = o.epochs {
        config.train.epochs = e;
    }
    if let Some(b) = o.batch_size {
        config.train.batch_size = b;
    }
    let seed = config
        .seed
        .ok_or_else(|| CliError::Config("a seed is required (config `seed` or --seed)".into()))?;
    config.train.seed = seed;
    config.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let inputs = if inputs {
        Some((
            existing("schema", config.schema.clone())?,
            existing("data", config.data.clone())?,
        ))
    } else {
        None
    };
    if let Some(t) = &config.evaluate.test_data {
        existing("test data", Some(t.clone()))?;
    }
    let output_dir = config.output_dir.clone().unwrap_or(default_out);
    Ok(Resolved {
        config,
        inputs,
        output_dir,
        seed,
    })
}
