//! Layering of presets, TOML files and command-line overrides.

use std::path::{Path, PathBuf};

use goi_core::pipeline::PipelineConfig;
use toml::Value;

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(String),
    Core(goi_core::Error),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(msg) => write!(f, "invalid configuration: {msg}"),
            ConfigError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<goi_core::Error> for ConfigError {
    fn from(e: goi_core::Error) -> Self {
        ConfigError::Core(e)
    }
}

/// Recursively overlay `top` onto `base`. Tables merge key by key, anything
/// else is replaced.
pub fn deep_merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Table(b), Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parse a config document layered over a preset.
///
/// A top-level `preset` key picks the base unless `preset_override` is
/// given. Relative paths in the document resolve against `base_dir`.
pub fn layered(
    text: &str,
    preset_override: Option<&str>,
    base_dir: &Path,
) -> Result<PipelineConfig, ConfigError> {
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let named = match doc.remove("preset") {
        Some(Value::String(s)) => Some(s),
        Some(other) => {
            return Err(ConfigError::Parse(format!(
                "preset must be a string, got {}",
                other.type_str()
            )))
        }
        None => None,
    };
    let preset = preset_override
        .map(str::to_string)
        .or(named)
        .unwrap_or_else(|| "hering".into());
    let mut base = preset_value(&preset)?;
    deep_merge(&mut base, Value::Table(doc));
    let mut cfg: PipelineConfig = base
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    if let Some(input) = &mut cfg.input {
        input.path = anchor(base_dir, &input.path);
    }
    cfg.output_dir = anchor(base_dir, &cfg.output_dir);
    Ok(cfg)
}

pub fn load(path: &Path, preset_override: Option<&str>) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.into(), e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    layered(&text, preset_override, dir)
}

fn preset_value(name: &str) -> Result<Value, ConfigError> {
    let cfg = PipelineConfig::preset(name)?;
    Value::try_from(&cfg).map_err(|e| ConfigError::Parse(e.to_string()))
}

fn anchor(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || dir.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}
