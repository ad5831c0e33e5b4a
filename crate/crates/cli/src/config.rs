//! `config.txt`: INI sections INPUT, OUTPUT, SETUP, TRAIN, MODEL and EVAL.
//!
//! Absent keys take defaults. Unknown keys are warned about, unknown sections
//! (such as a fine-tuning `[HF]` block) are skipped, and keys that only mean
//! something to neural-network training parse as inert values with a warning.

use std::fs;
use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption};
use pageclass::forest::ForestConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("invalid value {value:?} for {key}")]
    InvalidValue { key: String, value: String },
}

/// Keys a fine-tuning config carries that have no meaning for a forest.
const INERT_KEYS: &[&str] = &[
    "lr",
    "learning_rate",
    "epochs",
    "weight_decay",
    "warmup",
    "warmup_steps",
    "log_step",
    "save_steps",
    "freeze",
    "grad_accum",
    "base_model",
    "model_name",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub input_dir: Option<PathBuf>,
    pub results_dir: PathBuf,
    pub model_dir: PathBuf,
    pub viz_dir: PathBuf,
    pub batch_size: usize,
    pub top_n: usize,
    pub workers: Option<usize>,
    /// Per-category directory tree, or an annotation CSV paired with `image_root`.
    pub dataset_path: Option<PathBuf>,
    pub image_root: Option<PathBuf>,
    pub eval_ratio: f64,
    pub max_categ: Option<usize>,
    pub max_categ_eval: Option<usize>,
    pub forest: ForestConfig,
    pub hierarchical: bool,
    pub model_path: Option<PathBuf>,
    pub eval_dir: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            results_dir: PathBuf::from("results"),
            model_dir: PathBuf::from("models"),
            viz_dir: PathBuf::from("results"),
            batch_size: 32,
            top_n: 3,
            workers: None,
            dataset_path: None,
            image_root: None,
            eval_ratio: 0.1,
            max_categ: None,
            max_categ_eval: None,
            forest: ForestConfig {
                seed: 42,
                ..ForestConfig::default()
            },
            hierarchical: false,
            model_path: None,
            eval_dir: None,
        }
    }
}

fn invalid(key: &str, value: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn positive(key: &str, v: &str) -> Result<usize, ConfigError> {
    match v.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(invalid(key, v)),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(invalid(key, v)),
    }
}

/// `none`/`unlimited` clear an optional limit.
fn limit(key: &str, v: &str) -> Result<Option<usize>, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "none" | "unlimited" => Ok(None),
        _ => positive(key, v).map(Some),
    }
}

impl AppConfig {
    /// Applies one `key = value` pair. Returns a warning for unknown or inert keys.
    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<Option<String>, ConfigError> {
        let path = || Some(PathBuf::from(v));
        match (section, key) {
            ("INPUT", "directory") => self.input_dir = path(),
            ("OUTPUT", "results_dir") => self.results_dir = PathBuf::from(v),
            ("OUTPUT", "model_dir") => self.model_dir = PathBuf::from(v),
            ("OUTPUT", "viz_dir") => self.viz_dir = PathBuf::from(v),
            ("SETUP", "batch_size") => self.batch_size = positive(key, v)?,
            ("SETUP", "top_n") => self.top_n = positive(key, v)?,
            ("SETUP", "workers") => self.workers = Some(positive(key, v)?),
            ("TRAIN", "dataset_path") => self.dataset_path = path(),
            ("TRAIN", "image_root") => self.image_root = path(),
            ("TRAIN", "eval_ratio") => {
                self.eval_ratio = match v.parse::<f64>() {
                    Ok(r) if r > 0.0 && r < 1.0 => r,
                    _ => return Err(invalid(key, v)),
                }
            }
            ("TRAIN", "seed") => self.forest.seed = v.parse().map_err(|_| invalid(key, v))?,
            ("TRAIN", "max_categ") => self.max_categ = limit(key, v)?,
            ("TRAIN" | "EVAL", "max_categ_eval") => self.max_categ_eval = limit(key, v)?,
            ("TRAIN", "n_trees") => self.forest.n_trees = positive(key, v)?,
            ("TRAIN", "max_depth") => self.forest.max_depth = limit(key, v)?,
            ("TRAIN", "min_samples_leaf") => self.forest.min_samples_leaf = positive(key, v)?,
            ("TRAIN", "features_per_split") => self.forest.features_per_split = limit(key, v)?,
            ("TRAIN", "bootstrap") => self.forest.bootstrap = boolean(key, v)?,
            ("TRAIN", "class_weighting") => self.forest.class_weighting = boolean(key, v)?,
            ("TRAIN", "hierarchical") => self.hierarchical = boolean(key, v)?,
            ("MODEL", "kind") if v.eq_ignore_ascii_case("rfc") => {}
            ("MODEL", "kind") => return Err(invalid(key, v)),
            ("MODEL", "model_path") => self.model_path = path(),
            ("EVAL", "eval_dir") => self.eval_dir = path(),
            (_, k) if INERT_KEYS.contains(&k) => {
                return Ok(Some(format!("[{section}] {key} has no effect on forest training")));
            }
            _ => return Ok(Some(format!("unknown key {key} in [{section}]"))),
        }
        Ok(None)
    }
}

const SECTIONS: [&str; 6] = ["INPUT", "OUTPUT", "SETUP", "TRAIN", "MODEL", "EVAL"];

/// rust-ini reads an unclosed `[` across newlines, so shape errors are caught
/// here first to report the offending line itself.
fn check_lines(text: &str) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let ok = line.is_empty()
            || line.starts_with('#')
            || line.starts_with(';')
            || (line.starts_with('[') && line.ends_with(']') && line.len() > 2)
            || (!line.starts_with('[') && line.contains('='));
        if !ok {
            return Err(ConfigError::MalformedLine {
                line: i + 1,
                msg: format!("expected [SECTION] or key=value, found {line:?}"),
            });
        }
    }
    Ok(())
}

/// Parses config text; the second value lists warnings for the caller to log.
pub fn parse_config_str(text: &str) -> Result<(AppConfig, Vec<String>), ConfigError> {
    check_lines(text)?;
    let opt = ParseOption {
        enabled_quote: false,
        enabled_escape: false,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_str_opt(text, opt).map_err(|e| ConfigError::MalformedLine {
        line: e.line + 1,
        msg: e.msg.to_string(),
    })?;
    let mut cfg = AppConfig::default();
    let mut warnings = Vec::new();
    for (section, props) in ini.iter() {
        let Some(section) = section.map(str::to_ascii_uppercase) else {
            warnings.extend(props.iter().map(|(k, _)| format!("key {k} outside any section ignored")));
            continue;
        };
        if !SECTIONS.contains(&section.as_str()) {
            continue;
        }
        for (key, value) in props.iter() {
            let value = value.trim();
            if value.is_empty() {
                continue;
            }
            if let Some(w) = cfg.set(&section, &key.trim().to_ascii_lowercase(), value)? {
                warnings.push(w);
            }
        }
    }
    Ok((cfg, warnings))
}

pub fn parse_config(path: &Path) -> Result<(AppConfig, Vec<String>), ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}
