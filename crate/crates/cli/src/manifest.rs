//! Run manifests and pipeline configuration files.

use std::path::{Path, PathBuf};

use funkbqa::gateway::HttpConfig;
use funkbqa::pipeline::PipelineConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Fatal;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

/// Everything a `run` needs. Relative paths in a manifest file resolve
/// against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub backend: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FewshotConfig {
    /// Split the exemplars are drawn from.
    pub pool: Option<PathBuf>,
    pub answerable: usize,
    pub unanswerable: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieverConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub http: HttpConfig,
    /// Directory of `<id>.txt` template overrides.
    pub templates: Option<PathBuf>,
    pub fewshots: FewshotConfig,
    pub retrievers: Vec<RetrieverConfig>,
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "toml")
}

/// Parses a TOML (by extension) or JSON file.
pub fn read_structured<T: DeserializeOwned>(path: &Path, what: &str) -> Result<(T, String), Fatal> {
    let text = std::fs::read_to_string(path).map_err(|e| Fatal::new(format!("{what} {}: {e}", path.display())))?;
    let value = if is_toml(path) {
        toml::from_str(&text).map_err(|e| Fatal::new(format!("{what} {}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| Fatal::new(format!("{what} {}: {e}", path.display())))?
    };
    Ok((value, text))
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunManifest {
    /// The manifest and its verbatim text.
    pub fn load(path: &Path) -> Result<(Self, String), Fatal> {
        let (mut m, text): (RunManifest, String) = read_structured(path, "manifest")?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.config, &mut m.kb, &mut m.dataset, &mut m.mock, &mut m.out] {
            rebase(base, p);
        }
        Ok((m, text))
    }
}

/// Keys of `given` (recursively) that `known` lacks. Needed because the
/// flattened pipeline section cannot deny unknown fields itself.
fn unknown_keys(given: &serde_json::Value, known: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    if let (Some(g), Some(k)) = (given.as_object(), known.as_object()) {
        for (key, v) in g {
            let path = format!("{prefix}.{key}");
            match k.get(key) {
                Some(kv) => unknown_keys(v, kv, &path, out),
                None => out.push(path),
            }
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Fatal> {
        let (mut c, _): (Config, String) = read_structured(path, "config")?;
        let (raw, _): (serde_json::Value, String) = read_structured(path, "config")?;
        let known = serde_json::to_value(PipelineConfig::default()).expect("config serialises");
        let mut unknown = Vec::new();
        unknown_keys(&raw["pipeline"], &known, "pipeline", &mut unknown);
        if !unknown.is_empty() {
            return Err(Fatal::new(format!("config {}: unknown field {}", path.display(), unknown.join(", "))));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        rebase(base, &mut c.templates);
        rebase(base, &mut c.fewshots.pool);
        Ok(c)
    }
}
