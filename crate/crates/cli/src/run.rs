//! Run directory, stage stamps and the timestamped log.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const RESOLVED_CONFIG: &str = "resolved-config.toml";
pub const LOG_FILE: &str = "run.log";
const STAMP_DIR: &str = "stamps";

/// Whether a stage did work or found its outputs current.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    UpToDate,
}

/// Input digest and output hashes of a completed stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Stamp {
    stage: String,
    input_hash: String,
    outputs: BTreeMap<String, String>,
}

/// One experiment directory with a single writer.
pub struct Run {
    pub cfg: RunConfig,
    pub dir: PathBuf,
    echo: bool,
}

impl Run {
    /// Creates the directory and records the resolved configuration.
    pub fn open(cfg: RunConfig, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let run = Self { cfg, dir, echo: true };
        let resolved = run.cfg.to_toml()?;
        let path = run.path(RESOLVED_CONFIG);
        if std::fs::read_to_string(&path).ok().as_deref() != Some(resolved.as_str()) {
            std::fs::write(&path, resolved)?;
        }
        Ok(run)
    }

    /// Suppresses notices on stdout; the log file still receives them.
    pub fn quiet(mut self) -> Self {
        self.echo = false;
        self
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn notice(&self, msg: &str) {
        if self.echo {
            println!("{msg}");
        }
        self.log(msg);
    }

    /// Appends to the log file. Timestamps appear only here.
    pub fn log(&self, msg: &str) {
        let line = format!("{} {msg}\n", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(self.path(LOG_FILE)) {
            let _ = f.write_all(line.as_bytes());
        }
    }

    /// Fails with an actionable message when `rel` has not been produced.
    pub fn require(&self, rel: &str, producer: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if !path.exists() {
            bail!("{} is missing; run `modeldna {producer}` first", path.display());
        }
        Ok(path)
    }

    /// Hash identifying the completed state of `stage`, for use as an input
    /// of downstream stages.
    pub fn stamp_hash(&self, stage: &str) -> Result<String> {
        let bytes = std::fs::read(self.stamp_path(stage))
            .with_context(|| format!("stage {stage} has not completed; run `modeldna {stage}` first"))?;
        Ok(modeldna::content_hash(&bytes))
    }

    fn stamp_path(&self, stage: &str) -> PathBuf {
        self.path(STAMP_DIR).join(format!("{stage}.json"))
    }

    fn current_stamp(&self, stage: &str, input_hash: &str) -> Option<Stamp> {
        let stamp: Stamp = serde_json::from_slice(&std::fs::read(self.stamp_path(stage)).ok()?).ok()?;
        if stamp.input_hash != input_hash {
            return None;
        }
        let intact = stamp
            .outputs
            .iter()
            .all(|(rel, hash)| std::fs::read(self.path(rel)).is_ok_and(|b| &modeldna::content_hash(&b) == hash));
        intact.then_some(stamp)
    }

    /// Runs `body` unless a stamp shows the same inputs already produced the
    /// current outputs. `body` returns the run-relative paths it wrote.
    pub fn stage<F>(&self, stage: &str, inputs: &[(&str, String)], body: F) -> Result<Outcome>
    where
        F: FnOnce() -> Result<Vec<String>>,
    {
        let mut digest = format!("stage={stage}\n");
        for (label, value) in inputs {
            digest.push_str(&format!("{label}={value}\n"));
        }
        let input_hash = modeldna::content_hash(digest.as_bytes());
        if self.current_stamp(stage, &input_hash).is_some() {
            self.notice(&format!("{stage}: inputs unchanged, nothing to do"));
            return Ok(Outcome::UpToDate);
        }
        self.log(&format!("{stage}: started"));
        let written = body()?;
        let mut outputs = BTreeMap::new();
        for rel in written {
            let bytes = std::fs::read(self.path(&rel)).with_context(|| format!("stage {stage} did not write {rel}"))?;
            outputs.insert(rel, modeldna::content_hash(&bytes));
        }
        let stamp = Stamp {
            stage: stage.to_string(),
            input_hash,
            outputs,
        };
        std::fs::create_dir_all(self.path(STAMP_DIR))?;
        std::fs::write(self.stamp_path(stage), to_json(&stamp)?)?;
        self.log(&format!("{stage}: finished"));
        Ok(Outcome::Ran)
    }

    /// Writes pretty JSON under the run directory and returns `rel`.
    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<String> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, to_json(value)?)?;
        Ok(rel.to_string())
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let path = self.path(rel);
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    /// Creates the parent directory of `rel` and returns its full path.
    pub fn prepare(&self, rel: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(path)
    }
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions, so output is stable.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
