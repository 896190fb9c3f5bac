use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub software: Software,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_seconds: f64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub threads: usize,
}

/// Collects everything a run writes into its output directory.
pub struct Run {
    out_dir: PathBuf,
    command: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    extra: serde_json::Value,
    started: Instant,
    started_at: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl Run {
    pub fn start<C: Serialize>(out_dir: &Path, command: &str, config: &C) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            config: serde_json::to_value(config).map_err(|e| CliError::Data(e.to_string()))?,
            seeds: Vec::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            extra: serde_json::Value::Null,
            started: Instant::now(),
            started_at: now(),
        })
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), format!("sha256:{digest}"));
        Ok(())
    }

    pub fn extra(&mut self, value: serde_json::Value) {
        self.extra = value;
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> CliResult<()> {
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            software: Software {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                rng: mobwds::sampling::RNG_ALGORITHM,
                threads: rayon::current_num_threads(),
            },
            started_at: self.started_at,
            finished_at: now(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            inputs: self.inputs,
            outputs: self.outputs,
            extra: self.extra,
        };
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
