//! Job specification, config hash and artifact writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the output directory of every job.
pub const OUT_ENV: &str = "CURVKIT_OUT";
pub const DEFAULT_OUT: &str = "curvkit-out";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub command: String,
    /// Named input files (`metric`, `mesh`, `h`, ...).
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl JobSpec {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), seed: DEFAULT_SEED, ..Default::default() }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed job file: {e}")))
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.into(), v.into());
        self
    }

    pub fn input(mut self, key: &str, path: impl Into<PathBuf>) -> Self {
        self.inputs.insert(key.into(), path.into());
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        for (k, p) in &self.inputs {
            if !p.is_file() {
                return Err(CliError::Io(format!("input `{k}`: {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (output directory excluded)
    /// followed by the bytes of every input file.
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = None;
        let text = serde_json::to_string(&canon).expect("job specs serialize");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        for (k, p) in &self.inputs {
            h.update(k.as_bytes());
            if let Ok(bytes) = fs::read(p) {
                h.update(Sha256::digest(&bytes));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(env);
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn get_str(&self, key: &str) -> CliResult<Option<String>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(v) => Err(CliError::Usage(format!("parameter `{key}` must be a string, got {v}"))),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> CliResult<String> {
        Ok(self.get_str(key)?.unwrap_or_else(|| default.to_string()))
    }

    pub fn get_f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| CliError::Usage(format!("parameter `{key}` must be a number, got {v}"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| CliError::Usage(format!("parameter `{key}` must be a non-negative integer, got {v}"))),
        }
    }
}

/// Writes the artifacts of one job, each stamped with the config hash.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    pub written: Vec<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Artifacts {
    pub fn create(job: &JobSpec) -> CliResult<Self> {
        let dir = job.out_dir();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self { dir, hash: job.config_hash(), written: vec![] })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// JSON report: the job, its hash and the command result.
    pub fn report(&mut self, name: &str, job: &JobSpec, result: &impl Serialize) -> CliResult<PathBuf> {
        let doc = serde_json::json!({
            "command": job.command,
            "config_hash": self.hash,
            "job": { "inputs": job.inputs, "params": job.params, "seed": job.seed },
            "result": result,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        self.text(name, &text)
    }

    /// CSV with a `# config_hash=` comment line before the header.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<PathBuf> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        let mut text = format!("# config_hash={}\n", self.hash);
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        self.text(name, &text)
    }

    pub fn text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Reads a CSV written by [`Artifacts::csv`] (comment lines skipped).
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("{}: `{s}`: {e}", path.display()))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
