//! Output artifacts. Every file carries the config hash and seed; JSON files
//! also carry the full config.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Everything that determines a command's output. Paths are replaced by
/// content digests so that moving inputs around does not change the hash.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub seed: u64,
    pub scale: f64,
    pub params: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(command: &str, seed: u64, scale: f64) -> Self {
        ExperimentConfig {
            command: command.to_string(),
            seed,
            scale,
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameters serialize");
        self.params.insert(key.to_string(), v);
    }

    pub fn input(&mut self, key: &str, path: &Path) -> Result<(), Failure> {
        let bytes =
            fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        self.inputs
            .insert(key.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub struct Artifacts {
    dir: PathBuf,
    config: ExperimentConfig,
    hash: String,
    written: RefCell<Vec<String>>,
}

impl Artifacts {
    pub fn new(dir: &Path, config: ExperimentConfig) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            hash: config.hash(),
            config,
            written: RefCell::new(Vec::new()),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        self.written.borrow_mut().push(name.to_string());
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }

    /// Write a file whose format embeds provenance itself.
    pub fn raw<F>(&self, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush().map_err(io_failure)
    }

    /// CSV with two leading `#` provenance lines.
    pub fn csv<F>(&self, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    {
        self.raw(name, |w| {
            writeln!(w, "# config_hash={} seed={}", self.hash, self.config.seed)
                .map_err(io_failure)?;
            writeln!(w, "# config={}", self.config.to_value()).map_err(io_failure)?;
            f(w)
        })
    }

    pub fn json(&self, name: &str, result: impl Serialize) -> Result<(), Failure> {
        let doc = json!({
            "config_hash": self.hash,
            "seed": self.config.seed,
            "config": self.config.to_value(),
            "result": result,
        });
        self.raw(name, |w| {
            serde_json::to_writer_pretty(&mut *w, &doc)
                .map_err(|e| Failure::data(e.to_string()))?;
            writeln!(w).map_err(io_failure)
        })
    }

    /// Directives for edge-list outputs.
    pub fn directives(&self) -> Vec<(&'static str, String)> {
        vec![
            ("config_hash", self.hash.clone()),
            ("seed", self.config.seed.to_string()),
            ("config", self.config.to_value().to_string()),
        ]
    }

    /// Close out with `manifest.json` listing every file written.
    pub fn finish(self, summary: impl Serialize) -> Result<(), Failure> {
        let files = self.written.borrow().clone();
        self.json(
            "manifest.json",
            json!({ "files": files, "summary": summary }),
        )
    }
}

pub fn io_failure(e: std::io::Error) -> Failure {
    Failure::data(e.to_string())
}
