use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes result files into one directory, each stamped with the tool
/// version and the resolved config.
pub struct OutputDir {
    dir: PathBuf,
    config: Value,
    seed: Option<u64>,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, config: &ExperimentConfig, seed: Option<u64>) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let config = serde_json::to_value(config).expect("config serializes");
        Ok(Self { dir: dir.to_path_buf(), config, seed, written: Vec::new() })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.written.push(path.clone());
        Ok((path, BufWriter::new(f)))
    }

    pub fn json(&mut self, name: &str, result: Value) -> Result<(), CliError> {
        let mut doc = json!({ "tool": "pdd", "version": VERSION, "config": self.config, "result": result });
        if let Some(s) = self.seed {
            doc["seed"] = json!(s);
        }
        let (path, mut w) = self.open(name)?;
        let text = serde_json::to_string_pretty(&doc).expect("document serializes");
        writeln!(w, "{text}").and_then(|_| w.flush()).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    /// CSV with `#` comment lines carrying the version and compact config,
    /// followed by whatever `body` writes.
    pub fn csv<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let config = self.config.to_string();
        let (path, mut w) = self.open(name)?;
        let io = |e| CliError::io(format!("writing {}", path.display()), e);
        writeln!(w, "# pdd {VERSION}").map_err(io)?;
        writeln!(w, "# config: {config}").map_err(io)?;
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }
}
