use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

/// Output directory plus the list of files written so far.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(name.to_string());
        Ok((path, BufWriter::new(file)))
    }

    pub fn csv<F>(&mut self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> rsp_core::Result<()>,
    {
        let (path, mut w) = self.open(name)?;
        write(&mut w).map_err(|source| CliError::Output { path, source })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let (path, w) = self.open(name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| CliError::Output {
            path,
            source: e.into(),
        })
    }

    /// Writes `manifest.json` with the full config, seed, versions, output
    /// files and a command-specific summary.
    pub fn manifest(
        mut self,
        command: &str,
        config: &RunConfig,
        summary: Value,
    ) -> Result<(), CliError> {
        let files = std::mem::take(&mut self.files);
        let manifest = json!({
            "command": command,
            "versions": {
                "rsp": env!("CARGO_PKG_VERSION"),
                "rsp_core": rsp_core::VERSION,
            },
            "seed": config.seed,
            "workers": config.workers,
            "outputs": files,
            "summary": summary,
            "config": config,
        });
        self.json("manifest.json", &manifest)
    }
}
