//! Per-run output directories and their manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use phasekit::Result;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "phasekit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A run directory named after the hash of everything that determines its
/// contents, so identical invocations land in (and rewrite) the same place.
pub struct RunDir {
    dir: PathBuf,
    command: String,
    args: Value,
    config: Value,
    hash: String,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    core_version: &'a str,
    command: &'a str,
    args: &'a Value,
    config: &'a Value,
    config_hash: &'a str,
    files: &'a [String],
}

impl RunDir {
    pub fn create(cfg: &RunConfig, command: &str, args: Value) -> Result<Self> {
        let config = serde_json::to_value(cfg)?;
        let keyed = serde_json::json!({ "command": command, "args": args, "config": config });
        let digest = Sha256::digest(serde_json::to_vec(&keyed)?);
        let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let dir = cfg.out.join(format!("{command}-{}", &hash[..12]));
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, command: command.into(), args, config, hash, files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write a file through a buffered writer and record it.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.record(name, &path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text)?;
        self.record(name, &path);
        Ok(())
    }

    fn record(&mut self, name: &str, path: &Path) {
        self.files.push(name.to_string());
        println!("{}", path.display());
    }

    /// Write `manifest.json` and return the run directory.
    pub fn finish(mut self) -> Result<PathBuf> {
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = Manifest {
            tool: TOOL,
            version: VERSION,
            core_version: phasekit::VERSION,
            command: &self.command,
            args: &self.args,
            config: &self.config,
            config_hash: &self.hash,
            files: &files,
        };
        let value = serde_json::to_value(&manifest)?;
        self.write_json("manifest.json", &value)?;
        Ok(self.dir)
    }
}
