//! Result files: CSV tables with a one-line header, JSON records, and a
//! separate metadata file for everything that varies between identical
//! runs (timestamps, wall times, thread count).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct OutDir {
    path: PathBuf,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            started: unix_now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let file = self.path.join(name);
        let mut w = csv::Writer::from_path(&file).with_context(|| format!("creating {}", file.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(file)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let file = self.path.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&file, text).with_context(|| format!("writing {}", file.display()))?;
        Ok(file)
    }

    /// Writes `metadata.json`.
    pub fn metadata(&self, command: &str, wall_ms: u64, extra: serde_json::Value) -> Result<PathBuf> {
        self.json(
            "metadata.json",
            &serde_json::json!({
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "started_unix_s": self.started,
                "finished_unix_s": unix_now(),
                "wall_ms": wall_ms,
                "threads": rayon::current_num_threads(),
                "details": extra,
            }),
        )
    }
}
