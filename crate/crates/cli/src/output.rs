//! Output directory bookkeeping: CSV tables, plots, the config echo and the
//! run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::plot::{self, Axes, Mark, PlotError, Series};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("writing {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error(transparent)]
    Plot(#[from] PlotError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub files: Vec<FileEntry>,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
}

impl RunManifest {
    /// Files whose current contents no longer match the recorded digest.
    pub fn stale_files(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| {
                fs::read(dir.join(&f.path))
                    .map(|b| sha256_hex(&b) != f.sha256)
                    .unwrap_or(true)
            })
            .map(|f| f.path.clone())
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub const MANIFEST_NAME: &str = "manifest.json";
pub const CONFIG_ECHO_NAME: &str = "config.effective.toml";

/// Collects everything a scenario writes under one directory.
pub struct RunOutput {
    dir: PathBuf,
    plots: bool,
    files: Vec<FileEntry>,
    timings: Vec<Timing>,
    seeds: BTreeMap<String, u64>,
    started: Instant,
}

impl RunOutput {
    pub fn create(dir: &Path, plots: bool) -> Result<Self, OutputError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            plots,
            files: Vec::new(),
            timings: Vec::new(),
            seeds: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn plots_enabled(&self) -> bool {
        self.plots
    }

    pub fn record_seed(&mut self, name: impl Into<String>, seed: u64) {
        self.seeds.insert(name.into(), seed);
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    fn register(&mut self, name: &str) -> Result<(), OutputError> {
        let path = self.dir.join(name);
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let entry = FileEntry {
            path: name.into(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        };
        match self.files.iter_mut().find(|f| f.path == name) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), OutputError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.register(name)
    }

    /// Writes a CSV table. Floats are printed in shortest round-trip form.
    pub fn write_csv<R: AsRef<[String]>>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[R],
    ) -> Result<(), OutputError> {
        let path = self.dir.join(name);
        let csv_err = |e| OutputError::Csv {
            path: path.display().to_string(),
            source: e,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r.as_ref()).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        drop(w);
        self.register(name)
    }

    pub fn curves(&mut self, name: &str, axes: &Axes, series: &[Series], mark: Mark) -> Result<(), OutputError> {
        if !self.plots {
            return Ok(());
        }
        plot::xy_plot(&self.dir.join(name), axes, series, mark)?;
        self.register(name)
    }

    pub fn heatmap(
        &mut self,
        name: &str,
        axes: &Axes,
        x: &[f64],
        y: &[f64],
        values: &[f64],
    ) -> Result<(), OutputError> {
        if !self.plots {
            return Ok(());
        }
        plot::heatmap(&self.dir.join(name), axes, x, y, values)?;
        self.register(name)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self, scenario: &str, config_echo: &str) -> Result<RunManifest, OutputError> {
        let mut versions = BTreeMap::new();
        versions.insert("quench-lab".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("quench-core".to_string(), quench_core::VERSION.to_string());
        let manifest = RunManifest {
            scenario: scenario.into(),
            config_sha256: sha256_hex(config_echo.as_bytes()),
            versions,
            seeds: self.seeds,
            files: self.files,
            timings: self.timings,
            total_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }
}

fn io_err(path: &Path, e: io::Error) -> OutputError {
    OutputError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Shortest round-trip decimal form; `NaN` for missing values.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), num)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_digests_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(dir.path(), false).unwrap();
        out.write_csv(
            "a.csv",
            &["x", "y"],
            &[vec![num(1.0), num(0.1)], vec![num(2.0), num(f64::NAN)]],
        )
        .unwrap();
        out.write_text("b.txt", "hello\n").unwrap();
        out.record_seed("rng", 3);
        let m = out.finish("speeds", "echo").unwrap();
        assert_eq!(m.files.len(), 2);
        assert!(m.stale_files(dir.path()).is_empty());
        assert_eq!(m.files[1].sha256, sha256_hex(b"hello\n"));
        let text = fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        fs::write(dir.path().join("b.txt"), "changed").unwrap();
        assert_eq!(m.stale_files(dir.path()), vec!["b.txt".to_string()]);
    }

    #[test]
    fn disabled_plots_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(dir.path(), false).unwrap();
        let ax = Axes {
            title: "t",
            x_label: "x",
            y_label: "y",
        };
        out.curves("c.svg", &ax, &[Series::new("s", vec![(0.0, 1.0)])], Mark::Lines)
            .unwrap();
        assert!(out.files().is_empty());
        assert!(!dir.path().join("c.svg").exists());
    }
}
