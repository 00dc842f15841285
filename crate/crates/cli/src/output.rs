//! On-disk artifacts: CSV series, snapshots, trend reports and the run
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};

use kgwave::{MomentRecord, ObservableSeries};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{HarnessError, HarnessResult};

pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TREND_FILE: &str = "trend.json";
/// Default output of a re-analysis, kept apart from the manifested report.
pub const RETREND_FILE: &str = "trend_reanalysis.json";
pub const OBSERVABLE_COLUMNS: [&str; 6] = ["t", "l2_sq", "mean", "variance", "sigma", "energy"];

/// Round-trip decimal: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> HarnessResult<()> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))
}

/// Writes a header plus numeric rows.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> HarnessResult<()> {
    let to_err = |e: csv::Error| HarnessError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(HarnessError::io(path))
}

pub fn write_observables(path: &Path, series: &ObservableSeries) -> HarnessResult<()> {
    write_csv(
        path,
        &OBSERVABLE_COLUMNS,
        series.records.iter().map(|r| {
            [r.t, r.l2_sq, r.mean, r.variance, r.sigma, r.energy]
                .iter()
                .map(|&v| fmt_f64(v))
                .collect()
        }),
    )
}

pub fn read_observables(path: &Path) -> HarnessResult<ObservableSeries> {
    let bad = |reason: String| HarnessError::Input {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let index: Vec<usize> = OBSERVABLE_COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| bad(format!("missing column `{c}`")))
        })
        .collect::<Result<_, _>>()?;

    let mut series = ObservableSeries::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v: Vec<f64> = index
            .iter()
            .map(|&k| {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| bad(format!("row {}: unreadable `{}`", line + 2, header[k].trim())))
            })
            .collect::<Result<_, _>>()?;
        series
            .push(MomentRecord {
                t: v[0],
                l2_sq: v[1],
                mean: v[2],
                variance: v[3],
                sigma: v[4],
                energy: v[5],
            })
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
    }
    Ok(series)
}

/// `snapshot_t<time>.csv`, with the time written as configured.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

pub fn write_snapshot(path: &Path, x: &[f64], u: &[f64]) -> HarnessResult<()> {
    write_csv(
        path,
        &["x", "u"],
        x.iter().zip(u).map(|(&x, &u)| vec![fmt_f64(x), fmt_f64(u)]),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> HarnessResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(HarnessError::io(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the manifest's directory.
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(dir: &Path, name: &str) -> HarnessResult<Self> {
        let path = dir.join(name);
        let data = fs::read(&path).map_err(HarnessError::io(&path))?;
        Ok(Self {
            name: name.to_string(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// The solver stopped early; outputs cover the steps that succeeded.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub code_version: String,
    pub duration_seconds: f64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub files: Vec<FileEntry>,
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Input {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Files whose size or checksum no longer match.
    pub fn verify(&self, dir: &Path) -> HarnessResult<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let path = dir.join(&f.name);
            if !path.exists() {
                bad.push(format!("{}: missing", f.name));
                continue;
            }
            let now = FileEntry::of(dir, &f.name)?;
            if now != *f {
                bad.push(format!("{}: checksum mismatch", f.name));
            }
        }
        Ok(bad)
    }
}

/// Directory of a run inside a sweep.
pub fn sweep_run_dir(root: &Path, a2: f64) -> PathBuf {
    root.join(format!("a2_{a2}"))
}

/// Matplotlib script that plots the mean and σ series next to it.
pub const PLOT_SCRIPT: &str = r#"import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "observables.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, (ax_m, ax_s) = plt.subplots(2, 1, sharex=True)
ax_m.plot(t, [float(r["mean"]) for r in rows])
ax_m.set_ylabel("mean position M(t)")
ax_s.plot(t, [float(r["sigma"]) for r in rows])
ax_s.set_ylabel("standard deviation")
ax_s.set_xlabel("t")
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#;
