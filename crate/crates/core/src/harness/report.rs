//! Comma-separated reports and the run manifest.
//!
//! Floats are written in Rust's shortest round-trip form; absent values are
//! empty fields. Nothing time- or host-dependent is written, so identical
//! runs give identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{EcsSeries, IterativeReport, RunReport, Stat, SweepTable};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// SHA-256 over the crate version and the sorted config echo.
pub fn config_hash(echo: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(format!("sada {}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in echo {
        h.update(format!("{k}={v}\n"));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to regenerate the reports of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub formats: BTreeMap<String, u32>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        let formats = [("embeddings SADC", 1), ("kmeans SADK", 1), ("mlp SADM", 1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self {
            tool: "sada".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: BTreeMap::new(),
            config_hash: config_hash(&config),
            config,
            formats,
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.write_as(dir, MANIFEST_FILE)
    }

    pub fn write_as(&self, dir: &Path, name: &str) -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, self.to_json()).map_err(|e| Error::io(&p, e))
    }
}

/// Writes a report to `dir/name` through a CSV-producing closure.
pub fn write_file<F>(dir: &Path, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let p = dir.join(name);
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(&p, e))?;
    std::fs::write(&p, buf).map_err(|e| Error::io(&p, e))
}

fn stat_fields(s: Option<Stat>) -> [String; 2] {
    [opt(s.map(|s| s.mean)), opt(s.map(|s| s.std))]
}

impl RunReport {
    /// One row per seed.
    pub fn write_seeds_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "predictor",
            "n_c",
            "seed",
            "train_rmse",
            "val_rmse",
            "val_rmse_rural",
            "ecs",
            "cold_predictions",
        ])?;
        for s in &self.seeds {
            w.write_record([
                self.predictor.name().to_string(),
                self.n_c.to_string(),
                s.seed.to_string(),
                s.train_rmse.to_string(),
                s.val_rmse.to_string(),
                opt(s.val_rmse_rural),
                opt(s.ecs),
                s.cold_predictions.to_string(),
            ])?;
        }
        w.flush()
    }

    /// `metric,mean,std` over seeds.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["metric", "mean", "std"])?;
        for (name, s) in [
            ("train_rmse", Some(self.train)),
            ("val_rmse", Some(self.val)),
            ("val_rmse_rural", self.val_rural),
            ("ecs", self.ecs),
        ] {
            let [m, sd] = stat_fields(s);
            w.write_record([name.to_string(), m, sd])?;
        }
        w.flush()
    }

    /// Per-epoch losses of neural heads; header only for other predictors.
    pub fn write_curves_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["seed", "driver_id", "epoch", "train_mse", "val_mse"])?;
        for c in self.seeds.iter().flat_map(|s| &s.curves) {
            w.write_record([
                c.seed.to_string(),
                c.driver_id.to_string(),
                c.epoch.to_string(),
                c.train_mse.to_string(),
                opt(c.val_mse),
            ])?;
        }
        w.flush()
    }
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["n_c", "seed", "train_rmse", "val_rmse", "val_rmse_rural"])?;
        for r in &self.rows {
            w.write_record([
                r.n_c.to_string(),
                r.seed.to_string(),
                r.train_rmse.to_string(),
                r.val_rmse.to_string(),
                opt(r.val_rmse_rural),
            ])?;
        }
        w.flush()
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["n_c", "train_mean", "train_std", "val_mean", "val_std"])?;
        for (n_c, t, v) in self.summary() {
            w.write_record([
                n_c.to_string(),
                t.mean.to_string(),
                t.std.to_string(),
                v.mean.to_string(),
                v.std.to_string(),
            ])?;
        }
        w.flush()
    }
}

impl EcsSeries {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["n_c", "ecs_mean", "ecs_std", "clusters_evaluated"])?;
        for r in &self.rows {
            w.write_record([
                r.n_c.to_string(),
                r.ecs.mean.to_string(),
                r.ecs.std.to_string(),
                r.clusters_evaluated.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn write_detail_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["n_c", "seed", "ecs", "clusters_evaluated", "empty_clusters"])?;
        for (n_c, seed, r) in &self.reports {
            w.write_record([
                n_c.to_string(),
                seed.to_string(),
                r.ecs.to_string(),
                r.clusters_evaluated.to_string(),
                r.empty_clusters.len().to_string(),
            ])?;
        }
        w.flush()
    }
}

impl IterativeReport {
    pub fn write_curve_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "predictor",
            "fraction",
            "seed",
            "iteration",
            "samples_seen",
            "val_rmse",
            "val_rmse_early",
        ])?;
        for p in &self.points {
            w.write_record([
                self.predictor.name().to_string(),
                self.fraction.to_string(),
                p.seed.to_string(),
                p.iteration.to_string(),
                p.samples_seen.to_string(),
                p.val_rmse.to_string(),
                opt(p.val_rmse_early),
            ])?;
        }
        w.flush()
    }

    pub fn write_final_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "predictor",
            "seed",
            "val_rmse",
            "val_rmse_early",
            "batch_val_rmse",
            "batch_val_rmse_early",
        ])?;
        for f in &self.finals {
            w.write_record([
                self.predictor.name().to_string(),
                f.seed.to_string(),
                f.val_rmse.to_string(),
                opt(f.val_rmse_early),
                f.batch_val_rmse.to_string(),
                opt(f.batch_val_rmse_early),
            ])?;
        }
        w.flush()
    }
}
