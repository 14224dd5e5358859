//! Driving-situation-dependent statistics: a per-cluster lookup table of
//! lateral-offset means.
//!
//! Each entry keeps only a sample count and a compensated sum, so the table
//! can be fed incrementally ([`LookupTable::update`]) or assembled from
//! independently built parts ([`LookupTable::merge`]) and still agree with a
//! single batch fit up to rounding. Nothing learned for one situation is ever
//! overwritten by data from another.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, KahanSum, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    count: Vec<u64>,
    sum: Vec<KahanSum>,
    global_count: u64,
    global_sum: KahanSum,
}

/// A table prediction. `cold` is set when the table holds no samples at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub cold: bool,
}

impl LookupTable {
    pub fn empty(n_c: usize) -> Self {
        Self {
            count: vec![0; n_c],
            sum: vec![KahanSum::new(); n_c],
            global_count: 0,
            global_sum: KahanSum::new(),
        }
    }

    pub fn fit(assignments: &[usize], behavior: &[f64], n_c: usize) -> Result<Self> {
        Self::empty(n_c).update(assignments, behavior)
    }

    /// Accumulates another batch onto the table.
    pub fn update(mut self, assignments: &[usize], behavior: &[f64]) -> Result<Self> {
        self.accumulate(assignments, behavior)?;
        Ok(self)
    }

    pub fn accumulate(&mut self, assignments: &[usize], behavior: &[f64]) -> Result<()> {
        if assignments.len() != behavior.len() {
            return Err(Error::Dimension {
                expected: assignments.len(),
                got: behavior.len(),
            });
        }
        let n_c = self.n_clusters();
        if let Some(&bad) = assignments.iter().find(|&&c| c >= n_c) {
            return Err(Error::Data(format!(
                "cluster id {bad} out of range for a table of size {n_c}"
            )));
        }
        for (&c, &y) in assignments.iter().zip(behavior) {
            self.count[c] += 1;
            self.sum[c].add(y);
            self.global_count += 1;
            self.global_sum.add(y);
        }
        Ok(())
    }

    pub fn merge(&self, other: &LookupTable) -> Result<LookupTable> {
        if self.n_clusters() != other.n_clusters() {
            return Err(Error::Dimension {
                expected: self.n_clusters(),
                got: other.n_clusters(),
            });
        }
        let mut out = self.clone();
        for c in 0..out.n_clusters() {
            out.count[c] += other.count[c];
            out.sum[c].merge(&other.sum[c]);
        }
        out.global_count += other.global_count;
        out.global_sum.merge(&other.global_sum);
        Ok(out)
    }

    pub fn n_clusters(&self) -> usize {
        self.count.len()
    }

    pub fn count(&self, c: usize) -> u64 {
        self.count[c]
    }

    pub fn sum(&self, c: usize) -> f64 {
        self.sum[c].value()
    }

    pub fn global_count(&self) -> u64 {
        self.global_count
    }

    pub fn global_sum(&self) -> f64 {
        self.global_sum.value()
    }

    /// Per-cluster mean, `None` for clusters without samples.
    pub fn mean(&self, c: usize) -> Option<f64> {
        (self.count[c] > 0).then(|| self.sum[c].value() / self.count[c] as f64)
    }

    pub fn global_mean(&self) -> Option<f64> {
        (self.global_count > 0).then(|| self.global_sum.value() / self.global_count as f64)
    }

    /// Number of (count, sum) accumulators held: `2·N_C + 2`, whatever the
    /// stream length.
    pub fn state_size(&self) -> usize {
        self.count.len() + self.sum.len() + 2
    }

    /// Cluster mean, else the global mean, else `0.0` flagged as cold.
    pub fn predict(&self, c: usize) -> Result<Prediction> {
        if c >= self.n_clusters() {
            return Err(Error::Data(format!(
                "cluster id {c} out of range for a table of size {}",
                self.n_clusters()
            )));
        }
        Ok(match (self.mean(c), self.global_mean()) {
            (Some(m), _) => Prediction {
                value: m,
                cold: false,
            },
            (None, Some(g)) => Prediction {
                value: g,
                cold: false,
            },
            (None, None) => Prediction {
                value: 0.0,
                cold: true,
            },
        })
    }

    pub fn predict_many(&self, assignments: &[usize]) -> Result<Vec<f64>> {
        assignments
            .iter()
            .map(|&c| self.predict(c).map(|p| p.value))
            .collect()
    }

    /// Writes `cluster_id,count,sum,mean` rows plus a trailing `__global__` row.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["cluster_id", "count", "sum", "mean"])?;
        let fmt = |m: Option<f64>| m.map_or_else(|| "nan".to_string(), |v| v.to_string());
        for c in 0..self.n_clusters() {
            w.write_record([
                c.to_string(),
                self.count[c].to_string(),
                self.sum(c).to_string(),
                fmt(self.mean(c)),
            ])?;
        }
        w.write_record([
            "__global__".to_string(),
            self.global_count.to_string(),
            self.global_sum().to_string(),
            fmt(self.global_mean()),
        ])?;
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a table written by [`LookupTable::save`]. Compensation terms are
    /// not persisted, so sums reload as plain values.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut count = Vec::new();
        let mut sum = Vec::new();
        let mut global = None;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let bad = || Error::format(path, format!("bad row {rec:?}"));
            let cnt: u64 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let s: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let mut ks = KahanSum::new();
            ks.add(s);
            if rec.get(0) == Some("__global__") {
                global = Some((cnt, ks));
            } else {
                let id: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
                if id != count.len() {
                    return Err(bad());
                }
                count.push(cnt);
                sum.push(ks);
            }
        }
        let (global_count, global_sum) =
            global.ok_or_else(|| Error::format(path, "missing __global__ row"))?;
        Ok(Self {
            count,
            sum,
            global_count,
            global_sum,
        })
    }
}
