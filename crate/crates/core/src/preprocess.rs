//! Per-dimension standardization of embeddings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::{Error, KahanSum, Matrix, Result};

/// Lower bound on the per-column scale.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Column means and population standard deviations fitted on a training set.
///
/// Fields are private: the only way to obtain one is [`Standardizer::fit`]
/// (or loading a saved one), and [`Standardizer::transform`] never refits.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n == 0 || x.cols() == 0 {
            return Err(Error::Data(
                "cannot fit a standardizer on an empty matrix".into(),
            ));
        }
        let d = x.cols();
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for j in 0..d {
            let m = (0..n).map(|i| x.get(i, j)).collect::<KahanSum>().value() / n as f64;
            let var = (0..n)
                .map(|i| (x.get(i, j) - m).powi(2))
                .collect::<KahanSum>()
                .value()
                / n as f64;
            mean[j] = m;
            scale[j] = var.sqrt().max(SCALE_FLOOR);
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dim(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dim(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    fn check_dim(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Two comma-separated rows: means, then scales.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        for row in [&self.mean, &self.scale] {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(path, e.to_string()))?;
            rows.push(row);
        }
        if rows.len() != 2 || rows[0].len() != rows[1].len() || rows[0].is_empty() {
            return Err(Error::format(path, "expected two rows of equal length"));
        }
        let scale = rows.pop().unwrap();
        let mean = rows.pop().unwrap();
        if scale.iter().any(|&s| !(s.is_finite() && s >= SCALE_FLOOR))
            || mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::format(path, "non-finite mean or scale below floor"));
        }
        Ok(Self { mean, scale })
    }
}
