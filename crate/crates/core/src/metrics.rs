//! Error metrics and the entropy-based cluster specificity (ECS) score.
//!
//! ECS bins each proxy label, measures how concentrated every label is inside
//! each cluster (`1 −` normalized Shannon entropy), and averages
//! `max_l s × mean_l s` over the clusters that received samples.

use std::io::Write;

use crate::{Error, KahanSum, Matrix, Result};

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension {
            expected: target.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Data("error metric of an empty sample".into()));
    }
    let s: KahanSum = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p) * (t - p))
        .collect();
    Ok(s.value() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    mse(pred, target).map(f64::sqrt)
}

/// Unweighted mean of per-driver RMSE values.
pub fn rmse_driver_mean(pred: &[f64], target: &[f64], driver_id: &[u32]) -> Result<f64> {
    let per = per_driver_rmse(pred, target, driver_id)?;
    Ok(per.iter().map(|&(_, r)| r).sum::<f64>() / per.len() as f64)
}

/// RMSE per driver, sorted by driver id. Drivers without samples do not appear.
pub fn per_driver_rmse(pred: &[f64], target: &[f64], driver_id: &[u32]) -> Result<Vec<(u32, f64)>> {
    if pred.len() != target.len() || pred.len() != driver_id.len() {
        return Err(Error::Dimension {
            expected: target.len(),
            got: pred.len().min(driver_id.len()),
        });
    }
    if pred.is_empty() {
        return Err(Error::Data("no samples for any driver".into()));
    }
    let mut drivers = driver_id.to_vec();
    drivers.sort_unstable();
    drivers.dedup();
    drivers
        .into_iter()
        .map(|d| {
            let (p, t): (Vec<f64>, Vec<f64>) = (0..pred.len())
                .filter(|&i| driver_id[i] == d)
                .map(|i| (pred[i], target[i]))
                .unzip();
            rmse(&p, &t).map(|r| (d, r))
        })
        .collect()
}

/// How one proxy label is discretized.
#[derive(Debug, Clone, PartialEq)]
pub enum BinKind {
    /// One bin per distinct observed code. With `absent_code` set, that code
    /// and NaN share a reserved last bin.
    Categorical {
        absent_code: Option<f64>,
    },
    /// `bins` bins at linearly interpolated quantiles of the evaluation set,
    /// plus a reserved last bin for NaN when `absent` is set.
    Quantile {
        bins: usize,
        absent: bool,
    },
    FixedEdges {
        edges: Vec<f64>,
        absent: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinningSpec {
    pub labels: Vec<BinKind>,
}

impl Default for BinningSpec {
    /// road type categorical; curvature in 5 quantile bins; vehicle types
    /// categorical with an absent bin; distances in 4 quantile bins plus absent.
    fn default() -> Self {
        let vtype = BinKind::Categorical {
            absent_code: Some(-1.0),
        };
        let dist = BinKind::Quantile {
            bins: 4,
            absent: true,
        };
        Self {
            labels: vec![
                BinKind::Categorical { absent_code: None },
                BinKind::Quantile {
                    bins: 5,
                    absent: false,
                },
                vtype.clone(),
                dist.clone(),
                vtype,
                dist,
            ],
        }
    }
}

/// Integer bin per sample and label, with the bin count of each label.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedLabels {
    /// `bins[l][i]` is the bin of sample `i` for label `l`.
    pub bins: Vec<Vec<usize>>,
    pub n_bins: Vec<usize>,
}

impl BinnedLabels {
    pub fn n_samples(&self) -> usize {
        self.bins.first().map_or(0, Vec::len)
    }

    pub fn n_labels(&self) -> usize {
        self.bins.len()
    }
}

/// Linearly interpolated quantile of sorted data (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn bin_labels(raw: &Matrix, spec: &BinningSpec) -> Result<BinnedLabels> {
    if spec.labels.len() != raw.cols() {
        return Err(Error::Dimension {
            expected: raw.cols(),
            got: spec.labels.len(),
        });
    }
    let n = raw.rows();
    let mut bins = Vec::with_capacity(raw.cols());
    let mut n_bins = Vec::with_capacity(raw.cols());
    for (l, kind) in spec.labels.iter().enumerate() {
        let col: Vec<f64> = (0..n).map(|i| raw.get(i, l)).collect();
        let (b, nb) = bin_column(l, &col, kind)?;
        if nb < 2 {
            return Err(Error::Data(format!(
                "label {l} has {nb} bin(s); at least 2 are required"
            )));
        }
        bins.push(b);
        n_bins.push(nb);
    }
    Ok(BinnedLabels { bins, n_bins })
}

fn bin_column(l: usize, col: &[f64], kind: &BinKind) -> Result<(Vec<usize>, usize)> {
    let missing = |i: usize| {
        Error::Data(format!(
            "label {l}, sample {i}: missing value but no absent bin configured"
        ))
    };
    match kind {
        BinKind::Categorical { absent_code } => {
            let is_absent = |v: f64| v.is_nan() || Some(v) == *absent_code;
            let mut codes: Vec<f64> = col.iter().copied().filter(|&v| !is_absent(v)).collect();
            codes.sort_by(f64::total_cmp);
            codes.dedup();
            let absent_bin = codes.len();
            let out = col
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if is_absent(v) {
                        absent_code.map(|_| absent_bin).ok_or_else(|| missing(i))
                    } else {
                        Ok(codes.partition_point(|&c| c < v))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((out, codes.len() + usize::from(absent_code.is_some())))
        }
        BinKind::Quantile { bins, absent } => {
            if *bins < 2 {
                return Err(Error::Data(format!(
                    "label {l}: quantile binning needs ≥ 2 bins"
                )));
            }
            let mut finite: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            finite.sort_by(f64::total_cmp);
            let mut edges = Vec::new();
            if !finite.is_empty() {
                for k in 1..*bins {
                    let e = quantile_sorted(&finite, k as f64 / *bins as f64);
                    if edges.last().is_none_or(|&last| e > last) {
                        edges.push(e);
                    }
                }
            }
            apply_edges(col, &edges, *absent, missing)
        }
        BinKind::FixedEdges { edges, absent } => {
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Data(format!(
                    "label {l}: edges must be strictly increasing"
                )));
            }
            apply_edges(col, edges, *absent, missing)
        }
    }
}

fn apply_edges(
    col: &[f64],
    edges: &[f64],
    absent: bool,
    missing: impl Fn(usize) -> Error,
) -> Result<(Vec<usize>, usize)> {
    let absent_bin = edges.len() + 1;
    let out = col
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_nan() {
                if absent {
                    Ok(absent_bin)
                } else {
                    Err(missing(i))
                }
            } else {
                Ok(edges.partition_point(|&e| e <= v))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, edges.len() + 1 + usize::from(absent)))
}

/// Shannon entropy of a histogram normalized by `ln(n_b)`, in [0, 1].
pub fn normalized_entropy(counts: &[u64], n_b: usize) -> Result<f64> {
    if n_b < 2 {
        return Err(Error::Data(
            "normalized entropy needs at least 2 bins".into(),
        ));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Data(
            "normalized entropy of an all-zero histogram".into(),
        ));
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    Ok((h / (n_b as f64).ln()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpecificity {
    pub cluster_id: usize,
    pub n_samples: usize,
    /// One specificity `1 − h` per label.
    pub specificity: Vec<f64>,
    pub s_max: f64,
    pub s_mean: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcsReport {
    /// Nonempty clusters in increasing id order.
    pub clusters: Vec<ClusterSpecificity>,
    pub empty_clusters: Vec<usize>,
    pub clusters_evaluated: usize,
    pub ecs: f64,
}

impl EcsReport {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let n_l = self.clusters.first().map_or(0, |c| c.specificity.len());
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["cluster_id".to_string(), "n_samples".to_string()];
        header.extend((0..n_l).map(|l| format!("s_label_{l}")));
        header.extend(["s_max", "s_mean", "contribution"].map(String::from));
        w.write_record(&header)?;
        for c in &self.clusters {
            let mut rec = vec![c.cluster_id.to_string(), c.n_samples.to_string()];
            rec.extend(c.specificity.iter().map(|s| s.to_string()));
            rec.extend([c.s_max, c.s_mean, c.contribution].map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let total: usize = self.clusters.iter().map(|c| c.n_samples).sum();
        let mut footer = vec!["ECS".to_string(), total.to_string()];
        footer.extend((0..n_l + 2).map(|_| String::new()));
        footer.push(self.ecs.to_string());
        w.write_record(&footer)?;
        w.flush()
    }
}

/// Entropy-based cluster specificity over nonempty clusters.
pub fn ecs(assignments: &[usize], labels: &BinnedLabels, n_c: usize) -> Result<EcsReport> {
    if assignments.len() != labels.n_samples() {
        return Err(Error::Dimension {
            expected: labels.n_samples(),
            got: assignments.len(),
        });
    }
    if labels.n_labels() == 0 {
        return Err(Error::Data("no labels to evaluate".into()));
    }
    if let Some(&bad) = assignments.iter().find(|&&c| c >= n_c) {
        return Err(Error::Data(format!(
            "cluster id {bad} out of range for {n_c} clusters"
        )));
    }
    let n_l = labels.n_labels();
    // hist[c][l][b]
    let mut hist: Vec<Vec<Vec<u64>>> = (0..n_c)
        .map(|_| labels.n_bins.iter().map(|&nb| vec![0; nb]).collect())
        .collect();
    let mut sizes = vec![0usize; n_c];
    for (i, &c) in assignments.iter().enumerate() {
        sizes[c] += 1;
        for (l, h) in hist[c].iter_mut().enumerate() {
            let b = labels.bins[l][i];
            if b >= h.len() {
                return Err(Error::Data(format!("bin {b} out of range for label {l}")));
            }
            h[b] += 1;
        }
    }

    let mut clusters = Vec::new();
    let mut empty_clusters = Vec::new();
    for c in 0..n_c {
        if sizes[c] == 0 {
            empty_clusters.push(c);
            continue;
        }
        let specificity = (0..n_l)
            .map(|l| normalized_entropy(&hist[c][l], labels.n_bins[l]).map(|h| 1.0 - h))
            .collect::<Result<Vec<_>>>()?;
        let s_max = specificity.iter().copied().fold(0.0, f64::max);
        let s_mean = specificity.iter().sum::<f64>() / n_l as f64;
        clusters.push(ClusterSpecificity {
            cluster_id: c,
            n_samples: sizes[c],
            specificity,
            s_max,
            s_mean,
            contribution: s_max * s_mean,
        });
    }
    if clusters.is_empty() {
        return Err(Error::Data("no nonempty clusters".into()));
    }
    let ecs = clusters.iter().map(|c| c.contribution).sum::<f64>() / clusters.len() as f64;
    Ok(EcsReport {
        clusters_evaluated: clusters.len(),
        clusters,
        empty_clusters,
        ecs: ecs.clamp(0.0, 1.0),
    })
}
