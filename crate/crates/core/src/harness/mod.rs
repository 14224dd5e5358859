//! Experiment protocols: pretrain-then-adapt, cluster-count sweep, ECS sweep
//! and iterative (streaming) adaptation.
//!
//! Every protocol works on a [`PreparedData`]: the pretrain and driver
//! datasets with train/validation tags, one standardizer fitted on the
//! pretrain training rows, and the standardized embeddings of every split.
//! Seeds and sweep points run as independent jobs; results are assembled in
//! input order so parallel and sequential runs produce the same reports.

mod adapt;
mod iterative;
pub mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use adapt::{
    cluster_sweep, run_adaptation, run_ecs, CurveRow, EcsRow, EcsSeries, RunReport, SeedResult,
    SweepRow, SweepTable,
};
pub use iterative::{run_iterative, IterativeFinal, IterativePoint, IterativeReport};

use crate::baselines::StyleKind;
use crate::cluster::Variant;
use crate::data::{segment_split, Dataset, Split, SplitConfig, LABEL_ROAD_TYPE};
use crate::metrics::BinningSpec;
use crate::mlp::{TrainConfig, DESK_HIDDEN};
use crate::preprocess::Standardizer;
use crate::{Error, Exec, Matrix, Result};

/// The behavior model evaluated by a protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Dsds(Variant),
    Mlp,
    /// An MLP without hidden layers.
    Linear,
    Static(StyleKind),
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Dsds(Variant::Classical) => "dsds-km",
            PredictorKind::Dsds(Variant::Spherical) => "dsds-kms",
            PredictorKind::Mlp => "mlp",
            PredictorKind::Linear => "linear",
            PredictorKind::Static(StyleKind::Rail) => "static-rail",
            PredictorKind::Static(StyleKind::Passive) => "static-passive",
            PredictorKind::Static(StyleKind::Sportive) => "static-sportive",
        }
    }

    fn uses_clusters(self) -> bool {
        matches!(self, PredictorKind::Dsds(_))
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dsds-km" => PredictorKind::Dsds(Variant::Classical),
            "dsds-kms" => PredictorKind::Dsds(Variant::Spherical),
            "mlp" => PredictorKind::Mlp,
            "linear" => PredictorKind::Linear,
            "static" | "static-rail" | "rail" => PredictorKind::Static(StyleKind::Rail),
            "static-passive" | "passive" => PredictorKind::Static(StyleKind::Passive),
            "static-sportive" | "sportive" => PredictorKind::Static(StyleKind::Sportive),
            other => {
                return Err(Error::arg(
                    "predictor",
                    format!(
                        "unknown predictor {other:?}; expected dsds-km, dsds-kms, mlp, linear, \
                         static, static-passive or static-sportive"
                    ),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSettings {
    pub hidden: Vec<usize>,
    /// Output scale in meters; predictions lie in `(−d_max, d_max)`.
    pub d_max: f64,
    pub train: TrainConfig,
}

impl Default for MlpSettings {
    fn default() -> Self {
        Self {
            hidden: DESK_HIDDEN.to_vec(),
            d_max: 1.0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub predictor: PredictorKind,
    pub n_c: usize,
    pub seeds: Vec<u64>,
    /// Chunk size of the iterative protocol as a fraction of each driver's
    /// training rows.
    pub fraction: f64,
    pub binning: BinningSpec,
    pub mlp: MlpSettings,
    pub split: SplitConfig,
    /// `road_type` code selecting the rural subset.
    pub rural_code: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    /// Seedings per k-means fit; the lowest final inertia wins.
    pub kmeans_n_init: usize,
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            predictor: PredictorKind::Dsds(Variant::Classical),
            n_c: 10,
            seeds: (0..5).collect(),
            fraction: 0.1,
            binning: BinningSpec::default(),
            mlp: MlpSettings::default(),
            split: SplitConfig::default(),
            rural_code: 1.0,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            kmeans_n_init: 4,
            exec: Exec::Sequential,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::arg("seeds", "at least one seed is required"));
        }
        if self.n_c < 1 {
            return Err(Error::arg("n_c", "must be at least 1"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::arg("fraction", "must lie in (0, 1]"));
        }
        if !(self.mlp.d_max.is_finite() && self.mlp.d_max > 0.0) {
            return Err(Error::arg("d_max", "must be positive and finite"));
        }
        if self.kmeans_n_init < 1 {
            return Err(Error::arg("n_init", "must be at least 1"));
        }
        if self.mlp.hidden.contains(&0) {
            return Err(Error::arg("hidden", "layer widths must be at least 1"));
        }
        Ok(())
    }

    /// Flat key/value echo of every setting that influences results.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let t = &self.mlp.train;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("predictor", self.predictor.name().into());
        put("n_c", self.n_c.to_string());
        put(
            "seeds",
            self.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        );
        put("fraction", self.fraction.to_string());
        put("binning", format!("{:?}", self.binning.labels));
        put(
            "mlp.hidden",
            self.mlp
                .hidden
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        );
        put("mlp.d_max", self.mlp.d_max.to_string());
        put("mlp.init", "he-normal".into());
        put("mlp.epochs", t.epochs.to_string());
        put("mlp.batch_size", t.batch_size.to_string());
        put("mlp.lr_max", t.lr_max.to_string());
        put("mlp.lr_min", t.lr_min.to_string());
        put("mlp.weight_decay", t.weight_decay.to_string());
        put("mlp.shuffle", "per-epoch".into());
        put("split.segment_len", self.split.segment_len.to_string());
        put("split.val_fraction", self.split.val_fraction.to_string());
        put("split.seed", self.split.seed.to_string());
        put("rural_code", self.rural_code.to_string());
        put("kmeans.max_iter", self.kmeans_max_iter.to_string());
        put("kmeans.tol", self.kmeans_tol.to_string());
        put("kmeans.init", "greedy k-means++".into());
        put("kmeans.n_init", self.kmeans_n_init.to_string());
        put("standardizer", "pretrain-train, population std".into());
        m
    }
}

/// Split-tagged datasets plus standardized embeddings of every split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub standardizer: Standardizer,
    pub pretrain_train: Dataset,
    pub pretrain_val: Dataset,
    pub driver_train: Dataset,
    pub driver_val: Dataset,
    pub z_pretrain_train: Matrix,
    pub z_pretrain_val: Matrix,
    pub z_driver_train: Matrix,
    pub z_driver_val: Matrix,
    /// Per driver, the order index below which a sample is in the first
    /// half of that driver's recording.
    early_cutoff: BTreeMap<u32, f64>,
}

/// Tags unsplit datasets and standardizes everything with statistics of the
/// pretrain training rows.
///
/// A dataset whose rows all carry `Unassigned` is split with `split`; a fully
/// tagged dataset is used as is.
pub fn prepare(pretrain: &Dataset, driver: &Dataset, split: &SplitConfig) -> Result<PreparedData> {
    pretrain.validate()?;
    driver.validate()?;
    if pretrain.dim() != driver.dim() {
        return Err(Error::Dimension {
            expected: pretrain.dim(),
            got: driver.dim(),
        });
    }
    let pretrain = ensure_split(pretrain, split, "pretrain")?;
    let driver = ensure_split(driver, split, "driver")?;

    let pretrain_train = pretrain.with_split(Split::Train);
    let pretrain_val = pretrain.with_split(Split::Val);
    let driver_train = driver.with_split(Split::Train);
    let driver_val = driver.with_split(Split::Val);
    if pretrain_train.is_empty() {
        return Err(Error::Data("pretrain dataset has no training rows".into()));
    }
    if driver_train.is_empty() {
        return Err(Error::Data("driver dataset has no training rows".into()));
    }
    if driver_val.is_empty() {
        return Err(Error::Data("driver dataset has no validation rows".into()));
    }

    assert!(
        pretrain_train.split.iter().all(|&s| s == Split::Train),
        "standardizer input contains non-training rows"
    );
    let standardizer = Standardizer::fit(&pretrain_train.embeddings)?;
    let z = |d: &Dataset| standardizer.transform(&d.embeddings);

    let mut range: BTreeMap<u32, (i64, i64)> = BTreeMap::new();
    for (&d, &o) in driver.driver_id.iter().zip(&driver.order_index) {
        let e = range.entry(d).or_insert((o, o));
        e.0 = e.0.min(o);
        e.1 = e.1.max(o);
    }
    let early_cutoff = range
        .into_iter()
        .map(|(d, (lo, hi))| (d, lo as f64 + (hi - lo + 1) as f64 / 2.0))
        .collect();

    Ok(PreparedData {
        z_pretrain_train: z(&pretrain_train)?,
        z_pretrain_val: z(&pretrain_val)?,
        z_driver_train: z(&driver_train)?,
        z_driver_val: z(&driver_val)?,
        standardizer,
        pretrain_train,
        pretrain_val,
        driver_train,
        driver_val,
        early_cutoff,
    })
}

fn ensure_split(d: &Dataset, cfg: &SplitConfig, what: &str) -> Result<Dataset> {
    let unassigned = d.split.iter().filter(|&&s| s == Split::Unassigned).count();
    if unassigned == d.len() {
        segment_split(d, cfg)
    } else if unassigned == 0 {
        Ok(d.clone())
    } else {
        Err(Error::Data(format!(
            "{what} dataset mixes split-tagged and untagged rows ({unassigned} untagged)"
        )))
    }
}

impl PreparedData {
    /// Driver validation rows on the configured rural road type.
    fn rural_rows(&self, rural_code: f64) -> Vec<usize> {
        (0..self.driver_val.len())
            .filter(|&i| self.driver_val.labels.get(i, LABEL_ROAD_TYPE) == rural_code)
            .collect()
    }

    /// Driver validation rows from the first half of each recording.
    fn early_rows(&self) -> Vec<usize> {
        let v = &self.driver_val;
        (0..v.len())
            .filter(|&i| (v.order_index[i] as f64) < self.early_cutoff[&v.driver_id[i]])
            .collect()
    }
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Stat { mean, std })
    }
}

/// Per-driver job seed derived from a run seed.
fn job_seed(seed: u64, driver: u32) -> u64 {
    seed ^ (u64::from(driver) << 32)
}
