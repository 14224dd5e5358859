use std::collections::BTreeMap;

use super::{job_seed, ExperimentConfig, PredictorKind, PreparedData, Stat};
use crate::baselines::StaticStyle;
use crate::cluster::{kmeans_fit, KMeansConfig, KMeansModel, Variant};
use crate::data::{Dataset, LABEL_CURVATURE};
use crate::dsds::LookupTable;
use crate::metrics::{bin_labels, ecs, rmse_driver_mean, BinnedLabels, EcsReport};
use crate::mlp::{train_mlp, MlpModel, TrainConfig};
use crate::{Error, Result};

/// One epoch of one driver's head.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub seed: u64,
    pub driver_id: u32,
    /// 0 is the untrained model.
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub train_rmse: f64,
    pub val_rmse: f64,
    pub val_rmse_rural: Option<f64>,
    /// Specificity of the clustering on the pretrain validation rows.
    pub ecs: Option<f64>,
    /// Validation rows predicted without any data for their driver.
    pub cold_predictions: usize,
    pub curves: Vec<CurveRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub predictor: PredictorKind,
    pub n_c: usize,
    pub seeds: Vec<SeedResult>,
    pub train: Stat,
    pub val: Stat,
    pub val_rural: Option<Stat>,
    pub ecs: Option<Stat>,
    pub config_echo: BTreeMap<String, String>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_c: usize,
    pub seed: u64,
    pub train_rmse: f64,
    pub val_rmse: f64,
    pub val_rmse_rural: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub predictor: PredictorKind,
    /// Sorted by sweep position, then seed position.
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcsRow {
    pub n_c: usize,
    pub ecs: Stat,
    pub per_seed: Vec<f64>,
    /// Nonempty clusters, averaged over seeds.
    pub clusters_evaluated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcsSeries {
    pub variant: Variant,
    pub rows: Vec<EcsRow>,
    /// Full per-cluster reports as `(n_c, seed, report)`.
    pub reports: Vec<(usize, u64, EcsReport)>,
}

impl SweepTable {
    /// Mean ± std over seeds for each swept `n_c`, in sweep order.
    pub fn summary(&self) -> Vec<(usize, Stat, Stat)> {
        let mut order: Vec<usize> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.n_c) {
                order.push(r.n_c);
            }
        }
        order
            .into_iter()
            .filter_map(|n_c| {
                let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.n_c == n_c).collect();
                let train: Vec<f64> = rows.iter().map(|r| r.train_rmse).collect();
                let val: Vec<f64> = rows.iter().map(|r| r.val_rmse).collect();
                Some((n_c, Stat::of(&train)?, Stat::of(&val)?))
            })
            .collect()
    }
}

pub(super) fn rows_by_driver(d: &Dataset) -> BTreeMap<u32, Vec<usize>> {
    let mut m: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &id) in d.driver_id.iter().enumerate() {
        m.entry(id).or_default().push(i);
    }
    m
}

pub(super) struct ClusterFit {
    pub model: KMeansModel,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Fits clusters on the pretrain training rows and assigns the driver rows.
pub(super) fn fit_clusters(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    n_c: usize,
    variant: Variant,
    seed: u64,
) -> Result<ClusterFit> {
    let kcfg = KMeansConfig {
        max_iter: cfg.kmeans_max_iter,
        tol: cfg.kmeans_tol,
        n_init: cfg.kmeans_n_init,
        ..KMeansConfig::new(n_c, variant, seed).with_exec(cfg.exec)
    };
    let model = kmeans_fit(&data.z_pretrain_train, &kcfg)?;
    Ok(ClusterFit {
        train: model.assign_with(&data.z_driver_train, cfg.exec)?,
        val: model.assign_with(&data.z_driver_val, cfg.exec)?,
        model,
    })
}

struct Predictions {
    train: Vec<f64>,
    val: Vec<f64>,
    cold: usize,
    curves: Vec<CurveRow>,
}

fn dsds_predictions(data: &PreparedData, fit: &ClusterFit, n_c: usize) -> Result<Predictions> {
    let tr = &data.driver_train;
    let mut tables = BTreeMap::new();
    for (d, rows) in rows_by_driver(tr) {
        let a: Vec<usize> = rows.iter().map(|&i| fit.train[i]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| tr.behavior[i]).collect();
        tables.insert(d, LookupTable::fit(&a, &y, n_c)?);
    }
    let empty = LookupTable::empty(n_c);
    let table = |d: u32| tables.get(&d).unwrap_or(&empty);
    let train = (0..tr.len())
        .map(|i| {
            table(tr.driver_id[i])
                .predict(fit.train[i])
                .map(|p| p.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let va = &data.driver_val;
    let mut cold = 0;
    let mut val = Vec::with_capacity(va.len());
    for i in 0..va.len() {
        let p = table(va.driver_id[i]).predict(fit.val[i])?;
        cold += usize::from(p.cold);
        val.push(p.value);
    }
    Ok(Predictions {
        train,
        val,
        cold,
        curves: Vec::new(),
    })
}

/// Trains one head per driver. Drivers without training rows predict 0.
fn mlp_predictions(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    hidden: &[usize],
    seed: u64,
) -> Result<Predictions> {
    let tr = &data.driver_train;
    let va = &data.driver_val;
    let train_rows: Vec<(u32, Vec<usize>)> = rows_by_driver(tr).into_iter().collect();
    let val_rows = rows_by_driver(va);
    let no_rows = Vec::new();

    let jobs = cfg.exec.map(train_rows.len(), |k| {
        let (d, rows) = &train_rows[k];
        let vrows = val_rows.get(d).unwrap_or(&no_rows);
        let s = job_seed(seed, *d);
        let mut model = MlpModel::with_hidden(tr.dim(), hidden, cfg.mlp.d_max, s)?;
        let x = data.z_driver_train.select_rows(rows);
        let y: Vec<f64> = rows.iter().map(|&i| tr.behavior[i]).collect();
        let xv = data.z_driver_val.select_rows(vrows);
        let yv: Vec<f64> = vrows.iter().map(|&i| va.behavior[i]).collect();
        let tc = TrainConfig {
            seed: s,
            ..cfg.mlp.train.clone()
        };
        let val = (!vrows.is_empty()).then_some((&xv, yv.as_slice()));
        let hist = train_mlp(&mut model, &x, &y, &tc, val)?;
        let curves = (0..hist.train.len())
            .map(|e| CurveRow {
                seed,
                driver_id: *d,
                epoch: e,
                train_mse: hist.train[e],
                val_mse: hist.val.get(e).copied(),
            })
            .collect::<Vec<_>>();
        let pv = if vrows.is_empty() {
            Vec::new()
        } else {
            model.predict(&xv)?
        };
        Ok((model.predict(&x)?, pv, curves))
    });

    let mut out = Predictions {
        train: vec![0.0; tr.len()],
        val: vec![0.0; va.len()],
        cold: 0,
        curves: Vec::new(),
    };
    let mut trained = std::collections::BTreeSet::new();
    for (job, (d, rows)) in jobs.into_iter().zip(&train_rows) {
        let (pt, pv, curves) = job?;
        for (&i, p) in rows.iter().zip(pt) {
            out.train[i] = p;
        }
        if let Some(vrows) = val_rows.get(d) {
            for (&i, p) in vrows.iter().zip(pv) {
                out.val[i] = p;
            }
        }
        out.curves.extend(curves);
        trained.insert(*d);
    }
    out.cold = va.driver_id.iter().filter(|d| !trained.contains(d)).count();
    Ok(out)
}

/// Static styles see only curvature; a missing curvature counts as straight.
pub(super) fn static_predict(style: &StaticStyle, d: &Dataset) -> Vec<f64> {
    (0..d.len())
        .map(|i| {
            let k = d.labels.get(i, LABEL_CURVATURE);
            style.predict(if k.is_nan() { 0.0 } else { k })
        })
        .collect()
}

fn subset_rmse(pred: &[f64], d: &Dataset, rows: &[usize]) -> Result<Option<f64>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let p: Vec<f64> = rows.iter().map(|&i| pred[i]).collect();
    let t: Vec<f64> = rows.iter().map(|&i| d.behavior[i]).collect();
    let id: Vec<u32> = rows.iter().map(|&i| d.driver_id[i]).collect();
    rmse_driver_mean(&p, &t, &id).map(Some)
}

pub(super) fn val_rmse(pred: &[f64], data: &PreparedData) -> Result<f64> {
    let v = &data.driver_val;
    rmse_driver_mean(pred, &v.behavior, &v.driver_id)
}

pub(super) fn early_rmse(pred: &[f64], data: &PreparedData) -> Result<Option<f64>> {
    subset_rmse(pred, &data.driver_val, &data.early_rows())
}

fn pretrain_val_bins(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Option<BinnedLabels>> {
    if data.pretrain_val.is_empty() {
        return Ok(None);
    }
    bin_labels(&data.pretrain_val.labels, &cfg.binning).map(Some)
}

fn cluster_ecs(
    model: &KMeansModel,
    data: &PreparedData,
    bins: &BinnedLabels,
    exec: crate::Exec,
) -> Result<EcsReport> {
    let a = model.assign_with(&data.z_pretrain_val, exec)?;
    ecs(&a, bins, model.n_clusters())
}

fn run_seed(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    n_c: usize,
    seed: u64,
    bins: Option<&BinnedLabels>,
) -> Result<SeedResult> {
    let mut ecs_value = None;
    let p = match cfg.predictor {
        PredictorKind::Dsds(variant) => {
            let fit = fit_clusters(cfg, data, n_c, variant, seed)?;
            if let Some(b) = bins {
                ecs_value = Some(cluster_ecs(&fit.model, data, b, cfg.exec)?.ecs);
            }
            dsds_predictions(data, &fit, n_c)?
        }
        PredictorKind::Mlp => mlp_predictions(cfg, data, &cfg.mlp.hidden, seed)?,
        PredictorKind::Linear => mlp_predictions(cfg, data, &[], seed)?,
        PredictorKind::Static(kind) => {
            let style = StaticStyle::of_kind(kind);
            Predictions {
                train: static_predict(&style, &data.driver_train),
                val: static_predict(&style, &data.driver_val),
                cold: 0,
                curves: Vec::new(),
            }
        }
    };
    let tr = &data.driver_train;
    Ok(SeedResult {
        seed,
        train_rmse: rmse_driver_mean(&p.train, &tr.behavior, &tr.driver_id)?,
        val_rmse: val_rmse(&p.val, data)?,
        val_rmse_rural: subset_rmse(&p.val, &data.driver_val, &data.rural_rows(cfg.rural_code))?,
        ecs: ecs_value,
        cold_predictions: p.cold,
        curves: p.curves,
    })
}

/// Pretrain-then-adapt: clusters (or heads) per seed, evaluated per driver on
/// the driver validation rows.
pub fn run_adaptation(cfg: &ExperimentConfig, data: &PreparedData) -> Result<RunReport> {
    cfg.validate()?;
    let bins = if cfg.predictor.uses_clusters() {
        pretrain_val_bins(cfg, data)?
    } else {
        None
    };
    let seeds = cfg
        .exec
        .map(cfg.seeds.len(), |i| {
            run_seed(cfg, data, cfg.n_c, cfg.seeds[i], bins.as_ref())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&SeedResult) -> Option<f64>| -> Option<Stat> {
        let v: Vec<f64> = seeds.iter().filter_map(f).collect();
        if v.len() == seeds.len() {
            Stat::of(&v)
        } else {
            None
        }
    };
    let train = col(&|s| Some(s.train_rmse)).expect("at least one seed");
    let val = col(&|s| Some(s.val_rmse)).expect("at least one seed");
    let val_rural = col(&|s| s.val_rmse_rural);
    let ecs = col(&|s| s.ecs);
    Ok(RunReport {
        predictor: cfg.predictor,
        n_c: cfg.n_c,
        train,
        val,
        val_rural,
        ecs,
        seeds,
        config_echo: cfg.echo(),
        config_hash: super::report::config_hash(&cfg.echo()),
    })
}

fn check_list(n_c_list: &[usize]) -> Result<()> {
    if n_c_list.is_empty() {
        return Err(Error::arg("n_c", "the sweep list is empty"));
    }
    if n_c_list.contains(&0) {
        return Err(Error::arg("n_c", "sweep values must be at least 1"));
    }
    Ok(())
}

/// DSDS at every `n_c` in the list and every seed, on shared data.
pub fn cluster_sweep(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    n_c_list: &[usize],
) -> Result<SweepTable> {
    cfg.validate()?;
    check_list(n_c_list)?;
    if !cfg.predictor.uses_clusters() {
        return Err(Error::arg(
            "predictor",
            format!(
                "a cluster sweep needs dsds-km or dsds-kms, not {}",
                cfg.predictor
            ),
        ));
    }
    let n_seeds = cfg.seeds.len();
    let rows = cfg
        .exec
        .map(n_c_list.len() * n_seeds, |j| {
            let (n_c, seed) = (n_c_list[j / n_seeds], cfg.seeds[j % n_seeds]);
            run_seed(cfg, data, n_c, seed, None).map(|r| SweepRow {
                n_c,
                seed,
                train_rmse: r.train_rmse,
                val_rmse: r.val_rmse,
                val_rmse_rural: r.val_rmse_rural,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        predictor: cfg.predictor,
        rows,
    })
}

/// Cluster specificity on the pretrain validation rows for every `n_c` and
/// seed. The clustering variant follows the predictor (classical otherwise).
pub fn run_ecs(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    n_c_list: &[usize],
) -> Result<EcsSeries> {
    cfg.validate()?;
    check_list(n_c_list)?;
    let variant = match cfg.predictor {
        PredictorKind::Dsds(v) => v,
        _ => Variant::Classical,
    };
    let bins = pretrain_val_bins(cfg, data)?
        .ok_or_else(|| Error::Data("pretrain dataset has no validation rows".into()))?;
    let n_seeds = cfg.seeds.len();
    let reports = cfg
        .exec
        .map(n_c_list.len() * n_seeds, |j| {
            let (n_c, seed) = (n_c_list[j / n_seeds], cfg.seeds[j % n_seeds]);
            let kcfg = KMeansConfig {
                max_iter: cfg.kmeans_max_iter,
                tol: cfg.kmeans_tol,
                n_init: cfg.kmeans_n_init,
                ..KMeansConfig::new(n_c, variant, seed).with_exec(cfg.exec)
            };
            let model = kmeans_fit(&data.z_pretrain_train, &kcfg)?;
            Ok((n_c, seed, cluster_ecs(&model, data, &bins, cfg.exec)?))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rows = reports
        .chunks(n_seeds)
        .map(|c| {
            let per_seed: Vec<f64> = c.iter().map(|r| r.2.ecs).collect();
            EcsRow {
                n_c: c[0].0,
                ecs: Stat::of(&per_seed).expect("at least one seed"),
                clusters_evaluated: c.iter().map(|r| r.2.clusters_evaluated as f64).sum::<f64>()
                    / n_seeds as f64,
                per_seed,
            }
        })
        .collect();
    Ok(EcsSeries {
        variant,
        rows,
        reports,
    })
}
