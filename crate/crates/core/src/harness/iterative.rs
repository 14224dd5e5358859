use std::collections::BTreeMap;

use super::adapt::{early_rmse, fit_clusters, rows_by_driver, static_predict, val_rmse};
use super::{job_seed, ExperimentConfig, PredictorKind, PreparedData};
use crate::baselines::StaticStyle;
use crate::data::chunk_ranges;
use crate::dsds::LookupTable;
use crate::mlp::{train_mlp, MlpModel, TrainConfig};
use crate::Result;

/// Validation scores after one chunk of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativePoint {
    pub seed: u64,
    /// 1-based chunk count.
    pub iteration: usize,
    /// Training rows consumed so far, over all drivers.
    pub samples_seen: usize,
    pub val_rmse: f64,
    /// Validation rows from the first half of each driver's recording.
    pub val_rmse_early: Option<f64>,
}

/// End of the stream next to the same predictor trained in one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeFinal {
    pub seed: u64,
    pub val_rmse: f64,
    pub val_rmse_early: Option<f64>,
    pub batch_val_rmse: f64,
    pub batch_val_rmse_early: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeReport {
    pub predictor: PredictorKind,
    pub fraction: f64,
    pub points: Vec<IterativePoint>,
    pub finals: Vec<IterativeFinal>,
}

/// One driver's validation predictions after every chunk, plus batch.
struct DriverStream {
    chunk_lens: Vec<usize>,
    after_chunk: Vec<Vec<f64>>,
    batch: Vec<f64>,
}

/// Feeds each driver's training rows in temporal chunks of `cfg.fraction`.
///
/// DSDS tables accumulate chunk by chunk. Neural heads start from the
/// previous chunk's weights and see only the current chunk, with a fresh
/// optimizer and schedule. Validation always uses every validation row.
pub fn run_iterative(cfg: &ExperimentConfig, data: &PreparedData) -> Result<IterativeReport> {
    cfg.validate()?;
    let per_seed = cfg
        .exec
        .map(cfg.seeds.len(), |i| run_seed(cfg, data, cfg.seeds[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut finals = Vec::new();
    for (p, f) in per_seed {
        points.extend(p);
        finals.push(f);
    }
    Ok(IterativeReport {
        predictor: cfg.predictor,
        fraction: cfg.fraction,
        points,
        finals,
    })
}

fn run_seed(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
) -> Result<(Vec<IterativePoint>, IterativeFinal)> {
    let tr = &data.driver_train;
    let va = &data.driver_val;
    let train_rows: Vec<(u32, Vec<usize>)> = rows_by_driver(tr).into_iter().collect();
    let val_rows = rows_by_driver(va);
    let no_rows = Vec::new();
    let vrows_of = |d: &u32| val_rows.get(d).unwrap_or(&no_rows);

    let streams: Vec<DriverStream> = match cfg.predictor {
        PredictorKind::Dsds(variant) => {
            let fit = fit_clusters(cfg, data, cfg.n_c, variant, seed)?;
            train_rows
                .iter()
                .map(|(d, rows)| {
                    let a: Vec<usize> = rows.iter().map(|&i| fit.train[i]).collect();
                    let y: Vec<f64> = rows.iter().map(|&i| tr.behavior[i]).collect();
                    let av: Vec<usize> = vrows_of(d).iter().map(|&i| fit.val[i]).collect();
                    let chunks = chunk_ranges(rows.len(), cfg.fraction)?;
                    let mut table = LookupTable::empty(cfg.n_c);
                    let mut after_chunk = Vec::with_capacity(chunks.len());
                    for r in &chunks {
                        table = table.update(&a[r.clone()], &y[r.clone()])?;
                        after_chunk.push(table.predict_many(&av)?);
                    }
                    let batch = LookupTable::fit(&a, &y, cfg.n_c)?.predict_many(&av)?;
                    Ok(DriverStream {
                        chunk_lens: chunks.iter().map(|r| r.len()).collect(),
                        after_chunk,
                        batch,
                    })
                })
                .collect::<Result<_>>()?
        }
        PredictorKind::Mlp | PredictorKind::Linear => {
            let hidden: &[usize] = if cfg.predictor == PredictorKind::Mlp {
                &cfg.mlp.hidden
            } else {
                &[]
            };
            cfg.exec
                .map(train_rows.len(), |k| {
                    let (d, rows) = &train_rows[k];
                    mlp_stream(cfg, data, hidden, job_seed(seed, *d), rows, vrows_of(d))
                })
                .into_iter()
                .collect::<Result<_>>()?
        }
        PredictorKind::Static(kind) => {
            let pv = static_predict(&StaticStyle::of_kind(kind), va);
            train_rows
                .iter()
                .map(|(d, rows)| {
                    let p: Vec<f64> = vrows_of(d).iter().map(|&i| pv[i]).collect();
                    let chunks = chunk_ranges(rows.len(), cfg.fraction)?;
                    Ok(DriverStream {
                        chunk_lens: chunks.iter().map(|r| r.len()).collect(),
                        after_chunk: vec![p.clone(); chunks.len()],
                        batch: p,
                    })
                })
                .collect::<Result<_>>()?
        }
    };

    // Drivers with fewer chunks keep their final state; drivers without
    // training rows predict 0.
    let n_iter = streams
        .iter()
        .map(|s| s.after_chunk.len())
        .max()
        .unwrap_or(0);
    let stream_of: BTreeMap<u32, &DriverStream> =
        train_rows.iter().map(|(d, _)| *d).zip(&streams).collect();
    let assemble = |pick: &dyn Fn(&DriverStream) -> &[f64]| {
        let mut pred = vec![0.0; va.len()];
        for (d, vrows) in &val_rows {
            if let Some(s) = stream_of.get(d) {
                for (&i, &p) in vrows.iter().zip(pick(s)) {
                    pred[i] = p;
                }
            }
        }
        pred
    };

    let mut points = Vec::with_capacity(n_iter);
    let mut seen = 0;
    let mut last = assemble(&|s| &s.batch);
    for it in 0..n_iter {
        seen += streams
            .iter()
            .filter_map(|s| s.chunk_lens.get(it))
            .sum::<usize>();
        let pred = assemble(&|s| &s.after_chunk[it.min(s.after_chunk.len() - 1)]);
        points.push(IterativePoint {
            seed,
            iteration: it + 1,
            samples_seen: seen,
            val_rmse: val_rmse(&pred, data)?,
            val_rmse_early: early_rmse(&pred, data)?,
        });
        last = pred;
    }
    let batch = assemble(&|s| &s.batch);
    let fin = IterativeFinal {
        seed,
        val_rmse: val_rmse(&last, data)?,
        val_rmse_early: early_rmse(&last, data)?,
        batch_val_rmse: val_rmse(&batch, data)?,
        batch_val_rmse_early: early_rmse(&batch, data)?,
    };
    Ok((points, fin))
}

fn mlp_stream(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    hidden: &[usize],
    seed: u64,
    rows: &[usize],
    vrows: &[usize],
) -> Result<DriverStream> {
    let tr = &data.driver_train;
    let x = data.z_driver_train.select_rows(rows);
    let y: Vec<f64> = rows.iter().map(|&i| tr.behavior[i]).collect();
    let xv = data.z_driver_val.select_rows(vrows);
    let predict = |m: &MlpModel| -> Result<Vec<f64>> {
        if vrows.is_empty() {
            Ok(Vec::new())
        } else {
            m.predict(&xv)
        }
    };
    // Batch norm needs two rows; smaller chunks leave the model unchanged.
    let min_rows = if hidden.is_empty() { 1 } else { 2 };
    let chunks = chunk_ranges(rows.len(), cfg.fraction)?;
    let mut model = MlpModel::with_hidden(tr.dim(), hidden, cfg.mlp.d_max, seed)?;
    let mut after_chunk = Vec::with_capacity(chunks.len());
    for (k, r) in chunks.iter().enumerate() {
        if r.len() >= min_rows {
            let idx: Vec<usize> = r.clone().collect();
            let tc = TrainConfig {
                seed: seed.wrapping_add(k as u64),
                ..cfg.mlp.train.clone()
            };
            train_mlp(&mut model, &x.select_rows(&idx), &y[r.clone()], &tc, None)?;
        }
        after_chunk.push(predict(&model)?);
    }
    let mut batch_model = MlpModel::with_hidden(tr.dim(), hidden, cfg.mlp.d_max, seed)?;
    let tc = TrainConfig {
        seed,
        ..cfg.mlp.train.clone()
    };
    if rows.len() >= min_rows {
        train_mlp(&mut batch_model, &x, &y, &tc, None)?;
    }
    Ok(DriverStream {
        chunk_lens: chunks.iter().map(|r| r.len()).collect(),
        after_chunk,
        batch: predict(&batch_model)?,
    })
}
