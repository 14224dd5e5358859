use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AdamW, CosineSchedule, MlpModel, Mode};
use crate::metrics::mse;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            lr_max: 1e-3,
            lr_min: 0.0,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

/// Eval-mode MSE before training (index 0) and after every epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    pub steps: u64,
}

/// Trains `model` in place on `(x, y)`.
///
/// Rows are reshuffled every epoch from a generator seeded with `cfg.seed`;
/// a trailing batch of one sample is dropped when the model has batch norm.
/// Targets are clipped just inside `±d_max`.
pub fn train_mlp(
    model: &mut MlpModel,
    x: &Matrix,
    y: &[f64],
    cfg: &TrainConfig,
    val: Option<(&Matrix, &[f64])>,
) -> Result<LossHistory> {
    let n = x.rows();
    if n == 0 || y.len() != n {
        return Err(Error::Data(format!(
            "training set needs matching nonempty inputs ({n} rows, {} targets)",
            y.len()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::arg("batch_size", "must be at least 1"));
    }
    let d_max = model.d_max();
    let limit = d_max * (1.0 - 1e-6);
    if y.iter().all(|v| v.is_nan() || v.abs() >= d_max) {
        return Err(Error::Data(format!(
            "every target lies outside the representable range ±{d_max}"
        )));
    }
    let y: Vec<f64> = y.iter().map(|v| v.clamp(-limit, limit)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    let min_batch = if model.has_batch_norm() { 2 } else { 1 };
    let batches_per_epoch = {
        let full = n / cfg.batch_size;
        let rem = n % cfg.batch_size;
        full + usize::from(rem >= min_batch)
    };
    let total = (cfg.epochs * batches_per_epoch) as u64;
    let schedule = CosineSchedule::new(cfg.lr_max, cfg.lr_min, total.max(1))?;
    let mut opt = AdamW::new(&model.group_lens(), cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut hist = LossHistory::default();
    record(model, x, &y, val, &mut hist)?;
    let mut step = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < min_batch {
                continue;
            }
            let xb = x.select_rows(chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let cache = model.forward_cached(&xb, Mode::Train)?;
            model.update_running_stats(&cache);
            let grads = model.backward(&cache, &yb)?;
            let lr = schedule.lr(step);
            opt.step(&mut model.param_groups_mut(), &grads.groups(), lr)?;
            step += 1;
        }
        record(model, x, &y, val, &mut hist)?;
    }
    hist.steps = step;
    Ok(hist)
}

fn record(
    model: &MlpModel,
    x: &Matrix,
    y: &[f64],
    val: Option<(&Matrix, &[f64])>,
    hist: &mut LossHistory,
) -> Result<()> {
    let loss = mse(&model.predict(x)?, y)?;
    if !loss.is_finite() {
        return Err(Error::Numeric("training loss is not finite".into()));
    }
    hist.train.push(loss);
    if let Some((xv, yv)) = val {
        if !yv.is_empty() {
            hist.val.push(mse(&model.predict(xv)?, yv)?);
        }
    }
    Ok(())
}
