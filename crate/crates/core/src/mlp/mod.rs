//! Fully connected behavior heads on frozen embeddings.
//!
//! Every hidden layer is `linear → batch norm → ReLU`; the output layer is
//! `linear → tanh`, scaled by `d_max` meters. Training uses mean squared error,
//! AdamW and a cosine-annealed learning rate. Everything runs in `f64`.

mod optim;
mod train;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use optim::{AdamW, CosineSchedule};
pub use train::{train_mlp, LossHistory, TrainConfig};

use crate::{Error, Matrix, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SADM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics; no state changes.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
struct Linear {
    n_in: usize,
    n_out: usize,
    /// `n_out × n_in`, row-major.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Linear {
    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut out = vec![0.0; batch * self.n_out];
        for i in 0..batch {
            let xi = &x[i * self.n_in..(i + 1) * self.n_in];
            let oi = &mut out[i * self.n_out..(i + 1) * self.n_out];
            for (o, slot) in oi.iter_mut().enumerate() {
                let wo = &self.w[o * self.n_in..(o + 1) * self.n_in];
                *slot = self.b[o] + wo.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    fn backward(
        &self,
        x: &[f64],
        dz: &[f64],
        batch: usize,
        dw: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> {
        let mut dx = vec![0.0; batch * self.n_in];
        for i in 0..batch {
            let xi = &x[i * self.n_in..(i + 1) * self.n_in];
            let dxi = &mut dx[i * self.n_in..(i + 1) * self.n_in];
            for o in 0..self.n_out {
                let g = dz[i * self.n_out + o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let wo = &self.w[o * self.n_in..(o + 1) * self.n_in];
                let dwo = &mut dw[o * self.n_in..(o + 1) * self.n_in];
                for k in 0..self.n_in {
                    dwo[k] += g * xi[k];
                    dxi[k] += g * wo[k];
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(n: usize) -> Self {
        Self {
            gamma: vec![1.0; n],
            beta: vec![0.0; n],
            running_mean: vec![0.0; n],
            running_var: vec![1.0; n],
        }
    }
}

/// Intermediate values of one hidden layer, kept for the backward pass.
#[derive(Debug, Clone)]
struct HiddenCache {
    input: Vec<f64>,
    xhat: Vec<f64>,
    /// Post-affine, pre-ReLU.
    y: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    inv_std: Vec<f64>,
}

/// Everything the backward pass needs from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    hidden: Vec<HiddenCache>,
    last_input: Vec<f64>,
    tanh_out: Vec<f64>,
    pub predictions: Vec<f64>,
}

/// Gradients laid out like the model's parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    groups: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn groups(&self) -> Vec<&[f64]> {
        self.groups.iter().map(Vec::as_slice).collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.groups.concat()
    }

    pub fn max_abs(&self) -> f64 {
        self.groups
            .iter()
            .flatten()
            .fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    linears: Vec<Linear>,
    norms: Vec<BatchNorm>,
    d_max: f64,
}

pub const DESK_HIDDEN: [usize; 2] = [64, 64];
pub const PAPER_HIDDEN: [usize; 2] = [2048, 2048];

impl MlpModel {
    /// He-normal weights, zero biases, identity batch norm.
    pub fn new(dims: &[usize], d_max: f64, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::arg(
                "layer_dims",
                "need at least input and output widths, all ≥ 1",
            ));
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::arg("layer_dims", "last layer must have width 1"));
        }
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(Error::arg("d_max", "must be positive and finite"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let linears = dims
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("valid std");
                Linear {
                    n_in,
                    n_out,
                    w: (0..n_in * n_out).map(|_| normal.sample(&mut rng)).collect(),
                    b: vec![0.0; n_out],
                }
            })
            .collect();
        let norms = dims[1..dims.len() - 1]
            .iter()
            .map(|&n| BatchNorm::new(n))
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            linears,
            norms,
            d_max,
        })
    }

    /// `[input, hidden.., 1]`.
    pub fn with_hidden(input: usize, hidden: &[usize], d_max: f64, seed: u64) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Self::new(&dims, d_max, seed)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    fn has_batch_norm(&self) -> bool {
        !self.norms.is_empty()
    }

    /// Trainable parameters: weights, biases and batch-norm scale/shift.
    pub fn n_parameters(&self) -> usize {
        self.linears
            .iter()
            .map(|l| l.w.len() + l.b.len())
            .sum::<usize>()
            + self.norms.iter().map(|n| 2 * n.gamma.len()).sum::<usize>()
    }

    /// Batch-norm running statistics.
    pub fn n_buffers(&self) -> usize {
        self.norms.iter().map(|n| 2 * n.gamma.len()).sum()
    }

    /// Parameter groups in checkpoint order: per layer `w, b`, then `gamma, beta`
    /// for hidden layers.
    pub fn param_groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let mut norms = self.norms.iter_mut();
        for lin in self.linears.iter_mut() {
            out.push(&mut lin.w);
            out.push(&mut lin.b);
            if let Some(bn) = norms.next() {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    pub fn param_groups(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (l, lin) in self.linears.iter().enumerate() {
            out.push(&lin.w);
            out.push(&lin.b);
            if let Some(bn) = self.norms.get(l) {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn group_lens(&self) -> Vec<usize> {
        self.param_groups().iter().map(|g| g.len()).collect()
    }

    fn check_input(&self, x: &Matrix, mode: Mode) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if x.rows() == 0 {
            return Err(Error::Data("empty batch".into()));
        }
        if mode == Mode::Train && self.has_batch_norm() && x.rows() < 2 {
            return Err(Error::Data(
                "batch norm in train mode needs a batch of at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Pure forward pass; train mode uses batch statistics but leaves the
    /// running statistics untouched.
    pub fn forward_cached(&self, x: &Matrix, mode: Mode) -> Result<ForwardCache> {
        self.check_input(x, mode)?;
        let batch = x.rows();
        let mut act = x.as_slice().to_vec();
        let mut hidden = Vec::with_capacity(self.norms.len());
        for (lin, bn) in self.linears.iter().zip(&self.norms) {
            let z = lin.forward(&act, batch);
            let h = lin.n_out;
            let (mean, var) = match mode {
                Mode::Train => batch_moments(&z, batch, h),
                Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            let mut xhat = vec![0.0; z.len()];
            let mut y = vec![0.0; z.len()];
            let mut out = vec![0.0; z.len()];
            for i in 0..batch {
                for j in 0..h {
                    let k = i * h + j;
                    xhat[k] = (z[k] - mean[j]) * inv_std[j];
                    y[k] = bn.gamma[j] * xhat[k] + bn.beta[j];
                    out[k] = y[k].max(0.0);
                }
            }
            hidden.push(HiddenCache {
                input: std::mem::replace(&mut act, out),
                xhat,
                y,
                batch_mean: mean,
                batch_var: var,
                inv_std,
            });
        }
        let last = self.linears.last().expect("at least one layer");
        let z = last.forward(&act, batch);
        let tanh_out: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
        let predictions = tanh_out.iter().map(|t| t * self.d_max).collect();
        Ok(ForwardCache {
            batch,
            hidden,
            last_input: act,
            tanh_out,
            predictions,
        })
    }

    /// Predictions in meters. Train mode also updates running statistics.
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Vec<f64>> {
        let cache = self.forward_cached(x, mode)?;
        if mode == Mode::Train {
            self.update_running_stats(&cache);
        }
        Ok(cache.predictions)
    }

    /// Eval-mode predictions without any state change.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x, Mode::Eval)?.predictions)
    }

    /// Exponential moving average of batch statistics; variance unbiased.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let b = cache.batch as f64;
        for (bn, hc) in self.norms.iter_mut().zip(&cache.hidden) {
            for j in 0..bn.gamma.len() {
                bn.running_mean[j] =
                    (1.0 - BN_MOMENTUM) * bn.running_mean[j] + BN_MOMENTUM * hc.batch_mean[j];
                let unbiased = hc.batch_var[j] * b / (b - 1.0).max(1.0);
                bn.running_var[j] =
                    (1.0 - BN_MOMENTUM) * bn.running_var[j] + BN_MOMENTUM * unbiased;
            }
        }
    }

    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Result<Gradients> {
        self.backward_scaled(cache, target, 1.0)
    }

    /// Exact gradients of `scale · MSE(prediction, target)` for a train-mode cache.
    pub fn backward_scaled(
        &self,
        cache: &ForwardCache,
        target: &[f64],
        scale: f64,
    ) -> Result<Gradients> {
        let batch = cache.batch;
        if target.len() != batch {
            return Err(Error::Dimension {
                expected: batch,
                got: target.len(),
            });
        }
        let mut groups: Vec<Vec<f64>> = self
            .group_lens()
            .into_iter()
            .map(|n| vec![0.0; n])
            .collect();
        let group_of_layer = |l: usize| -> usize {
            // Hidden layers own four groups each, the output layer two.
            l * 4
        };

        let coef = 2.0 * scale / batch as f64;
        let dz: Vec<f64> = (0..batch)
            .map(|i| {
                let t = cache.tanh_out[i];
                coef * (cache.predictions[i] - target[i]) * self.d_max * (1.0 - t * t)
            })
            .collect();

        let n_layers = self.linears.len();
        let out_g = group_of_layer(n_layers - 1);
        let (head, tail) = groups.split_at_mut(out_g + 1);
        let mut da = self.linears[n_layers - 1].backward(
            &cache.last_input,
            &dz,
            batch,
            &mut head[out_g],
            &mut tail[0],
        );

        for l in (0..n_layers - 1).rev() {
            let hc = &cache.hidden[l];
            let bn = &self.norms[l];
            let h = bn.gamma.len();
            let g0 = group_of_layer(l);
            let bsz = batch as f64;
            // ReLU, then the affine part of batch norm.
            let mut dgamma = vec![0.0; h];
            let mut dbeta = vec![0.0; h];
            let mut dxhat = vec![0.0; batch * h];
            for i in 0..batch {
                for j in 0..h {
                    let k = i * h + j;
                    let dy = if hc.y[k] > 0.0 { da[k] } else { 0.0 };
                    dgamma[j] += dy * hc.xhat[k];
                    dbeta[j] += dy;
                    dxhat[k] = dy * bn.gamma[j];
                }
            }
            // Normalization with batch statistics.
            let mut sum_dxhat = vec![0.0; h];
            let mut sum_dxhat_xhat = vec![0.0; h];
            for i in 0..batch {
                for j in 0..h {
                    let k = i * h + j;
                    sum_dxhat[j] += dxhat[k];
                    sum_dxhat_xhat[j] += dxhat[k] * hc.xhat[k];
                }
            }
            let mut dz = vec![0.0; batch * h];
            for i in 0..batch {
                for j in 0..h {
                    let k = i * h + j;
                    dz[k] = hc.inv_std[j] / bsz
                        * (bsz * dxhat[k] - sum_dxhat[j] - hc.xhat[k] * sum_dxhat_xhat[j]);
                }
            }
            groups[g0 + 2] = dgamma;
            groups[g0 + 3] = dbeta;
            let (head, tail) = groups.split_at_mut(g0 + 1);
            da = self.linears[l].backward(&hc.input, &dz, batch, &mut head[g0], &mut tail[0]);
        }
        Ok(Gradients { groups })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.linears.len() as u64).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        let mut put = |v: &[f64]| {
            v.iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes()))
        };
        for (l, lin) in self.linears.iter().enumerate() {
            put(&lin.w);
            put(&lin.b);
            if let Some(bn) = self.norms.get(l) {
                put(&bn.gamma);
                put(&bn.beta);
                put(&bn.running_mean);
                put(&bn.running_var);
            }
        }
        put(&[self.d_max]);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> std::result::Result<&[u8], String> {
            let s = buf.get(pos..pos + n).ok_or("truncated checkpoint")?;
            pos += n;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err("magic mismatch, expected SADM".into());
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let n_layers = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if n_layers == 0 || n_layers > 1024 {
            return Err(format!("implausible layer count {n_layers}"));
        }
        let mut dims = Vec::with_capacity(n_layers + 1);
        for _ in 0..=n_layers {
            dims.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
        }
        let mut model = MlpModel::new(&dims, 1.0, 0).map_err(|e| e.to_string())?;
        let mut read = |dst: &mut [f64]| -> std::result::Result<(), String> {
            for v in dst.iter_mut() {
                *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
            Ok(())
        };
        for l in 0..n_layers {
            read(&mut model.linears[l].w)?;
            read(&mut model.linears[l].b)?;
            if let Some(bn) = model.norms.get_mut(l) {
                read(&mut bn.gamma)?;
                read(&mut bn.beta)?;
                read(&mut bn.running_mean)?;
                read(&mut bn.running_var)?;
            }
        }
        let mut d_max = [0.0];
        read(&mut d_max)?;
        model.d_max = d_max[0];
        if pos != buf.len() {
            return Err("trailing bytes after checkpoint".into());
        }
        if model.d_max.is_nan()
            || model.d_max <= 0.0
            || model
                .param_groups()
                .iter()
                .any(|g| g.iter().any(|v| !v.is_finite()))
        {
            return Err("non-finite parameters".into());
        }
        if model
            .norms
            .iter()
            .any(|bn| bn.running_var.iter().any(|&v| v < 0.0))
        {
            return Err("negative running variance".into());
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(&self.to_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf).map_err(|r| Error::format(path, r))
    }
}

/// Per-channel mean and biased variance.
fn batch_moments(z: &[f64], batch: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let b = batch as f64;
    let mut mean = vec![0.0; h];
    for i in 0..batch {
        for j in 0..h {
            mean[j] += z[i * h + j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= b);
    let mut var = vec![0.0; h];
    for i in 0..batch {
        for j in 0..h {
            let d = z[i * h + j] - mean[j];
            var[j] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= b);
    (mean, var)
}

/// Mean squared error, the training loss.
pub fn mlp_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    crate::metrics::mse(pred, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parameter_count() {
        let m = MlpModel::new(&[4, 8, 8, 1], 1.0, 0).unwrap();
        // 4·8+8 + 8·8+8 + 8·1+1 = 121 linear, 2·(8+8) = 32 batch-norm affine.
        assert_eq!(m.n_parameters(), 121 + 32);
        assert_eq!(m.n_buffers(), 32);
    }

    #[test]
    fn init_is_seeded() {
        let a = MlpModel::new(&[4, 8, 8, 1], 1.0, 42).unwrap();
        let b = MlpModel::new(&[4, 8, 8, 1], 1.0, 42).unwrap();
        let c = MlpModel::new(&[4, 8, 8, 1], 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.linears.iter().all(|l| l.b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn invalid_dims() {
        assert!(MlpModel::new(&[4, 8, 2], 1.0, 0).is_err());
        assert!(MlpModel::new(&[4], 1.0, 0).is_err());
        assert!(MlpModel::new(&[4, 0, 1], 1.0, 0).is_err());
        assert!(MlpModel::new(&[4, 1], 0.0, 0).is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut m = MlpModel::new(&[3, 4, 1], 2.0, 0).unwrap();
        for g in m.param_groups_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        assert!(m
            .predict(&random_batch(5, 3, 1))
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_tiny_model() {
        // 2-2-1 with fixed weights; eval mode with default running stats (0, 1).
        let mut m = MlpModel::new(&[2, 2, 1], 0.5, 0).unwrap();
        m.linears[0].w = vec![1.0, -1.0, 0.5, 2.0];
        m.linears[0].b = vec![0.1, -0.2];
        m.norms[0].gamma = vec![2.0, 1.0];
        m.norms[0].beta = vec![0.0, 0.3];
        m.linears[1].w = vec![0.7, -0.4];
        m.linears[1].b = vec![0.05];
        let x = [0.3, 0.2];
        let s = 1.0 / (1.0 + BN_EPS).sqrt();
        let h0 = (2.0 * (x[0] - x[1] + 0.1) * s).max(0.0);
        let h1 = ((0.5 * x[0] + 2.0 * x[1] - 0.2) * s + 0.3).max(0.0);
        let expected = 0.5 * (0.7 * h0 - 0.4 * h1 + 0.05).tanh();
        let got = m.predict(&Matrix::from_rows(&[x]).unwrap()).unwrap();
        assert!(
            (got[0] - expected).abs() < 1e-14,
            "{} vs {expected}",
            got[0]
        );
    }

    #[test]
    fn output_bounded_and_eval_is_pure() {
        let mut m = MlpModel::new(&[3, 6, 1], 0.8, 7).unwrap();
        let x = random_batch(16, 3, 2);
        let mut big = x.clone();
        big.as_mut_slice().iter_mut().for_each(|v| *v *= 1e3);
        let before = m.clone();
        for v in m.predict(&big).unwrap() {
            assert!(v.abs() <= 0.8);
        }
        m.forward(&x, Mode::Eval).unwrap();
        assert_eq!(m, before);
        m.forward(&x, Mode::Train).unwrap();
        assert_ne!(m.norms, before.norms);
        assert_eq!(m.linears, before.linears);
    }

    #[test]
    fn train_mode_rejects_singleton_batch() {
        let mut m = MlpModel::new(&[3, 4, 1], 1.0, 0).unwrap();
        assert!(m.forward(&random_batch(1, 3, 0), Mode::Train).is_err());
        assert!(m.forward(&random_batch(1, 3, 0), Mode::Eval).is_ok());
        assert!(m.forward(&random_batch(2, 4, 0), Mode::Eval).is_err());
        // No batch norm: a single sample is fine.
        let mut lin = MlpModel::new(&[3, 1], 1.0, 0).unwrap();
        assert!(lin.forward(&random_batch(1, 3, 0), Mode::Train).is_ok());
    }

    #[test]
    fn batch_norm_normalizes_per_channel() {
        let m = MlpModel::new(&[3, 5, 5, 1], 1.0, 3).unwrap();
        let c = m
            .forward_cached(&random_batch(32, 3, 4), Mode::Train)
            .unwrap();
        for hc in &c.hidden {
            let h = hc.inv_std.len();
            for j in 0..h {
                let col: Vec<f64> = (0..32).map(|i| hc.xhat[i * h + j]).collect();
                let mean = col.iter().sum::<f64>() / 32.0;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0;
                assert!(mean.abs() <= 1e-6);
                // Exactly σ²/(σ²+eps); within 1e-4 of 1 once σ² ≥ 0.1.
                let expected = 1.0 - BN_EPS * hc.inv_std[j] * hc.inv_std[j];
                assert!((var - expected).abs() <= 1e-10, "{var} vs {expected}");
                assert!(var <= 1.0);
            }
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(mlp_loss(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.0);
        assert!((mlp_loss(&[0.5, 0.5], &[0.25, 0.25]).unwrap() - 0.0625).abs() < 1e-15);
        assert!((mlp_loss(&[0.0, 0.0], &[0.1, -0.3]).unwrap() - 0.05).abs() < 1e-15);
        assert!(mlp_loss(&[], &[]).is_err());
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let m = MlpModel::new(&[3, 5, 5, 1], 1.0, 9).unwrap();
        let c = m
            .forward_cached(&random_batch(8, 3, 5), Mode::Train)
            .unwrap();
        let target = c.predictions.clone();
        assert!(m.backward(&c, &target).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn gradient_is_linear_in_loss_scale() {
        let m = MlpModel::new(&[3, 5, 5, 1], 1.0, 9).unwrap();
        let c = m
            .forward_cached(&random_batch(8, 3, 5), Mode::Train)
            .unwrap();
        let target: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
        let g1 = m.backward(&c, &target).unwrap().flat();
        let g2 = m.backward_scaled(&c, &target, 2.0).unwrap().flat();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-15 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = MlpModel::new(&[3, 4, 4, 1], 0.7, 1).unwrap();
        m.forward(&random_batch(6, 3, 1), Mode::Train).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..8], b"SADM\x01\x00\x00\x00");
        assert_eq!(MlpModel::from_bytes(&bytes).unwrap(), m);
        assert!(MlpModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
