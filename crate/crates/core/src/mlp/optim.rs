//! AdamW with decoupled weight decay and a cosine-annealed learning rate.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    /// One moment buffer per parameter group, sized by `group_lens`.
    pub fn new(group_lens: &[usize], weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: group_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: group_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// `p ← p − lr·(m̂/(√v̂ + eps) + weight_decay·p)` with bias-corrected moments.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        for (g, (p, m)) in grads.iter().zip(params.iter().zip(&self.m)) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Dimension {
                    expected: m.len(),
                    got: p.len().min(g.len()),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * p[j]);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineSchedule {
    lr_max: f64,
    lr_min: f64,
    total_steps: u64,
}

impl CosineSchedule {
    pub fn new(lr_max: f64, lr_min: f64, total_steps: u64) -> Result<Self> {
        if !(lr_max >= lr_min && lr_min >= 0.0) || !lr_max.is_finite() {
            return Err(Error::arg("lr_max", "need lr_max ≥ lr_min ≥ 0"));
        }
        if total_steps == 0 {
            return Err(Error::arg("total_steps", "must be at least 1"));
        }
        Ok(Self {
            lr_max,
            lr_min,
            total_steps,
        })
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Learning rate at `step`; past the horizon it stays at `lr_min`.
    pub fn lr(&self, step: u64) -> f64 {
        if step >= self.total_steps {
            return self.lr_min;
        }
        let frac = step as f64 / self.total_steps as f64;
        self.lr_min
            + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}
