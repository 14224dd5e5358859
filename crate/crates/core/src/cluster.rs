//! Classical and spherical k-means: the situation-embedding stage.
//!
//! Seeding is greedy k-means++ with `2 + ⌊ln k⌋` candidates per step (squared
//! Euclidean distance for the classical variant, cosine distance `1 − cos`
//! for the spherical one), followed by Lloyd
//! iterations until the largest centroid displacement drops below `tol`.
//! A cluster left empty by an update is re-seeded at the point farthest from
//! its assigned centroid.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{dot, norm, sq_dist};
use crate::{Error, Exec, Matrix, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"SADK";
pub const MODEL_VERSION: u32 = 1;

/// Rows per task in the parallel assignment step.
const ASSIGN_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Classical,
    Spherical,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Classical => 0,
            Variant::Spherical => 1,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Variant::Classical => "km",
            Variant::Spherical => "kms",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub n_c: usize,
    pub variant: Variant,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent seedings; the run with the lowest final inertia is kept.
    pub n_init: usize,
    pub exec: Exec,
}

impl KMeansConfig {
    pub fn new(n_c: usize, variant: Variant, seed: u64) -> Self {
        Self {
            n_c,
            variant,
            seed,
            max_iter: 300,
            tol: 1e-6,
            n_init: 1,
            exec: Exec::Sequential,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    centroids: Matrix,
    variant: Variant,
    seed: u64,
    n_iter_run: usize,
    inertia_history: Vec<f64>,
}

impl KMeansModel {
    /// Wraps explicit centroids; spherical centroids are normalized.
    pub fn from_centroids(mut centroids: Matrix, variant: Variant) -> Result<Self> {
        if centroids.rows() == 0 || centroids.cols() == 0 {
            return Err(Error::arg(
                "centroids",
                "need at least one centroid of dimension ≥ 1",
            ));
        }
        if centroids.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite centroid".into()));
        }
        if variant == Variant::Spherical {
            for k in 0..centroids.rows() {
                normalize(centroids.row_mut(k))
                    .ok_or_else(|| Error::Data(format!("zero-norm spherical centroid {k}")))?;
            }
        }
        Ok(Self {
            centroids,
            variant,
            seed: 0,
            n_iter_run: 0,
            inertia_history: Vec::new(),
        })
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of centroid updates performed by the fit.
    pub fn n_iter_run(&self) -> usize {
        self.n_iter_run
    }

    /// Objective after every assignment step, including the final one.
    pub fn inertia_history(&self) -> &[f64] {
        &self.inertia_history
    }

    pub fn assign(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.assign_with(x, Exec::Sequential)
    }

    /// Nearest centroid per row; ties go to the lowest cluster id.
    pub fn assign_with(&self, x: &Matrix, exec: Exec) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        let prepared = self.prepare(x);
        Ok(assign_all(&prepared, &self.centroids, self.variant, exec)
            .into_iter()
            .map(|(k, _)| k)
            .collect())
    }

    /// Sum of squared distances (classical) or of `1 − cos` (spherical).
    pub fn inertia(&self, x: &Matrix) -> Result<f64> {
        self.check_dim(x)?;
        let prepared = self.prepare(x);
        Ok(
            assign_all(&prepared, &self.centroids, self.variant, Exec::Sequential)
                .iter()
                .map(|&(_, d)| d)
                .sum(),
        )
    }

    fn prepare(&self, x: &Matrix) -> Matrix {
        match self.variant {
            Variant::Classical => x.clone(),
            Variant::Spherical => {
                let mut m = x.clone();
                for i in 0..m.rows() {
                    // Zero rows stay zero: every cosine is 0 and the tie rule picks cluster 0.
                    let _ = normalize(m.row_mut(i));
                }
                m
            }
        }
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

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(self.variant.code());
        out.extend_from_slice(&(self.n_clusters() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for v in self.centroids.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> std::result::Result<Self, String> {
        if buf.len() < 25 || &buf[..4] != MODEL_MAGIC {
            return Err("magic mismatch, expected SADK".into());
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let variant = match buf[8] {
            0 => Variant::Classical,
            1 => Variant::Spherical,
            v => return Err(format!("unknown variant code {v}")),
        };
        let n_c = u64::from_le_bytes(buf[9..17].try_into().unwrap()) as usize;
        let d = u64::from_le_bytes(buf[17..25].try_into().unwrap()) as usize;
        let body = &buf[25..];
        if Some(body.len()) != n_c.checked_mul(d).and_then(|v| v.checked_mul(8)) {
            return Err("payload size does not match header".into());
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let centroids = Matrix::from_vec(n_c, d, data).map_err(|e| e.to_string())?;
        if centroids.as_slice().iter().any(|v| !v.is_finite()) {
            return Err("non-finite centroid".into());
        }
        Ok(Self {
            centroids,
            variant,
            seed: 0,
            n_iter_run: 0,
            inertia_history: Vec::new(),
        })
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

fn normalize(v: &mut [f64]) -> Option<()> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= n);
    Some(())
}

#[inline]
fn distance(x: &[f64], c: &[f64], variant: Variant) -> f64 {
    match variant {
        Variant::Classical => sq_dist(x, c),
        Variant::Spherical => (1.0 - dot(x, c)).max(0.0),
    }
}

fn nearest(x: &[f64], centroids: &Matrix, variant: Variant) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter_rows().enumerate() {
        let d = distance(x, c, variant);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn assign_all(x: &Matrix, centroids: &Matrix, variant: Variant, exec: Exec) -> Vec<(usize, f64)> {
    exec.map_chunks(x.rows(), ASSIGN_CHUNK, |r| {
        r.map(|i| nearest(x.row(i), centroids, variant))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Fits k-means. Deterministic in `cfg.seed`; parallel and sequential
/// execution give bitwise-identical models.
pub fn kmeans_fit(x: &Matrix, cfg: &KMeansConfig) -> Result<KMeansModel> {
    let n = x.rows();
    if cfg.n_c < 1 {
        return Err(Error::arg("n_c", "must be at least 1"));
    }
    if cfg.n_c > n {
        return Err(Error::arg(
            "n_c",
            format!("{} clusters requested for {n} samples", cfg.n_c),
        ));
    }
    if x.cols() == 0 {
        return Err(Error::Data("embeddings have zero columns".into()));
    }
    let variant = cfg.variant;
    let data = match variant {
        Variant::Classical => x.clone(),
        Variant::Spherical => {
            let mut m = x.clone();
            for i in 0..n {
                normalize(m.row_mut(i)).ok_or_else(|| {
                    Error::Data(format!("zero-norm row {i} under spherical k-means"))
                })?;
            }
            m
        }
    };

    if cfg.n_init < 1 {
        return Err(Error::arg("n_init", "must be at least 1"));
    }
    let mut best: Option<(Matrix, usize, Vec<f64>)> = None;
    for run in 0..cfg.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(run as u64);
        let fit = lloyd(&data, cfg, &mut rng);
        let better = best.as_ref().is_none_or(|b| fit.2.last() < b.2.last());
        if better {
            best = Some(fit);
        }
    }
    let (centroids, n_iter, history) = best.expect("at least one run");

    if centroids.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "k-means produced a non-finite centroid".into(),
        ));
    }
    Ok(KMeansModel {
        centroids,
        variant,
        seed: cfg.seed,
        n_iter_run: n_iter,
        inertia_history: history,
    })
}

/// One seeding plus Lloyd iterations: centroids, iterations run, inertia
/// before every update and after the last one.
fn lloyd(data: &Matrix, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> (Matrix, usize, Vec<f64>) {
    let variant = cfg.variant;
    let mut centroids = plus_plus_init(data, cfg.n_c, variant, rng, cfg.exec);
    let mut history = Vec::new();
    let mut n_iter = 0;

    for _ in 0..cfg.max_iter {
        let assigned = assign_all(data, &centroids, variant, cfg.exec);
        history.push(assigned.iter().map(|&(_, d)| d).sum());
        let next = update_centroids(data, &assigned, &centroids, variant, cfg.exec);
        let shift = (0..cfg.n_c)
            .map(|k| sq_dist(centroids.row(k), next.row(k)).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        n_iter += 1;
        if shift < cfg.tol {
            break;
        }
    }
    let assigned = assign_all(data, &centroids, variant, cfg.exec);
    history.push(assigned.iter().map(|&(_, d)| d).sum());
    (centroids, n_iter, history)
}

/// Candidates drawn per greedy k-means++ step.
fn local_trials(n_c: usize) -> usize {
    2 + (n_c as f64).ln() as usize
}

/// Draws an index with probability proportional to `weights`, skipping zeros.
fn weighted_pick(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

/// Greedy k-means++: each step draws a few D²-weighted candidates and keeps
/// the one that lowers the seeding potential most.
fn plus_plus_init(
    x: &Matrix,
    n_c: usize,
    variant: Variant,
    rng: &mut ChaCha8Rng,
    exec: Exec,
) -> Matrix {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(n_c);
    let mut is_chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut min_d = exec.map(n, |i| distance(x.row(i), x.row(first), variant));
    let trials = local_trials(n_c);

    while chosen.len() < n_c {
        let total: f64 = min_d.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            // Every remaining point coincides with a centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            let pick = free[rng.random_range(0..free.len())];
            chosen.push(pick);
            is_chosen[pick] = true;
            let c = x.row(pick);
            let fresh = exec.map(n, |i| distance(x.row(i), c, variant));
            for (m, f) in min_d.iter_mut().zip(fresh) {
                *m = m.min(f);
            }
            continue;
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = weighted_pick(&min_d, total, rng);
            let c = x.row(cand);
            let next: Vec<f64> = exec
                .map_chunks(n, ASSIGN_CHUNK, |r| {
                    r.map(|i| min_d[i].min(distance(x.row(i), c, variant)))
                        .collect::<Vec<_>>()
                })
                .into_iter()
                .flatten()
                .collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, next));
            }
        }
        let (_, pick, next) = best.expect("at least one trial");
        chosen.push(pick);
        is_chosen[pick] = true;
        min_d = next;
    }
    x.select_rows(&chosen)
}

fn update_centroids(
    x: &Matrix,
    assigned: &[(usize, f64)],
    old: &Matrix,
    variant: Variant,
    exec: Exec,
) -> Matrix {
    let n_c = old.rows();
    let d = x.cols();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_c];
    for (i, &(k, _)) in assigned.iter().enumerate() {
        members[k].push(i);
    }
    let rows: Vec<Option<Vec<f64>>> = exec.map(n_c, |k| {
        let m = &members[k];
        if m.is_empty() {
            return None;
        }
        let mut acc = vec![0.0; d];
        for &i in m {
            for (a, v) in acc.iter_mut().zip(x.row(i)) {
                *a += v;
            }
        }
        match variant {
            Variant::Classical => {
                let cnt = m.len() as f64;
                acc.iter_mut().for_each(|a| *a /= cnt);
                Some(acc)
            }
            Variant::Spherical => normalize(&mut acc).map(|_| acc),
        }
    });

    let mut next = old.clone();
    let mut empty = Vec::new();
    for (k, r) in rows.into_iter().enumerate() {
        match r {
            Some(r) => next.row_mut(k).copy_from_slice(&r),
            None => empty.push(k),
        }
    }
    if !empty.is_empty() {
        // Farthest points first; ties go to the lower row index.
        let mut by_dist: Vec<usize> = (0..x.rows()).filter(|&i| assigned[i].1 > 0.0).collect();
        by_dist.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
        for (k, &i) in empty.iter().zip(&by_dist) {
            next.row_mut(*k).copy_from_slice(x.row(i));
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(n_per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (label, cx) in [-5.0, 5.0].into_iter().enumerate() {
            for _ in 0..n_per {
                rows.push([cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
                truth.push(label);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn restarts_keep_the_lowest_inertia() {
        let x = Matrix::from_rows(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [5.0, 5.0],
            [5.1, 5.0],
            [5.0, 5.2],
            [9.0, 0.0],
            [9.1, 0.1],
            [0.0, 9.0],
        ])
        .unwrap();
        for seed in 0..20 {
            let one = kmeans_fit(&x, &KMeansConfig::new(3, Variant::Classical, seed)).unwrap();
            let many = kmeans_fit(
                &x,
                &KMeansConfig::new(3, Variant::Classical, seed).with_n_init(5),
            )
            .unwrap();
            assert!(many.inertia_history().last() <= one.inertia_history().last());
        }
        let bad = KMeansConfig::new(2, Variant::Classical, 0).with_n_init(0);
        assert!(kmeans_fit(&x, &bad).is_err());
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -2.0], [5.0, 9.0]]).unwrap();
        let m = kmeans_fit(&x, &KMeansConfig::new(1, Variant::Classical, 3)).unwrap();
        assert!((m.centroids().get(0, 0) - 3.0).abs() < 1e-12);
        assert!((m.centroids().get(0, 1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_per_point() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 4.0], [2.0, 2.0], [-1.0, 3.0]])
            .unwrap();
        let m = kmeans_fit(&x, &KMeansConfig::new(5, Variant::Classical, 11)).unwrap();
        assert_eq!(m.inertia(&x).unwrap(), 0.0);
        let mut a = m.assign(&x).unwrap();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn recovers_two_blobs() {
        let (x, truth) = blobs(100, 1);
        // Oracle: per-blob means from the ground-truth grouping.
        let mut oracle = [[0.0f64; 2]; 2];
        for (i, &t) in truth.iter().enumerate() {
            oracle[t][0] += x.get(i, 0) / 100.0;
            oracle[t][1] += x.get(i, 1) / 100.0;
        }
        let m = kmeans_fit(&x, &KMeansConfig::new(2, Variant::Classical, 5)).unwrap();
        for o in oracle {
            let best = m
                .centroids()
                .iter_rows()
                .map(|c| sq_dist(c, &o).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.05, "{best}");
        }
    }

    #[test]
    fn assignment_rules() {
        let c = Matrix::from_rows(&[
            [10.0, 10.0],
            [20.0, 20.0],
            [1.0, 0.0],
            [30.0, 0.0],
            [40.0, 0.0],
            [-1.0, 0.0],
        ])
        .unwrap();
        let m = KMeansModel::from_centroids(c, Variant::Classical).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        // Row 0 sits on centroid 2; row 1 is equidistant from 2 and 5.
        assert_eq!(m.assign(&x).unwrap(), vec![2, 2]);
    }

    #[test]
    fn spherical_scale_invariance() {
        let (x, _) = blobs(20, 2);
        let m = kmeans_fit(&x, &KMeansConfig::new(3, Variant::Spherical, 9)).unwrap();
        let mut scaled = x.clone();
        scaled.as_mut_slice().iter_mut().for_each(|v| *v *= 10.0);
        assert_eq!(m.assign(&x).unwrap(), m.assign(&scaled).unwrap());
        for c in m.centroids().iter_rows() {
            assert!((norm(c) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn inertia_hand_sum() {
        let m = KMeansModel::from_centroids(Matrix::zeros(1, 1), Variant::Classical).unwrap();
        let x = Matrix::from_vec(2, 1, vec![-1.0, 1.0]).unwrap();
        assert_eq!(m.inertia(&x).unwrap(), 2.0);
        let m = KMeansModel::from_centroids(x.clone(), Variant::Classical).unwrap();
        assert_eq!(m.inertia(&x).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(kmeans_fit(&x, &KMeansConfig::new(0, Variant::Classical, 0)).is_err());
        assert!(kmeans_fit(&x, &KMeansConfig::new(3, Variant::Classical, 0)).is_err());
        assert!(kmeans_fit(&x, &KMeansConfig::new(1, Variant::Spherical, 0)).is_err());
        let m = kmeans_fit(&x, &KMeansConfig::new(1, Variant::Classical, 0)).unwrap();
        assert!(matches!(
            m.assign(&Matrix::zeros(1, 3)),
            Err(Error::Dimension { .. })
        ));
        assert!(m.inertia(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn duplicate_points_leave_no_nan() {
        let x = Matrix::from_rows(&[[1.0, 1.0]; 6]).unwrap();
        let m = kmeans_fit(&x, &KMeansConfig::new(3, Variant::Classical, 4)).unwrap();
        assert!(m.centroids().as_slice().iter().all(|v| v.is_finite()));
        assert_eq!(m.inertia(&x).unwrap(), 0.0);
    }

    #[test]
    fn bytes_round_trip() {
        let (x, _) = blobs(10, 3);
        let m = kmeans_fit(&x, &KMeansConfig::new(2, Variant::Spherical, 1)).unwrap();
        let back = KMeansModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.centroids(), m.centroids());
        assert_eq!(back.variant(), Variant::Spherical);
        assert_eq!(&m.to_bytes()[..9], b"SADK\x01\x00\x00\x00\x01");
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        let (x, _) = blobs(600, 4);
        for variant in [Variant::Classical, Variant::Spherical] {
            let seq = kmeans_fit(&x, &KMeansConfig::new(7, variant, 8)).unwrap();
            let par = kmeans_fit(
                &x,
                &KMeansConfig::new(7, variant, 8).with_exec(Exec::Parallel),
            )
            .unwrap();
            assert_eq!(seq, par);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn inertia_nonincreasing(seed in any::<u64>(), n_c in 1usize..12, spherical in any::<bool>()) {
            let (x, _) = blobs(40, seed ^ 0x5eed);
            let variant = if spherical { Variant::Spherical } else { Variant::Classical };
            let m = kmeans_fit(&x, &KMeansConfig::new(n_c, variant, seed)).unwrap();
            for w in m.inertia_history().windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", m.inertia_history());
            }
            prop_assert!(m.inertia_history().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn cluster_sizes_survive_row_permutation(seed in any::<u64>(), perm_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let (x, _) = blobs(50, seed);
            let mut idx: Vec<usize> = (0..x.rows()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            let xp = x.select_rows(&idx);
            let sizes = |m: &Matrix| {
                let model = kmeans_fit(m, &KMeansConfig::new(2, Variant::Classical, seed)).unwrap();
                let mut s = vec![0usize; 2];
                for k in model.assign(m).unwrap() { s[k] += 1; }
                s.sort_unstable();
                s
            };
            prop_assert_eq!(sizes(&x), sizes(&xp));
        }
    }
}
