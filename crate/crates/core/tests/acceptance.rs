//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sada_core::baselines::StyleKind;
use sada_core::cluster::{kmeans_fit, KMeansConfig, Variant};
use sada_core::data::SplitConfig;
use sada_core::dsds::LookupTable;
use sada_core::harness::report::{write_file, Manifest};
use sada_core::harness::{
    cluster_sweep, prepare, run_adaptation, run_ecs, run_iterative, ExperimentConfig,
    PredictorKind, PreparedData,
};
use sada_core::metrics::{ecs, rmse_driver_mean, BinnedLabels};
use sada_core::mlp::{mlp_loss, MlpModel, Mode, TrainConfig};
use sada_core::synth::{generate, SynthConfig, SynthWorld};
use sada_core::{KahanSum, Matrix};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn world(cfg: &SynthConfig, n_driver: usize, drivers: usize) -> PreparedData {
    let w = SynthWorld::new(cfg).expect("world");
    let p = w.sample(cfg.n, 1, 0, 0).expect("pretrain sample");
    let d = w
        .sample(n_driver, drivers, 1, cfg.n as u64)
        .expect("driver sample");
    prepare(&p.dataset, &d.dataset, &SplitConfig::default()).expect("prepare")
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

const STREAM_LEN: usize = 100_000;
const STREAM_CLUSTERS: usize = 20;
const PARTITIONS: usize = 100;
const STREAM_REL_TOL: f64 = 1e-9;
const STREAM_BUDGET: Duration = Duration::from_secs(5);

fn streaming_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<usize> = (0..STREAM_LEN)
        .map(|_| rng.random_range(0..STREAM_CLUSTERS))
        .collect();
    let y: Vec<f64> = (0..STREAM_LEN)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let batch = LookupTable::fit(&a, &y, STREAM_CLUSTERS).map_err(|e| e.to_string())?;

    let mut oracle = vec![(0u64, 0.0f64); STREAM_CLUSTERS];
    for (&c, &v) in a.iter().zip(&y) {
        oracle[c].0 += 1;
        oracle[c].1 += v;
    }

    let mut worst = 0.0f64;
    for (c, &(count, sum)) in oracle.iter().enumerate() {
        let m = batch.mean(c).ok_or("empty cluster in batch table")?;
        worst = worst.max(rel_diff(m, sum / count as f64));
    }
    for _ in 0..PARTITIONS {
        let parts = rng.random_range(2..=50);
        let mut cuts: Vec<usize> = (0..parts - 1)
            .map(|_| rng.random_range(0..=STREAM_LEN))
            .collect();
        cuts.push(0);
        cuts.push(STREAM_LEN);
        cuts.sort_unstable();

        let mut streamed = LookupTable::empty(STREAM_CLUSTERS);
        let mut merged = LookupTable::empty(STREAM_CLUSTERS);
        for w in cuts.windows(2) {
            let r = w[0]..w[1];
            streamed = streamed
                .update(&a[r.clone()], &y[r.clone()])
                .map_err(|e| e.to_string())?;
            let part = LookupTable::fit(&a[r.clone()], &y[r], STREAM_CLUSTERS)
                .map_err(|e| e.to_string())?;
            merged = merged.merge(&part).map_err(|e| e.to_string())?;
        }
        for c in 0..STREAM_CLUSTERS {
            let b = batch.mean(c).unwrap_or(f64::NAN);
            for t in [&streamed, &merged] {
                if t.count(c) != batch.count(c) {
                    return Err(format!(
                        "cluster {c}: count {} vs {}",
                        t.count(c),
                        batch.count(c)
                    ));
                }
                worst = worst.max(rel_diff(t.mean(c).unwrap_or(f64::NAN), b));
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= STREAM_REL_TOL && elapsed < STREAM_BUDGET,
        format!("max rel diff {worst:.2e} (tol {STREAM_REL_TOL:.0e}), {elapsed:.2?} (budget {STREAM_BUDGET:?})"),
    )
}

const ITER_FRACTIONS: [f64; 3] = [0.10, 0.01, 0.005];
const ITER_REL_TOL: f64 = 1e-9;

fn iterative_identity() -> Outcome {
    let data = world(
        &SynthConfig {
            n: 3000,
            ..Default::default()
        },
        4000,
        3,
    );
    let mut cfg = ExperimentConfig {
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let adapted = run_adaptation(&cfg, &data).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for fraction in ITER_FRACTIONS {
        cfg.fraction = fraction;
        let rep = run_iterative(&cfg, &data).map_err(|e| e.to_string())?;
        for (f, s) in rep.finals.iter().zip(&adapted.seeds) {
            worst = worst.max(rel_diff(f.val_rmse, f.batch_val_rmse));
            worst = worst.max(rel_diff(f.val_rmse, s.val_rmse));
        }
    }
    check(
        worst <= ITER_REL_TOL,
        format!("fractions {ITER_FRACTIONS:?}: max rel diff to batch {worst:.2e} (tol {ITER_REL_TOL:.0e})"),
    )
}

const FORGETTING_RATIO: f64 = 2.0;

fn forgetting(out: &Path) -> Outcome {
    let world_cfg = SynthConfig {
        n: 3000,
        regime_flip: true,
        ..Default::default()
    };
    let data = world(&world_cfg, 4000, 2);
    let mut cfg = ExperimentConfig {
        seeds: vec![0, 1, 2],
        fraction: 0.1,
        ..Default::default()
    };
    cfg.mlp.train = TrainConfig {
        epochs: 5,
        lr_max: 1e-2,
        ..TrainConfig::default()
    };
    let dsds = run_iterative(&cfg, &data).map_err(|e| e.to_string())?;
    cfg.predictor = PredictorKind::Mlp;
    let mlp = run_iterative(&cfg, &data).map_err(|e| e.to_string())?;

    for (name, rep) in [("dsds", &dsds), ("mlp", &mlp)] {
        write_file(out, &format!("forgetting_{name}.csv"), |w| {
            rep.write_curve_csv(w)
        })
        .map_err(|e| e.to_string())?;
    }
    let curve =
        std::fs::read_to_string(out.join("forgetting_mlp.csv")).map_err(|e| e.to_string())?;
    let curve_rows = curve.lines().count().saturating_sub(1);

    let early = |r: &sada_core::harness::IterativeReport| -> Vec<f64> {
        r.finals.iter().filter_map(|f| f.val_rmse_early).collect()
    };
    let (e_dsds, e_mlp) = (early(&dsds), early(&mlp));
    if e_dsds.len() != cfg.seeds.len() || e_mlp.len() != cfg.seeds.len() {
        return Err("missing early-regime validation rows".into());
    }
    let ratio = mean(&e_mlp) / mean(&e_dsds);
    check(
        ratio >= FORGETTING_RATIO && curve_rows == mlp.points.len() && curve_rows > 0,
        format!(
            "regime-1 RMSE mlp {:.4} vs dsds {:.4}, ratio {ratio:.2} (need >= {FORGETTING_RATIO}); {curve_rows} curve rows",
            mean(&e_mlp),
            mean(&e_dsds)
        ),
    )
}

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor; entries below it are compared absolutely.
const FD_FLOOR: f64 = 1e-6;
const FD_BUDGET: Duration = Duration::from_secs(1);

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut model = MlpModel::new(&[3, 5, 5, 1], 1.0, 11).map_err(|e| e.to_string())?;
    let x = Matrix::from_vec(8, 3, (0..24).map(|_| rng.random_range(-1.5..1.5)).collect())
        .map_err(|e| e.to_string())?;
    let target: Vec<f64> = (0..8).map(|_| rng.random_range(-0.6..0.6)).collect();

    let loss = |m: &MlpModel| -> f64 {
        let c = m.forward_cached(&x, Mode::Train).expect("forward");
        mlp_loss(&c.predictions, &target).expect("loss")
    };
    let cache = model
        .forward_cached(&x, Mode::Train)
        .map_err(|e| e.to_string())?;
    let analytic = model
        .backward(&cache, &target)
        .map_err(|e| e.to_string())?
        .flat();

    let lens = model.group_lens();
    let mut numeric = Vec::with_capacity(analytic.len());
    for (g, &len) in lens.iter().enumerate() {
        for j in 0..len {
            let orig = model.param_groups()[g][j];
            model.param_groups_mut()[g][j] = orig + FD_STEP;
            let up = loss(&model);
            model.param_groups_mut()[g][j] = orig - FD_STEP;
            let down = loss(&model);
            model.param_groups_mut()[g][j] = orig;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
    }
    if numeric.len() != analytic.len() {
        return Err(format!(
            "{} numeric vs {} analytic entries",
            numeric.len(),
            analytic.len()
        ));
    }
    let worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        worst <= FD_REL_TOL && elapsed < FD_BUDGET,
        format!(
            "{} parameters, max rel error {worst:.2e} (tol {FD_REL_TOL:.0e}), {elapsed:.2?} (budget {FD_BUDGET:?})",
            analytic.len()
        ),
    )
}

const KM_SEEDS: u64 = 50;
const KM_SLACK: f64 = 1e-9;
const NORM_TOL: f64 = 1e-9;

fn kmeans_health() -> Outcome {
    let x = generate(&SynthConfig {
        n: 2000,
        sigma_emb: 0.1,
        seed: 5,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?
    .dataset
    .embeddings;
    let mut worst_rise = 0.0f64;
    let mut worst_norm = 0.0f64;
    for variant in [Variant::Classical, Variant::Spherical] {
        for seed in 0..KM_SEEDS {
            let m =
                kmeans_fit(&x, &KMeansConfig::new(12, variant, seed)).map_err(|e| e.to_string())?;
            for w in m.inertia_history().windows(2) {
                worst_rise = worst_rise.max(w[1] - w[0]);
            }
            if variant == Variant::Spherical {
                for c in m.centroids().iter_rows() {
                    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst_norm = worst_norm.max((norm - 1.0).abs());
                }
            }
        }
    }
    check(
        worst_rise <= KM_SLACK && worst_norm <= NORM_TOL,
        format!(
            "{KM_SEEDS} seeds x 2 variants: max inertia rise {worst_rise:.2e} (slack {KM_SLACK:.0e}), max |norm-1| {worst_norm:.2e}"
        ),
    )
}

const ECS_HAND: f64 = 0.25;
const ECS_HAND_TOL: f64 = 1e-12;
const ECS_PURE_MIN: f64 = 0.9;
const ECS_TREND: [usize; 4] = [5, 10, 20, 50];
const ECS_TREND_SLACK: f64 = 1e-9;

fn ecs_correctness() -> Outcome {
    let hand = ecs(
        &[0, 0, 0, 0, 1, 1],
        &BinnedLabels {
            bins: vec![vec![0, 0, 0, 0, 0, 1], vec![0, 0, 1, 1, 0, 1]],
            n_bins: vec![2, 2],
        },
        2,
    )
    .map_err(|e| e.to_string())?
    .ecs;
    if (hand - ECS_HAND).abs() > ECS_HAND_TOL {
        return Err(format!("hand example {hand} != {ECS_HAND}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..500 {
        let n = rng.random_range(1..200);
        let n_c = rng.random_range(1..12);
        let n_l = rng.random_range(1..7);
        let n_bins: Vec<usize> = (0..n_l).map(|_| rng.random_range(2..9)).collect();
        let bins = n_bins
            .iter()
            .map(|&nb| (0..n).map(|_| rng.random_range(0..nb)).collect())
            .collect();
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_c)).collect();
        let v = ecs(&a, &BinnedLabels { bins, n_bins }, n_c)
            .map_err(|e| e.to_string())?
            .ecs;
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("fuzz case {case}: ECS {v} outside [0, 1]"));
        }
    }

    let data = world(
        &SynthConfig {
            n: 4000,
            ..Default::default()
        },
        1000,
        2,
    );
    let cfg = ExperimentConfig {
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let series = run_ecs(&cfg, &data, &ECS_TREND).map_err(|e| e.to_string())?;
    let means: Vec<f64> = series.rows.iter().map(|r| r.ecs.mean).collect();
    let at_k = series
        .rows
        .iter()
        .find(|r| r.n_c == 10)
        .map(|r| r.ecs.mean)
        .unwrap_or(f64::NAN);
    let trend = means.windows(2).all(|w| w[1] >= w[0] - ECS_TREND_SLACK);
    check(
        at_k >= ECS_PURE_MIN && trend,
        format!(
            "hand {hand}, 500 fuzz cases in [0,1], ECS at n_c=K* {at_k:.4} (need >= {ECS_PURE_MIN}), trend over {ECS_TREND:?}: {}",
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

const SIGMA_BEH: f64 = 0.05;
const NOISE_FLOOR_FACTOR: f64 = 1.1;
const RAIL_FACTOR: f64 = 0.5;
const STATIC_BUDGET: Duration = Duration::from_secs(30);

fn beats_static() -> Outcome {
    let start = Instant::now();
    let data = world(
        &SynthConfig {
            sigma_beh: SIGMA_BEH,
            ..Default::default()
        },
        5000,
        5,
    );
    let mut cfg = ExperimentConfig::default();
    let dsds = run_adaptation(&cfg, &data).map_err(|e| e.to_string())?;
    cfg.predictor = PredictorKind::Static(StyleKind::Rail);
    let rail = run_adaptation(&cfg, &data).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (d, r) = (dsds.val.mean, rail.val.mean);
    check(
        d <= NOISE_FLOOR_FACTOR * SIGMA_BEH && d <= RAIL_FACTOR * r && elapsed < STATIC_BUDGET,
        format!(
            "dsds val {d:.4} +- {:.4} (need <= {:.3} and <= {RAIL_FACTOR} x rail {r:.4}), {elapsed:.2?} (budget {STATIC_BUDGET:?})",
            dsds.val.std,
            NOISE_FLOOR_FACTOR * SIGMA_BEH
        ),
    )
}

fn cluster_quantity() -> Outcome {
    let data = world(
        &SynthConfig {
            k_star: 50,
            ..Default::default()
        },
        5000,
        3,
    );
    let cfg = ExperimentConfig {
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let table = cluster_sweep(&cfg, &data, &[1, 5, 200]).map_err(|e| e.to_string())?;
    let val_at = |n_c: usize| {
        mean(
            &table
                .rows
                .iter()
                .filter(|r| r.n_c == n_c)
                .map(|r| r.val_rmse)
                .collect::<Vec<_>>(),
        )
    };

    let tr = &data.driver_train;
    let mut sums = std::collections::BTreeMap::<u32, (KahanSum, u64)>::new();
    for (&d, &y) in tr.driver_id.iter().zip(&tr.behavior) {
        let e = sums.entry(d).or_default();
        e.0 += y;
        e.1 += 1;
    }
    let global: Vec<f64> = tr
        .driver_id
        .iter()
        .map(|d| sums[d].0.value() / sums[d].1 as f64)
        .collect();
    let oracle =
        rmse_driver_mean(&global, &tr.behavior, &tr.driver_id).map_err(|e| e.to_string())?;
    let one_exact = table
        .rows
        .iter()
        .filter(|r| r.n_c == 1)
        .all(|r| r.train_rmse == oracle);

    let (v5, v200) = (val_at(5), val_at(200));
    check(
        v200 < v5 && one_exact,
        format!("K*=50: val at n_c=200 {v200:.4} < at n_c=5 {v5:.4}; n_c=1 train RMSE == global mean {oracle:.6}: {one_exact}"),
    )
}

fn report_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let data = world(
        &SynthConfig {
            n: 1500,
            ..Default::default()
        },
        1500,
        2,
    );
    let cfg = ExperimentConfig {
        seeds: vec![0, 1],
        ..Default::default()
    };
    let rep = run_adaptation(&cfg, &data).map_err(|e| e.to_string())?;
    let iter = run_iterative(&cfg, &data).map_err(|e| e.to_string())?;
    let err = |e: sada_core::Error| e.to_string();
    Manifest::new("eval", cfg.echo()).write(dir).map_err(err)?;
    write_file(dir, "adaptation.csv", |w| rep.write_seeds_csv(w)).map_err(err)?;
    write_file(dir, "summary.csv", |w| rep.write_summary_csv(w)).map_err(err)?;
    write_file(dir, "iterative.csv", |w| iter.write_curve_csv(w)).map_err(err)?;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let p = e.expect("dir entry").path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).expect("read"),
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (fa, fb) = (report_bytes(a.path())?, report_bytes(b.path())?);
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    check(
        fa == fb && fa.len() == 4,
        format!(
            "{} report files byte-identical across runs: {}",
            fa.len(),
            names.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let curves = tempfile::tempdir().expect("tempdir");
    let criteria: Vec<Criterion> = vec![
        ("streaming equivalence", Box::new(streaming_equivalence)),
        ("iterative identity", Box::new(iterative_identity)),
        (
            "catastrophic forgetting",
            Box::new(|| forgetting(curves.path())),
        ),
        ("gradient correctness", Box::new(gradient_check)),
        ("k-means health", Box::new(kmeans_health)),
        ("ECS correctness", Box::new(ecs_correctness)),
        ("situation-aware beats static", Box::new(beats_static)),
        ("cluster-quantity trend", Box::new(cluster_quantity)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
