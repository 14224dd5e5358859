use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sada_core::cluster::{kmeans_fit, KMeansConfig, Variant};
use sada_core::data::{load_dataset, save_dataset, segment_split, Dataset, Split, SplitConfig};
use sada_core::dsds::LookupTable;
use sada_core::harness::report::{write_file, Manifest};
use sada_core::harness::{
    cluster_sweep, prepare, run_adaptation, run_ecs, run_iterative, ExperimentConfig,
    PredictorKind, PreparedData,
};
use sada_core::mlp::{train_mlp, MlpModel, TrainConfig};
use sada_core::preprocess::Standardizer;
use sada_core::synth::{write_truth, SynthConfig, SynthWorld};
use sada_core::{Error, Exec, Result};

use crate::args::*;

const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const DEFAULT_WORLD_N: usize = 5000;
const DEFAULT_WORLD_DRIVERS: usize = 5;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emb_path(table: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    explicit
        .cloned()
        .unwrap_or_else(|| table.with_extension("emb"))
}

fn create_out(out: &OutArgs) -> Result<&Path> {
    std::fs::create_dir_all(&out.out).map_err(|e| io_err(&out.out, e))?;
    Ok(&out.out)
}

pub fn exec_for(threads: u64) -> Exec {
    Exec::from_threads(threads as usize)
}

fn split_config(s: &SplitArgs) -> SplitConfig {
    SplitConfig {
        segment_len: s.segment_len as usize,
        val_fraction: s.val_fraction,
        seed: s.split_seed,
    }
}

fn seed_list(s: &SeedArgs) -> Vec<u64> {
    if !s.seeds.is_empty() {
        s.seeds.clone()
    } else if let Some(seed) = s.seed {
        vec![seed]
    } else {
        DEFAULT_SEEDS.to_vec()
    }
}

fn parse_predictor(s: &str) -> Result<PredictorKind> {
    s.parse()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Loads the pretrain/driver pair, or samples the default synthetic world.
fn load_pair(d: &DataArgs, inputs: &mut BTreeMap<String, String>) -> Result<(Dataset, Dataset)> {
    match (&d.pretrain, &d.driver_data) {
        (Some(p), Some(q)) => {
            let (pe, qe) = (emb_path(p, None), emb_path(q, None));
            for (k, v) in [
                ("pretrain", p),
                ("pretrain.embeddings", &pe),
                ("driver", q),
                ("driver.embeddings", &qe),
            ] {
                inputs.insert(k.into(), path_str(v));
            }
            Ok((load_dataset(p, &pe)?, load_dataset(q, &qe)?))
        }
        (None, None) => {
            let cfg = SynthConfig {
                n: DEFAULT_WORLD_N,
                seed: d.data_seed,
                ..Default::default()
            };
            inputs.insert(
                "synthetic".into(),
                format!(
                    "k_star={} dim={} pretrain_n={} driver_n={} drivers={} seed={}",
                    cfg.k_star,
                    cfg.dim,
                    DEFAULT_WORLD_N,
                    DEFAULT_WORLD_N,
                    DEFAULT_WORLD_DRIVERS,
                    cfg.seed
                ),
            );
            let w = SynthWorld::new(&cfg)?;
            let p = w.sample(DEFAULT_WORLD_N, 1, 0, 0)?;
            let q = w.sample(
                DEFAULT_WORLD_N,
                DEFAULT_WORLD_DRIVERS,
                1,
                DEFAULT_WORLD_N as u64,
            )?;
            Ok((p.dataset, q.dataset))
        }
        (None, Some(_)) => Err(Error::InvalidArgument {
            name: "pretrain",
            reason: "--driver-data needs --pretrain".into(),
        }),
        (Some(_), None) => Err(Error::InvalidArgument {
            name: "driver-data",
            reason: "--pretrain needs --driver-data".into(),
        }),
    }
}

fn prepared(d: &DataArgs, inputs: &mut BTreeMap<String, String>) -> Result<PreparedData> {
    let (p, q) = load_pair(d, inputs)?;
    prepare(&p, &q, &split_config(&d.split))
}

fn mlp_settings(cfg: &mut ExperimentConfig, m: &MlpArgs) {
    cfg.mlp.hidden = m.hidden.clone();
    cfg.mlp.d_max = m.d_max;
    cfg.mlp.train = TrainConfig {
        epochs: m.epochs,
        batch_size: m.batch_size as usize,
        lr_max: m.lr_max,
        weight_decay: m.weight_decay,
        ..TrainConfig::default()
    };
}

fn experiment(split: &SplitArgs, exec: Exec) -> ExperimentConfig {
    ExperimentConfig {
        split: split_config(split),
        exec,
        ..Default::default()
    }
}

fn begin(
    dir: &Path,
    command: &str,
    config: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    outputs: &[String],
) -> Result<()> {
    let mut m = Manifest::new(command, config);
    m.inputs = inputs;
    m.outputs = outputs.to_vec();
    m.write(dir)
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let cfg = SynthConfig {
        k_star: a.k,
        dim: a.d,
        n: a.n,
        sigma_emb: a.sigma_emb,
        sigma_beh: a.sigma_beh,
        purity: a.purity,
        drivers: a.drivers,
        driver_offset_std: a.driver_offset_std,
        regime_flip: a.regime_flip,
        seed: a.seed,
        ..Default::default()
    };
    let mut config = BTreeMap::new();
    for (k, v) in [
        ("k_star", a.k.to_string()),
        ("dim", a.d.to_string()),
        ("n", a.n.to_string()),
        ("radius", cfg.radius.to_string()),
        ("sigma_emb", a.sigma_emb.to_string()),
        ("sigma_beh", a.sigma_beh.to_string()),
        ("purity", a.purity.to_string()),
        ("drivers", a.drivers.to_string()),
        ("driver_offset_std", a.driver_offset_std.to_string()),
        ("regime_flip", a.regime_flip.to_string()),
        ("driver_n", a.driver_n.to_string()),
        ("driver_drivers", a.driver_drivers.to_string()),
        ("seed", a.seed.to_string()),
    ] {
        config.insert(k.to_string(), v);
    }
    let mut outputs = names(&["dataset.csv", "dataset.emb", "truth.csv"]);
    if a.driver_n > 0 {
        outputs.extend(names(&["driver.csv", "driver.emb", "driver_truth.csv"]));
    }
    begin(dir, "synth", config, BTreeMap::new(), &outputs)?;

    let world = SynthWorld::new(&cfg)?;
    let s = world.sample(a.n, a.drivers, 0, 0)?;
    save_dataset(
        &s.dataset,
        &dir.join("dataset.csv"),
        &dir.join("dataset.emb"),
    )?;
    write_truth(&dir.join("truth.csv"), &s.dataset.sample_id, &s.truth)?;
    if a.driver_n > 0 {
        let d = world.sample(a.driver_n, a.driver_drivers, 1, a.n as u64)?;
        save_dataset(&d.dataset, &dir.join("driver.csv"), &dir.join("driver.emb"))?;
        write_truth(
            &dir.join("driver_truth.csv"),
            &d.dataset.sample_id,
            &d.truth,
        )?;
    }
    Ok(())
}

fn refuse_overwrite(input: &Path, output: &Path) -> Result<()> {
    if let (Ok(a), Ok(b)) = (input.canonicalize(), output.canonicalize()) {
        if a == b {
            return Err(Error::InvalidArgument {
                name: "out",
                reason: format!("would overwrite the input {}", input.display()),
            });
        }
    }
    Ok(())
}

pub fn split(a: &SplitCmd) -> Result<()> {
    let dir = create_out(&a.out)?;
    let emb = emb_path(&a.input, a.embeddings.as_ref());
    let stem = a.input.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let table_out = dir.join(format!("{stem}.csv"));
    let emb_out = dir.join(format!("{stem}.emb"));
    refuse_overwrite(&a.input, &table_out)?;
    refuse_overwrite(&emb, &emb_out)?;

    let cfg = split_config(&a.split);
    let config = experiment(&a.split, Exec::Sequential)
        .echo()
        .into_iter()
        .filter(|(k, _)| k.starts_with("split."))
        .collect();
    let inputs = [("table", &a.input), ("embeddings", &emb)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), path_str(v)))
        .collect();
    let outputs = vec![format!("{stem}.csv"), format!("{stem}.emb")];
    let ds = load_dataset(&a.input, &emb)?;
    begin(dir, "split", config, inputs, &outputs)?;
    let s = segment_split(&ds, &cfg)?;
    save_dataset(&s, &table_out, &emb_out)
}

pub fn cluster(a: &ClusterArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let emb = emb_path(&a.pretrain, a.embeddings.as_ref());
    let mut ds = load_dataset(&a.pretrain, &emb)?;
    if ds.split.iter().all(|&s| s == Split::Unassigned) {
        ds = segment_split(&ds, &split_config(&a.split))?;
    }
    let variant: Variant = a.variant.into();
    let mut config = experiment(&a.split, exec_for(a.out.threads)).echo();
    config.retain(|k, _| k.starts_with("split.") || k.starts_with("kmeans."));
    config.insert("kmeans.n_init".into(), a.n_init.to_string());
    config.insert("n_c".into(), a.n_c.to_string());
    config.insert("variant".into(), variant.short_name().into());
    config.insert("seed".into(), a.seed.to_string());
    let inputs = [("pretrain", &a.pretrain), ("pretrain.embeddings", &emb)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), path_str(v)))
        .collect();
    begin(
        dir,
        "cluster",
        config,
        inputs,
        &names(&[
            "standardizer.csv",
            "kmeans.sadk",
            "inertia.csv",
            "assignments.csv",
        ]),
    )?;

    let train = ds.with_split(Split::Train);
    if train.is_empty() {
        return Err(Error::Data("pretrain dataset has no training rows".into()));
    }
    let st = Standardizer::fit(&train.embeddings)?;
    let kcfg = KMeansConfig::new(a.n_c as usize, variant, a.seed)
        .with_exec(exec_for(a.out.threads))
        .with_n_init(a.n_init as usize);
    let model = kmeans_fit(&st.transform(&train.embeddings)?, &kcfg)?;
    st.save(&dir.join("standardizer.csv"))?;
    model.save(&dir.join("kmeans.sadk"))?;
    write_file(dir, "inertia.csv", |w| {
        let mut w = csv_writer(w);
        w.write_record(["iteration", "inertia"])?;
        for (i, v) in model.inertia_history().iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()
    })?;
    let assigned = model.assign_with(&st.transform(&ds.embeddings)?, exec_for(a.out.threads))?;
    write_file(dir, "assignments.csv", |w| {
        let mut w = csv_writer(w);
        w.write_record(["sample_id", "split", "cluster_id"])?;
        for ((id, split), c) in ds.sample_id.iter().zip(&ds.split).zip(&assigned) {
            w.write_record([id.to_string(), split.as_str().to_string(), c.to_string()])?;
        }
        w.flush()
    })
}

fn csv_writer(w: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(w)
}

pub fn fit_dsds(a: &FitDsdsArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let exec = exec_for(a.out.threads);
    let mut inputs = BTreeMap::new();
    let data = prepared(&a.data, &mut inputs)?;
    let variant: Variant = a.variant.into();
    let mut cfg = experiment(&a.data.split, exec);
    cfg.predictor = PredictorKind::Dsds(variant);
    cfg.n_c = a.n_c as usize;
    cfg.seeds = vec![a.seed];
    cfg.kmeans_n_init = a.n_init as usize;
    let mut config = cfg.echo();
    config.retain(|k, _| !k.starts_with("mlp.") && k != "binning" && k != "fraction");
    let drivers = data.driver_train.drivers();
    let mut outputs = names(&["standardizer.csv", "kmeans.sadk"]);
    outputs.extend(drivers.iter().map(|d| format!("dsds_driver{d}.csv")));
    begin(dir, "fit-dsds", config, inputs, &outputs)?;

    let kcfg = KMeansConfig::new(cfg.n_c, variant, a.seed)
        .with_exec(exec)
        .with_n_init(cfg.kmeans_n_init);
    let model = kmeans_fit(&data.z_pretrain_train, &kcfg)?;
    let assigned = model.assign_with(&data.z_driver_train, exec)?;
    data.standardizer.save(&dir.join("standardizer.csv"))?;
    model.save(&dir.join("kmeans.sadk"))?;
    let tr = &data.driver_train;
    for d in drivers {
        let rows = tr.indices_of_driver(d);
        let c: Vec<usize> = rows.iter().map(|&i| assigned[i]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| tr.behavior[i]).collect();
        LookupTable::fit(&c, &y, cfg.n_c)?.save(&dir.join(format!("dsds_driver{d}.csv")))?;
    }
    Ok(())
}

pub fn train_heads(a: &TrainMlpArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let predictor = parse_predictor(&a.predictor)?;
    let hidden = match predictor {
        PredictorKind::Mlp => a.mlp.hidden.clone(),
        PredictorKind::Linear => Vec::new(),
        other => {
            return Err(Error::InvalidArgument {
                name: "predictor",
                reason: format!("train-mlp trains mlp or linear heads, not {other}"),
            })
        }
    };
    let mut inputs = BTreeMap::new();
    let data = prepared(&a.data, &mut inputs)?;
    let mut cfg = experiment(&a.data.split, exec_for(a.out.threads));
    cfg.predictor = predictor;
    cfg.seeds = vec![a.seed];
    mlp_settings(&mut cfg, &a.mlp);
    cfg.mlp.hidden = hidden.clone();
    cfg.validate()?;
    let mut config = cfg.echo();
    config.retain(|k, _| {
        k.starts_with("mlp.")
            || k.starts_with("split.")
            || k == "predictor"
            || k == "seeds"
            || k == "standardizer"
    });
    let drivers = data.driver_train.drivers();
    let mut outputs = names(&["standardizer.csv", "curves.csv"]);
    outputs.extend(drivers.iter().map(|d| format!("mlp_driver{d}.sadm")));
    begin(dir, "train-mlp", config, inputs, &outputs)?;

    data.standardizer.save(&dir.join("standardizer.csv"))?;
    let (tr, va) = (&data.driver_train, &data.driver_val);
    let mut curves = Vec::new();
    for d in drivers {
        let rows = tr.indices_of_driver(d);
        let vrows = va.indices_of_driver(d);
        let seed = a.seed ^ (u64::from(d) << 32);
        let mut model = MlpModel::with_hidden(tr.dim(), &hidden, a.mlp.d_max, seed)?;
        let x = data.z_driver_train.select_rows(&rows);
        let y: Vec<f64> = rows.iter().map(|&i| tr.behavior[i]).collect();
        let xv = data.z_driver_val.select_rows(&vrows);
        let yv: Vec<f64> = vrows.iter().map(|&i| va.behavior[i]).collect();
        let tc = TrainConfig {
            seed,
            ..cfg.mlp.train.clone()
        };
        let val = (!vrows.is_empty()).then_some((&xv, yv.as_slice()));
        let h = train_mlp(&mut model, &x, &y, &tc, val)?;
        model.save(&dir.join(format!("mlp_driver{d}.sadm")))?;
        for e in 0..h.train.len() {
            curves.push((d, e, h.train[e], h.val.get(e).copied()));
        }
    }
    write_file(dir, "curves.csv", |w| {
        let mut w = csv_writer(w);
        w.write_record(["driver_id", "epoch", "train_mse", "val_mse"])?;
        for (d, e, t, v) in &curves {
            w.write_record([
                d.to_string(),
                e.to_string(),
                t.to_string(),
                v.map_or_else(String::new, |v| v.to_string()),
            ])?;
        }
        w.flush()
    })
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let mut cfg = experiment(&a.data.split, exec_for(a.out.threads));
    cfg.predictor = parse_predictor(&a.predictor)?;
    cfg.n_c = a.n_c as usize;
    cfg.seeds = seed_list(&a.seeds);
    cfg.rural_code = a.rural_code;
    cfg.kmeans_n_init = a.n_init as usize;
    mlp_settings(&mut cfg, &a.mlp);
    cfg.validate()?;
    let mut inputs = BTreeMap::new();
    let data = prepared(&a.data, &mut inputs)?;
    begin(
        dir,
        "eval",
        cfg.echo(),
        inputs,
        &names(&["adaptation.csv", "summary.csv", "curves.csv"]),
    )?;
    let r = run_adaptation(&cfg, &data)?;
    write_file(dir, "adaptation.csv", |w| r.write_seeds_csv(w))?;
    write_file(dir, "summary.csv", |w| r.write_summary_csv(w))?;
    write_file(dir, "curves.csv", |w| r.write_curves_csv(w))
}

fn sweep_config(a: &SweepArgs) -> Result<ExperimentConfig> {
    let mut cfg = experiment(&a.data.split, exec_for(a.out.threads));
    cfg.predictor = PredictorKind::Dsds(a.variant.into());
    cfg.seeds = seed_list(&a.seeds);
    cfg.rural_code = a.rural_code;
    cfg.kmeans_n_init = a.n_init as usize;
    cfg.validate()?;
    Ok(cfg)
}

fn n_c_list(a: &SweepArgs) -> Vec<usize> {
    a.n_c.iter().map(|&n| n as usize).collect()
}

fn with_list(mut echo: BTreeMap<String, String>, list: &[usize]) -> BTreeMap<String, String> {
    echo.remove("n_c");
    echo.insert(
        "n_c_list".into(),
        list.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" "),
    );
    echo.retain(|k, _| !k.starts_with("mlp.") && k != "fraction");
    echo
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let cfg = sweep_config(a)?;
    let list = n_c_list(a);
    let mut inputs = BTreeMap::new();
    let data = prepared(&a.data, &mut inputs)?;
    begin(
        dir,
        "sweep",
        with_list(cfg.echo(), &list),
        inputs,
        &names(&["sweep.csv", "sweep_summary.csv"]),
    )?;
    let t = cluster_sweep(&cfg, &data, &list)?;
    write_file(dir, "sweep.csv", |w| t.write_csv(w))?;
    write_file(dir, "sweep_summary.csv", |w| t.write_summary_csv(w))
}

pub fn ecs(a: &SweepArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let cfg = sweep_config(a)?;
    let list = n_c_list(a);
    let mut inputs = BTreeMap::new();
    let data = prepared(&a.data, &mut inputs)?;
    let mut outputs = names(&["ecs.csv", "ecs_detail.csv"]);
    for n in &list {
        for s in &cfg.seeds {
            outputs.push(format!("ecs_clusters_nc{n}_seed{s}.csv"));
        }
    }
    let mut config = with_list(cfg.echo(), &list);
    config.remove("rural_code");
    begin(dir, "ecs", config, inputs, &outputs)?;
    let e = run_ecs(&cfg, &data, &list)?;
    write_file(dir, "ecs.csv", |w| e.write_csv(w))?;
    write_file(dir, "ecs_detail.csv", |w| e.write_detail_csv(w))?;
    for (n, s, r) in &e.reports {
        write_file(dir, &format!("ecs_clusters_nc{n}_seed{s}.csv"), |w| {
            r.write_csv(w)
        })?;
    }
    Ok(())
}

pub fn iterate(a: &IterateArgs) -> Result<()> {
    let dir = create_out(&a.out)?;
    let mut cfg = experiment(&a.data.split, exec_for(a.out.threads));
    cfg.predictor = parse_predictor(&a.predictor)?;
    cfg.fraction = a.fraction;
    cfg.n_c = a.n_c as usize;
    cfg.seeds = seed_list(&a.seeds);
    cfg.kmeans_n_init = a.n_init as usize;
    mlp_settings(&mut cfg, &a.mlp);
    cfg.validate()?;
    let mut inputs = BTreeMap::new();
    let data = prepared(&a.data, &mut inputs)?;
    let mut config = cfg.echo();
    config.retain(|k, _| k != "binning" && k != "rural_code");
    begin(
        dir,
        "iterate",
        config,
        inputs,
        &names(&["iterative.csv", "iterative_final.csv"]),
    )?;
    let r = run_iterative(&cfg, &data)?;
    write_file(dir, "iterative.csv", |w| r.write_curve_csv(w))?;
    write_file(dir, "iterative_final.csv", |w| r.write_final_csv(w))
}

const REPORT_SOURCES: [(&str, &str); 6] = [
    ("summary.csv", "Adaptation summary"),
    ("adaptation.csv", "Adaptation per seed"),
    ("sweep_summary.csv", "Cluster-count sweep"),
    ("ecs.csv", "Cluster specificity"),
    ("iterative_final.csv", "Iterative adaptation, final state"),
    ("inertia.csv", "k-means inertia"),
];

pub fn report(a: &ReportArgs) -> Result<()> {
    let dir = &a.out;
    if !dir.is_dir() {
        return Err(io_err(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory"),
        ));
    }
    let found: Vec<(&str, &str)> = REPORT_SOURCES
        .into_iter()
        .filter(|(f, _)| dir.join(f).is_file())
        .collect();
    let inputs = found
        .iter()
        .map(|(f, _)| (f.to_string(), path_str(&dir.join(f))))
        .collect();
    let mut m = Manifest::new("report", BTreeMap::new());
    m.inputs = inputs;
    m.outputs = names(&["report.md"]);
    m.write_as(dir, "report_manifest.json")?;

    let mut md = String::from("# sada report\n");
    if found.is_empty() {
        md.push_str("\nNo report files found.\n");
    }
    for (file, title) in found {
        let p = dir.join(file);
        let mut r = csv::Reader::from_path(&p).map_err(|e| Error::Csv {
            path: p.clone(),
            source: e,
        })?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::Csv {
                path: p.clone(),
                source: e,
            })?
            .iter()
            .map(String::from)
            .collect();
        md.push_str(&format!("\n## {title}\n\n| {} |\n|", header.join(" | ")));
        md.push_str(&"---|".repeat(header.len()));
        md.push('\n');
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Csv {
                path: p.clone(),
                source: e,
            })?;
            md.push_str(&format!(
                "| {} |\n",
                rec.iter().collect::<Vec<_>>().join(" | ")
            ));
        }
    }
    let out = dir.join("report.md");
    let f = File::create(&out).map_err(|e| io_err(&out, e))?;
    let mut w = BufWriter::new(f);
    std::io::Write::write_all(&mut w, md.as_bytes()).map_err(|e| io_err(&out, e))?;
    std::io::Write::flush(&mut w).map_err(|e| io_err(&out, e))
}
