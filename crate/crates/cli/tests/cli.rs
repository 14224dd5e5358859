use std::path::Path;
use std::process::{Command, Output};

fn sada(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sada"))
        .args(args)
        .output()
        .expect("run sada")
}

fn code(args: &[&str]) -> i32 {
    sada(args).status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["eval", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["eval", "--bogus", "--out", out]), 1);
    assert_eq!(code(&["eval", "--threads", "0", "--out", out]), 1);
    assert_eq!(code(&["eval", "--predictor", "tree", "--out", out]), 1);
    assert_eq!(code(&["iterate", "--fraction", "0", "--out", out]), 1);

    let o = sada(&["eval", "--n-c", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--n-c"), "{}", stderr(&o));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = sada(&[
        "cluster",
        "--pretrain",
        s(&missing),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn infeasible_world_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = sada(&[
        "synth",
        "--k",
        "10",
        "--sigma-emb",
        "0.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn synth_split_cluster_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    assert_eq!(
        code(&[
            "synth",
            "--n",
            "900",
            "--driver-n",
            "600",
            "--driver-drivers",
            "2",
            "--out",
            s(&raw)
        ]),
        0
    );
    for f in [
        "manifest.json",
        "dataset.csv",
        "dataset.emb",
        "truth.csv",
        "driver.csv",
        "driver.emb",
        "driver_truth.csv",
    ] {
        assert!(raw.join(f).is_file(), "{f}");
    }
    let truth = std::fs::read_to_string(raw.join("truth.csv")).unwrap();
    assert_eq!(truth.lines().next(), Some("sample_id,true_cluster"));
    assert_eq!(truth.lines().count(), 901);
    let emb = std::fs::read(raw.join("dataset.emb")).unwrap();
    assert_eq!(&emb[..4], b"SADC");

    let split = dir.path().join("split");
    assert_eq!(
        code(&["split", s(&raw.join("dataset.csv")), "--out", s(&split)]),
        0
    );
    assert_eq!(
        code(&["split", s(&raw.join("dataset.csv")), "--out", s(&raw)]),
        1
    );
    let table = std::fs::read_to_string(split.join("dataset.csv")).unwrap();
    assert!(table.contains(",train") && table.contains(",val"));

    let clustered = dir.path().join("clustered");
    assert_eq!(
        code(&[
            "cluster",
            "--pretrain",
            s(&split.join("dataset.csv")),
            "--n-c",
            "10",
            "--variant",
            "kms",
            "--out",
            s(&clustered)
        ]),
        0
    );
    for f in [
        "manifest.json",
        "standardizer.csv",
        "kmeans.sadk",
        "inertia.csv",
        "assignments.csv",
    ] {
        assert!(clustered.join(f).is_file(), "{f}");
    }
    assert_eq!(
        &std::fs::read(clustered.join("kmeans.sadk")).unwrap()[..4],
        b"SADK"
    );
    let assignments = std::fs::read_to_string(clustered.join("assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 901);

    let tables = dir.path().join("tables");
    let (pre, drv) = (raw.join("dataset.csv"), raw.join("driver.csv"));
    let args = [
        "fit-dsds",
        "--pretrain",
        s(&pre),
        "--driver-data",
        s(&drv),
        "--out",
        s(&tables),
    ];
    assert_eq!(code(&args), 0);
    assert!(tables.join("dsds_driver0.csv").is_file());
    assert!(tables.join("dsds_driver1.csv").is_file());
}

#[test]
fn pretrain_without_driver_data_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&["eval", "--pretrain", "x.csv", "--out", s(dir.path())]),
        1
    );
}

#[test]
fn iterate_is_byte_identical_across_runs() {
    let root = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = root.path().join(name);
        let args = [
            "iterate",
            "--fraction",
            "0.05",
            "--seeds",
            "0,1",
            "--threads",
            threads,
            "--out",
            s(&out),
        ];
        assert_eq!(code(&args), 0);
        read_dir_sorted(&out)
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        ["iterative.csv", "iterative_final.csv", "manifest.json"]
    );
    assert_eq!(a, b);
    assert_eq!(run("c", "4"), a);
}

#[test]
fn eval_sweep_ecs_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&["eval", "--seeds", "0,1", "--out", out]), 0);
    assert_eq!(
        code(&["sweep", "--n-c", "1,10", "--seeds", "0", "--out", out]),
        0
    );
    assert_eq!(
        code(&["ecs", "--n-c", "5,10", "--seeds", "0", "--out", out]),
        0
    );
    assert_eq!(code(&["report", "--out", out]), 0);
    for f in [
        "adaptation.csv",
        "summary.csv",
        "sweep.csv",
        "sweep_summary.csv",
        "ecs.csv",
        "ecs_detail.csv",
        "report.md",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.starts_with("# sada report"));
    assert!(md.matches("\n## ").count() >= 3, "{md}");

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().count() >= 2);
}

#[test]
fn train_mlp_writes_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "train-mlp",
        "--epochs",
        "2",
        "--hidden",
        "8",
        "--out",
        s(dir.path()),
    ];
    assert_eq!(code(&args), 0);
    let ckpt = std::fs::read(dir.path().join("mlp_driver0.sadm")).unwrap();
    assert_eq!(&ckpt[..4], b"SADM");
    assert!(dir.path().join("curves.csv").is_file());
}
