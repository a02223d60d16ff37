use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stridewise");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(out: &Path, subjects: &str, strides: &str) {
    let o = run(&[
        "generate",
        "--subjects",
        subjects,
        "--strides",
        strides,
        "--seed",
        "4",
        "--out",
        s(out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

/// Five subjects, small models; returns the config path.
fn small_setup(root: &Path, extra: &str) -> std::path::PathBuf {
    generate(&root.join("data"), "5", "3");
    let cfg = root.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "manifest = data/manifest.txt\nn_train = 3\nn_validation = 1\nn_test = 1\n\
             perceptron_epochs = 5\nperceptron_train_selection = all\n\
             rnn_train_selection = per-subject:3\nrnn_hidden = 6\nrnn_epochs = 3\n{extra}"
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn generate_is_deterministic_and_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    generate(&a, "2", "3");
    generate(&b, "2", "3");
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names
            .iter()
            .filter(|n| n.ends_with(".csv") && !n.contains("truth"))
            .count(),
        2
    );
    assert!(names.iter().any(|n| n == "manifest.txt"));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n}"
        );
    }
    let recs = stridewise::dataset::load_manifest(&a.join("manifest.txt")).unwrap();
    assert_eq!(recs.len(), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    for args in [
        vec![
            "generate",
            "--subjects",
            "0",
            "--strides",
            "3",
            "--out",
            s(&out),
        ],
        vec![
            "generate",
            "--subjects",
            "2",
            "--strides",
            "0",
            "--out",
            s(&out),
        ],
        vec!["train", "--method", "svm", "--config", "c", "--out", "m"],
        vec!["evaluate", "--manifest", "m", "--out", "o"],
        vec!["frobnicate"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = run(&[
        "generate",
        "--subjects",
        "1",
        "--strides",
        "2",
        "--out",
        s(&blocker.join("sub")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_config_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_setup(dir.path(), "rnn_dropout = 1.5\n");
    let model = dir.path().join("models/rnn.json");
    let o = run(&[
        "train",
        "--method",
        "rnn",
        "--config",
        s(&cfg),
        "--out",
        s(&model),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dropout"));
    assert!(!model.exists());
}

#[test]
fn train_writes_models_and_logs_then_evaluate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_setup(dir.path(), "rnn_patience = 0\n");
    let models = dir.path().join("models");
    for method in ["perceptron", "rnn"] {
        let out = models.join(format!("{method}.json"));
        let o = run(&[
            "train",
            "--method",
            method,
            "--config",
            s(&cfg),
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.exists());
    }
    let plog = fs::read_to_string(models.join("perceptron.log.json")).unwrap();
    assert_eq!(plog.matches("\"mistakes\"").count(), 5);
    let rlog = fs::read_to_string(models.join("rnn.log.json")).unwrap();
    assert!(rlog.contains("\"stop_reason\""));
    assert!(rlog.contains("validation_mae_ms"));

    let eval = dir.path().join("eval");
    let manifest = dir.path().join("data/manifest.txt");
    let o = run(&[
        "evaluate",
        "--models",
        s(&models),
        "--manifest",
        s(&manifest),
        "--out",
        s(&eval),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let summary = fs::read_to_string(eval.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "method,target,mae_ms,mre_ms,sd_ms,iqr_lo_ms,iqr_hi_ms,failed_pct"
    );
    assert_eq!(summary.lines().count(), 1 + 9);
    let timing = fs::read_to_string(eval.join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 4);

    // stance MAE recomputed from the per-stride table: median over subjects
    // of per-subject median absolute errors
    let errors = fs::read_to_string(eval.join("errors.csv")).unwrap();
    let mut by_method: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for line in errors.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if let Ok(st) = f[5].parse::<f64>() {
            by_method
                .entry(f[2].to_owned())
                .or_default()
                .entry(f[0].to_owned())
                .or_default()
                .push(st.abs());
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    };
    for line in summary
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("st"))
    {
        let f: Vec<&str> = line.split(',').collect();
        let mut per_subject: Vec<f64> = by_method
            .get_mut(f[0])
            .unwrap()
            .values_mut()
            .map(&median)
            .collect();
        let expected = median(&mut per_subject);
        let reported: f64 = f[2].parse().unwrap();
        assert!(
            (reported - expected).abs() < 1e-4,
            "{}: {reported} vs {expected}",
            f[0]
        );
    }
}

#[test]
fn evaluate_skips_missing_models_and_fails_without_any() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_setup(dir.path(), "");
    let models = dir.path().join("models");
    let manifest = dir.path().join("data/manifest.txt");
    let eval = dir.path().join("eval");

    fs::create_dir_all(&models).unwrap();
    let o = run(&[
        "evaluate",
        "--models",
        s(&models),
        "--manifest",
        s(&manifest),
        "--out",
        s(&eval),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no model files"));

    let out = models.join("perceptron.json");
    assert!(run(&[
        "train",
        "--method",
        "perceptron",
        "--config",
        s(&cfg),
        "--out",
        s(&out)
    ])
    .status
    .success());
    let o = run(&[
        "evaluate",
        "--models",
        s(&models),
        "--manifest",
        s(&manifest),
        "--config",
        s(&cfg),
        "--out",
        s(&eval),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rnn.json not found"));
    let summary = fs::read_to_string(eval.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| !l.starts_with("rnn,")));
}

#[test]
fn evaluate_rejects_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.txt");
    fs::write(&manifest, "").unwrap();
    let o = run(&[
        "evaluate",
        "--models",
        s(dir.path()),
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lists no recordings"));
}
