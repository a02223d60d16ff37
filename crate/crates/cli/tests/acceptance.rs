//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Criteria 7, 8 and 10 share one end-to-end benchmark run
//! through the `stridewise` binary.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use stridewise::signal::{design_butterworth, filt_zero_phase, FilterKind, TimeSeries};

const BIN: &str = env!("CARGO_BIN_EXE_stridewise");

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.2} s (limit {limit_s} s)"))
}

fn stridewise(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("cannot run {BIN}: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`stridewise {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

// ------------------------------------------------------------ criteria 1-6

fn viterbi() -> Verdict {
    let t = Instant::now();
    let mismatches = common::viterbi_suite(1000, 11);
    let (fast, time) = within(t.elapsed(), 10.0);
    verdict(
        mismatches == 0 && fast,
        format!("1000 instances, {mismatches} mismatches, {time}"),
    )
}

fn decoder() -> Verdict {
    let t = Instant::now();
    let (mismatches, failures) = common::decoder_suite(500, 12);
    let (fast, time) = within(t.elapsed(), 30.0);
    verdict(
        mismatches == 0 && fast,
        format!(
            "500 instances (l = 400), {mismatches} mismatches, {failures} agreed failures, {time}"
        ),
    )
}

fn gradients() -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (channels, dropout, seed) in [(2, 0.0, 1), (2, 0.3, 2), (4, 0.3, 3)] {
        worst = worst.max(common::gradcheck::linear_readout(channels, dropout, seed));
    }
    let hinge = common::gradcheck::through_hinge(5);
    let (fast, time) = within(t.elapsed(), 60.0);
    match hinge {
        Some(h) => verdict(
            worst < 1e-4 && h < 1e-4 && fast,
            format!("H=3 l=5 D=4: readout {worst:.1e}, through hinge {h:.1e} (limit 1e-4), {time}"),
        ),
        None => verdict(false, "too few tie-free hinge instances"),
    }
}

fn hinge() -> Verdict {
    let (mismatches, positive) = common::hinge_suite(200, 13);
    verdict(
        mismatches == 0,
        format!("200 instances (l <= 20), {mismatches} mismatches, {positive} with positive loss"),
    )
}

fn filters() -> Verdict {
    let fs = 1000;
    let mut problems = Vec::new();
    let lp = design_butterworth(FilterKind::Lowpass, &[60.0], 2, fs).unwrap();
    let bp = design_butterworth(FilterKind::Bandpass, &[0.5, 60.0], 2, fs).unwrap();
    let dc_lp = lp.response(0.0).norm();
    let dc_bp = bp.response(0.0).norm();
    if (dc_lp - 1.0).abs() > 1e-9 {
        problems.push(format!("low-pass DC gain {dc_lp}"));
    }
    if dc_bp > 1e-9 {
        problems.push(format!("band-pass DC gain {dc_bp}"));
    }

    let n = 2001;
    let c = n / 2;
    let mut impulse = vec![0.0; n];
    impulse[c] = 1.0;
    let mut asym: f64 = 0.0;
    for f in [&lp, &bp] {
        let y = filt_zero_phase(&TimeSeries::new(impulse.clone(), fs).unwrap(), f).unwrap();
        let y = y.samples();
        for k in 1..c {
            asym = asym.max((y[c + k] - y[c - k]).abs());
        }
    }
    if asym > 1e-9 {
        problems.push(format!("impulse asymmetry {asym:e}"));
    }

    let x: Vec<f64> = (0..4000)
        .map(|i| (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 1000.0).sin())
        .collect();
    let y = filt_zero_phase(&TimeSeries::new(x.clone(), fs).unwrap(), &lp).unwrap();
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    let measured = rms(&y.samples()[1000..3000]) / rms(&x[1000..3000]);
    let expected = lp.response(200.0).norm_sqr();
    let rel = (measured - expected).abs() / expected;
    if rel > 0.02 {
        problems.push(format!("200 Hz attenuation off by {:.2}%", 100.0 * rel));
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "DC gains {dc_lp:.12}/{dc_bp:.1e}, impulse asymmetry {asym:.1e}, 200 Hz attenuation within {:.3}%",
                100.0 * rel
            )
        } else {
            problems.join("; ")
        },
    )
}

fn m_method() -> Verdict {
    let (agree, solved, total) = common::m_method_suite(500, 0xacce);
    let rate = solved as f64 / total as f64;
    verdict(
        agree == total && rate >= 0.95,
        format!(
            "{agree}/{total} identical to the rule oracle, success {:.1}%",
            100.0 * rate
        ),
    )
}

// ------------------------------------------------------- benchmark (7, 8, 10)

struct Benchmark {
    elapsed: Duration,
    /// method → (stance MAE ms, failed %)
    stance: Vec<(String, f64, f64)>,
    curve_header: Vec<String>,
    curve: Vec<Vec<f64>>,
    timing: Vec<(String, f64)>,
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect())
}

fn run_benchmark(root: &Path) -> Result<Benchmark, String> {
    let configs = root.join("configs");
    fs::create_dir_all(&configs).map_err(|e| e.to_string())?;
    let repo_cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.cfg");
    let cfg = configs.join("benchmark.cfg");
    fs::copy(&repo_cfg, &cfg).map_err(|e| format!("{}: {e}", repo_cfg.display()))?;
    let data = root.join("data/benchmark");
    let models = root.join("models");
    let eval = root.join("eval");

    let t = Instant::now();
    stridewise(&[
        "generate",
        "--subjects",
        "20",
        "--strides",
        "30",
        "--seed",
        "7",
        "--out",
        path_str(&data),
    ])?;
    for method in ["perceptron", "rnn"] {
        let out = models.join(format!("{method}.json"));
        stridewise(&[
            "train",
            "--method",
            method,
            "--config",
            path_str(&cfg),
            "--out",
            path_str(&out),
        ])?;
    }
    stridewise(&[
        "evaluate",
        "--models",
        path_str(&models),
        "--manifest",
        path_str(&data.join("manifest.txt")),
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&eval),
    ])?;
    let elapsed = t.elapsed();

    let stance = csv_rows(&eval.join("summary.csv"))?
        .into_iter()
        .skip(1)
        .filter(|r| r[1] == "st")
        .map(|r| (r[0].clone(), r[2].parse().unwrap(), r[7].parse().unwrap()))
        .collect();
    let mut curve_rows = csv_rows(&eval.join("sensitivity.csv"))?.into_iter();
    let curve_header = curve_rows.next().ok_or("empty curve file")?;
    let curve = curve_rows
        .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    let timing = csv_rows(&eval.join("timing.csv"))?
        .into_iter()
        .skip(1)
        .map(|r| (r[0].clone(), r[2].parse().unwrap()))
        .collect();
    Ok(Benchmark {
        elapsed,
        stance,
        curve_header,
        curve,
        timing,
    })
}

fn stance_of(b: &Benchmark, method: &str) -> (f64, f64) {
    b.stance
        .iter()
        .find(|(m, _, _)| m == method)
        .map(|&(_, mae, failed)| (mae, failed))
        .unwrap_or((f64::NAN, f64::NAN))
}

fn benchmark_targets(b: &Benchmark) -> Verdict {
    let (mm, _) = stance_of(b, "m_method");
    let (pc, pc_fail) = stance_of(b, "perceptron");
    let (rnn, rnn_fail) = stance_of(b, "rnn");
    let minutes = b.elapsed.as_secs_f64() / 60.0;
    let pass = pc <= 12.0
        && rnn <= 8.0
        && rnn < mm
        && pc_fail <= 10.0
        && rnn_fail <= 10.0
        && minutes <= 20.0;
    verdict(
        pass,
        format!(
            "stance MAE: M-method {mm:.2}, perceptron {pc:.2} (<= 12), RNN {rnn:.2} (<= 8) ms; \
             failed: perceptron {pc_fail:.1}%, RNN {rnn_fail:.1}% (<= 10%); runtime {minutes:.1} min (<= 20)"
        ),
    )
}

fn sensitivity(b: &Benchmark) -> Verdict {
    let col = |name: &str| b.curve_header.iter().position(|h| h == name);
    let (Some(t), Some(mm), Some(rnn)) = (col("threshold_ms"), col("tpr_mmethod"), col("tpr_rnn"))
    else {
        return verdict(
            false,
            format!("unexpected curve header {:?}", b.curve_header),
        );
    };
    let methods: Vec<usize> = (0..b.curve_header.len()).filter(|&c| c != t).collect();
    let monotone = methods
        .iter()
        .all(|&c| b.curve.windows(2).all(|w| w[0][c] <= w[1][c]));
    let last = b.curve.last().expect("curve rows");
    let reaches_one = methods.iter().all(|&c| (last[c] - 1.0).abs() < 1e-12);
    let Some(at10) = b.curve.iter().find(|r| r[t] == 10.0) else {
        return verdict(false, "no 10 ms threshold");
    };
    verdict(
        monotone && reaches_one && at10[rnn] >= at10[mm],
        format!(
            "monotone {monotone}, all reach 1.0 at {} ms: {reaches_one}; at 10 ms RNN {:.3} vs M-method {:.3}",
            last[t], at10[rnn], at10[mm]
        ),
    )
}

fn latency(b: &Benchmark) -> Verdict {
    let get = |m: &str| b.timing.iter().find(|(n, _)| n == m).map(|&(_, v)| v);
    match (get("perceptron"), get("rnn")) {
        (Some(p), Some(r)) => verdict(
            p <= 240.0 && r <= 240.0,
            format!("mean per step: perceptron {p:.2} ms, RNN {r:.2} ms (<= 240 ms)"),
        ),
        _ => verdict(false, "timing report lacks a learned method"),
    }
}

// ------------------------------------------------------------ determinism (9)

fn determinism_run(root: &Path) -> Result<Vec<(PathBuf, u64)>, String> {
    let data = root.join("data");
    let models = root.join("models");
    let eval = root.join("eval");
    let cfg = root.join("run.cfg");
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    fs::write(
        &cfg,
        "manifest = data/manifest.txt\nn_train = 3\nn_validation = 1\nn_test = 1\n\
         perceptron_train_selection = all\nrnn_train_selection = per-subject:4\n\
         rnn_hidden = 8\nrnn_epochs = 3\n",
    )
    .map_err(|e| e.to_string())?;
    stridewise(&[
        "generate",
        "--subjects",
        "5",
        "--strides",
        "4",
        "--seed",
        "3",
        "--out",
        path_str(&data),
    ])?;
    for method in ["perceptron", "rnn"] {
        let out = models.join(format!("{method}.json"));
        stridewise(&[
            "train",
            "--method",
            method,
            "--config",
            path_str(&cfg),
            "--out",
            path_str(&out),
        ])?;
    }
    stridewise(&[
        "evaluate",
        "--models",
        path_str(&models),
        "--manifest",
        path_str(&data.join("manifest.txt")),
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&eval),
    ])?;
    let mut files = Vec::new();
    for dir in [&data, &models] {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        files.extend(entries);
    }
    for name in ["errors.csv", "summary.csv", "sensitivity.csv"] {
        files.push(eval.join(name));
    }
    Ok(files
        .into_iter()
        .map(|p| {
            let sum = common::checksum(&p);
            (p.strip_prefix(root).unwrap().to_path_buf(), sum)
        })
        .collect())
}

fn determinism(root: &Path) -> Verdict {
    let runs = (
        determinism_run(&root.join("a")),
        determinism_run(&root.join("b")),
    );
    match runs {
        (Ok(a), Ok(b)) => {
            let differing: Vec<String> = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x != y)
                .map(|(x, _)| x.0.display().to_string())
                .collect();
            verdict(
                a.len() == b.len() && differing.is_empty(),
                format!(
                    "{} files (recordings, truth tables, models, logs, evaluation CSVs) compared, differing: {differing:?}",
                    a.len()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => verdict(false, e),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, &str, Verdict)> = vec![
        (1, "Viterbi matches brute force", viterbi()),
        (
            2,
            "constrained decoder matches exhaustive search",
            decoder(),
        ),
        (3, "BiLSTM gradients match finite differences", gradients()),
        (4, "hinge loss matches enumeration", hinge()),
        (5, "filter contracts", filters()),
        (6, "M-method matches rule oracle", m_method()),
    ];
    match run_benchmark(&tmp.path().join("bench")) {
        Ok(b) => {
            results.push((7, "end-to-end synthetic benchmark", benchmark_targets(&b)));
            results.push((8, "sensitivity curves", sensitivity(&b)));
            results.push((9, "determinism", determinism(&tmp.path().join("det"))));
            results.push((10, "inference latency", latency(&b)));
        }
        Err(e) => {
            for (n, name) in [
                (7, "end-to-end synthetic benchmark"),
                (8, "sensitivity curves"),
                (10, "inference latency"),
            ] {
                results.push((
                    n,
                    name,
                    verdict(false, format!("benchmark run failed: {e}")),
                ));
            }
            results.push((9, "determinism", determinism(&tmp.path().join("det"))));
            results.sort_by_key(|r| r.0);
        }
    }
    let mut failed = 0;
    for (n, name, v) in &results {
        println!(
            "{} criterion {n:>2}: {name} — {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
