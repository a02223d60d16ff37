//! End-to-end orchestration: run configuration, subject-level splits,
//! dataset generation, training of both learned methods and evaluation of
//! all three methods.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::dataset::{self, GaitEvent, Step};
use crate::error::{Error, Result};
use crate::eval::{self, ErrorRecord, Method, SummaryRow};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::heuristic;
use crate::labels::EventPair;
use crate::neural::{self, BiLstmModel, GoldEvents, RnnConfig, RnnExample, TrainReport};
use crate::signal::TimeSeries;
use crate::structperc::{self, EpochLog, LabeledSequence, PerceptronConfig, PerceptronModel};
use crate::synthgen::{self, SubjectProfile};

pub const PERCEPTRON_MODEL_FILE: &str = "perceptron.json";
pub const RNN_MODEL_FILE: &str = "rnn.json";

/// Which steps of the training subjects are used for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainSelection {
    /// The second step of every trial holding at least three steps.
    SecondStep,
    All,
    /// Up to `n` evenly spaced steps per subject.
    PerSubject(usize),
}

impl FromStr for TrainSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "second-step" => Ok(Self::SecondStep),
            "all" => Ok(Self::All),
            _ => match s.strip_prefix("per-subject:").map(str::parse::<usize>) {
                Some(Ok(n)) if n > 0 => Ok(Self::PerSubject(n)),
                _ => Err(Error::Config(format!(
                    "train selection `{s}`: expected second-step, all or per-subject:N"
                ))),
            },
        }
    }
}

impl fmt::Display for TrainSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SecondStep => f.write_str("second-step"),
            Self::All => f.write_str("all"),
            Self::PerSubject(n) => write!(f, "per-subject:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    Explicit {
        train: Vec<String>,
        validation: Vec<String>,
        test: Vec<String>,
    },
    Seeded {
        seed: u64,
        n_train: usize,
        n_validation: usize,
        n_test: usize,
    },
}

/// Disjoint subject sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub split: SplitSpec,
    pub bandpass_hz: (f64, f64),
    pub bandpass_order: usize,
    pub orientation_lowpass_hz: f64,
    pub peak_min_window: usize,
    pub perceptron: PerceptronConfig,
    pub rnn: RnnConfig,
    pub perceptron_selection: TrainSelection,
    pub rnn_selection: TrainSelection,
    pub output_dir: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "manifest",
    "train_subjects",
    "validation_subjects",
    "test_subjects",
    "split_seed",
    "n_train",
    "n_validation",
    "n_test",
    "bandpass_low_hz",
    "bandpass_high_hz",
    "bandpass_order",
    "orientation_lowpass_hz",
    "peak_min_window",
    "perceptron_epochs",
    "perceptron_learning_rate",
    "perceptron_seed",
    "rnn_hidden",
    "rnn_layers",
    "rnn_dropout",
    "rnn_learning_rate",
    "rnn_epochs",
    "rnn_patience",
    "rnn_seed",
    "rnn_channels",
    "perceptron_train_selection",
    "rnn_train_selection",
    "output_dir",
];

impl RunConfig {
    /// Defaults for everything except the manifest.
    pub fn with_manifest(manifest: PathBuf) -> Self {
        let f = FeatureConfig::perceptron();
        Self {
            manifest,
            split: SplitSpec::Seeded {
                seed: 1,
                n_train: 14,
                n_validation: 3,
                n_test: 3,
            },
            bandpass_hz: f.bandpass_hz,
            bandpass_order: f.bandpass_order,
            orientation_lowpass_hz: f.orientation_lowpass_hz,
            peak_min_window: f.peak_window,
            perceptron: PerceptronConfig::default(),
            rnn: RnnConfig::default(),
            perceptron_selection: TrainSelection::SecondStep,
            rnn_selection: TrainSelection::SecondStep,
            output_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parse a flat `key=value` file. Relative paths resolve against the
    /// file's directory.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = dataset::parse_key_values(text, path)?;
        if let Some(unknown) = kv.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "{}: unknown key `{unknown}`",
                path.display()
            )));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &str| base.join(p);
        let manifest = kv
            .get("manifest")
            .map(|m| resolve(m))
            .ok_or_else(|| Error::Config(format!("{}: `manifest` is required", path.display())))?;
        let mut cfg = Self::with_manifest(manifest);

        fn num<T: FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            kv.get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
                })
                .transpose()
        }
        let list = |key: &str| -> Option<Vec<String>> {
            kv.get(key).map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect()
            })
        };
        match (
            list("train_subjects"),
            list("validation_subjects"),
            list("test_subjects"),
        ) {
            (Some(train), Some(validation), Some(test)) => {
                cfg.split = SplitSpec::Explicit {
                    train,
                    validation,
                    test,
                };
            }
            (None, None, None) => {
                if let SplitSpec::Seeded {
                    seed,
                    n_train,
                    n_validation,
                    n_test,
                } = &mut cfg.split
                {
                    *seed = num(&kv, "split_seed")?.unwrap_or(*seed);
                    *n_train = num(&kv, "n_train")?.unwrap_or(*n_train);
                    *n_validation = num(&kv, "n_validation")?.unwrap_or(*n_validation);
                    *n_test = num(&kv, "n_test")?.unwrap_or(*n_test);
                }
            }
            _ => {
                return Err(Error::Config(
                    "train_subjects, validation_subjects and test_subjects must be given together"
                        .into(),
                ))
            }
        }
        cfg.bandpass_hz.0 = num(&kv, "bandpass_low_hz")?.unwrap_or(cfg.bandpass_hz.0);
        cfg.bandpass_hz.1 = num(&kv, "bandpass_high_hz")?.unwrap_or(cfg.bandpass_hz.1);
        cfg.bandpass_order = num(&kv, "bandpass_order")?.unwrap_or(cfg.bandpass_order);
        cfg.orientation_lowpass_hz =
            num(&kv, "orientation_lowpass_hz")?.unwrap_or(cfg.orientation_lowpass_hz);
        cfg.peak_min_window = num(&kv, "peak_min_window")?.unwrap_or(cfg.peak_min_window);
        let p = &mut cfg.perceptron;
        p.epochs = num(&kv, "perceptron_epochs")?.unwrap_or(p.epochs);
        p.learning_rate = num(&kv, "perceptron_learning_rate")?.unwrap_or(p.learning_rate);
        p.seed = num(&kv, "perceptron_seed")?.unwrap_or(p.seed);
        let r = &mut cfg.rnn;
        r.hidden = num(&kv, "rnn_hidden")?.unwrap_or(r.hidden);
        r.layers = num(&kv, "rnn_layers")?.unwrap_or(r.layers);
        r.dropout = num(&kv, "rnn_dropout")?.unwrap_or(r.dropout);
        r.learning_rate = num(&kv, "rnn_learning_rate")?.unwrap_or(r.learning_rate);
        r.epochs = num(&kv, "rnn_epochs")?.unwrap_or(r.epochs);
        r.patience = num(&kv, "rnn_patience")?.unwrap_or(r.patience);
        r.seed = num(&kv, "rnn_seed")?.unwrap_or(r.seed);
        r.channels = num(&kv, "rnn_channels")?.unwrap_or(r.channels);
        if let Some(s) = kv.get("perceptron_train_selection") {
            cfg.perceptron_selection = s.parse()?;
        }
        if let Some(s) = kv.get("rnn_train_selection") {
            cfg.rnn_selection = s.parse()?;
        }
        cfg.output_dir = kv.get("output_dir").map(|d| resolve(d));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.rnn.validate()?;
        if self.perceptron.epochs == 0
            || self.perceptron.learning_rate.is_nan()
            || self.perceptron.learning_rate <= 0.0
        {
            return Err(Error::Config(
                "perceptron needs at least one epoch and a positive learning rate".into(),
            ));
        }
        let (lo, hi) = self.bandpass_hz;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Config("band-pass needs 0 < low < high".into()));
        }
        if self.bandpass_order == 0 {
            return Err(Error::Config("band-pass order must be positive".into()));
        }
        if let SplitSpec::Explicit {
            train,
            validation,
            test,
        } = &self.split
        {
            let sets = [train, validation, test];
            let total: usize = sets.iter().map(|s| s.len()).sum();
            let unique: BTreeSet<&String> = sets.iter().flat_map(|s| s.iter()).collect();
            if unique.len() != total {
                return Err(Error::Config(
                    "train, validation and test subjects must be disjoint".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn perceptron_features(&self) -> FeatureConfig {
        FeatureConfig {
            bandpass_hz: self.bandpass_hz,
            bandpass_order: self.bandpass_order,
            orientation_lowpass_hz: self.orientation_lowpass_hz,
            peak_window: self.peak_min_window,
            ..FeatureConfig::perceptron()
        }
    }

    pub fn network_features(&self) -> FeatureConfig {
        FeatureConfig {
            peak_min: false,
            ..self.perceptron_features()
        }
    }

    /// Assign the subjects present in the data to train/validation/test.
    pub fn resolve_split(&self, subjects: &BTreeSet<String>) -> Result<Split> {
        match &self.split {
            SplitSpec::Explicit {
                train,
                validation,
                test,
            } => {
                let set = |v: &Vec<String>| -> Result<BTreeSet<String>> {
                    for s in v {
                        if !subjects.contains(s) {
                            return Err(Error::Config(format!("subject `{s}` not in the dataset")));
                        }
                    }
                    Ok(v.iter().cloned().collect())
                };
                Ok(Split {
                    train: set(train)?,
                    validation: set(validation)?,
                    test: set(test)?,
                })
            }
            SplitSpec::Seeded {
                seed,
                n_train,
                n_validation,
                n_test,
            } => {
                let need = n_train + n_validation + n_test;
                if need > subjects.len() {
                    return Err(Error::Config(format!(
                        "split needs {need} subjects, dataset has {}",
                        subjects.len()
                    )));
                }
                let mut order: Vec<String> = subjects.iter().cloned().collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                let mut it = order.into_iter();
                let mut take = |n: usize| it.by_ref().take(n).collect::<BTreeSet<_>>();
                Ok(Split {
                    train: take(*n_train),
                    validation: take(*n_validation),
                    test: take(*n_test),
                })
            }
        }
    }
}

/// Load every recording of a manifest and cut mirrored step windows.
pub fn load_steps(manifest: &Path) -> Result<Vec<Step>> {
    let paths = dataset::read_manifest(manifest)?;
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "manifest {} lists no recordings",
            manifest.display()
        )));
    }
    let per_recording: Vec<Vec<Step>> = paths
        .par_iter()
        .map(|p| dataset::load_recording(p).and_then(|r| dataset::prepare_steps(&r)))
        .collect::<Result<_>>()?;
    Ok(per_recording.into_iter().flatten().collect())
}

pub fn subjects_of(steps: &[Step]) -> BTreeSet<String> {
    steps.iter().map(|s| s.subject_id.clone()).collect()
}

pub fn steps_of<'a>(steps: &'a [Step], subjects: &BTreeSet<String>) -> Vec<&'a Step> {
    steps
        .iter()
        .filter(|s| subjects.contains(&s.subject_id))
        .collect()
}

pub fn select_training(steps: &[&Step], selection: TrainSelection) -> Vec<Step> {
    match selection {
        TrainSelection::All => steps.iter().map(|&s| s.clone()).collect(),
        TrainSelection::SecondStep => {
            let owned: Vec<Step> = steps.iter().map(|&s| s.clone()).collect();
            dataset::select_training_steps(&owned)
        }
        TrainSelection::PerSubject(n) => {
            let mut by_subject: BTreeMap<&str, Vec<&Step>> = BTreeMap::new();
            for s in steps {
                by_subject.entry(&s.subject_id).or_default().push(s);
            }
            let mut out = Vec::new();
            for (_, mut v) in by_subject {
                v.sort_by(|a, b| {
                    (a.trial_id.as_str(), a.onset + a.gold_ic)
                        .cmp(&(b.trial_id.as_str(), b.onset + b.gold_ic))
                });
                let k = v.len().min(n);
                out.extend((0..k).map(|i| v[i * v.len() / k].clone()));
            }
            out
        }
    }
}

fn sample_rate_of(steps: &[Step]) -> Result<u32> {
    let fs = steps
        .first()
        .map(|s| s.sample_rate)
        .ok_or_else(|| Error::Config("no steps to train on".into()))?;
    if steps.iter().any(|s| s.sample_rate != fs) {
        return Err(Error::invalid("steps mix sample rates"));
    }
    Ok(fs)
}

pub fn train_perceptron(
    cfg: &RunConfig,
    steps: &[Step],
    split: &Split,
) -> Result<(PerceptronModel, Vec<EpochLog>)> {
    let train = select_training(&steps_of(steps, &split.train), cfg.perceptron_selection);
    let fs = sample_rate_of(&train)?;
    let features = cfg.perceptron_features();
    let ex = FeatureExtractor::new(features.clone(), fs)?;
    let data: Vec<LabeledSequence> = train
        .par_iter()
        .map(|s| LabeledSequence::new(ex.extract(s)?, s.gold()))
        .collect::<Result<_>>()?;
    log::info!("perceptron: {} training steps", data.len());
    let (mut model, log) =
        structperc::perceptron_train(&data, &cfg.perceptron, ex.names().to_vec(), fs)?;
    model.feature_config = Some(features);
    Ok((model, log))
}

fn rnn_example(ex: &FeatureExtractor, step: &Step, channels: usize) -> Result<RnnExample> {
    let gold = if channels == 4 {
        GoldEvents {
            pair: step.gold(),
            contra_to: step.contra_to_before_ic(),
            contra_ic: step.contra_ic_after_to(),
        }
    } else {
        GoldEvents::ipsilateral(step.gold())
    };
    Ok(RnnExample {
        features: ex.extract(step)?.values,
        gold,
        sample_rate: step.sample_rate,
    })
}

pub fn train_rnn(
    cfg: &RunConfig,
    steps: &[Step],
    split: &Split,
) -> Result<(BiLstmModel, TrainReport)> {
    let train = select_training(&steps_of(steps, &split.train), cfg.rnn_selection);
    let validation: Vec<Step> = steps_of(steps, &split.validation)
        .into_iter()
        .cloned()
        .collect();
    let fs = sample_rate_of(&train)?;
    let features = cfg.network_features();
    let ex = FeatureExtractor::new(features.clone(), fs)?;
    let channels = cfg.rnn.channels;
    let usable = |s: &&Step| {
        channels == 2 || (s.contra_to_before_ic().is_some() && s.contra_ic_after_to().is_some())
    };
    let make = |v: &[Step]| -> Result<Vec<RnnExample>> {
        v.iter()
            .filter(usable)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|s| rnn_example(&ex, s, channels))
            .collect()
    };
    let train_ex = make(&train)?;
    let val_ex = make(&validation)?;
    log::info!(
        "rnn: {} training steps, {} validation steps",
        train_ex.len(),
        val_ex.len()
    );
    let (mut model, report) =
        neural::rnn_train(&train_ex, &val_ex, ex.names().to_vec(), &cfg.rnn, fs)?;
    model.feature_config = Some(features);
    Ok((model, report))
}

/// Models available for evaluation.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub perceptron: Option<PerceptronModel>,
    pub rnn: Option<BiLstmModel>,
}

impl Models {
    /// Load `perceptron.json` and `rnn.json` from `dir`; absent files are
    /// skipped with a warning, malformed ones are errors.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let p = dir.join(PERCEPTRON_MODEL_FILE);
        let r = dir.join(RNN_MODEL_FILE);
        let perceptron = if p.exists() {
            Some(PerceptronModel::load(&p)?)
        } else {
            log::warn!("{} not found; skipping the perceptron", p.display());
            None
        };
        let rnn = if r.exists() {
            Some(BiLstmModel::load(&r)?)
        } else {
            log::warn!("{} not found; skipping the RNN", r.display());
            None
        };
        Ok(Self { perceptron, rnn })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub steps: usize,
    /// Mean wall time from raw step signals to events.
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub records: Vec<ErrorRecord>,
    pub summary: Vec<SummaryRow>,
    pub curve_thresholds: Vec<f64>,
    pub curves: BTreeMap<Method, Vec<f64>>,
    pub timings: Vec<MethodTiming>,
}

struct StepOutcome {
    predictions: Vec<(Method, Option<EventPair>, f64)>,
}

fn predict_step(step: &Step, models: &Models, extractors: &Extractors) -> Result<StepOutcome> {
    let mut predictions = Vec::with_capacity(3);
    let t = Instant::now();
    let axial = TimeSeries::new(step.ipsilateral().z.clone(), step.sample_rate)?;
    let m = heuristic::m_method(&axial).events();
    predictions.push((Method::MMethod, m, t.elapsed().as_secs_f64() * 1e3));
    if let (Some(model), Some(ex)) = (&models.perceptron, &extractors.perceptron) {
        let t = Instant::now();
        let p = structperc::perceptron_predict(model, &ex.extract(step)?)?.ok();
        predictions.push((Method::Perceptron, p, t.elapsed().as_secs_f64() * 1e3));
    }
    if let (Some(model), Some(ex)) = (&models.rnn, &extractors.rnn) {
        let t = Instant::now();
        let p = neural::rnn_predict(model, &ex.extract(step)?.values)?.ok();
        predictions.push((Method::Rnn, p, t.elapsed().as_secs_f64() * 1e3));
    }
    Ok(StepOutcome { predictions })
}

struct Extractors {
    perceptron: Option<FeatureExtractor>,
    rnn: Option<FeatureExtractor>,
}

fn extractor_for(
    config: Option<&FeatureConfig>,
    fallback: FeatureConfig,
    names: &[String],
    sample_rate: u32,
) -> Result<FeatureExtractor> {
    let ex = FeatureExtractor::new(config.cloned().unwrap_or(fallback), sample_rate)?;
    if ex.names() != names {
        return Err(Error::Config(format!(
            "model expects features {names:?}, extractor yields {:?}",
            ex.names()
        )));
    }
    Ok(ex)
}

/// Run every available method on every step and aggregate the errors.
pub fn evaluate_steps(steps: &[Step], models: &Models) -> Result<Evaluation> {
    let fs = sample_rate_of(steps)?;
    let extractors = Extractors {
        perceptron: models
            .perceptron
            .as_ref()
            .map(|m| {
                extractor_for(
                    m.feature_config.as_ref(),
                    FeatureConfig::perceptron(),
                    &m.feature_names,
                    fs,
                )
            })
            .transpose()?,
        rnn: models
            .rnn
            .as_ref()
            .map(|m| {
                extractor_for(
                    m.feature_config.as_ref(),
                    FeatureConfig::network(),
                    &m.feature_names,
                    fs,
                )
            })
            .transpose()?,
    };
    let outcomes: Vec<StepOutcome> = steps
        .par_iter()
        .map(|s| predict_step(s, models, &extractors))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut time_sums: BTreeMap<Method, (f64, usize)> = BTreeMap::new();
    for method in Method::ALL {
        for (step, out) in steps.iter().zip(&outcomes) {
            for &(m, pred, ms) in out.predictions.iter().filter(|p| p.0 == method) {
                records.push(ErrorRecord::new(
                    &step.subject_id,
                    step.speed,
                    m,
                    pred,
                    step.gold(),
                    step.sample_rate,
                ));
                let e = time_sums.entry(m).or_insert((0.0, 0));
                e.0 += ms;
                e.1 += 1;
            }
        }
    }
    eval::impute_failures(&mut records);
    let summary = eval::summarize(&records);
    let (curve_thresholds, curves) = eval::sensitivity_curves(&records)?;
    let timings = time_sums
        .into_iter()
        .map(|(method, (sum, n))| MethodTiming {
            method,
            steps: n,
            mean_ms: sum / n as f64,
        })
        .collect();
    Ok(Evaluation {
        records,
        summary,
        curve_thresholds,
        curves,
        timings,
    })
}

pub const ERRORS_FILE: &str = "errors.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVE_FILE: &str = "sensitivity.csv";
pub const TIMING_FILE: &str = "timing.csv";

/// Write the per-stride table, summary, sensitivity curve and timing report.
pub fn write_evaluation(out_dir: &Path, ev: &Evaluation) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    eval::write_errors_csv(&out_dir.join(ERRORS_FILE), &ev.records)?;
    eval::write_summary_csv(&out_dir.join(SUMMARY_FILE), &ev.summary)?;
    eval::write_curve_csv(&out_dir.join(CURVE_FILE), &ev.curve_thresholds, &ev.curves)?;
    let path = out_dir.join(TIMING_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["method", "steps", "mean_ms_per_step"])?;
    for t in &ev.timings {
        w.write_record([
            t.method.to_string(),
            t.steps.to_string(),
            format!("{:.3}", t.mean_ms),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Leave-one-subject-out: for every subject, train both learned methods on
/// the others (holding out `n_validation` of them for early stopping) and
/// evaluate on that subject.
pub fn leave_one_subject_out(
    cfg: &RunConfig,
    steps: &[Step],
    n_validation: usize,
) -> Result<Evaluation> {
    let subjects: Vec<String> = subjects_of(steps).into_iter().collect();
    if subjects.len() < n_validation + 2 {
        return Err(Error::Config(format!(
            "leave-one-subject-out needs at least {} subjects",
            n_validation + 2
        )));
    }
    let mut all_records = Vec::new();
    for (k, held_out) in subjects.iter().enumerate() {
        let mut rest: Vec<String> = subjects
            .iter()
            .filter(|s| *s != held_out)
            .cloned()
            .collect();
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(
            cfg.rnn.seed.wrapping_add(k as u64),
        ));
        let split = Split {
            validation: rest[..n_validation].iter().cloned().collect(),
            train: rest[n_validation..].iter().cloned().collect(),
            test: [held_out.clone()].into(),
        };
        log::info!("fold {}/{}: testing on {held_out}", k + 1, subjects.len());
        let models = Models {
            perceptron: Some(train_perceptron(cfg, steps, &split)?.0),
            rnn: Some(train_rnn(cfg, steps, &split)?.0),
        };
        let test: Vec<Step> = steps_of(steps, &split.test).into_iter().cloned().collect();
        all_records.extend(evaluate_steps(&test, &models)?.records);
    }
    let summary = eval::summarize(&all_records);
    let (curve_thresholds, curves) = eval::sensitivity_curves(&all_records)?;
    Ok(Evaluation {
        records: all_records,
        summary,
        curve_thresholds,
        curves,
        timings: Vec::new(),
    })
}

/// Write a value as pretty-printed JSON (training logs).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Files written by [`generate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub manifest: PathBuf,
    pub recordings: Vec<PathBuf>,
    pub truth_tables: Vec<PathBuf>,
}

fn write_truth(path: &Path, events: &[GaitEvent]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["foot", "event", "index", "time_s"])?;
    for e in events {
        w.write_record([
            e.foot.to_string(),
            format!("{:?}", e.kind),
            e.index.to_string(),
            e.time.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Generate `n_subjects` synthetic recordings of `n_strides` strides each
/// under `out_dir`, plus `manifest.txt` and one truth table per recording.
pub fn generate_dataset(
    out_dir: &Path,
    n_subjects: usize,
    n_strides: usize,
    seed: u64,
) -> Result<GeneratedDataset> {
    if n_subjects == 0 || n_strides == 0 {
        return Err(Error::Config(
            "subjects and strides must be at least 1".into(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let generated: Vec<(PathBuf, PathBuf)> = (0..n_subjects)
        .into_par_iter()
        .map(|i| {
            let profile = SubjectProfile::for_subject(i, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
            let speed = (rng.random_range(28..=38) as f64) / 10.0;
            let synth = synthgen::generate_recording(&profile, n_strides, speed)?;
            let csv_path = out_dir.join(format!("{}.csv", profile.subject_id));
            let truth_path = out_dir.join(format!("{}.truth.csv", profile.subject_id));
            dataset::save_recording(&synth.recording, &csv_path)?;
            write_truth(&truth_path, &synth.truth)?;
            Ok((csv_path, truth_path))
        })
        .collect::<Result<_>>()?;
    let (recordings, truth_tables): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
    let manifest = out_dir.join("manifest.txt");
    dataset::write_manifest(&manifest, &recordings)?;
    Ok(GeneratedDataset {
        manifest,
        recordings,
        truth_tables,
    })
}
