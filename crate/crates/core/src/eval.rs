//! Error metrics, failure imputation, the two-step median and the
//! sensitivity curve.
//!
//! Relative errors are `predicted - reference` in ms: a positive event error
//! is a lag, a positive stance-time error an overestimate. Global values are
//! medians over subjects of per-subject medians, so no runner dominates.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{EventKind, Foot, GaitEvent};
use crate::error::{Error, Result};
use crate::labels::EventPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    MMethod,
    Perceptron,
    Rnn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MMethod, Method::Perceptron, Method::Rnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MMethod => "m_method",
            Self::Perceptron => "perceptron",
            Self::Rnn => "rnn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_method" | "mmethod" | "m-method" => Ok(Self::MMethod),
            "perceptron" => Ok(Self::Perceptron),
            "rnn" => Ok(Self::Rnn),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected m_method, perceptron or rnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    Ic,
    To,
    Stance,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Ic, Target::To, Target::Stance];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ic => "ic",
            Self::To => "to",
            Self::Stance => "st",
        }
    }
}

/// Signed errors of one successful prediction, ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventErrors {
    pub ic_err: f64,
    pub to_err: f64,
    pub st_err: f64,
}

pub fn event_errors(predicted: EventPair, gold: EventPair, sample_rate: u32) -> EventErrors {
    let ms = 1000.0 / f64::from(sample_rate);
    let d = |p: usize, g: usize| (p as f64 - g as f64) * ms;
    EventErrors {
        ic_err: d(predicted.ic, gold.ic),
        to_err: d(predicted.to, gold.to),
        st_err: predicted.stance_ms(sample_rate) - gold.stance_ms(sample_rate),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub subject_id: String,
    pub speed: f64,
    pub method: Method,
    pub ic_err: Option<f64>,
    pub to_err: Option<f64>,
    pub st_err: Option<f64>,
    pub predicted_st_ms: Option<f64>,
    pub gold_st_ms: f64,
    pub failed: bool,
    pub imputed: bool,
}

impl ErrorRecord {
    pub fn new(
        subject_id: &str,
        speed: f64,
        method: Method,
        predicted: Option<EventPair>,
        gold: EventPair,
        sample_rate: u32,
    ) -> Self {
        let errs = predicted.map(|p| event_errors(p, gold, sample_rate));
        Self {
            subject_id: subject_id.to_owned(),
            speed,
            method,
            ic_err: errs.map(|e| e.ic_err),
            to_err: errs.map(|e| e.to_err),
            st_err: errs.map(|e| e.st_err),
            predicted_st_ms: predicted.map(|p| p.stance_ms(sample_rate)),
            gold_st_ms: gold.stance_ms(sample_rate),
            failed: predicted.is_none(),
            imputed: false,
        }
    }

    pub fn error(&self, target: Target) -> Option<f64> {
        match target {
            Target::Ic => self.ic_err,
            Target::To => self.to_err,
            Target::Stance => self.st_err,
        }
    }
}

fn speed_key(speed: f64) -> u64 {
    speed.to_bits()
}

/// Replace the stance time of failed records with the mean successful
/// estimate of the same method, subject and speed. Records without such
/// estimates stay failed and unimputed.
pub fn impute_failures(records: &mut [ErrorRecord]) {
    let mut sums: BTreeMap<(Method, String, u64), (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.failed) {
        let e = sums
            .entry((r.method, r.subject_id.clone(), speed_key(r.speed)))
            .or_insert((0.0, 0));
        e.0 += r
            .predicted_st_ms
            .expect("successful record has a prediction");
        e.1 += 1;
    }
    for r in records.iter_mut().filter(|r| r.failed && !r.imputed) {
        if let Some(&(sum, n)) = sums.get(&(r.method, r.subject_id.clone(), speed_key(r.speed))) {
            let st = sum / n as f64;
            r.predicted_st_ms = Some(st);
            r.st_err = Some(st - r.gold_st_ms);
            r.imputed = true;
        }
    }
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Linear-interpolation quantile, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepMedian {
    pub value: f64,
    /// Sample standard deviation of the per-subject medians.
    pub sd: f64,
    pub per_subject: BTreeMap<String, f64>,
}

/// Median over subjects of per-subject medians. Subjects without values are
/// ignored; no values at all is an error.
pub fn two_step_median(groups: &BTreeMap<String, Vec<f64>>) -> Result<TwoStepMedian> {
    let per_subject: BTreeMap<String, f64> = groups
        .iter()
        .filter_map(|(s, v)| median(v).map(|m| (s.clone(), m)))
        .collect();
    let medians: Vec<f64> = per_subject.values().copied().collect();
    let value = median(&medians)
        .ok_or_else(|| Error::invalid("two-step median needs at least one value"))?;
    Ok(TwoStepMedian {
        value,
        sd: sample_std(&medians),
        per_subject,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub target: Target,
    pub mae_ms: f64,
    pub mre_ms: f64,
    pub sd_ms: f64,
    pub iqr_lo_ms: f64,
    pub iqr_hi_ms: f64,
    pub failed_pct: f64,
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "method",
    "target",
    "mae_ms",
    "mre_ms",
    "sd_ms",
    "iqr_lo_ms",
    "iqr_hi_ms",
    "failed_pct",
];

pub const ERRORS_HEADER: [&str; 8] = [
    "subject", "speed", "method", "ic_err", "to_err", "st_err", "failed", "imputed",
];

/// One row per method present and target. Event targets use successful
/// predictions only; the stance target also uses imputed records. Values are
/// NaN when a method has no usable record for a target.
pub fn summarize(records: &[ErrorRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for method in Method::ALL {
        let own: Vec<&ErrorRecord> = records.iter().filter(|r| r.method == method).collect();
        if own.is_empty() {
            continue;
        }
        let failed_pct = 100.0 * own.iter().filter(|r| r.failed).count() as f64 / own.len() as f64;
        for target in Target::ALL {
            let mut abs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut rel: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut pooled = Vec::new();
            for r in &own {
                if let Some(e) = r.error(target) {
                    abs.entry(r.subject_id.clone()).or_default().push(e.abs());
                    rel.entry(r.subject_id.clone()).or_default().push(e);
                    pooled.push(e);
                }
            }
            let (mae, sd) = two_step_median(&abs).map_or((f64::NAN, f64::NAN), |t| (t.value, t.sd));
            let mre = two_step_median(&rel).map_or(f64::NAN, |t| t.value);
            rows.push(SummaryRow {
                method,
                target,
                mae_ms: mae,
                mre_ms: mre,
                sd_ms: sd,
                iqr_lo_ms: quantile(&pooled, 0.25).unwrap_or(f64::NAN),
                iqr_hi_ms: quantile(&pooled, 0.75).unwrap_or(f64::NAN),
                failed_pct,
            });
        }
    }
    rows
}

/// Fraction of `abs_errors` at or below each threshold.
pub fn sensitivity_curve(abs_errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if thresholds.iter().any(|t| t.is_nan() || *t < 0.0)
        || thresholds.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::invalid("thresholds must be non-negative and sorted"));
    }
    let n = abs_errors.len();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let hit = abs_errors.iter().filter(|&&e| e <= t).count();
            (t, if n == 0 { 0.0 } else { hit as f64 / n as f64 })
        })
        .collect())
}

/// Integer thresholds from 0 up to `max(100, ceil(max error))` ms.
pub fn curve_thresholds(records: &[ErrorRecord]) -> Vec<f64> {
    let worst = records
        .iter()
        .filter_map(|r| r.st_err.map(f64::abs))
        .fold(0.0f64, f64::max);
    let top = worst.ceil().max(100.0) as usize;
    (0..=top).map(|t| t as f64).collect()
}

/// Shared thresholds and one true-positive-ratio curve per method.
pub type Curves = (Vec<f64>, BTreeMap<Method, Vec<f64>>);

/// Stance-time sensitivity curve of every method present, sharing
/// thresholds so that the last one covers every error.
pub fn sensitivity_curves(records: &[ErrorRecord]) -> Result<Curves> {
    let thresholds = curve_thresholds(records);
    let mut curves = BTreeMap::new();
    for method in Method::ALL {
        let errs: Vec<f64> = records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.st_err.map(f64::abs))
            .collect();
        if records.iter().any(|r| r.method == method) {
            let c = sensitivity_curve(&errs, &thresholds)?;
            curves.insert(method, c.into_iter().map(|(_, v)| v).collect());
        }
    }
    Ok((thresholds, curves))
}

/// Temporal parameters following one initial contact, ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedTimes {
    pub foot: Foot,
    pub ic_index: usize,
    /// IC to the next IC of the same foot.
    pub stride_ms: Option<f64>,
    /// IC to the next IC of the other foot.
    pub step_ms: Option<f64>,
    /// TO of this contact to the next IC of the same foot.
    pub swing_ms: Option<f64>,
}

/// Stride, step and swing times for every IC of a time-ordered event list.
pub fn derived_times(events: &[GaitEvent], sample_rate: u32) -> Result<Vec<DerivedTimes>> {
    if events.windows(2).any(|w| w[0].index > w[1].index) {
        return Err(Error::invalid("events must be ordered in time"));
    }
    let ms = |a: usize, b: usize| (b - a) as f64 * 1000.0 / f64::from(sample_rate);
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.kind != EventKind::IC {
            continue;
        }
        let later = &events[i + 1..];
        let next_same_ic = later
            .iter()
            .find(|x| x.kind == EventKind::IC && x.foot == e.foot)
            .map(|x| x.index);
        let next_other_ic = later
            .iter()
            .find(|x| x.kind == EventKind::IC && x.foot != e.foot)
            .map(|x| x.index);
        let own_to = later
            .iter()
            .find(|x| x.foot == e.foot)
            .filter(|x| x.kind == EventKind::TO)
            .map(|x| x.index);
        out.push(DerivedTimes {
            foot: e.foot,
            ic_index: e.index,
            stride_ms: next_same_ic.map(|n| ms(e.index, n)),
            step_ms: next_other_ic.map(|n| ms(e.index, n)),
            swing_ms: own_to.zip(next_same_ic).map(|(to, n)| ms(to, n)),
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_errors_csv(path: &Path, records: &[ErrorRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ERRORS_HEADER)?;
    for r in records {
        w.write_record([
            r.subject_id.clone(),
            r.speed.to_string(),
            r.method.to_string(),
            fmt_opt(r.ic_err),
            fmt_opt(r.to_err),
            fmt_opt(r.st_err),
            u8::from(r.failed).to_string(),
            u8::from(r.imputed).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read back a per-stride error table written by [`write_errors_csv`].
pub fn read_errors_csv(path: &Path) -> Result<Vec<ErrorRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != ERRORS_HEADER {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::format(path, format!("bad number `{s}`")))
        }
    };
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let flag = |i: usize| row[i] == *"1";
        let st_err = parse_opt(&row[5])?;
        out.push(ErrorRecord {
            subject_id: row[0].to_owned(),
            speed: row[1]
                .parse()
                .map_err(|_| Error::format(path, format!("bad speed `{}`", &row[1])))?,
            method: row[2].parse()?,
            ic_err: parse_opt(&row[3])?,
            to_err: parse_opt(&row[4])?,
            st_err,
            predicted_st_ms: None,
            gold_st_ms: f64::NAN,
            failed: flag(6),
            imputed: flag(7),
        });
    }
    Ok(out)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.target.as_str().to_owned(),
            format!("{:.4}", r.mae_ms),
            format!("{:.4}", r.mre_ms),
            format!("{:.4}", r.sd_ms),
            format!("{:.4}", r.iqr_lo_ms),
            format!("{:.4}", r.iqr_hi_ms),
            format!("{:.4}", r.failed_pct),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(
    path: &Path,
    thresholds: &[f64],
    curves: &BTreeMap<Method, Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold_ms", "tpr_mmethod", "tpr_perceptron", "tpr_rnn"])?;
    for (i, t) in thresholds.iter().enumerate() {
        let col = |m: Method| {
            curves
                .get(&m)
                .map(|c| format!("{:.6}", c[i]))
                .unwrap_or_default()
        };
        w.write_record([
            t.to_string(),
            col(Method::MMethod),
            col(Method::Perceptron),
            col(Method::Rnn),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
