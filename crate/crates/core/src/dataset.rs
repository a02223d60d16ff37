//! Recordings, force-plate ground truth, step windows and their persistence.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labels::EventPair;
use crate::signal::{self, FilterKind, TimeSeries};

/// Default force threshold for contact detection, in N.
pub const GRF_THRESHOLD_N: f64 = 20.0;
/// Contact runs shorter than this are treated as threshold chatter.
pub const MIN_CONTACT_MS: f64 = 50.0;
/// Window margin before IC and after TO.
pub const WINDOW_MARGIN_MS: f64 = 200.0;
/// Accepted gold stance range for a step.
pub const STANCE_RANGE_MS: (f64, f64) = (100.0, 500.0);
/// Low-pass applied to vertical GRF before thresholding.
pub const GRF_LOWPASS_HZ: f64 = 60.0;

pub const CSV_HEADER: [&str; 9] = ["t", "alx", "aly", "alz", "arx", "ary", "arz", "fzl", "fzr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub fn other(self) -> Foot {
        match self {
            Foot::Left => Foot::Right,
            Foot::Right => Foot::Left,
        }
    }
}

impl fmt::Display for Foot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Foot::Left => "left",
            Foot::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    IC,
    TO,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitEvent {
    pub kind: EventKind,
    pub foot: Foot,
    pub index: usize,
    /// Seconds from the start of the recording.
    pub time: f64,
}

impl GaitEvent {
    pub fn new(kind: EventKind, foot: Foot, index: usize, sample_rate: u32) -> Self {
        Self {
            kind,
            foot,
            index,
            time: index as f64 / f64::from(sample_rate),
        }
    }
}

/// Anterior-posterior (x), medio-lateral (y) and axial (z) acceleration in g.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Triaxial {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Triaxial {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn slice(&self, start: usize, end: usize) -> Triaxial {
        Triaxial {
            x: self.x[start..end].to_vec(),
            y: self.y[start..end].to_vec(),
            z: self.z[start..end].to_vec(),
        }
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.x, &self.y, &self.z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: String,
    /// Running speed in m/s.
    pub speed: f64,
    pub trial_id: String,
    pub sample_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub meta: RecordingMeta,
    pub acc_left: Triaxial,
    pub acc_right: Triaxial,
    /// Vertical ground reaction force, N.
    pub grf_left: Vec<f64>,
    pub grf_right: Vec<f64>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.grf_left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grf_left.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.meta.sample_rate
    }

    pub fn acc(&self, foot: Foot) -> &Triaxial {
        match foot {
            Foot::Left => &self.acc_left,
            Foot::Right => &self.acc_right,
        }
    }

    pub fn grf(&self, foot: Foot) -> &[f64] {
        match foot {
            Foot::Left => &self.grf_left,
            Foot::Right => &self.grf_right,
        }
    }

    fn channels(&self) -> [&[f64]; 8] {
        [
            &self.acc_left.x,
            &self.acc_left.y,
            &self.acc_left.z,
            &self.acc_right.x,
            &self.acc_right.y,
            &self.acc_right.z,
            &self.grf_left,
            &self.grf_right,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.meta.sample_rate == 0 {
            return Err(Error::invalid("recording sample rate must be positive"));
        }
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("recording is empty"));
        }
        for (i, ch) in self.channels().iter().enumerate() {
            if ch.len() != n {
                return Err(Error::invalid(format!(
                    "channel {} has {} samples, expected {n}",
                    CSV_HEADER[i + 1],
                    ch.len()
                )));
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "channel {} holds non-finite values",
                    CSV_HEADER[i + 1]
                )));
            }
        }
        if self
            .grf_left
            .iter()
            .chain(&self.grf_right)
            .any(|&v| v < 0.0)
        {
            return Err(Error::invalid("negative vertical GRF"));
        }
        Ok(())
    }
}

/// Contralateral event that falls inside a step window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowEvent {
    pub kind: EventKind,
    /// Window-relative sample index.
    pub index: usize,
}

/// One windowed example: 200 ms before ipsilateral IC to 200 ms after TO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub left: Triaxial,
    pub right: Triaxial,
    /// Foot making ground contact in this window.
    pub foot: Foot,
    pub gold_ic: usize,
    pub gold_to: usize,
    pub contra_events: Vec<WindowEvent>,
    pub subject_id: String,
    pub speed: f64,
    pub trial_id: String,
    pub sample_rate: u32,
    /// Index of the first window sample in the source recording.
    pub onset: usize,
    pub mirrored: bool,
}

impl Step {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn gold(&self) -> EventPair {
        EventPair {
            ic: self.gold_ic,
            to: self.gold_to,
        }
    }

    pub fn acc(&self, foot: Foot) -> &Triaxial {
        match foot {
            Foot::Left => &self.left,
            Foot::Right => &self.right,
        }
    }

    /// Contacting leg's acceleration.
    pub fn ipsilateral(&self) -> &Triaxial {
        self.acc(self.foot)
    }

    pub fn contra(&self, kind: EventKind) -> Option<usize> {
        self.contra_events
            .iter()
            .find(|e| e.kind == kind)
            .map(|e| e.index)
    }

    /// Contralateral toe off preceding the IC.
    pub fn contra_to_before_ic(&self) -> Option<usize> {
        self.contra_events
            .iter()
            .filter(|e| e.kind == EventKind::TO && e.index < self.gold_ic)
            .map(|e| e.index)
            .max()
    }

    /// Contralateral initial contact following the TO.
    pub fn contra_ic_after_to(&self) -> Option<usize> {
        self.contra_events
            .iter()
            .filter(|e| e.kind == EventKind::IC && e.index > self.gold_to)
            .map(|e| e.index)
            .min()
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * f64::from(sample_rate) / 1000.0).round() as usize
}

/// IC at the first and TO at the last sample of every run with
/// `vgrf >= threshold` lasting at least 50 ms. Runs touching either end of
/// the series are dropped because one of their events lies outside it.
pub fn detect_grf_events(vgrf: &TimeSeries, threshold: f64, foot: Foot) -> Vec<GaitEvent> {
    let fs = vgrf.sample_rate();
    let min_run = ms_to_samples(MIN_CONTACT_MS, fs);
    let x = vgrf.samples();
    let n = x.len();
    let mut events = Vec::new();
    let mut i = 0;
    while i < n {
        if x[i] < threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && x[i] >= threshold {
            i += 1;
        }
        let end = i - 1;
        if start == 0 || end == n - 1 || end - start + 1 < min_run {
            continue;
        }
        events.push(GaitEvent::new(EventKind::IC, foot, start, fs));
        events.push(GaitEvent::new(EventKind::TO, foot, end, fs));
    }
    events
}

/// Low-pass the GRF of one foot and threshold it.
pub fn ground_truth_events(grf: &[f64], sample_rate: u32, foot: Foot) -> Result<Vec<GaitEvent>> {
    let lp = signal::design_butterworth(FilterKind::Lowpass, &[GRF_LOWPASS_HZ], 2, sample_rate)?;
    let filtered = signal::filt_zero_phase(&TimeSeries::new(grf.to_vec(), sample_rate)?, &lp)?;
    Ok(detect_grf_events(&filtered, GRF_THRESHOLD_N, foot))
}

/// Ground-truth events of both feet, sorted by index.
pub fn recording_events(rec: &Recording) -> Result<Vec<GaitEvent>> {
    let fs = rec.sample_rate();
    let mut events = ground_truth_events(&rec.grf_left, fs, Foot::Left)?;
    events.extend(ground_truth_events(&rec.grf_right, fs, Foot::Right)?);
    events.sort_by_key(|e| (e.index, e.foot));
    Ok(events)
}

/// Cut one step per contact whose window fits inside the recording.
pub fn extract_steps(rec: &Recording) -> Result<Vec<Step>> {
    rec.validate()?;
    let fs = rec.sample_rate();
    let margin = ms_to_samples(WINDOW_MARGIN_MS, fs);
    let events = recording_events(rec)?;
    let mut steps = Vec::new();
    for foot in [Foot::Left, Foot::Right] {
        let own: Vec<&GaitEvent> = events.iter().filter(|e| e.foot == foot).collect();
        for pair in own.chunks_exact(2) {
            let (ic, to) = (pair[0].index, pair[1].index);
            debug_assert!(pair[0].kind == EventKind::IC && pair[1].kind == EventKind::TO);
            if ic < margin || to + margin > rec.len() {
                continue;
            }
            let stance_ms = (to - ic) as f64 * 1000.0 / f64::from(fs);
            if !(STANCE_RANGE_MS.0..=STANCE_RANGE_MS.1).contains(&stance_ms) {
                log::warn!(
                    "{}/{}: dropping {foot} contact at sample {ic}: stance {stance_ms:.1} ms outside [{}, {}] ms",
                    rec.meta.subject_id,
                    rec.meta.trial_id,
                    STANCE_RANGE_MS.0,
                    STANCE_RANGE_MS.1
                );
                continue;
            }
            let start = ic - margin;
            let end = to + margin;
            let contra_events = events
                .iter()
                .filter(|e| e.foot != foot && e.index >= start && e.index < end)
                .map(|e| WindowEvent {
                    kind: e.kind,
                    index: e.index - start,
                })
                .collect();
            steps.push(Step {
                left: rec.acc_left.slice(start, end),
                right: rec.acc_right.slice(start, end),
                foot,
                gold_ic: ic - start,
                gold_to: to - start,
                contra_events,
                subject_id: rec.meta.subject_id.clone(),
                speed: rec.meta.speed,
                trial_id: rec.meta.trial_id.clone(),
                sample_rate: fs,
                onset: start,
                mirrored: false,
            });
        }
    }
    steps.sort_by_key(|s| s.onset + s.gold_ic);
    Ok(steps)
}

/// Turn a left-foot step into a right-foot one: swap the legs and negate the
/// medio-lateral axis of both.
pub fn mirror(step: &Step) -> Result<Step> {
    if step.foot != Foot::Left {
        return Err(Error::invalid("only left-foot steps can be mirrored"));
    }
    let flip = |t: &Triaxial| Triaxial {
        x: t.x.clone(),
        y: t.y.iter().map(|v| -v).collect(),
        z: t.z.clone(),
    };
    Ok(Step {
        left: flip(&step.right),
        right: flip(&step.left),
        foot: Foot::Right,
        mirrored: true,
        ..step.clone()
    })
}

/// All steps of a recording, left-foot steps mirrored so every step starts
/// with a right-foot contact.
pub fn prepare_steps(rec: &Recording) -> Result<Vec<Step>> {
    extract_steps(rec)?
        .into_iter()
        .map(|s| match s.foot {
            Foot::Left => mirror(&s),
            Foot::Right => Ok(s),
        })
        .collect()
}

/// Second step (in time) of every trial holding at least three steps.
pub fn select_training_steps(steps: &[Step]) -> Vec<Step> {
    let mut trials: BTreeMap<(&str, &str), Vec<&Step>> = BTreeMap::new();
    for s in steps {
        trials
            .entry((s.subject_id.as_str(), s.trial_id.as_str()))
            .or_default()
            .push(s);
    }
    trials
        .into_values()
        .filter(|t| t.len() >= 3)
        .map(|mut t| {
            t.sort_by_key(|s| s.onset + s.gold_ic);
            t[1].clone()
        })
        .collect()
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta")
}

/// Write `<name>.csv` plus a `<name>.meta` key-value sidecar.
pub fn save_recording(rec: &Recording, csv_path: &Path) -> Result<()> {
    rec.validate()?;
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(CSV_HEADER)?;
    let fs = f64::from(rec.sample_rate());
    let channels = rec.channels();
    let mut row: Vec<String> = Vec::with_capacity(9);
    for i in 0..rec.len() {
        row.clear();
        row.push((i as f64 / fs).to_string());
        row.extend(channels.iter().map(|c| c[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let meta = format!(
        "subject_id={}\nspeed={}\ntrial_id={}\nsample_rate={}\n",
        rec.meta.subject_id, rec.meta.speed, rec.meta.trial_id, rec.meta.sample_rate
    );
    let side = sidecar_path(csv_path);
    fs::write(&side, meta).map_err(|e| Error::io(side, e))
}

/// Parse `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::format(path, format!("line {}: expected key=value", lineno + 1))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn load_meta(path: &Path) -> Result<RecordingMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let kv = parse_key_values(&text, path)?;
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| Error::format(path, format!("missing key `{k}`")))
    };
    let speed = get("speed")?
        .parse()
        .map_err(|_| Error::format(path, "speed is not a number"))?;
    let sample_rate = get("sample_rate")?
        .parse()
        .map_err(|_| Error::format(path, "sample_rate is not a positive integer"))?;
    Ok(RecordingMeta {
        subject_id: get("subject_id")?.clone(),
        speed,
        trial_id: get("trial_id")?.clone(),
        sample_rate,
    })
}

pub fn load_recording(csv_path: &Path) -> Result<Recording> {
    let meta = load_meta(&sidecar_path(csv_path))?;
    let mut r = csv::Reader::from_path(csv_path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::format(
            csv_path,
            format!("expected header {}", CSV_HEADER.join(",")),
        ));
    }
    let mut cols: [Vec<f64>; 8] = Default::default();
    for (lineno, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 9 {
            return Err(Error::format(
                csv_path,
                format!("row {}: expected 9 fields", lineno + 2),
            ));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec[c + 1].parse().map_err(|_| {
                Error::format(
                    csv_path,
                    format!("row {}: `{}` is not a number", lineno + 2, &rec[c + 1]),
                )
            })?;
            col.push(v);
        }
    }
    let [alx, aly, alz, arx, ary, arz, fzl, fzr] = cols;
    let rec = Recording {
        meta,
        acc_left: Triaxial {
            x: alx,
            y: aly,
            z: alz,
        },
        acc_right: Triaxial {
            x: arx,
            y: ary,
            z: arz,
        },
        grf_left: fzl,
        grf_right: fzr,
    };
    rec.validate()
        .map_err(|e| Error::format(csv_path, e.to_string()))?;
    Ok(rec)
}

/// Write recording paths relative to the manifest's directory, one per line.
pub fn write_manifest(manifest: &Path, recordings: &[PathBuf]) -> Result<()> {
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut text = String::new();
    for p in recordings {
        let rel = p.strip_prefix(base).unwrap_or(p);
        text.push_str(&rel.to_string_lossy());
        text.push('\n');
    }
    fs::write(manifest, text).map_err(|e| Error::io(manifest, e))
}

/// Recording paths listed in a manifest, resolved against its directory.
pub fn read_manifest(manifest: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

pub fn load_manifest(manifest: &Path) -> Result<Vec<Recording>> {
    read_manifest(manifest)?
        .iter()
        .map(|p| load_recording(p))
        .collect()
}
