//! Synthetic bilateral running recordings with exact ground truth.
//!
//! Each foot alternates contacts and flights. The vertical GRF of a contact
//! is a raised-cosine active peak with a short impact transient; events are
//! defined by the same 20 N rule the dataset module applies, evaluated on the
//! noiseless force before noise is added. The tibial acceleration of every
//! contact is then built around those events:
//!
//! * axial (z): pre-contact dip at IC, sharp impact peak a few ms later with
//!   fast ringing, two post-peak maxima and a deep minimum near TO, and a
//!   slow swing bump;
//! * anterior-posterior (x) and medio-lateral (y): scaled, delayed copies of
//!   the axial wave plus small transients locked to IC and TO.
//!
//! The left medio-lateral axis has the opposite sign of the right one, so a
//! mirrored left step looks like a right step. Gaussian noise is added to
//! every channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, EventKind, Foot, GaitEvent, Recording, RecordingMeta, Triaxial};
use crate::error::{Error, Result};
use crate::DEFAULT_SAMPLE_RATE;

/// Allowed truth stance time, ms.
pub const STANCE_CLIP_MS: (f64, f64) = (170.0, 340.0);
/// Allowed truth flight time (gap between opposite-foot events), ms.
pub const FLIGHT_CLIP_MS: (f64, f64) = (40.0, 190.0);
/// Sampled durations are drawn this far inside the clip ranges so threshold
/// detection on the filtered force cannot push the truth outside them.
const CLIP_GUARD_MS: f64 = 5.0;
/// Approximate shortening of a contact by the 20 N threshold (both ends).
const THRESHOLD_SHRINK_MS: f64 = 10.0;
const LEAD_MS: f64 = 300.0;
const TAIL_MS: f64 = 400.0;
const IMPACT_WIDTH_MS: f64 = 40.0;
const GRAVITY_G: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub seed: u64,
    pub stance_ms: (f64, f64),
    pub flight_ms: (f64, f64),
    pub peak_amplitude_g: (f64, f64),
    pub impact_latency_ms: (f64, f64),
    pub oscillation_hz: (f64, f64),
    pub noise_g: f64,
    pub grf_noise_n: f64,
    pub body_weight_n: f64,
    pub sample_rate: u32,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        Self {
            subject_id: "S01".into(),
            seed: 1,
            stance_ms: (240.0, 20.0),
            flight_ms: (110.0, 15.0),
            peak_amplitude_g: (8.0, 2.0),
            impact_latency_ms: (15.0, 5.0),
            oscillation_hz: (12.0, 2.0),
            noise_g: 0.15,
            grf_noise_n: 1.0,
            body_weight_n: 700.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl SubjectProfile {
    /// Profile of the `index`-th synthetic subject: the defaults with
    /// subject-specific means drawn from `seed`.
    pub fn for_subject(index: usize, seed: u64) -> Self {
        let subject_seed = seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(index as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(subject_seed);
        let mut jitter = |mean: f64, sd: f64, lo: f64, hi: f64| {
            (mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(lo, hi)
        };
        let d = Self::default();
        Self {
            subject_id: format!("S{:02}", index + 1),
            seed: subject_seed,
            stance_ms: (jitter(240.0, 15.0, 200.0, 290.0), d.stance_ms.1),
            flight_ms: (jitter(110.0, 15.0, 70.0, 150.0), d.flight_ms.1),
            peak_amplitude_g: (jitter(8.0, 1.0, 5.0, 11.0), d.peak_amplitude_g.1),
            impact_latency_ms: (jitter(15.0, 3.0, 8.0, 24.0), d.impact_latency_ms.1),
            oscillation_hz: (jitter(12.0, 1.0, 9.0, 15.0), d.oscillation_hz.1),
            body_weight_n: jitter(700.0, 100.0, 450.0, 1000.0),
            ..d
        }
    }

    /// All randomness off: every stride uses the mean durations and shapes.
    pub fn noiseless(mut self) -> Self {
        self.noise_g = 0.0;
        self.grf_noise_n = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("profile {}: {m}", self.subject_id)));
        let pairs = [
            ("stance", self.stance_ms),
            ("flight", self.flight_ms),
            ("peak amplitude", self.peak_amplitude_g),
            ("impact latency", self.impact_latency_ms),
            ("oscillation frequency", self.oscillation_hz),
        ];
        for (name, (mean, sd)) in pairs {
            if !(mean > 0.0 && mean.is_finite() && sd >= 0.0 && sd.is_finite()) {
                return bad(format!("{name} needs a positive mean and non-negative std"));
            }
        }
        if !(STANCE_CLIP_MS.0..=STANCE_CLIP_MS.1).contains(&self.stance_ms.0) {
            return bad(format!(
                "stance mean {} ms outside [{}, {}] ms",
                self.stance_ms.0, STANCE_CLIP_MS.0, STANCE_CLIP_MS.1
            ));
        }
        if !(FLIGHT_CLIP_MS.0..=FLIGHT_CLIP_MS.1).contains(&self.flight_ms.0) {
            return bad(format!(
                "flight mean {} ms outside [{}, {}] ms",
                self.flight_ms.0, FLIGHT_CLIP_MS.0, FLIGHT_CLIP_MS.1
            ));
        }
        if !(self.noise_g >= 0.0 && self.grf_noise_n >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if !(self.body_weight_n > 0.0 && self.body_weight_n.is_finite()) {
            return bad("body weight must be positive".into());
        }
        if self.sample_rate < 200 {
            return bad("sample rate must be at least 200 Hz".into());
        }
        Ok(())
    }
}

/// A generated recording with the events the 20 N rule finds on its
/// noiseless force.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub recording: Recording,
    pub truth: Vec<GaitEvent>,
}

struct Contact {
    foot: Foot,
    start: usize,
    len: usize,
}

/// Per-contact draws for the acceleration shape.
struct Shape {
    amplitude: f64,
    latency: f64,
    osc_hz: f64,
    dip_jitter: f64,
    m2_jitter: f64,
    m1_frac: f64,
    min_jitter: f64,
    ic_cue_jitter: f64,
    to_cue_jitter: f64,
}

fn gauss(t: f64, mu: f64, sigma: f64) -> f64 {
    (-0.5 * ((t - mu) / sigma).powi(2)).exp()
}

fn raised_cosine(t: f64, start: f64, width: f64) -> f64 {
    if t < start || t > start + width {
        0.0
    } else {
        0.5 * (1.0 - (2.0 * std::f64::consts::PI * (t - start) / width).cos())
    }
}

fn trial_seed(seed: u64, speed: f64) -> u64 {
    seed ^ speed.to_bits().rotate_left(17)
}

/// Generate `n_strides` contacts per foot at `speed` (m/s). Deterministic in
/// `(profile, n_strides, speed)`.
pub fn generate_recording(
    profile: &SubjectProfile,
    n_strides: usize,
    speed: f64,
) -> Result<SyntheticRecording> {
    profile.validate()?;
    if n_strides == 0 {
        return Err(Error::Config("n_strides must be at least 1".into()));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::Config("speed must be positive".into()));
    }
    let fs = f64::from(profile.sample_rate);
    let per_ms = fs / 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(profile.seed, speed));
    let normal = |mean: f64, sd: f64| Normal::new(mean, sd).expect("validated std");

    // faster running shortens contact
    let speed_factor = (3.3 / speed).powf(0.3).clamp(0.8, 1.25);
    let stance_mean = (profile.stance_ms.0 * speed_factor).clamp(
        STANCE_CLIP_MS.0 + CLIP_GUARD_MS,
        STANCE_CLIP_MS.1 - CLIP_GUARD_MS,
    );
    let stance_dist = normal(stance_mean, profile.stance_ms.1);
    let flight_dist = normal(profile.flight_ms.0, profile.flight_ms.1);

    // contact timeline, alternating feet, starting with the left
    let mut contacts = Vec::with_capacity(2 * n_strides);
    let mut cursor = LEAD_MS;
    for k in 0..2 * n_strides {
        let stance = stance_dist.sample(&mut rng).clamp(
            STANCE_CLIP_MS.0 + CLIP_GUARD_MS,
            STANCE_CLIP_MS.1 - CLIP_GUARD_MS,
        );
        let flight = flight_dist.sample(&mut rng).clamp(
            FLIGHT_CLIP_MS.0 + CLIP_GUARD_MS,
            FLIGHT_CLIP_MS.1 - CLIP_GUARD_MS,
        );
        let len_ms = stance + THRESHOLD_SHRINK_MS;
        contacts.push(Contact {
            foot: if k % 2 == 0 { Foot::Left } else { Foot::Right },
            start: (cursor * per_ms).round() as usize,
            len: (len_ms * per_ms).round() as usize,
        });
        cursor += len_ms + flight - THRESHOLD_SHRINK_MS;
    }
    let n = (cursor * per_ms + TAIL_MS * per_ms).round() as usize;

    // noiseless force and its truth events
    let bw = profile.body_weight_n;
    let mut grf = [vec![0.0; n], vec![0.0; n]];
    for c in &contacts {
        let g = &mut grf[foot_slot(c.foot)];
        let impact_w = IMPACT_WIDTH_MS * per_ms;
        for (t, v) in g.iter_mut().enumerate().skip(c.start).take(c.len + 1) {
            let t = t as f64;
            *v += 2.5 * bw * raised_cosine(t, c.start as f64, c.len as f64)
                + 0.9 * bw * raised_cosine(t, c.start as f64, impact_w);
        }
    }
    let sr = profile.sample_rate;
    let mut truth = dataset::ground_truth_events(&grf[0], sr, Foot::Left)?;
    truth.extend(dataset::ground_truth_events(&grf[1], sr, Foot::Right)?);
    truth.sort_by_key(|e| (e.index, e.foot));
    if truth.len() != 2 * contacts.len() {
        return Err(Error::Config(format!(
            "profile {}: {} contacts produced {} threshold events",
            profile.subject_id,
            contacts.len(),
            truth.len()
        )));
    }

    // acceleration keyed to the truth events
    let mut acc = [
        Triaxial {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
        },
        Triaxial {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
        },
    ];
    for a in &mut acc {
        a.x.fill(0.2);
        a.y.fill(0.1);
        a.z.fill(GRAVITY_G);
    }
    for foot in [Foot::Left, Foot::Right] {
        let own: Vec<&GaitEvent> = truth.iter().filter(|e| e.foot == foot).collect();
        for pair in own.chunks_exact(2) {
            debug_assert_eq!((pair[0].kind, pair[1].kind), (EventKind::IC, EventKind::TO));
            let shape = draw_shape(profile, &mut rng);
            add_contact_wave(
                &mut acc[foot_slot(foot)],
                foot,
                pair[0].index as f64,
                pair[1].index as f64,
                &shape,
                per_ms,
            );
        }
    }

    if profile.noise_g > 0.0 {
        let noise = normal(0.0, profile.noise_g);
        for a in &mut acc {
            for ch in [&mut a.x, &mut a.y, &mut a.z] {
                ch.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
        }
    }
    if profile.grf_noise_n > 0.0 {
        let noise = normal(0.0, profile.grf_noise_n);
        for g in &mut grf {
            g.iter_mut()
                .for_each(|v| *v = (*v + noise.sample(&mut rng)).max(0.0));
        }
    }

    let [acc_left, acc_right] = acc;
    let [grf_left, grf_right] = grf;
    let recording = Recording {
        meta: RecordingMeta {
            subject_id: profile.subject_id.clone(),
            speed,
            trial_id: format!("v{:.1}", speed),
            sample_rate: sr,
        },
        acc_left,
        acc_right,
        grf_left,
        grf_right,
    };
    recording.validate()?;
    Ok(SyntheticRecording { recording, truth })
}

fn foot_slot(foot: Foot) -> usize {
    match foot {
        Foot::Left => 0,
        Foot::Right => 1,
    }
}

fn draw_shape(p: &SubjectProfile, rng: &mut ChaCha8Rng) -> Shape {
    let mut n = |mean: f64, sd: f64| mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let amplitude = n(p.peak_amplitude_g.0, p.peak_amplitude_g.1).max(3.0);
    let latency = n(p.impact_latency_ms.0, p.impact_latency_ms.1).clamp(5.0, 30.0);
    let osc_hz = n(p.oscillation_hz.0, p.oscillation_hz.1).clamp(6.0, 25.0);
    let dip_jitter = n(0.0, 1.0).clamp(-3.0, 3.0);
    let m2_jitter = n(0.0, 10.0);
    let min_jitter = n(5.0, 6.0);
    let ic_cue_jitter = n(0.0, 1.5).clamp(-4.0, 4.0);
    let to_cue_jitter = n(0.0, 1.5).clamp(-4.0, 4.0);
    let m1_frac = rng.random::<f64>();
    Shape {
        amplitude,
        latency,
        osc_hz,
        dip_jitter,
        m2_jitter,
        m1_frac,
        min_jitter,
        ic_cue_jitter,
        to_cue_jitter,
    }
}

/// Add one contact's acceleration wave. Times are in samples; shape
/// constants are in ms and converted with `per_ms`.
fn add_contact_wave(a: &mut Triaxial, foot: Foot, ic: f64, to: f64, s: &Shape, per_ms: f64) {
    let ms = |v: f64| v * per_ms;
    let peak = ic + ms(s.latency);
    let m2 = (to + ms(s.m2_jitter - 30.0)).clamp(peak + ms(210.0), peak + ms(290.0));
    let m1 = peak + ms(105.0) + s.m1_frac * (m2 - ms(105.0) - (peak + ms(105.0)));
    let q = (to + ms(s.min_jitter)).clamp(m2 + ms(25.0), m2 + ms(190.0));
    let swing_mid = to + ms(220.0);
    let omega = 2.0 * std::f64::consts::PI * s.osc_hz / 1000.0;
    let ml_sign = match foot {
        Foot::Left => -1.0,
        Foot::Right => 1.0,
    };
    let lo = (ic - ms(120.0)).max(0.0) as usize;
    let hi = ((to + ms(400.0)) as usize).min(a.len());
    let axial = |t: f64| {
        let mut v = -1.2 * gauss(t, ic + ms(s.dip_jitter), ms(4.0))
            + s.amplitude * gauss(t, peak, ms(3.0))
            + 1.6 * gauss(t, m1, ms(18.0))
            + 1.6 * gauss(t, m2, ms(14.0))
            - 2.5 * gauss(t, q, ms(8.0))
            + 0.8 * gauss(t, swing_mid, ms(50.0));
        if t > peak + ms(6.0) {
            let dt = (t - peak) / per_ms;
            v += 0.2 * s.amplitude * (-dt / 12.0).exp() * (omega * dt).sin();
        }
        v
    };
    for t in lo..hi {
        let tf = t as f64;
        let z = axial(tf);
        let delayed = axial(tf - ms(6.0));
        let ic_cue = gauss(tf, ic + ms(s.ic_cue_jitter), ms(5.0));
        let to_cue = gauss(tf, to + ms(s.to_cue_jitter), ms(5.0));
        a.x[t] += 0.35 * delayed - 1.5 * ic_cue + 1.2 * to_cue;
        a.y[t] += ml_sign * (0.25 * delayed + 0.6 * ic_cue - 0.4 * to_cue);
        a.z[t] += z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SubjectProfile::default().validate().unwrap();
        for i in 0..20 {
            SubjectProfile::for_subject(i, 7).validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        let mut p = SubjectProfile::default();
        p.stance_ms.0 = 400.0;
        assert!(p.validate().is_err());
        let p = SubjectProfile {
            flight_ms: (-1.0, 2.0),
            ..SubjectProfile::default()
        };
        assert!(p.validate().is_err());
        assert!(generate_recording(&SubjectProfile::default(), 0, 3.0).is_err());
        assert!(generate_recording(&SubjectProfile::default(), 2, 0.0).is_err());
    }

    #[test]
    fn truth_has_two_events_per_contact() {
        let r = generate_recording(&SubjectProfile::default(), 5, 3.3).unwrap();
        assert_eq!(r.truth.len(), 20);
        assert_eq!(r.recording.len(), r.recording.acc_left.len());
    }
}
