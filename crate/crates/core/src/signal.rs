//! Uniformly sampled series, Butterworth design, zero-phase filtering and the
//! per-channel calculus used by feature construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::extrema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("time series must hold at least one sample"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Bandpass,
}

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Transfer function evaluated at `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b[0] + self.b[1] * zi + self.b[2] * zi2) / (1.0 + self.a[0] * zi + self.a[1] * zi2)
    }

    /// Roots of `z^2 + a1 z + a2` (a first-order section has a root at 0).
    pub fn poles(&self) -> [Complex64; 2] {
        quadratic_roots(self.a[0], self.a[1])
    }
}

fn quadratic_roots(p: f64, q: f64) -> [Complex64; 2] {
    let disc = Complex64::new(p * p / 4.0 - q, 0.0).sqrt();
    let half = Complex64::new(-p / 2.0, 0.0);
    [half + disc, half - disc]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub kind: FilterKind,
    pub cutoffs: Vec<f64>,
    /// Number of poles of the digital filter.
    pub order: usize,
    pub sample_rate: u32,
}

impl BiquadCascade {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / f64::from(self.sample_rate);
        let z = Complex64::from_polar(1.0, w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.eval(z))
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0 - 1e-9)
    }

    /// Edge padding length used by [`filt_zero_phase`].
    pub fn pad_len(&self) -> usize {
        3 * (self.order + 1)
    }

    /// Single causal pass with steady-state initial conditions scaled by the
    /// first input sample.
    fn filter_pass(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut scale = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
            let mut z1 = ((b1 - a1 * gain) + (b2 - a2 * gain)) * scale;
            let mut z2 = (b2 - a2 * gain) * scale;
            for v in y.iter_mut() {
                let input = *v;
                let out = b0 * input + z1;
                z1 = b1 * input - a1 * out + z2;
                z2 = b2 * input - a2 * out;
                *v = out;
            }
            scale *= gain;
        }
        y
    }
}

/// Bilinear-transform Butterworth design with frequency prewarping.
pub fn design_butterworth(
    kind: FilterKind,
    cutoffs: &[f64],
    order: usize,
    sample_rate: u32,
) -> Result<BiquadCascade> {
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let fs = f64::from(sample_rate);
    let nyquist = fs / 2.0;
    let expected = match kind {
        FilterKind::Lowpass => 1,
        FilterKind::Bandpass => 2,
    };
    if cutoffs.len() != expected {
        return Err(Error::invalid(format!(
            "{kind:?} needs {expected} cutoff(s), got {}",
            cutoffs.len()
        )));
    }
    for &c in cutoffs {
        if !(c > 0.0 && c < nyquist) {
            return Err(Error::invalid(format!(
                "cutoff {c} Hz outside (0, {nyquist}) Hz"
            )));
        }
    }
    if kind == FilterKind::Bandpass && cutoffs[0] >= cutoffs[1] {
        return Err(Error::invalid(
            "band-pass cutoffs must be strictly increasing",
        ));
    }

    let fs2 = 2.0 * fs;
    let warp = |f: f64| fs2 * (PI * f / fs).tan();

    // analog prototype, unit cutoff
    let n = order as i64;
    let proto: Vec<Complex64> = (0..n)
        .map(|k| {
            let m = (-n + 1 + 2 * k) as f64;
            -Complex64::from_polar(1.0, PI * m / (2.0 * order as f64))
        })
        .collect();

    let (poles, zeros, gain) = match kind {
        FilterKind::Lowpass => {
            let wn = warp(cutoffs[0]);
            let poles: Vec<Complex64> = proto.iter().map(|p| p * wn).collect();
            (poles, Vec::new(), wn.powi(order as i32))
        }
        FilterKind::Bandpass => {
            let w1 = warp(cutoffs[0]);
            let w2 = warp(cutoffs[1]);
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let mut poles = Vec::with_capacity(2 * order);
            for p in &proto {
                let half = p * (bw / 2.0);
                let root = (half * half - w0sq).sqrt();
                poles.push(half + root);
                poles.push(half - root);
            }
            let zeros = vec![Complex64::new(0.0, 0.0); order];
            (poles, zeros, bw.powi(order as i32))
        }
    };

    let to_digital = |s: &Complex64| (fs2 + s) / (fs2 - s);
    let num: Complex64 = zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = poles.iter().map(|p| fs2 - p).product();
    let digital_gain = gain * (num / den).re;

    let dpoles: Vec<Complex64> = poles.iter().map(to_digital).collect();
    let mut dzeros: Vec<f64> = Vec::with_capacity(dpoles.len());
    match kind {
        FilterKind::Lowpass => dzeros.extend(std::iter::repeat_n(-1.0, dpoles.len())),
        FilterKind::Bandpass => {
            for _ in 0..order {
                dzeros.push(1.0);
                dzeros.push(-1.0);
            }
        }
    }

    let sections = group_sections(&dpoles, &dzeros, digital_gain);
    let cascade = BiquadCascade {
        sections,
        kind,
        cutoffs: cutoffs.to_vec(),
        order: dpoles.len(),
        sample_rate,
    };
    if !cascade.is_stable() {
        return Err(Error::invalid("designed filter is not stable"));
    }
    Ok(cascade)
}

fn group_sections(poles: &[Complex64], zeros: &[f64], gain: f64) -> Vec<Biquad> {
    const IMAG_TOL: f64 = 1e-12;
    let mut pole_pairs: Vec<[f64; 2]> = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for p in poles {
        if p.im > IMAG_TOL {
            pole_pairs.push([-2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IMAG_TOL {
            reals.push(p.re);
        }
    }
    for chunk in reals.chunks(2) {
        match chunk {
            [p1, p2] => pole_pairs.push([-(p1 + p2), p1 * p2]),
            [p] => pole_pairs.push([-p, 0.0]),
            _ => unreachable!(),
        }
    }
    let zero_pairs: Vec<[f64; 3]> = zeros
        .chunks(2)
        .map(|c| match c {
            [z1, z2] => [1.0, -(z1 + z2), z1 * z2],
            [z] => [1.0, -z, 0.0],
            _ => unreachable!(),
        })
        .collect();
    let mut sections: Vec<Biquad> = pole_pairs
        .into_iter()
        .zip(zero_pairs)
        .map(|(a, b)| Biquad { b, a })
        .collect();
    if let Some(first) = sections.first_mut() {
        for c in first.b.iter_mut() {
            *c *= gain;
        }
    }
    sections
}

/// Forward-backward filtering with odd reflection padding.
///
/// The output averages the forward-then-backward and backward-then-forward
/// passes, which makes it exactly equivariant under time reversal.
pub fn filt_zero_phase(series: &TimeSeries, filter: &BiquadCascade) -> Result<TimeSeries> {
    if series.sample_rate() != filter.sample_rate {
        return Err(Error::invalid(format!(
            "series sampled at {} Hz but filter designed for {} Hz",
            series.sample_rate(),
            filter.sample_rate
        )));
    }
    Ok(series.with_samples(zero_phase_slice(series.samples(), filter)?))
}

pub(crate) fn zero_phase_slice(x: &[f64], filter: &BiquadCascade) -> Result<Vec<f64>> {
    let pad = filter.pad_len();
    let n = x.len();
    if n <= pad {
        return Err(Error::invalid(format!(
            "series of {n} samples too short for zero-phase filtering (needs more than {pad})"
        )));
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let backward = |v: &[f64]| {
        let mut r: Vec<f64> = v.iter().rev().copied().collect();
        r = filter.filter_pass(&r);
        r.reverse();
        r
    };
    let fb = backward(&filter.filter_pass(&ext));
    let bf = filter.filter_pass(&backward(&ext));
    Ok(fb[pad..pad + n]
        .iter()
        .zip(&bf[pad..pad + n])
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

/// Central differences scaled by the sample rate, one-sided at the ends.
pub fn derivative(series: &TimeSeries) -> Result<TimeSeries> {
    Ok(series.with_samples(derivative_slice(series.samples(), series.sample_rate())?))
}

pub(crate) fn derivative_slice(x: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("derivative needs at least two samples"));
    }
    let fs = f64::from(sample_rate);
    let mut out = Vec::with_capacity(n);
    out.push((x[1] - x[0]) * fs);
    for i in 1..n - 1 {
        out.push((x[i + 1] - x[i - 1]) * fs / 2.0);
    }
    out.push((x[n - 1] - x[n - 2]) * fs);
    Ok(out)
}

fn check_same_shape(series: &[&TimeSeries]) -> Result<()> {
    let first = series[0];
    for s in &series[1..] {
        if s.len() != first.len() || s.sample_rate() != first.sample_rate() {
            return Err(Error::invalid(format!(
                "channel shape mismatch: {} samples @ {} Hz vs {} samples @ {} Hz",
                first.len(),
                first.sample_rate(),
                s.len(),
                s.sample_rate()
            )));
        }
    }
    Ok(())
}

/// Per-sample Euclidean norm of three channels.
pub fn resultant(x: &TimeSeries, y: &TimeSeries, z: &TimeSeries) -> Result<TimeSeries> {
    check_same_shape(&[x, y, z])?;
    Ok(x.with_samples(resultant_slice(x.samples(), y.samples(), z.samples())))
}

pub(crate) fn resultant_slice(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect()
}

/// Zero mean, unit population variance. Channels whose standard deviation is
/// below 1e-12 map to all zeros.
pub fn standardize(series: &TimeSeries) -> Result<TimeSeries> {
    if series.len() < 2 {
        return Err(Error::invalid("standardize needs at least two samples"));
    }
    Ok(series.with_samples(standardize_slice(series.samples())))
}

pub(crate) fn standardize_slice(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

/// Roll and pitch (radians) of the smoothed acceleration vector, with z as
/// the tibial long axis: `roll = atan2(y, z)`, `pitch = atan2(-x, sqrt(y² + z²))`.
pub fn roll_pitch(
    x: &TimeSeries,
    y: &TimeSeries,
    z: &TimeSeries,
    smoothing: &BiquadCascade,
) -> Result<(TimeSeries, TimeSeries)> {
    check_same_shape(&[x, y, z])?;
    let xs = filt_zero_phase(x, smoothing)?;
    let ys = filt_zero_phase(y, smoothing)?;
    let zs = filt_zero_phase(z, smoothing)?;
    let (roll, pitch) = attitude(xs.samples(), ys.samples(), zs.samples());
    Ok((x.with_samples(roll), x.with_samples(pitch)))
}

pub(crate) fn attitude(x: &[f64], y: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let roll = y.iter().zip(z).map(|(b, c)| b.atan2(*c)).collect();
    let pitch = x
        .iter()
        .zip(y.iter().zip(z))
        .map(|(a, (b, c))| (-a).atan2((b * b + c * c).sqrt()))
        .collect();
    (roll, pitch)
}

/// Centred moving average of a 0/1 indicator of local minima.
pub fn peak_min_label(series: &TimeSeries, window: usize) -> Result<TimeSeries> {
    Ok(series.with_samples(peak_min_label_slice(series.samples(), window)?))
}

pub(crate) fn peak_min_label_slice(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "peak-min window must be odd and at least 3, got {window}"
        )));
    }
    if window > x.len() {
        return Err(Error::invalid(format!(
            "peak-min window {window} exceeds series length {}",
            x.len()
        )));
    }
    let half = window / 2;
    let w = window as f64;
    let mut out = vec![0.0; x.len()];
    for m in extrema::local_minima(x) {
        let lo = m.saturating_sub(half);
        let hi = (m + half).min(x.len() - 1);
        for v in &mut out[lo..=hi] {
            *v += 1.0 / w;
        }
    }
    Ok(out)
}
