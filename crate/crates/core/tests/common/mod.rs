//! Independent reference implementations used by the oracle tests and the
//! acceptance runner. They are written for clarity, not speed, and share no
//! code with the library beyond plain data types.

#![allow(dead_code, clippy::needless_range_loop)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stridewise::decoder::SampleWindows;
use stridewise::labels::EventPair;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- Viterbi

/// Enumerate all `K^l` label paths and keep the best admissible one. Ties
/// (practically impossible with continuous scores) keep the first path in
/// lexicographic order of the reversed sequence.
pub fn brute_force_viterbi(
    unary: ArrayView2<f64>,
    transition: ArrayView2<f64>,
    mask: ArrayView2<bool>,
) -> Option<Vec<usize>> {
    let (l, k) = unary.dim();
    let total = k.pow(l as u32);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut path = vec![0usize; l];
    for code in 0..total {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % k;
            c /= k;
        }
        if path.windows(2).any(|w| !mask[[w[0], w[1]]]) {
            continue;
        }
        let mut s = unary[[0, path[0]]];
        for t in 1..l {
            s = s + transition[[path[t - 1], path[t]]] + unary[[t, path[t]]];
        }
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, path.clone()));
        }
    }
    best.map(|(_, p)| p)
}

// ------------------------------------------------------------- extrema

/// Strict local maxima: both neighbours strictly smaller.
pub fn strict_maxima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
        .collect()
}

pub fn strict_minima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1])
        .collect()
}

// ------------------------------------------------------------- decoder

/// Exhaustive constrained pair search: every (IC peak, TO peak) pair inside
/// the stance window, scored as `s_ic + s_to (+ Δ)`.
pub fn exhaustive_pair(
    scores: ArrayView2<f64>,
    windows: &SampleWindows,
    anchor: Option<EventPair>,
) -> Option<(EventPair, f64)> {
    let ic_col: Vec<f64> = scores.column(0).to_vec();
    let to_col: Vec<f64> = scores.column(1).to_vec();
    let ics = strict_maxima(&ic_col);
    let tos = strict_maxima(&to_col);
    let mut best: Option<(EventPair, f64)> = None;
    for &ic in &ics {
        for &to in &tos {
            if to <= ic || to - ic < windows.stance.0 || to - ic > windows.stance.1 {
                continue;
            }
            let delta = anchor.map_or(0.0, |g| (g.ic.abs_diff(ic) + g.to.abs_diff(to)) as f64);
            let obj = (ic_col[ic] + to_col[to]) + delta;
            if best.is_none_or(|(_, b)| obj > b) {
                best = Some((EventPair { ic, to }, obj));
            }
        }
    }
    best
}

/// Hinge loss by enumeration: the best loss-augmented admissible pair (or,
/// when none exists, the best loss-augmented pair of any `ic < to`) minus
/// the gold score, floored at zero. Also returns the gap between the best
/// and second-best objective.
pub fn enumerated_hinge(
    scores: ArrayView2<f64>,
    windows: &SampleWindows,
    gold: EventPair,
) -> (f64, f64) {
    let l = scores.nrows();
    let ic_col: Vec<f64> = scores.column(0).to_vec();
    let to_col: Vec<f64> = scores.column(1).to_vec();
    let delta = |ic: usize, to: usize| (gold.ic.abs_diff(ic) + gold.to.abs_diff(to)) as f64;
    let ics = strict_maxima(&ic_col);
    let tos = strict_maxima(&to_col);
    let mut objectives: Vec<f64> = Vec::new();
    for &ic in &ics {
        for &to in &tos {
            if to > ic && (windows.stance.0..=windows.stance.1).contains(&(to - ic)) {
                objectives.push((ic_col[ic] + to_col[to]) + delta(ic, to));
            }
        }
    }
    if objectives.is_empty() {
        for ic in 0..l {
            for to in ic + 1..l {
                objectives.push((ic_col[ic] + to_col[to]) + delta(ic, to));
            }
        }
    }
    objectives.sort_by(|a, b| b.total_cmp(a));
    let best = objectives[0];
    let gap = objectives.get(1).map_or(f64::INFINITY, |s| best - s);
    let gold_score = ic_col[gold.ic] + to_col[gold.to];
    ((best - gold_score).max(0.0), gap)
}

pub fn random_scores(l: usize, channels: usize, r: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((l, channels), || r.random_range(-1.0..1.0))
}

// ------------------------------------------------------------- M-method

/// The M-method timing rules restated from scratch, in samples at 1 kHz:
/// the axial peak is the highest interior maximum; IC the closest minimum
/// before it; the second of the maxima 100-300 ms after the peak (kept at
/// least 100 ms apart, most prominent first) anchors a 20-200 ms window whose
/// deepest minimum (minima kept at least 80 ms apart) is TO.
pub fn m_method_oracle(x: &[f64]) -> Option<EventPair> {
    let maxima = strict_maxima(x);
    let minima = strict_minima(x);
    let mut peak = None;
    for &i in &maxima {
        if peak.is_none_or(|p: usize| x[i] > x[p]) {
            peak = Some(i);
        }
    }
    let peak = peak?;
    let ic = *minima.iter().rev().find(|&&i| i < peak)?;

    let spaced = |cands: Vec<usize>, gap: usize, higher: bool| -> Vec<usize> {
        let mut ranked = cands;
        ranked.sort_by(|&a, &b| {
            let o = x[a].partial_cmp(&x[b]).unwrap();
            (if higher { o.reverse() } else { o }).then(a.cmp(&b))
        });
        let mut kept: Vec<usize> = Vec::new();
        for c in ranked {
            if kept
                .iter()
                .all(|&k| (k as i64 - c as i64).unsigned_abs() as usize >= gap)
            {
                kept.push(c);
            }
        }
        kept.sort();
        kept
    };
    let after: Vec<usize> = maxima
        .iter()
        .copied()
        .filter(|&i| i >= peak + 100 && i <= peak + 300)
        .collect();
    let kept = spaced(after, 100, true);
    let second = *kept.get(1)?;
    let window: Vec<usize> = minima
        .iter()
        .copied()
        .filter(|&i| i >= second + 20 && i <= second + 200)
        .collect();
    let kept = spaced(window, 80, false);
    let mut to = None;
    for &i in &kept {
        if to.is_none_or(|t: usize| x[i] < x[t]) {
            to = Some(i);
        }
    }
    Some(EventPair { ic, to: to? })
}

// ---------------------------------------------------------------- files

/// FNV-1a over a file's bytes, for determinism checks.
pub fn checksum(path: &std::path::Path) -> u64 {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x100000001b3)
    })
}

// ------------------------------------------------------------ suites

/// Viterbi against brute force on `n` random instances with admissible
/// masks; returns the number of mismatches.
pub fn viterbi_suite(n: usize, seed: u64) -> usize {
    use stridewise::structperc::viterbi_path;
    let mut r = rng(seed);
    let (mut checked, mut mismatches) = (0, 0);
    while checked < n {
        let l = r.random_range(1..=8);
        let unary = Array2::from_shape_simple_fn((l, 4), || r.random_range(-2.0..2.0));
        let transition = Array2::from_shape_simple_fn((4, 4), || r.random_range(-1.0..1.0));
        let mask = Array2::from_shape_simple_fn((4, 4), || r.random_bool(0.5));
        let got = viterbi_path(unary.view(), transition.view(), mask.view()).ok();
        let Some(expected) = brute_force_viterbi(unary.view(), transition.view(), mask.view())
        else {
            mismatches += usize::from(got.is_some());
            continue;
        };
        mismatches += usize::from(got.as_ref() != Some(&expected));
        checked += 1;
    }
    mismatches
}

/// Constrained decoder against exhaustive pair search on `n` random
/// `400 × 2` score matrices (every tenth one peak-free). Returns
/// (mismatches, agreed failures).
pub fn decoder_suite(n: usize, seed: u64) -> (usize, usize) {
    use stridewise::decoder::{constrained_peak_decode, TimingConstraints};
    let mut r = rng(seed);
    let windows = TimingConstraints::default().in_samples(1000);
    let (mut mismatches, mut failures) = (0, 0);
    for i in 0..n {
        let scores = if i % 10 == 9 {
            Array2::from_shape_fn((400, 2), |(t, c)| {
                t as f64 * if c == 0 { 1.0 } else { -1.0 }
            })
        } else {
            random_scores(400, 2, &mut r)
        };
        let got = constrained_peak_decode(scores.view(), &windows, None).unwrap();
        match (got, exhaustive_pair(scores.view(), &windows, None)) {
            (Some(d), Some((pair, obj))) if d.events == pair && d.objective == obj => {}
            (None, None) => failures += 1,
            _ => mismatches += 1,
        }
    }
    (mismatches, failures)
}

/// Hinge loss against enumeration on `n` random instances with `l ≤ 20`.
/// Returns (mismatches, instances with positive loss).
pub fn hinge_suite(n: usize, seed: u64) -> (usize, usize) {
    use stridewise::neural::{structural_hinge_loss, GoldEvents};
    let mut r = rng(seed);
    let windows = SampleWindows {
        stance: (3, 10),
        opposing: (2, 6),
    };
    let (mut mismatches, mut positive) = (0, 0);
    for _ in 0..n {
        let l = r.random_range(4..=20);
        let scores = random_scores(l, 2, &mut r);
        let ic = r.random_range(0..l - 1);
        let to = r.random_range(ic + 1..l);
        let gold = EventPair { ic, to };
        let out =
            structural_hinge_loss(scores.view(), &GoldEvents::ipsilateral(gold), &windows).unwrap();
        let (expected, _) = enumerated_hinge(scores.view(), &windows, gold);
        mismatches += usize::from(out.loss != expected);
        positive += usize::from(expected > 0.0);
    }
    (mismatches, positive)
}

/// M-method against the rule oracle on the first unmirrored step of `n`
/// noiseless profiles. Returns (agreements, successes, total).
pub fn m_method_suite(n: usize, seed: u64) -> (usize, usize, usize) {
    use stridewise::dataset::prepare_steps;
    use stridewise::heuristic::m_method;
    use stridewise::signal::TimeSeries;
    use stridewise::synthgen::{generate_recording, SubjectProfile};
    let (mut agree, mut solved) = (0, 0);
    for i in 0..n {
        let profile = SubjectProfile::for_subject(i, seed).noiseless();
        let synth = generate_recording(&profile, 1, 3.3).unwrap();
        let steps = prepare_steps(&synth.recording).unwrap();
        let step = steps
            .iter()
            .find(|s| !s.mirrored)
            .expect("one step per foot");
        let axial = step.ipsilateral().z.clone();
        let got = m_method(&TimeSeries::new(axial.clone(), 1000).unwrap()).events();
        agree += usize::from(got == m_method_oracle(&axial));
        solved += usize::from(got.is_some());
    }
    (agree, solved, n)
}

// ------------------------------------------------------- gradient check

pub mod gradcheck {
    use super::rng;
    use ndarray::Array2;
    use rand::Rng;
    use stridewise::decoder::SampleWindows;
    use stridewise::labels::EventPair;
    use stridewise::neural::{
        bilstm_backward, forward_with_masks, structural_hinge_loss, BiLstmModel, BiLstmParams,
        GoldEvents, RnnConfig,
    };

    pub const H: usize = 3;
    pub const L: usize = 5;
    pub const D: usize = 4;
    const EPS: f64 = 1e-4;

    pub fn model(channels: usize, dropout: f64, seed: u64) -> BiLstmModel {
        let cfg = RnnConfig {
            hidden: H,
            dropout,
            channels,
            seed,
            ..RnnConfig::default()
        };
        let names = (0..D).map(|i| format!("f{i}")).collect();
        let mut m = BiLstmModel::new(names, &cfg, 1000).unwrap();
        // larger weights than the default init exercise gate saturation
        let mut r = rng(seed ^ 0xff);
        for mut t in m.params.tensors_mut() {
            t.mapv_inplace(|_| r.random_range(-0.8..0.8));
        }
        m
    }

    pub fn masks(m: &BiLstmModel, seed: u64) -> Vec<Array2<f64>> {
        let mut r = rng(seed);
        let keep = 1.0 / (1.0 - m.dropout);
        (0..m.params.layers.len())
            .map(|_| {
                Array2::from_shape_simple_fn((L, 2 * H), || {
                    if r.random_bool(0.25) {
                        0.0
                    } else {
                        keep
                    }
                })
            })
            .collect()
    }

    /// Compare every analytic gradient entry against five-point central
    /// differences of `loss(model)`, returning the worst relative error.
    pub fn worst_relative_error(
        m: &BiLstmModel,
        analytic: &BiLstmParams,
        loss: impl Fn(&BiLstmModel) -> f64,
    ) -> f64 {
        let mut worst: f64 = 0.0;
        let grads: Vec<Vec<f64>> = analytic
            .tensors()
            .iter()
            .map(|t| t.iter().copied().collect())
            .collect();
        for (ti, g) in grads.iter().enumerate() {
            for (k, &a) in g.iter().enumerate() {
                let eval = |delta: f64| {
                    let mut p = m.clone();
                    let mut tensors = p.params.tensors_mut();
                    *tensors[ti].iter_mut().nth(k).unwrap() += delta;
                    drop(tensors);
                    loss(&p)
                };
                let numeric = (8.0 * (eval(EPS) - eval(-EPS))
                    - (eval(2.0 * EPS) - eval(-2.0 * EPS)))
                    / (12.0 * EPS);
                let scale = a.abs().max(numeric.abs());
                let err = if scale < 1e-7 {
                    (a - numeric).abs() * 1e3
                } else {
                    (a - numeric).abs() / scale
                };
                worst = worst.max(err);
            }
        }
        worst
    }

    /// Worst error for `sum(upstream ⊙ scores)` with random upstream weights.
    pub fn linear_readout(channels: usize, dropout: f64, seed: u64) -> f64 {
        let m = model(channels, dropout, seed);
        let mut r = rng(seed + 100);
        let x = Array2::from_shape_simple_fn((L, D), || r.random_range(-1.5..1.5));
        let up = Array2::from_shape_simple_fn((L, channels), || r.random_range(-1.0..1.0));
        let mk = (dropout > 0.0).then(|| masks(&m, seed + 200));
        let (_, cache) = forward_with_masks(&m, x.view(), mk.as_deref()).unwrap();
        let grads = bilstm_backward(&m, &cache, up.view()).unwrap();
        worst_relative_error(&m, &grads, |p| {
            let (s, _) = forward_with_masks(p, x.view(), mk.as_deref()).unwrap();
            (&s * &up).sum()
        })
    }

    /// Worst error through the structural hinge loss over `count` tie-free
    /// instances, or `None` when too few tie-free instances were found.
    pub fn through_hinge(count: usize) -> Option<f64> {
        let windows = SampleWindows {
            stance: (1, 3),
            opposing: (1, 3),
        };
        let gold = GoldEvents::ipsilateral(EventPair { ic: 1, to: 3 });
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for seed in 0..200u64 {
            let m = model(2, 0.2, seed);
            let mut r = rng(seed + 1000);
            let x = Array2::from_shape_simple_fn((L, D), || r.random_range(-1.5..1.5));
            let mk = masks(&m, seed + 2000);
            let (scores, cache) = forward_with_masks(&m, x.view(), Some(&mk)).unwrap();
            let (expected, gap) = super::enumerated_hinge(scores.view(), &windows, gold.pair);
            // away from ties: the argmax and the sign of the margin are stable
            if expected < 1e-2 || gap < 1e-2 {
                continue;
            }
            let out = structural_hinge_loss(scores.view(), &gold, &windows).unwrap();
            let grads = bilstm_backward(&m, &cache, out.grad.view()).unwrap();
            worst = worst.max(worst_relative_error(&m, &grads, |p| {
                let (s, _) = forward_with_masks(p, x.view(), Some(&mk)).unwrap();
                structural_hinge_loss(s.view(), &gold, &windows)
                    .unwrap()
                    .loss
            }));
            checked += 1;
            if checked == count {
                return Some(worst);
            }
        }
        None
    }
}
