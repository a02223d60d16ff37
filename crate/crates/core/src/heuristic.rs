//! M-method baseline on the unfiltered axial acceleration of the contacting leg.
//!
//! The axial peak is the largest interior maximum (offset invariant).
//! IC is the last local minimum before that peak. TO is the
//! deepest local minimum 20-200 ms after the second local maximum found
//! 100-300 ms after the peak, with maxima at least 100 ms apart and minima at
//! least 80 ms apart (closer candidates keep the more prominent one).

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::extrema::{enforce_spacing, local_maxima, local_minima};
use crate::labels::EventPair;
use crate::signal::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MMethodFailure {
    /// No interior maximum.
    NoPeak,
    /// No local minimum before the peak.
    NoPrePeakMinimum,
    /// Fewer than two spaced maxima 100-300 ms after the peak.
    NoValidMaximum,
    /// No local minimum 20-200 ms after the second maximum.
    NoValidMinimum,
}

impl fmt::Display for MMethodFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoPeak => "no-peak",
            Self::NoPrePeakMinimum => "no-pre-peak-minimum",
            Self::NoValidMaximum => "no-valid-maximum",
            Self::NoValidMinimum => "no-valid-minimum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MMethodResult {
    pub ic: Option<usize>,
    pub to: Option<usize>,
    pub failure_reason: Option<MMethodFailure>,
}

impl MMethodResult {
    fn failed(reason: MMethodFailure, ic: Option<usize>) -> Self {
        Self {
            ic,
            to: None,
            failure_reason: Some(reason),
        }
    }

    pub fn events(&self) -> Option<EventPair> {
        match (self.ic, self.to, self.failure_reason) {
            (Some(ic), Some(to), None) => Some(EventPair { ic, to }),
            _ => None,
        }
    }
}

/// Timing rules in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MMethodRules {
    pub max_after_peak_ms: (f64, f64),
    pub max_spacing_ms: f64,
    pub min_after_max_ms: (f64, f64),
    pub min_spacing_ms: f64,
}

impl Default for MMethodRules {
    fn default() -> Self {
        Self {
            max_after_peak_ms: (100.0, 300.0),
            max_spacing_ms: 100.0,
            min_after_max_ms: (20.0, 200.0),
            min_spacing_ms: 80.0,
        }
    }
}

pub fn m_method(axial_unfiltered: &TimeSeries) -> MMethodResult {
    m_method_with(
        axial_unfiltered.samples(),
        axial_unfiltered.sample_rate(),
        &MMethodRules::default(),
    )
}

pub fn m_method_with(x: &[f64], sample_rate: u32, rules: &MMethodRules) -> MMethodResult {
    let ms = |v: f64| (v * f64::from(sample_rate) / 1000.0).round() as usize;
    let maxima = local_maxima(x);
    let minima = local_minima(x);

    let peak = maxima
        .iter()
        .copied()
        .reduce(|best, i| if x[i] > x[best] { i } else { best });
    let Some(peak) = peak else {
        return MMethodResult::failed(MMethodFailure::NoPeak, None);
    };

    let Some(ic) = minima.iter().copied().rfind(|&i| i < peak) else {
        return MMethodResult::failed(MMethodFailure::NoPrePeakMinimum, None);
    };

    let (lo, hi) = rules.max_after_peak_ms;
    let window: Vec<usize> = maxima
        .iter()
        .copied()
        .filter(|&i| i >= peak + ms(lo) && i <= peak + ms(hi))
        .collect();
    let spaced = enforce_spacing(x, &window, ms(rules.max_spacing_ms), true);
    let Some(&second) = spaced.get(1) else {
        return MMethodResult::failed(MMethodFailure::NoValidMaximum, Some(ic));
    };

    let (lo, hi) = rules.min_after_max_ms;
    let window: Vec<usize> = minima
        .iter()
        .copied()
        .filter(|&i| i >= second + ms(lo) && i <= second + ms(hi))
        .collect();
    let spaced = enforce_spacing(x, &window, ms(rules.min_spacing_ms), false);
    let to = spaced
        .iter()
        .copied()
        .reduce(|best, i| if x[i] < x[best] { i } else { best });
    match to {
        Some(to) => MMethodResult {
            ic: Some(ic),
            to: Some(to),
            failure_reason: None,
        },
        None => MMethodResult::failed(MMethodFailure::NoValidMinimum, Some(ic)),
    }
}
