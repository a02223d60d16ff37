//! Constrained peak decoding of per-sample event scores.
//!
//! Score columns: 0 = IC, 1 = TO of the contacting foot; in the bilateral
//! layout also 2 = contralateral TO (before IC) and 3 = contralateral IC
//! (after TO). Candidates are local maxima of each column; the decoder
//! returns the admissible combination with the largest summed score.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrema::local_maxima;
use crate::labels::EventPair;

pub const IC_CHANNEL: usize = 0;
pub const TO_CHANNEL: usize = 1;
pub const CONTRA_TO_CHANNEL: usize = 2;
pub const CONTRA_IC_CHANNEL: usize = 3;

/// Event separation windows in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConstraints {
    pub same_foot_ic_to_min_ms: f64,
    pub same_foot_ic_to_max_ms: f64,
    pub opposing_min_ms: f64,
    pub opposing_max_ms: f64,
}

impl Default for TimingConstraints {
    fn default() -> Self {
        Self {
            same_foot_ic_to_min_ms: 160.0,
            same_foot_ic_to_max_ms: 350.0,
            opposing_min_ms: 35.0,
            opposing_max_ms: 200.0,
        }
    }
}

impl TimingConstraints {
    pub fn validate(&self) -> Result<()> {
        let ok = self.same_foot_ic_to_min_ms > 0.0
            && self.same_foot_ic_to_min_ms < self.same_foot_ic_to_max_ms
            && self.opposing_min_ms > 0.0
            && self.opposing_min_ms < self.opposing_max_ms;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("timing windows need 0 < min < max"))
        }
    }

    /// Inclusive sample windows at `sample_rate`.
    pub fn in_samples(&self, sample_rate: u32) -> SampleWindows {
        let fs = f64::from(sample_rate) / 1000.0;
        let lo = |ms: f64| (ms * fs - 1e-9).ceil().max(1.0) as usize;
        let hi = |ms: f64| (ms * fs + 1e-9).floor() as usize;
        SampleWindows {
            stance: (
                lo(self.same_foot_ic_to_min_ms),
                hi(self.same_foot_ic_to_max_ms),
            ),
            opposing: (lo(self.opposing_min_ms), hi(self.opposing_max_ms)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleWindows {
    /// Allowed `to - ic`.
    pub stance: (usize, usize),
    /// Allowed `ic - contra_to` and `contra_ic - to`.
    pub opposing: (usize, usize),
}

impl SampleWindows {
    pub fn stance_ok(&self, ic: usize, to: usize) -> bool {
        to > ic && (self.stance.0..=self.stance.1).contains(&(to - ic))
    }

    pub fn opposing_ok(&self, earlier: usize, later: usize) -> bool {
        later > earlier && (self.opposing.0..=self.opposing.1).contains(&(later - earlier))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub events: EventPair,
    pub contra_to: Option<usize>,
    pub contra_ic: Option<usize>,
    /// Summed channel scores plus the task loss when a gold anchor was given.
    pub objective: f64,
}

/// Task loss between two event pairs, in samples.
pub fn event_loss(a: EventPair, b: EventPair) -> f64 {
    (a.ic.abs_diff(b.ic) + a.to.abs_diff(b.to)) as f64
}

fn augment(anchor: Option<EventPair>, ic: usize, to: usize) -> f64 {
    anchor.map_or(0.0, |g| event_loss(g, EventPair { ic, to }))
}

/// Best admissible event combination, or `None` when no candidate survives
/// the timing constraints. With `loss_anchor` the objective adds the task
/// loss to the gold pair (loss-augmented inference).
pub fn constrained_peak_decode(
    scores: ArrayView2<f64>,
    windows: &SampleWindows,
    loss_anchor: Option<EventPair>,
) -> Result<Option<Decoded>> {
    match scores.ncols() {
        2 => Ok(decode_ipsilateral(scores, windows, loss_anchor)),
        4 => Ok(decode_bilateral(scores, windows, loss_anchor)),
        c => Err(Error::invalid(format!(
            "decoder expects 2 or 4 score channels, got {c}"
        ))),
    }
}

fn decode_ipsilateral(
    scores: ArrayView2<f64>,
    windows: &SampleWindows,
    anchor: Option<EventPair>,
) -> Option<Decoded> {
    let ic_col = scores.column(IC_CHANNEL).to_vec();
    let to_col = scores.column(TO_CHANNEL).to_vec();
    let ics = local_maxima(&ic_col);
    let tos = local_maxima(&to_col);
    let mut best: Option<Decoded> = None;
    for &ic in &ics {
        for &to in &tos {
            if !windows.stance_ok(ic, to) {
                continue;
            }
            let objective = (ic_col[ic] + to_col[to]) + augment(anchor, ic, to);
            if best.is_none_or(|b| objective > b.objective) {
                best = Some(Decoded {
                    events: EventPair { ic, to },
                    contra_to: None,
                    contra_ic: None,
                    objective,
                });
            }
        }
    }
    best
}

fn decode_bilateral(
    scores: ArrayView2<f64>,
    windows: &SampleWindows,
    anchor: Option<EventPair>,
) -> Option<Decoded> {
    let cols: Vec<Vec<f64>> = (0..4).map(|c| scores.column(c).to_vec()).collect();
    let peaks: Vec<Vec<usize>> = cols.iter().map(|c| local_maxima(c)).collect();

    // best contralateral partner for every candidate, smallest index on ties
    let best_partner = |own: usize, channel: usize, before: bool| -> Option<usize> {
        let mut best: Option<usize> = None;
        for &p in &peaks[channel] {
            let ok = if before {
                windows.opposing_ok(p, own)
            } else {
                windows.opposing_ok(own, p)
            };
            if ok && best.is_none_or(|b| cols[channel][p] > cols[channel][b]) {
                best = Some(p);
            }
        }
        best
    };
    let ic_partner: Vec<Option<usize>> = peaks[IC_CHANNEL]
        .iter()
        .map(|&ic| best_partner(ic, CONTRA_TO_CHANNEL, true))
        .collect();
    let to_partner: Vec<Option<usize>> = peaks[TO_CHANNEL]
        .iter()
        .map(|&to| best_partner(to, CONTRA_IC_CHANNEL, false))
        .collect();

    let mut best: Option<Decoded> = None;
    for (i, &ic) in peaks[IC_CHANNEL].iter().enumerate() {
        let Some(cto) = ic_partner[i] else { continue };
        for (j, &to) in peaks[TO_CHANNEL].iter().enumerate() {
            let Some(cic) = to_partner[j] else { continue };
            if !windows.stance_ok(ic, to) {
                continue;
            }
            let objective = ((cols[IC_CHANNEL][ic] + cols[TO_CHANNEL][to])
                + augment(anchor, ic, to))
                + (cols[CONTRA_TO_CHANNEL][cto] + cols[CONTRA_IC_CHANNEL][cic]);
            if best.is_none_or(|b| objective > b.objective) {
                best = Some(Decoded {
                    events: EventPair { ic, to },
                    contra_to: Some(cto),
                    contra_ic: Some(cic),
                    objective,
                });
            }
        }
    }
    best
}

/// Loss-augmented argmax over every `ic < to` sample pair, ignoring peak and
/// timing constraints. Used when the constrained search has no candidate.
pub fn unconstrained_pair(
    scores: ArrayView2<f64>,
    loss_anchor: Option<EventPair>,
) -> Option<Decoded> {
    let ic_col = scores.column(IC_CHANNEL);
    let to_col = scores.column(TO_CHANNEL);
    let l = scores.nrows();
    let mut best: Option<Decoded> = None;
    for ic in 0..l {
        for to in ic + 1..l {
            let objective = (ic_col[ic] + to_col[to]) + augment(loss_anchor, ic, to);
            if best.is_none_or(|b| objective > b.objective) {
                best = Some(Decoded {
                    events: EventPair { ic, to },
                    contra_to: None,
                    contra_ic: None,
                    objective,
                });
            }
        }
    }
    best
}
