use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::decoder::{
    constrained_peak_decode, unconstrained_pair, Decoded, SampleWindows, CONTRA_IC_CHANNEL,
    CONTRA_TO_CHANNEL, IC_CHANNEL, TO_CHANNEL,
};
use crate::error::{Error, Result};
use crate::labels::EventPair;

/// Gold events of one step window. Contralateral events are needed only for
/// four-channel score matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEvents {
    pub pair: EventPair,
    pub contra_to: Option<usize>,
    pub contra_ic: Option<usize>,
}

impl GoldEvents {
    pub fn ipsilateral(pair: EventPair) -> Self {
        Self {
            pair,
            contra_to: None,
            contra_ic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HingeOutcome {
    pub loss: f64,
    /// Subgradient with respect to the score matrix.
    pub grad: Array2<f64>,
    /// Loss-augmented argmax.
    pub rival: Decoded,
    /// True when no peak combination satisfied the timing windows and the
    /// unconstrained pair search supplied the rival.
    pub fallback: bool,
}

/// `max(0, max_y [s(y) + Δ(y, gold)] - s(gold))` over decoder outputs `y`,
/// with Δ the summed absolute IC and TO offsets in samples.
pub fn structural_hinge_loss(
    scores: ArrayView2<f64>,
    gold: &GoldEvents,
    windows: &SampleWindows,
) -> Result<HingeOutcome> {
    let (l, channels) = scores.dim();
    if gold.pair.to >= l || gold.pair.ic >= gold.pair.to {
        return Err(Error::invalid(format!(
            "gold events {:?} do not fit a window of {l} samples",
            gold.pair
        )));
    }
    let contra = match channels {
        2 => None,
        4 => match (gold.contra_to, gold.contra_ic) {
            (Some(a), Some(b)) if a < l && b < l => Some((a, b)),
            _ => {
                return Err(Error::invalid(
                    "four-channel scores need in-window contralateral gold events",
                ))
            }
        },
        c => {
            return Err(Error::invalid(format!(
                "hinge loss expects 2 or 4 score channels, got {c}"
            )))
        }
    };

    let decoded = constrained_peak_decode(scores, windows, Some(gold.pair))?;
    let (rival, fallback) = match decoded {
        Some(d) => (d, false),
        None => match unconstrained_pair(scores, Some(gold.pair)) {
            Some(d) => (d, true),
            None => return Err(Error::invalid("window too short for any event pair")),
        },
    };

    let ipsi_gold = scores[[gold.pair.ic, IC_CHANNEL]] + scores[[gold.pair.to, TO_CHANNEL]];
    let gold_score = match (contra, fallback) {
        (Some((cto, cic)), false) => {
            ipsi_gold + (scores[[cto, CONTRA_TO_CHANNEL]] + scores[[cic, CONTRA_IC_CHANNEL]])
        }
        _ => ipsi_gold,
    };
    let margin = rival.objective - gold_score;
    let mut grad = Array2::zeros((l, channels));
    let loss = margin.max(0.0);
    if margin > 0.0 {
        grad[[rival.events.ic, IC_CHANNEL]] += 1.0;
        grad[[rival.events.to, TO_CHANNEL]] += 1.0;
        grad[[gold.pair.ic, IC_CHANNEL]] -= 1.0;
        grad[[gold.pair.to, TO_CHANNEL]] -= 1.0;
        if let (Some((cto, cic)), false) = (contra, fallback) {
            let (rto, ric) = (
                rival.contra_to.expect("bilateral"),
                rival.contra_ic.expect("bilateral"),
            );
            grad[[rto, CONTRA_TO_CHANNEL]] += 1.0;
            grad[[ric, CONTRA_IC_CHANNEL]] += 1.0;
            grad[[cto, CONTRA_TO_CHANNEL]] -= 1.0;
            grad[[cic, CONTRA_IC_CHANNEL]] -= 1.0;
        }
    }
    Ok(HingeOutcome {
        loss,
        grad,
        rival,
        fallback,
    })
}
