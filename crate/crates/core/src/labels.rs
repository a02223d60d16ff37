//! Per-sample gait labels and the (IC, TO) event pair they encode.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Swing = 0,
    IC = 1,
    Stance = 2,
    TO = 3,
}

impl Label {
    pub const COUNT: usize = 4;
    pub const ALL: [Label; 4] = [Label::Swing, Label::IC, Label::Stance, Label::TO];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Swing => "Swing",
            Label::IC => "IC",
            Label::Stance => "Stance",
            Label::TO => "TO",
        };
        f.write_str(s)
    }
}

/// Allowed label transitions: Swing→{Swing, IC}, IC→Stance,
/// Stance→{Stance, TO}, TO→Swing. Indexed `[from][to]`.
pub fn gait_grammar() -> [[bool; 4]; 4] {
    let mut m = [[false; 4]; 4];
    m[Label::Swing.index()][Label::Swing.index()] = true;
    m[Label::Swing.index()][Label::IC.index()] = true;
    m[Label::IC.index()][Label::Stance.index()] = true;
    m[Label::Stance.index()][Label::Stance.index()] = true;
    m[Label::Stance.index()][Label::TO.index()] = true;
    m[Label::TO.index()][Label::Swing.index()] = true;
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSequence(pub Vec<Label>);

impl LabelSequence {
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        indices
            .iter()
            .map(|&i| {
                Label::from_index(i).ok_or_else(|| Error::invalid(format!("label index {i}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LabelSequence)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    /// True when every consecutive pair is allowed by [`gait_grammar`].
    pub fn follows_grammar(&self) -> bool {
        let g = gait_grammar();
        self.0.windows(2).all(|w| g[w[0].index()][w[1].index()])
    }
}

/// Ipsilateral initial contact and toe off, as sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventPair {
    pub ic: usize,
    pub to: usize,
}

impl EventPair {
    pub fn new(ic: usize, to: usize) -> Result<Self> {
        if ic >= to {
            return Err(Error::invalid(format!("IC {ic} must precede TO {to}")));
        }
        Ok(Self { ic, to })
    }

    /// Stance time in seconds.
    pub fn stance_time(&self, sample_rate: u32) -> f64 {
        (self.to - self.ic) as f64 / f64::from(sample_rate)
    }

    pub fn stance_ms(&self, sample_rate: u32) -> f64 {
        self.stance_time(sample_rate) * 1000.0
    }
}

/// Why a label sequence does not encode a single stance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelDecodeFailure {
    MissingIc,
    MissingTo,
    MultipleIc,
    MultipleTo,
    OutOfOrder,
}

impl fmt::Display for LabelDecodeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::MissingIc => "no IC label",
            Self::MissingTo => "no TO label",
            Self::MultipleIc => "more than one IC label",
            Self::MultipleTo => "more than one TO label",
            Self::OutOfOrder => "TO precedes IC",
        };
        f.write_str(s)
    }
}

pub fn events_to_labels(events: EventPair, length: usize) -> Result<LabelSequence> {
    if events.to >= length || events.ic >= events.to {
        return Err(Error::invalid(format!(
            "events ({}, {}) do not fit a sequence of length {length}",
            events.ic, events.to
        )));
    }
    let labels = (0..length)
        .map(|t| {
            if t < events.ic || t > events.to {
                Label::Swing
            } else if t == events.ic {
                Label::IC
            } else if t == events.to {
                Label::TO
            } else {
                Label::Stance
            }
        })
        .collect();
    Ok(LabelSequence(labels))
}

pub fn labels_to_events(seq: &LabelSequence) -> Result<EventPair, LabelDecodeFailure> {
    let find = |label: Label, missing, multiple| {
        let mut it = seq.0.iter().enumerate().filter(|(_, &l)| l == label);
        match (it.next(), it.next()) {
            (None, _) => Err(missing),
            (Some(_), Some(_)) => Err(multiple),
            (Some((i, _)), None) => Ok(i),
        }
    };
    let ic = find(
        Label::IC,
        LabelDecodeFailure::MissingIc,
        LabelDecodeFailure::MultipleIc,
    )?;
    let to = find(
        Label::TO,
        LabelDecodeFailure::MissingTo,
        LabelDecodeFailure::MultipleTo,
    )?;
    if ic >= to {
        return Err(LabelDecodeFailure::OutOfOrder);
    }
    Ok(EventPair { ic, to })
}
