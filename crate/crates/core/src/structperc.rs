//! Averaged structured perceptron over the four gait labels with masked
//! Viterbi decoding.
//!
//! The joint feature map decomposes per sample: a unary block that adds the
//! feature vector `x_t` to the row of label `y_t`, and a Markov block that
//! counts label transitions `(y_{t-1}, y_t)`.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureMatrix};
use crate::labels::{self, gait_grammar, EventPair, Label, LabelDecodeFailure, LabelSequence};

pub const MODEL_FORMAT: &str = "stridewise-perceptron/1";
/// Predicted stance outside this range counts as a failed prediction.
pub const VALID_STANCE_MS: (f64, f64) = (35.0, 500.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoValidPath;

impl fmt::Display for NoValidPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no label path satisfies the transition mask")
    }
}

/// Highest scoring label path under a transition mask.
///
/// `unary` is `l × K`, `transition[[from, to]]` is `K × K`. Among equally
/// scoring paths the one with the smallest label at the latest differing
/// position wins. Returns label indices.
pub fn viterbi_path(
    unary: ArrayView2<f64>,
    transition: ArrayView2<f64>,
    mask: ArrayView2<bool>,
) -> Result<Vec<usize>, NoValidPath> {
    let (l, k) = unary.dim();
    assert_eq!(transition.dim(), (k, k), "transition matrix must be K×K");
    assert_eq!(mask.dim(), (k, k), "mask must be K×K");
    if l == 0 {
        return Ok(Vec::new());
    }
    let mut delta: Vec<f64> = unary.row(0).to_vec();
    let mut back = vec![0usize; l * k];
    let mut next = vec![f64::NEG_INFINITY; k];
    for t in 1..l {
        for y in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for prev in 0..k {
                if !mask[[prev, y]] || delta[prev] == f64::NEG_INFINITY {
                    continue;
                }
                let s = delta[prev] + transition[[prev, y]];
                if s > best {
                    best = s;
                    arg = prev;
                }
            }
            next[y] = if best == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                best + unary[[t, y]]
            };
            back[t * k + y] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = None;
    for (y, &d) in delta.iter().enumerate() {
        if d != f64::NEG_INFINITY && last.is_none_or(|b: usize| d > delta[b]) {
            last = Some(y);
        }
    }
    let mut y = last.ok_or(NoValidPath)?;
    let mut path = vec![0; l];
    path[l - 1] = y;
    for t in (1..l).rev() {
        y = back[t * k + y];
        path[t - 1] = y;
    }
    Ok(path)
}

/// [`viterbi_path`] over the gait alphabet.
pub fn viterbi(
    unary: ArrayView2<f64>,
    transition: ArrayView2<f64>,
    mask: ArrayView2<bool>,
) -> Result<LabelSequence, NoValidPath> {
    let path = viterbi_path(unary, transition, mask)?;
    Ok(LabelSequence(
        path.into_iter()
            .map(|i| Label::from_index(i).expect("K = 4"))
            .collect(),
    ))
}

/// Score of a label path, accumulated in the same order as [`viterbi_path`].
pub fn path_score(unary: ArrayView2<f64>, transition: ArrayView2<f64>, path: &[usize]) -> f64 {
    let mut s = unary[[0, path[0]]];
    for t in 1..path.len() {
        s = s + transition[[path[t - 1], path[t]]] + unary[[t, path[t]]];
    }
    s
}

pub fn grammar_mask() -> Array2<bool> {
    let g = gait_grammar();
    Array2::from_shape_fn((Label::COUNT, Label::COUNT), |(i, j)| g[i][j])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictFailure {
    NoValidPath,
    Labels(LabelDecodeFailure),
    /// Decoded stance (ms, rounded) outside [35, 500] ms.
    ImplausibleStance(u32),
}

impl fmt::Display for PredictFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoValidPath => f.write_str("no valid label path"),
            Self::Labels(e) => write!(f, "{e}"),
            Self::ImplausibleStance(ms) => write!(f, "implausible stance of {ms} ms"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronModel {
    pub format: String,
    pub feature_names: Vec<String>,
    /// `K × D`, current (non-averaged) weights.
    pub unary_weights: Array2<f64>,
    /// `K × K`, indexed `[from, to]`.
    pub transition_weights: Array2<f64>,
    pub avg_unary_weights: Array2<f64>,
    pub avg_transition_weights: Array2<f64>,
    pub transition_mask: Array2<bool>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub sample_rate: u32,
    /// Feature settings the model was trained with.
    #[serde(default)]
    pub feature_config: Option<FeatureConfig>,
}

impl PerceptronModel {
    pub fn new(feature_names: Vec<String>, learning_rate: f64, sample_rate: u32) -> Self {
        let k = Label::COUNT;
        let d = feature_names.len();
        Self {
            format: MODEL_FORMAT.to_string(),
            feature_names,
            unary_weights: Array2::zeros((k, d)),
            transition_weights: Array2::zeros((k, k)),
            avg_unary_weights: Array2::zeros((k, d)),
            avg_transition_weights: Array2::zeros((k, k)),
            transition_mask: grammar_mask(),
            learning_rate,
            epochs: 0,
            seed: 0,
            sample_rate,
            feature_config: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn check_dim(&self, features: &FeatureMatrix) -> Result<()> {
        if features.cols() != self.dim() {
            return Err(Error::invalid(format!(
                "feature dimension {} does not match model dimension {}",
                features.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Decode with either the running or the averaged weights.
    fn decode_with(
        &self,
        features: ArrayView2<f64>,
        unary_w: &Array2<f64>,
        transition_w: &Array2<f64>,
    ) -> Result<LabelSequence, NoValidPath> {
        let unary = features.dot(&unary_w.t());
        viterbi(
            unary.view(),
            transition_w.view(),
            self.transition_mask.view(),
        )
    }

    /// Label sequence under the averaged weights.
    pub fn decode(&self, features: &FeatureMatrix) -> Result<Result<LabelSequence, NoValidPath>> {
        self.check_dim(features)?;
        Ok(self.decode_with(
            features.values.view(),
            &self.avg_unary_weights,
            &self.avg_transition_weights,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::format(
                path,
                format!("unsupported model format `{}`", model.format),
            ));
        }
        let (k, d) = (Label::COUNT, model.dim());
        if model.unary_weights.dim() != (k, d)
            || model.avg_unary_weights.dim() != (k, d)
            || model.transition_weights.dim() != (k, k)
            || model.avg_transition_weights.dim() != (k, k)
            || model.transition_mask.dim() != (k, k)
        {
            return Err(Error::format(path, "weight block shapes do not match"));
        }
        Ok(model)
    }
}

/// One training example: features plus gold labels.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub features: FeatureMatrix,
    pub gold: LabelSequence,
}

impl LabeledSequence {
    pub fn new(features: FeatureMatrix, gold_events: EventPair) -> Result<Self> {
        let gold = labels::events_to_labels(gold_events, features.rows())?;
        Ok(Self { features, gold })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            learning_rate: 0.1,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mistakes: usize,
}

/// Add `scale × Φ(x, path)` into the weight blocks.
fn add_features(
    unary_w: &mut Array2<f64>,
    transition_w: &mut Array2<f64>,
    x: ArrayView2<f64>,
    path: &[Label],
    scale: f64,
) {
    for (t, &y) in path.iter().enumerate() {
        let mut row = unary_w.row_mut(y.index());
        row.scaled_add(scale, &x.row(t));
        if t > 0 {
            transition_w[[path[t - 1].index(), y.index()]] += scale;
        }
    }
}

/// Train with per-example updates; the returned model carries the average of
/// the weights after every example visit.
pub fn perceptron_train(
    data: &[LabeledSequence],
    config: &PerceptronConfig,
    feature_names: Vec<String>,
    sample_rate: u32,
) -> Result<(PerceptronModel, Vec<EpochLog>)> {
    let mut model = PerceptronModel::new(feature_names, config.learning_rate, sample_rate);
    model.epochs = config.epochs;
    model.seed = config.seed;
    for ex in data {
        model.check_dim(&ex.features)?;
        if ex.gold.len() != ex.features.rows() {
            return Err(Error::invalid(
                "gold label length differs from feature rows",
            ));
        }
    }
    let mut sum_unary = Array2::<f64>::zeros(model.unary_weights.raw_dim());
    let mut sum_transition = Array2::<f64>::zeros(model.transition_weights.raw_dim());
    let mut visits = 0usize;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut mistakes = 0;
        for &i in &order {
            let ex = &data[i];
            let x = ex.features.values.view();
            let decoded = model.decode_with(x, &model.unary_weights, &model.transition_weights);
            let wrong = match &decoded {
                Ok(seq) => seq != &ex.gold,
                Err(NoValidPath) => true,
            };
            if wrong {
                mistakes += 1;
                let lr = model.learning_rate;
                add_features(
                    &mut model.unary_weights,
                    &mut model.transition_weights,
                    x,
                    &ex.gold.0,
                    lr,
                );
                if let Ok(seq) = &decoded {
                    add_features(
                        &mut model.unary_weights,
                        &mut model.transition_weights,
                        x,
                        &seq.0,
                        -lr,
                    );
                }
            }
            sum_unary += &model.unary_weights;
            sum_transition += &model.transition_weights;
            visits += 1;
        }
        log::info!("perceptron epoch {}: {mistakes} mistakes", epoch + 1);
        log.push(EpochLog {
            epoch: epoch + 1,
            mistakes,
        });
    }
    if visits > 0 {
        model.avg_unary_weights = sum_unary / visits as f64;
        model.avg_transition_weights = sum_transition / visits as f64;
    }
    Ok((model, log))
}

/// Event pair under the averaged weights, or why no valid pair came out.
pub fn perceptron_predict(
    model: &PerceptronModel,
    features: &FeatureMatrix,
) -> Result<Result<EventPair, PredictFailure>> {
    let decoded = match model.decode(features)? {
        Ok(seq) => seq,
        Err(NoValidPath) => return Ok(Err(PredictFailure::NoValidPath)),
    };
    debug_assert!(decoded.follows_grammar());
    let events = match labels::labels_to_events(&decoded) {
        Ok(e) => e,
        Err(e) => return Ok(Err(PredictFailure::Labels(e))),
    };
    let stance = events.stance_ms(model.sample_rate);
    if !(VALID_STANCE_MS.0..=VALID_STANCE_MS.1).contains(&stance) {
        return Ok(Err(
            PredictFailure::ImplausibleStance(stance.round() as u32),
        ));
    }
    Ok(Ok(events))
}
