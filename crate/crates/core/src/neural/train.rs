use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::adagrad::AdaGradState;
use super::loss::{structural_hinge_loss, GoldEvents};
use super::lstm;
use super::BiLstmModel;
use crate::decoder::{constrained_peak_decode, TimingConstraints};
use crate::error::{Error, Result};
use crate::labels::EventPair;

/// Stance-time error charged to a validation step whose decode failed.
pub const VALIDATION_FAILURE_PENALTY_MS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub constraints: TimingConstraints,
    /// 2 (ipsilateral IC, TO) or 4 (adds contralateral TO, IC).
    pub channels: usize,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            hidden: 50,
            layers: 2,
            dropout: 0.2,
            learning_rate: 0.1,
            epsilon: 1e-8,
            epochs: 100,
            patience: 10,
            seed: 0x5eed,
            constraints: TimingConstraints::default(),
            channels: 2,
        }
    }
}

impl RnnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.hidden == 0 || self.layers == 0 {
            return fail("hidden size and layer count must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must be in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail("epsilon must be non-negative");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.channels != 2 && self.channels != 4 {
            return fail("channels must be 2 or 4");
        }
        self.constraints
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// One step window prepared for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnExample {
    pub features: Array2<f64>,
    pub gold: GoldEvents,
    pub sample_rate: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean hinge loss over the epoch's updates.
    pub train_loss: f64,
    pub validation_mae_ms: f64,
    pub validation_failures: usize,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    EpochLimit,
    EarlyStopping,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EpochLimit => "epoch-limit",
            Self::EarlyStopping => "early-stopping",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RnnFailure {
    /// No pair of score peaks satisfied the timing windows.
    NoAdmissiblePeaks,
}

impl fmt::Display for RnnFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoAdmissiblePeaks => f.write_str("no-admissible-peaks"),
        }
    }
}

/// Decode a step window. The outer error covers malformed input, the inner
/// one a decode failure.
pub fn rnn_predict(
    model: &BiLstmModel,
    features: &Array2<f64>,
) -> Result<std::result::Result<EventPair, RnnFailure>> {
    let scores = model.infer(features)?;
    let windows = model.constraints.in_samples(model.sample_rate);
    Ok(constrained_peak_decode(scores.view(), &windows, None)?
        .map(|d| d.events)
        .ok_or(RnnFailure::NoAdmissiblePeaks))
}

fn validation_error(model: &BiLstmModel, examples: &[RnnExample]) -> Result<(f64, usize)> {
    let errors: Vec<Option<f64>> = examples
        .par_iter()
        .map(|ex| {
            Ok(rnn_predict(model, &ex.features)?.ok().map(|p| {
                (p.stance_ms(ex.sample_rate) - ex.gold.pair.stance_ms(ex.sample_rate)).abs()
            }))
        })
        .collect::<Result<_>>()?;
    let failures = errors.iter().filter(|e| e.is_none()).count();
    let total: f64 = errors
        .iter()
        .map(|e| e.unwrap_or(VALIDATION_FAILURE_PENALTY_MS))
        .sum();
    Ok((total / examples.len() as f64, failures))
}

/// Stochastic training with per-example AdaGrad updates and early stopping
/// on validation stance-time error. Returns the best-validation snapshot.
pub fn rnn_train(
    train: &[RnnExample],
    validation: &[RnnExample],
    feature_names: Vec<String>,
    config: &RnnConfig,
    sample_rate: u32,
) -> Result<(BiLstmModel, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::Config(
            "validation set is empty; early stopping needs at least one step".into(),
        ));
    }
    if train
        .iter()
        .chain(validation)
        .any(|ex| ex.sample_rate != sample_rate)
    {
        return Err(Error::invalid("examples mix sample rates"));
    }
    let mut model = BiLstmModel::new(feature_names, config, sample_rate)?;
    let windows = config.constraints.in_samples(sample_rate);
    let mut state = AdaGradState::for_tensors(
        &model.params.tensors(),
        config.learning_rate,
        config.epsilon,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, BiLstmModel, usize)> = None;
    let mut records = Vec::new();
    let mut stale = 0usize;
    let mut stop_reason = StopReason::EpochLimit;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let ex = &train[i];
            let (scores, cache) = lstm::forward(&model, ex.features.view(), true, &mut rng)?;
            let out = structural_hinge_loss(scores.view(), &ex.gold, &windows)?;
            loss_sum += out.loss;
            if out.loss > 0.0 {
                let grads = lstm::backward(&model, &cache, out.grad.view())?;
                model.apply_gradients(&mut state, &grads)?;
            }
        }
        let train_loss = loss_sum / train.len() as f64;
        let (mae, failures) = validation_error(&model, validation)?;
        let improved = best.as_ref().is_none_or(|(b, _, _)| mae < *b);
        if improved {
            best = Some((mae, model.clone(), epoch));
            stale = 0;
        } else {
            stale += 1;
        }
        log::info!(
            "epoch {epoch}: train loss {train_loss:.4}, validation MAE {mae:.2} ms, {failures} failures{}",
            if improved { " *" } else { "" }
        );
        records.push(EpochRecord {
            epoch,
            train_loss,
            validation_mae_ms: mae,
            validation_failures: failures,
            improved,
        });
        if stale >= config.patience.max(1) {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }
    let (_, mut snapshot, best_epoch) = best.expect("at least one epoch ran");
    snapshot.generation = 0;
    Ok((
        snapshot,
        TrainReport {
            epochs: records,
            best_epoch,
            stop_reason,
        },
    ))
}
