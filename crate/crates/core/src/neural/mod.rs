//! Two-layer bidirectional LSTM that emits per-sample event scores, trained
//! end to end through the constrained peak decoder with the structural hinge
//! loss and AdaGrad.
//!
//! Everything here is implemented directly on `ndarray` matrices: forward
//! recurrences, backpropagation through time, dropout, the loss and the
//! optimiser.

mod adagrad;
mod loss;
mod lstm;
mod train;

pub use adagrad::{adagrad_step, AdaGradState};
pub use loss::{structural_hinge_loss, GoldEvents, HingeOutcome};
pub use lstm::{
    backward as bilstm_backward, forward as bilstm_forward, forward_with_masks,
    sample_dropout_masks, BiLayer, ForwardCache, LstmParams,
};
pub use train::{
    rnn_predict, rnn_train, EpochRecord, RnnConfig, RnnExample, RnnFailure, StopReason, TrainReport,
};

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::decoder::TimingConstraints;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub const MODEL_FORMAT: &str = "stridewise-bilstm/1";

/// Trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub layers: Vec<BiLayer>,
    /// `C × 2H`.
    pub out_w: Array2<f64>,
    /// `C`.
    pub out_b: Array1<f64>,
}

impl BiLstmParams {
    pub fn zeros(input_dim: usize, hidden: usize, layers: usize, channels: usize) -> Self {
        let layers = (0..layers)
            .map(|i| {
                let d_in = if i == 0 { input_dim } else { 2 * hidden };
                BiLayer {
                    forward: LstmParams::zeros(d_in, hidden),
                    backward: LstmParams::zeros(d_in, hidden),
                }
            })
            .collect();
        Self {
            layers,
            out_w: Array2::zeros((channels, 2 * hidden)),
            out_b: Array1::zeros(channels),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for mut t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Uniform in ±1/√fan_in, zero biases except forget gates at 1.
    pub fn random(
        input_dim: usize,
        hidden: usize,
        layers: usize,
        channels: usize,
        seed: u64,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden, layers, channels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |a: &mut Array2<f64>, fan_in: usize| {
            let r = 1.0 / (fan_in as f64).sqrt();
            let u = Uniform::new_inclusive(-r, r).expect("finite bounds");
            a.iter_mut().for_each(|v| *v = u.sample(&mut rng));
        };
        for layer in &mut p.layers {
            for dir in [&mut layer.forward, &mut layer.backward] {
                let d_in = dir.w_x.ncols();
                fill(&mut dir.w_x, d_in);
                fill(&mut dir.w_h, hidden);
                dir.b.fill(0.0);
                dir.b.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
            }
        }
        fill(&mut p.out_w, 2 * hidden);
        p
    }

    /// Tensor names in a fixed order matching [`Self::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, _) in self.layers.iter().enumerate() {
            for dir in ["fwd", "bwd"] {
                for t in ["w_x", "w_h", "b"] {
                    names.push(format!("layer{i}.{dir}.{t}"));
                }
            }
        }
        names.push("out_w".into());
        names.push("out_b".into());
        names
    }

    pub fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for dir in [&layer.forward, &layer.backward] {
                out.push(dir.w_x.view().into_dyn());
                out.push(dir.w_h.view().into_dyn());
                out.push(dir.b.view().into_dyn());
            }
        }
        out.push(self.out_w.view().into_dyn());
        out.push(self.out_b.view().into_dyn());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            for dir in [&mut layer.forward, &mut layer.backward] {
                out.push(dir.w_x.view_mut().into_dyn());
                out.push(dir.w_h.view_mut().into_dyn());
                out.push(dir.b.view_mut().into_dyn());
            }
        }
        out.push(self.out_w.view_mut().into_dyn());
        out.push(self.out_b.view_mut().into_dyn());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmModel {
    pub format: String,
    pub feature_names: Vec<String>,
    pub input_dim: usize,
    pub hidden: usize,
    pub channels: usize,
    /// Applied after each recurrent layer while training only.
    pub dropout: f64,
    pub params: BiLstmParams,
    pub sample_rate: u32,
    pub constraints: TimingConstraints,
    pub config: RnnConfig,
    /// Feature settings the model was trained with.
    #[serde(default)]
    pub feature_config: Option<FeatureConfig>,
    /// Incremented on every parameter update; forward caches remember it.
    #[serde(skip)]
    pub(crate) generation: u64,
}

impl BiLstmModel {
    pub fn new(feature_names: Vec<String>, config: &RnnConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        let input_dim = feature_names.len();
        if input_dim == 0 {
            return Err(Error::Config(
                "model needs at least one input feature".into(),
            ));
        }
        Ok(Self {
            format: MODEL_FORMAT.into(),
            params: BiLstmParams::random(
                input_dim,
                config.hidden,
                config.layers,
                config.channels,
                config.seed,
            ),
            feature_names,
            input_dim,
            hidden: config.hidden,
            channels: config.channels,
            dropout: config.dropout,
            sample_rate,
            constraints: config.constraints,
            config: config.clone(),
            feature_config: None,
            generation: 0,
        })
    }

    /// Scores without dropout and without keeping a cache.
    pub fn infer(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(lstm::forward_with_masks(self, features.view(), None)?.0)
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
        let expected = BiLstmParams::zeros(
            model.input_dim,
            model.hidden,
            model.params.layers.len(),
            model.channels,
        );
        let shapes_ok = expected
            .tensors()
            .iter()
            .zip(model.params.tensors())
            .all(|(a, b)| a.shape() == b.shape())
            && expected.tensors().len() == model.params.tensors().len();
        if !shapes_ok || model.feature_names.len() != model.input_dim {
            return Err(Error::format(
                path,
                "parameter shapes do not match the declared sizes",
            ));
        }
        Ok(model)
    }

    /// Apply one AdaGrad update and invalidate outstanding caches.
    pub fn apply_gradients(
        &mut self,
        state: &mut AdaGradState,
        grads: &BiLstmParams,
    ) -> Result<()> {
        let g = grads.tensors();
        adagrad_step(state, &mut self.params.tensors_mut(), &g)?;
        self.generation += 1;
        Ok(())
    }
}
