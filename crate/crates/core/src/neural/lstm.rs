use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BiLstmModel, BiLstmParams};
use crate::error::{Error, Result};

/// Gate blocks are stacked in the order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `4H × D_in`.
    pub w_x: Array2<f64>,
    /// `4H × H`.
    pub w_h: Array2<f64>,
    /// `4H`.
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input_dim)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLayer {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one direction, indexed by time (not processing order).
#[derive(Debug, Clone)]
struct DirCache {
    /// Activated gates `[i | f | g | o]`, `l × 4H`.
    gates: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
    reverse: bool,
}

fn time_index(step: usize, l: usize, reverse: bool) -> usize {
    if reverse {
        l - 1 - step
    } else {
        step
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn run_direction(p: &LstmParams, x: ArrayView2<f64>, reverse: bool) -> DirCache {
    let l = x.nrows();
    let h_dim = p.hidden();
    let mut pre = x.dot(&p.w_x.t());
    pre += &p.b;
    // `H × 4H` so the recurrent product is a sum of contiguous row updates
    let w_h_t = p.w_h.t().as_standard_layout().into_owned();
    let w_rows = w_h_t.as_slice().expect("standard layout");
    let mut gates = Array2::<f64>::zeros((l, 4 * h_dim));
    let mut c = Array2::<f64>::zeros((l, h_dim));
    let mut tanh_c = Array2::<f64>::zeros((l, h_dim));
    let mut h = Array2::<f64>::zeros((l, h_dim));
    let mut h_prev = vec![0.0; h_dim];
    let mut c_prev = vec![0.0; h_dim];
    let mut z = vec![0.0; 4 * h_dim];
    for step in 0..l {
        let t = time_index(step, l, reverse);
        z.iter_mut().zip(pre.row(t)).for_each(|(zi, &pi)| *zi = pi);
        for (k, &hk) in h_prev.iter().enumerate() {
            if hk != 0.0 {
                axpy(hk, &w_rows[k * 4 * h_dim..(k + 1) * 4 * h_dim], &mut z);
            }
        }
        let mut g_row = gates.row_mut(t);
        for k in 0..h_dim {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h_dim + k]);
            let g = z[2 * h_dim + k].tanh();
            let o = sigmoid(z[3 * h_dim + k]);
            let ct = f * c_prev[k] + i * g;
            let tc = ct.tanh();
            g_row[k] = i;
            g_row[h_dim + k] = f;
            g_row[2 * h_dim + k] = g;
            g_row[3 * h_dim + k] = o;
            c[[t, k]] = ct;
            tanh_c[[t, k]] = tc;
            h[[t, k]] = o * tc;
            h_prev[k] = o * tc;
            c_prev[k] = ct;
        }
    }
    DirCache {
        gates,
        c,
        tanh_c,
        h,
        reverse,
    }
}

/// BPTT through one direction. Returns parameter gradients and the gradient
/// with respect to the direction's input.
fn backprop_direction(
    p: &LstmParams,
    x: ArrayView2<f64>,
    cache: &DirCache,
    dh_out: ArrayView2<f64>,
) -> (LstmParams, Array2<f64>) {
    let l = x.nrows();
    let hd = p.hidden();
    let reverse = cache.reverse;
    let mut da = Array2::<f64>::zeros((l, 4 * hd));
    let mut h_prev_mat = Array2::<f64>::zeros((l, hd));
    let w_rows = p.w_h.as_standard_layout();
    let w_rows = w_rows.as_slice().expect("standard layout");
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let zero = Array1::<f64>::zeros(hd);
    for step in (0..l).rev() {
        let t = time_index(step, l, reverse);
        let prev = (step > 0).then(|| time_index(step - 1, l, reverse));
        let c_prev: ArrayView1<f64> = match prev {
            Some(tp) => cache.c.row(tp),
            None => zero.view(),
        };
        if let Some(tp) = prev {
            h_prev_mat.row_mut(t).assign(&cache.h.row(tp));
        }
        let gates = cache.gates.row(t);
        let mut da_row = da.row_mut(t);
        for k in 0..hd {
            let i = gates[k];
            let f = gates[hd + k];
            let g = gates[2 * hd + k];
            let o = gates[3 * hd + k];
            let tc = cache.tanh_c[[t, k]];
            let dh = dh_out[[t, k]] + dh_next[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev[k];
            dc_next[k] = dc * f;
            da_row[k] = d_i * i * (1.0 - i);
            da_row[hd + k] = d_f * f * (1.0 - f);
            da_row[2 * hd + k] = d_g * (1.0 - g * g);
            da_row[3 * hd + k] = d_o * o * (1.0 - o);
        }
        dh_next.fill(0.0);
        for (j, &dj) in da.row(t).iter().enumerate() {
            if dj != 0.0 {
                axpy(dj, &w_rows[j * hd..(j + 1) * hd], &mut dh_next);
            }
        }
    }
    let grads = LstmParams {
        w_x: da.t().dot(&x),
        w_h: da.t().dot(&h_prev_mat),
        b: da.sum_axis(Axis(0)),
    };
    let dx = da.dot(&p.w_x);
    (grads, dx)
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    forward: DirCache,
    backward: DirCache,
    mask: Option<Array2<f64>>,
}

/// Activations kept from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    top: Array2<f64>,
    generation: u64,
    hidden: usize,
    channels: usize,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.top.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.top.nrows() == 0
    }

    /// Dropout masks used in the pass (`None` entries when dropout was off).
    pub fn masks(&self) -> Vec<Option<Array2<f64>>> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }
}

/// Inverted-dropout masks, one `l × 2H` matrix per recurrent layer, entries
/// 0 or 1/(1-p).
pub fn sample_dropout_masks<R: Rng + ?Sized>(
    model: &BiLstmModel,
    len: usize,
    rng: &mut R,
) -> Vec<Array2<f64>> {
    let p = model.dropout;
    let keep = 1.0 / (1.0 - p);
    (0..model.params.layers.len())
        .map(|_| {
            Array2::from_shape_simple_fn((len, 2 * model.hidden), || {
                if rng.random::<f64>() < p {
                    0.0
                } else {
                    keep
                }
            })
        })
        .collect()
}

/// Forward pass; dropout is applied when `training` is set, drawing masks
/// from `rng`.
pub fn forward<R: Rng + ?Sized>(
    model: &BiLstmModel,
    features: ArrayView2<f64>,
    training: bool,
    rng: &mut R,
) -> Result<(Array2<f64>, ForwardCache)> {
    if training && model.dropout > 0.0 {
        let masks = sample_dropout_masks(model, features.nrows(), rng);
        forward_with_masks(model, features, Some(&masks))
    } else {
        forward_with_masks(model, features, None)
    }
}

/// Forward pass with explicit dropout masks (`None` disables dropout).
pub fn forward_with_masks(
    model: &BiLstmModel,
    features: ArrayView2<f64>,
    masks: Option<&[Array2<f64>]>,
) -> Result<(Array2<f64>, ForwardCache)> {
    if features.ncols() != model.input_dim {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match model input {}",
            features.ncols(),
            model.input_dim
        )));
    }
    if features.nrows() == 0 {
        return Err(Error::invalid("empty feature matrix"));
    }
    let n_layers = model.params.layers.len();
    if let Some(m) = masks {
        let shape = (features.nrows(), 2 * model.hidden);
        if m.len() != n_layers || m.iter().any(|a| a.dim() != shape) {
            return Err(Error::invalid("dropout masks do not match the model"));
        }
    }
    let mut input = features.to_owned();
    let mut layers = Vec::with_capacity(n_layers);
    for (i, layer) in model.params.layers.iter().enumerate() {
        let (fwd, bwd) = rayon::join(
            || run_direction(&layer.forward, input.view(), false),
            || run_direction(&layer.backward, input.view(), true),
        );
        let mut out = concatenate(Axis(1), &[fwd.h.view(), bwd.h.view()]).expect("same rows");
        let mask = masks.map(|m| m[i].clone());
        if let Some(m) = &mask {
            out *= m;
        }
        layers.push(LayerCache {
            input,
            forward: fwd,
            backward: bwd,
            mask,
        });
        input = out;
    }
    let mut scores = input.dot(&model.params.out_w.t());
    scores += &model.params.out_b;
    let cache = ForwardCache {
        layers,
        top: input,
        generation: model.generation,
        hidden: model.hidden,
        channels: model.channels,
    };
    Ok((scores, cache))
}

/// Gradients of `sum(upstream ⊙ scores)` with respect to every parameter.
pub fn backward(
    model: &BiLstmModel,
    cache: &ForwardCache,
    upstream: ArrayView2<f64>,
) -> Result<BiLstmParams> {
    if cache.generation != model.generation
        || cache.hidden != model.hidden
        || cache.channels != model.channels
        || cache.layers.len() != model.params.layers.len()
    {
        return Err(Error::invalid(
            "forward cache is stale: the model changed after the forward pass",
        ));
    }
    if upstream.dim() != (cache.len(), model.channels) {
        return Err(Error::invalid(format!(
            "upstream gradient is {:?}, expected {:?}",
            upstream.dim(),
            (cache.len(), model.channels)
        )));
    }
    let hd = model.hidden;
    let mut grads = model.params.zeros_like();
    grads.out_w = upstream.t().dot(&cache.top);
    grads.out_b = upstream.sum_axis(Axis(0));
    let mut dy = upstream.dot(&model.params.out_w);
    for (i, layer) in model.params.layers.iter().enumerate().rev() {
        let lc = &cache.layers[i];
        if let Some(m) = &lc.mask {
            dy *= m;
        }
        let ((gf, dx_f), (gb, dx_b)) = rayon::join(
            || {
                backprop_direction(
                    &layer.forward,
                    lc.input.view(),
                    &lc.forward,
                    dy.slice(s![.., ..hd]),
                )
            },
            || {
                backprop_direction(
                    &layer.backward,
                    lc.input.view(),
                    &lc.backward,
                    dy.slice(s![.., hd..]),
                )
            },
        );
        grads.layers[i] = BiLayer {
            forward: gf,
            backward: gb,
        };
        dy = dx_f + dx_b;
    }
    Ok(grads)
}
