use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, Zip};

use crate::error::{Error, Result};

/// Per-parameter squared-gradient accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub accumulators: Vec<ArrayD<f64>>,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl AdaGradState {
    pub fn new(shapes: &[Vec<usize>], learning_rate: f64, epsilon: f64) -> Self {
        Self {
            accumulators: shapes.iter().map(|s| ArrayD::zeros(s.as_slice())).collect(),
            learning_rate,
            epsilon,
        }
    }

    pub fn for_tensors(tensors: &[ArrayViewD<'_, f64>], learning_rate: f64, epsilon: f64) -> Self {
        let shapes: Vec<Vec<usize>> = tensors.iter().map(|t| t.shape().to_vec()).collect();
        Self::new(&shapes, learning_rate, epsilon)
    }
}

/// `acc += g²; p -= lr · g / (√acc + ε)`, element-wise.
pub fn adagrad_step(
    state: &mut AdaGradState,
    params: &mut [ArrayViewMutD<'_, f64>],
    grads: &[ArrayViewD<'_, f64>],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.accumulators.len() {
        return Err(Error::invalid(format!(
            "adagrad: {} parameters, {} gradients, {} accumulators",
            params.len(),
            grads.len(),
            state.accumulators.len()
        )));
    }
    for (i, ((p, g), acc)) in params
        .iter()
        .zip(grads)
        .zip(&state.accumulators)
        .enumerate()
    {
        if p.shape() != g.shape() || p.shape() != acc.shape() {
            return Err(Error::invalid(format!(
                "adagrad: tensor {i} has shape {:?}, gradient {:?}, accumulator {:?}",
                p.shape(),
                g.shape(),
                acc.shape()
            )));
        }
    }
    let (lr, eps) = (state.learning_rate, state.epsilon);
    for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut state.accumulators) {
        Zip::from(p).and(g).and(acc).for_each(|p, &g, a| {
            *a += g * g;
            *p -= lr * g / (a.sqrt() + eps);
        });
    }
    Ok(())
}
