use ndarray::{Array2, Zip};

use super::config::StepRule;
use crate::error::{check_shape, Result, SmoError};

/// Adam moment estimates for one parameter field.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: (usize, usize)) -> Self {
        AdamState {
            m: Array2::zeros(dim),
            v: Array2::zeros(dim),
            t: 0,
        }
    }
}

/// Optimizer state carried across steps of one parameter field.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub adam: AdamState,
}

impl StepState {
    pub fn new(dim: (usize, usize)) -> Self {
        StepState {
            adam: AdamState::new(dim),
        }
    }
}

/// Apply one update `params ← params − lr·direction(grad)` in place.
pub fn step(
    params: &mut Array2<f64>,
    grad: &Array2<f64>,
    lr: f64,
    rule: StepRule,
    state: &mut StepState,
) -> Result<()> {
    check_shape("step", params.dim(), grad.dim())?;
    if let Some((idx, v)) = grad.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(SmoError::Numeric(format!("non-finite gradient entry {v} at {idx:?}")));
    }
    match rule {
        StepRule::GradientDescent => params.scaled_add(-lr, grad),
        StepRule::Adam { beta1, beta2, eps } => {
            let s = &mut state.adam;
            check_shape("adam state", params.dim(), s.m.dim())?;
            s.t += 1;
            let c1 = 1.0 - beta1.powi(s.t as i32);
            let c2 = 1.0 - beta2.powi(s.t as i32);
            Zip::from(params)
                .and(grad)
                .and(&mut s.m)
                .and(&mut s.v)
                .for_each(|p, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
    Ok(())
}
