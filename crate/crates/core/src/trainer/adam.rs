use crate::error::{Error, Result};
use crate::model::Parameters;
use crate::tensor::Element;

use super::TrainingConfig;

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    /// Completed steps.
    pub t: u64,
}

impl<T: Element> AdamState<T> {
    pub fn new(params: &Parameters<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update:
/// `θ ← θ − lr · m̂ / (√v̂ + ε)` with `m̂ = m / (1 − β₁ᵗ)`, `v̂ = v / (1 − β₂ᵗ)`.
pub fn adam_step<T: Element>(
    params: &mut Parameters<T>,
    grads: &Parameters<T>,
    state: &mut AdamState<T>,
    config: &TrainingConfig,
    learning_rate: f64,
) -> Result<()> {
    let shapes = |p: &Parameters<T>| p.iter().map(|(_, t)| t.shape().to_vec()).collect::<Vec<_>>();
    let want = shapes(params);
    for other in [grads, &state.m, &state.v] {
        let got = shapes(other);
        if got != want {
            return Err(Error::InvalidShape(format!(
                "adam_step: parameter shapes {want:?} vs {got:?}"
            )));
        }
    }

    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let correction1 = 1.0 - b1.powi(state.t as i32);
    let correction2 = 1.0 - b2.powi(state.t as i32);
    let (b1t, b2t) = (T::from_f64(b1), T::from_f64(b2));
    let (one_b1, one_b2) = (T::from_f64(1.0 - b1), T::from_f64(1.0 - b2));
    let step = T::from_f64(learning_rate / correction1);
    let inv_c2 = T::from_f64(1.0 / correction2);
    let eps = T::from_f64(config.adam_epsilon);

    let grads = grads.iter().map(|(_, t)| t);
    let moments = state.m.tensors_mut().zip(state.v.tensors_mut());
    for ((theta, g), (m, v)) in params.tensors_mut().zip(grads).zip(moments) {
        let it = theta
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((th, &gv), (mv, vv)) in it {
            *mv = b1t * *mv + one_b1 * gv;
            *vv = b2t * *vv + one_b2 * gv * gv;
            *th -= step * *mv / ((*vv * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}
