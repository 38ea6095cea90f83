//! Bias-corrected Adam.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Moment estimates for every parameter, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[Tensor<T>]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// Applies one update to `params` in place and advances `state`.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::shape(
                "adam_step",
                format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
            ));
        }
    }

    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let correction1 = 1.0 - c.beta1.powi(t);
    let correction2 = 1.0 - c.beta2.powi(t);
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
    let step_size = T::lit(c.lr / correction1);
    let inv_sqrt_c2 = T::lit(1.0 / correction2.sqrt());
    let eps = T::lit(c.eps);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((w, &gi), (mi, vi)) in iter {
            *mi = b1 * *mi + one_b1 * gi;
            *vi = b2 * *vi + one_b2 * gi * gi;
            *w = *w - step_size * *mi / (vi.sqrt() * inv_sqrt_c2 + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(&[v.len()], v).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut params = vec![t(&[0.0, 0.0, 0.0])];
        let grads = vec![t(&[3.0, -0.5, 1e3])];
        let mut state = AdamState::new(AdamConfig::with_lr(1e-4), &params);
        adam_step(&mut params, &grads, &mut state).unwrap();
        for (w, g) in params[0].data().iter().zip(grads[0].data()) {
            assert!((w + 1e-4 * g.signum()).abs() < 1e-10, "{w}");
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![t(&[0.3, -0.7])];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        adam_step(&mut params, &[t(&[0.0, 0.0])], &mut state).unwrap();
        assert_eq!(params[0].data(), &[0.3, -0.7]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = vec![t(&[1.0])];
        let mut state = AdamState::new(AdamConfig::with_lr(0.1), &params);
        for _ in 0..200 {
            let w = params[0].data()[0];
            adam_step(&mut params, &[t(&[2.0 * w])], &mut state).unwrap();
        }
        assert!(params[0].data()[0].abs() < 0.05, "{}", params[0].data()[0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = vec![t(&[1.0, 2.0])];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        assert!(adam_step(&mut params, &[t(&[1.0])], &mut state).is_err());
        assert!(adam_step(&mut params, &[], &mut state).is_err());
    }
}
