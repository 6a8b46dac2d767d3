use serde::{Deserialize, Serialize};

use super::model::{KanParams, ParamGroup};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// `0.5 · lr₀ · (1 + cos(π · epoch / max_epochs))`.
pub fn cosine_lr(lr0: f64, epoch: usize, max_epochs: usize) -> f64 {
    let t = epoch.min(max_epochs) as f64 / max_epochs.max(1) as f64;
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Adam moments for every entry of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
}

impl OptimizerState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
        }
    }
}

/// One bias-corrected Adam update at `state.lr`. Parameters in `frozen`
/// groups, and their moments, are left untouched.
pub fn adam_step(
    params: &mut KanParams,
    state: &mut OptimizerState,
    grads: &[f64],
    frozen: &[ParamGroup],
) -> Result<()> {
    let n = params.values().len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "Adam shapes: params {n}, grads {}, moments {}/{}",
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let dims = params.dims();
    let values = params.values_mut();
    for group in ParamGroup::ALL {
        if frozen.contains(&group) {
            continue;
        }
        for i in dims.range(group) {
            let g = grads[i];
            state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
            state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = state.m[i] / c1;
            let v_hat = state.v[i] / c2;
            values[i] -= state.lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kan::model::KanDims;

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(1e-4, 0, 300), 1e-4);
        assert!(cosine_lr(1e-4, 300, 300).abs() < 1e-20);
        assert!((cosine_lr(1e-4, 150, 300) - 5e-5).abs() < 1e-18);
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let dims = KanDims { c_ms: 0, k_features: 0 };
        let mut p = KanParams::zeros(dims);
        let bias = dims.range(ParamGroup::Bias).start;
        p.values_mut()[bias] = 0.5;
        let mut grads = vec![0.0; dims.n_params()];
        grads[bias] = 1.0;
        let mut st = OptimizerState::new(dims.n_params(), 1e-3);
        adam_step(&mut p, &mut st, &grads, &[]).unwrap();
        // m̂ = v̂ = 1 after bias correction, so the step is lr / (1 + ε)
        let m_hat = (0.1f64) / (1.0 - 0.9);
        let v_hat = (0.001f64) / (1.0 - 0.999);
        let expect = 0.5 - 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.values()[bias] - expect).abs() < 1e-12);
        assert!((p.values()[bias] - (0.5 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-12);
        assert_eq!(p.values()[bias + 1], 0.0);
    }

    #[test]
    fn frozen_groups_are_bit_identical() {
        let dims = KanDims { c_ms: 4, k_features: 2 };
        let mut p = KanParams::identity_init(dims, 3).unwrap();
        let before = p.clone();
        let mut st = OptimizerState::new(dims.n_params(), 1e-2);
        let grads: Vec<f64> = (0..dims.n_params()).map(|i| (i as f64 * 0.37).sin()).collect();
        let frozen = [ParamGroup::Splines, ParamGroup::Bypass, ParamGroup::Bias];
        for _ in 0..10 {
            adam_step(&mut p, &mut st, &grads, &frozen).unwrap();
        }
        for g in frozen {
            assert_eq!(p.group(g), before.group(g));
        }
        assert_ne!(p.group(ParamGroup::MsEncoder), before.group(ParamGroup::MsEncoder));
        assert!(adam_step(&mut p, &mut st, &grads[1..], &[]).is_err());
    }
}
