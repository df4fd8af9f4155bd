//! Homoscedastic-uncertainty weighting of task losses.
//!
//! Each task `t` carries a learnable log-variance `s_t = log σ_t²`. The joint
//! objective is
//!
//! ```text
//! J = Σ_t exp(-s_t) · L_t + ½ · s_t
//! ```
//!
//! so a task's effective weight is `1/σ_t² = exp(-s_t)` and the `½ s_t` term
//! (`log σ_t`) keeps the variances from growing without bound. Normalised
//! weights `β_t = exp(-s_t) / Σ_j exp(-s_j)` are reported for tracing.

use crate::error::{Error, Result};

/// Per-task log-variances `s_t = log σ_t²`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyState {
    pub log_var: Vec<f64>,
}

impl UncertaintyState {
    /// All `s_t = 0`, i.e. every task starts with weight one.
    pub fn neutral(tasks: usize) -> Self {
        UncertaintyState {
            log_var: vec![0.0; tasks],
        }
    }

    pub fn sigma_sq(&self) -> Vec<f64> {
        self.log_var.iter().map(|s| s.exp()).collect()
    }
}

/// Value and partials of the joint objective.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLoss {
    pub value: f64,
    /// ∂J/∂L_t = exp(-s_t)
    pub d_task_loss: Vec<f64>,
    /// ∂J/∂s_t = -exp(-s_t)·L_t + ½
    pub d_log_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub per_task_loss: Vec<f64>,
    pub joint_loss: f64,
    pub log_var: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn joint_loss(task_losses: &[f64], state: &UncertaintyState) -> Result<JointLoss> {
    if task_losses.len() != state.log_var.len() {
        return Err(Error::Dimension {
            layer: "log_var".into(),
            expected: task_losses.len(),
            got: state.log_var.len(),
        });
    }
    let mut value = 0.0;
    let mut d_task_loss = Vec::with_capacity(task_losses.len());
    let mut d_log_var = Vec::with_capacity(task_losses.len());
    for (task, (&loss, &s)) in task_losses.iter().zip(&state.log_var).enumerate() {
        if !loss.is_finite() || !s.is_finite() || loss < 0.0 {
            return Err(Error::NonFinite { task });
        }
        let precision = (-s).exp();
        value += precision * loss + 0.5 * s;
        d_task_loss.push(precision);
        d_log_var.push(-precision * loss + 0.5);
    }
    Ok(JointLoss {
        value,
        d_task_loss,
        d_log_var,
    })
}

/// `β_t = σ_t⁻² / Σ_j σ_j⁻²`, evaluated as a softmax over `-s`.
pub fn beta_weights(state: &UncertaintyState) -> Vec<f64> {
    let max = state
        .log_var
        .iter()
        .fold(f64::NEG_INFINITY, |m, &s| m.max(-s));
    let w: Vec<f64> = state.log_var.iter().map(|&s| (-s - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Closed-form minimiser `s* = ln(2L)` of `exp(-s)·L + ½ s`.
pub fn optimal_log_var(loss: f64) -> Result<f64> {
    if !loss.is_finite() || loss <= 0.0 {
        return Err(Error::Config(format!(
            "stationary log-variance needs a positive finite loss, got {loss}"
        )));
    }
    Ok((2.0 * loss).ln())
}

pub fn report(task_losses: &[f64], state: &UncertaintyState) -> Result<LossReport> {
    let joint = joint_loss(task_losses, state)?;
    Ok(LossReport {
        per_task_loss: task_losses.to_vec(),
        joint_loss: joint.value,
        log_var: state.log_var.clone(),
        sigma_sq: state.sigma_sq(),
        beta: beta_weights(state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(s: &[f64]) -> UncertaintyState {
        UncertaintyState {
            log_var: s.to_vec(),
        }
    }

    #[test]
    fn neutral_state_is_plain_sum() {
        let j = joint_loss(&[1.0, 3.0], &UncertaintyState::neutral(2)).unwrap();
        assert_eq!(j.value, 4.0);
        assert_eq!(j.d_task_loss, vec![1.0, 1.0]);
    }

    #[test]
    fn variance_four() {
        let s = 4f64.ln();
        let j = joint_loss(&[4.0], &state(&[s])).unwrap();
        let oracle = 1.0 + 0.5 * 4f64.ln();
        assert!((oracle - 1.693147).abs() < 1e-6);
        assert!((j.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_leaves_half_log_var() {
        let j = joint_loss(&[0.0], &state(&[-3.0])).unwrap();
        assert_eq!(j.value, -1.5);
        assert_eq!(j.d_log_var, vec![0.5]);
    }

    #[test]
    fn log_var_partial_at_zero() {
        let j = joint_loss(&[2.5, 0.7], &UncertaintyState::neutral(2)).unwrap();
        assert!((j.d_log_var[0] - (-2.5 + 0.5)).abs() < 1e-15);
        assert!((j.d_log_var[1] - (-0.7 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input_with_task_index() {
        assert!(matches!(
            joint_loss(&[1.0, f64::NAN], &UncertaintyState::neutral(2)),
            Err(Error::NonFinite { task: 1 })
        ));
        assert!(matches!(
            joint_loss(&[1.0], &state(&[f64::INFINITY])),
            Err(Error::NonFinite { task: 0 })
        ));
        assert!(joint_loss(&[1.0], &UncertaintyState::neutral(2)).is_err());
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_weights(&state(&[0.0, 0.0])), vec![0.5, 0.5]);
        let b = beta_weights(&state(&[0.0, 3f64.ln()]));
        assert!((b[0] - 0.75).abs() < 1e-12 && (b[1] - 0.25).abs() < 1e-12);
        assert_eq!(beta_weights(&state(&[1.7])), vec![1.0]);
    }

    #[test]
    fn stationary_points() {
        let e = std::f64::consts::E;
        assert!(optimal_log_var(0.5).unwrap().abs() < 1e-15);
        assert!((optimal_log_var(1.0 / (2.0 * e)).unwrap() + 1.0).abs() < 1e-12);
        assert!((optimal_log_var(e / 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(optimal_log_var(0.0).is_err());
        assert!(optimal_log_var(-1.0).is_err());
    }

    #[test]
    fn larger_loss_gets_smaller_weight() {
        let sa = optimal_log_var(2.0).unwrap();
        let sb = optimal_log_var(0.3).unwrap();
        assert!((-sa).exp() < (-sb).exp());
    }

    proptest! {
        #[test]
        fn log_var_partial_matches_central_difference(
            loss in 0.0f64..10.0,
            s in -3.0f64..3.0,
        ) {
            let h = 1e-5;
            let f = |s: f64| joint_loss(&[loss], &state(&[s])).unwrap().value;
            let numeric = (f(s + h) - f(s - h)) / (2.0 * h);
            let analytic = joint_loss(&[loss], &state(&[s])).unwrap().d_log_var[0];
            let err = (numeric - analytic).abs();
            prop_assert!(err <= 1e-6 * analytic.abs().max(1.0));
        }

        #[test]
        fn beta_on_simplex_and_shift_invariant(
            s in prop::collection::vec(-20.0f64..20.0, 1..9),
            shift in -50.0f64..50.0,
        ) {
            let b = beta_weights(&state(&s));
            let total: f64 = b.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(b.iter().all(|&v| v > 0.0 && v <= 1.0));
            let moved: Vec<f64> = s.iter().map(|v| v + shift).collect();
            let b2 = beta_weights(&state(&moved));
            for (x, y) in b.iter().zip(&b2) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
