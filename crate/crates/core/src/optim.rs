//! SGD with momentum and decoupled-by-group weight decay.

use crate::error::{Error, Result};
use crate::net::{Gradients, ModelParams, SlotKind};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub velocity: ModelParams,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Decay on trunk weights.
    pub weight_decay_trunk: f64,
    /// Decay on head weights.
    pub weight_decay_head: f64,
}

impl OptimState {
    pub fn new(params: &ModelParams, learning_rate: f64, momentum: f64, weight_decay: f64) -> Self {
        OptimState {
            velocity: params.zeros_like(),
            learning_rate,
            momentum,
            weight_decay_trunk: weight_decay,
            weight_decay_head: weight_decay,
        }
    }

    fn decay_for(&self, kind: SlotKind) -> f64 {
        match kind {
            SlotKind::TrunkWeight => self.weight_decay_trunk,
            SlotKind::HeadWeight => self.weight_decay_head,
            SlotKind::Bias | SlotKind::LogVar => 0.0,
        }
    }
}

/// `v ← μ·v + g + λ·w`, `w ← w − η·v`. Biases and log-variances are not
/// decayed. On a non-finite result nothing is modified.
pub fn sgd_step(params: &mut ModelParams, grads: &Gradients, state: &mut OptimState) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.velocity) {
        return Err(Error::Dimension {
            layer: "optimizer shape tree".into(),
            expected: params.num_values(),
            got: grads.num_values(),
        });
    }
    let mut next_params = params.clone();
    let mut next_velocity = state.velocity.clone();
    let mut grads = grads.clone();
    let (lr, mu) = (state.learning_rate, state.momentum);
    let decays: Vec<f64> = next_params
        .slots_mut()
        .iter()
        .map(|s| state.decay_for(s.kind))
        .collect();

    for (((p, v), g), decay) in next_params
        .slots_mut()
        .into_iter()
        .zip(next_velocity.slots_mut())
        .zip(grads.slots_mut())
        .zip(decays)
    {
        for ((w, vel), &grad) in p
            .values
            .iter_mut()
            .zip(v.values.iter_mut())
            .zip(g.values.iter())
        {
            *vel = mu * *vel + grad + decay * *w;
            *w -= lr * *vel;
            if !w.is_finite() || !vel.is_finite() {
                return Err(Error::NonFiniteUpdate(p.name.clone()));
            }
        }
    }
    *params = next_params;
    state.velocity = next_velocity;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, NetConfig};
    use crate::task::TaskSpec;

    fn params() -> ModelParams {
        let cfg = NetConfig::new(3, vec![4], vec![TaskSpec::ordinal("age", 4)], 11);
        let mut p = init_params(&cfg);
        p.trunk[0].bias.fill(0.25);
        p.log_var[0] = 0.7;
        p
    }

    fn filled(p: &ModelParams, v: f64) -> Gradients {
        let mut g = p.zeros_like();
        for s in g.slots_mut() {
            s.values.fill(v);
        }
        g
    }

    #[test]
    fn zero_gradient_fixed_point() {
        let mut p = params();
        let before = p.clone();
        let mut st = OptimState::new(&p, 0.001, 0.9, 0.0);
        let zero = p.zeros_like();
        sgd_step(&mut p, &zero, &mut st).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn plain_gradient_descent_without_momentum() {
        let mut p = params();
        let before = p.clone();
        let g = filled(&p, 0.5);
        let mut st = OptimState::new(&p, 0.1, 0.0, 0.0);
        sgd_step(&mut p, &g, &mut st).unwrap();
        let mut b = before;
        for (after, orig) in p.slots_mut().into_iter().zip(b.slots_mut()) {
            for (x, y) in after.values.iter().zip(orig.values.iter()) {
                assert_eq!(*x, y - 0.1 * 0.5);
            }
        }
    }

    #[test]
    fn weight_decay_shrinks_weights_only() {
        let mut p = params();
        let before = p.clone();
        let mut st = OptimState::new(&p, 0.001, 0.0, 0.0005);
        let zero = p.zeros_like();
        sgd_step(&mut p, &zero, &mut st).unwrap();
        for (a, b) in p.trunk[0].weight.iter().zip(before.trunk[0].weight.iter()) {
            assert!((a - b * (1.0 - 5e-7)).abs() <= 1e-15 * b.abs());
        }
        for (a, b) in p.heads[0].weight.iter().zip(before.heads[0].weight.iter()) {
            assert!((a - b * (1.0 - 5e-7)).abs() <= 1e-15 * b.abs());
        }
        assert_eq!(p.trunk[0].bias, before.trunk[0].bias);
        assert_eq!(p.log_var, before.log_var);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = params();
        let start = p.log_var[0];
        let mut g = p.zeros_like();
        g.log_var[0] = 1.0;
        let mut st = OptimState::new(&p, 0.1, 0.9, 0.0);
        sgd_step(&mut p, &g, &mut st).unwrap();
        sgd_step(&mut p, &g, &mut st).unwrap();
        // v1 = 1, v2 = 1.9
        assert!((p.log_var[0] - (start - 0.1 - 0.19)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_update_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.heads[0].weight[[1, 1]] = f64::INFINITY;
        let mut st = OptimState::new(&p, 0.1, 0.9, 0.0);
        let vel = st.velocity.clone();
        assert!(matches!(
            sgd_step(&mut p, &g, &mut st),
            Err(Error::NonFiniteUpdate(name)) if name == "head.0.weight"
        ));
        assert_eq!(p, before);
        assert_eq!(st.velocity, vel);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = params();
        let other = init_params(&NetConfig::new(
            3,
            vec![5],
            vec![TaskSpec::ordinal("age", 4)],
            1,
        ));
        let mut st = OptimState::new(&p, 0.1, 0.9, 0.0);
        assert!(sgd_step(&mut p, &other, &mut st).is_err());
    }
}
