use super::{Params, RnnModel};

/// Adam moment estimates, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model: &RnnModel) -> Self {
        Self {
            m: model.params.zeros_like(),
            v: model.params.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `model` along `grads`.
    pub fn step(&mut self, model: &mut RnnModel, grads: &Params, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let params = model.params.slices_mut();
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        for (((p, m), v), (g, _)) in params.into_iter().zip(ms).zip(vs).zip(grads.slices()) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{CellKind, RnnConfig};

    fn model() -> RnnModel {
        let mut cfg = RnnConfig::new(CellKind::Lstm, 2, 3);
        cfg.hidden = 2;
        RnnModel::new(cfg).unwrap()
    }

    #[test]
    fn defaults() {
        let s = AdamState::new(&model());
        assert_eq!((s.beta1, s.beta2, s.eps, s.t), (0.9, 0.999, 1e-8, 0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = model();
        let before = m.clone();
        let mut grads = m.params.zeros_like();
        for (k, s) in grads.slices_mut().into_iter().enumerate() {
            for (i, g) in s.iter_mut().enumerate() {
                let mag = 1e-3 * (1 + (i * 7 + k) % 13) as f64;
                *g = if (i + k) % 2 == 0 { mag } else { -mag };
            }
        }
        let lr = 0.01;
        let mut st = AdamState::new(&m);
        st.step(&mut m, &grads, lr);
        assert_eq!(st.t, 1);
        for (((a, _), (b, _)), (g, _)) in m
            .params
            .slices()
            .iter()
            .zip(before.params.slices())
            .zip(grads.slices())
        {
            for ((pa, pb), gv) in a.iter().zip(b.iter()).zip(g.iter()) {
                let delta = pa - pb;
                assert!(delta.abs() >= 0.99 * lr && delta.abs() <= lr, "{delta}");
                assert_eq!(delta.signum(), -gv.signum());
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = model();
        let before = m.clone();
        let zeros = m.params.zeros_like();
        let mut st = AdamState::new(&m);
        for _ in 0..5 {
            st.step(&mut m, &zeros, 0.1);
        }
        assert_eq!(m.params, before.params);
        assert_eq!(st.t, 5);
    }
}
