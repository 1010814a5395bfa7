use serde::{Deserialize, Serialize};

use super::LdaModel;

/// Weight of H(o|c) against H(c|s) in the system entropy.
pub const DEFAULT_RHO: f64 = 0.9;

/// Smoothed point estimates read off a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbView {
    /// k0 x V, p(o | c).
    pub phi: Vec<Vec<f64>>,
    /// S x k0, p(c | s).
    pub theta: Vec<Vec<f64>>,
    /// p(c) from the token assignments.
    pub context_marginal: Vec<f64>,
    /// V x k0, p(c | o); all-zero rows for objects absent from the corpus.
    pub c_given_o: Vec<Vec<f64>>,
}

impl LdaModel {
    pub fn prob_view(&self) -> ProbView {
        let k0 = self.k0;
        let v = self.vocab.size();
        let (alpha, beta) = (self.priors.alpha, self.priors.beta);

        let phi: Vec<Vec<f64>> = (0..k0)
            .map(|c| {
                let denom = self.n_c[c] as f64 + v as f64 * beta;
                self.n_co[c]
                    .iter()
                    .map(|&n| (n as f64 + beta) / denom)
                    .collect()
            })
            .collect();

        let theta: Vec<Vec<f64>> = self
            .n_sc
            .iter()
            .zip(&self.tokens)
            .map(|(row, toks)| {
                let denom = toks.len() as f64 + k0 as f64 * alpha;
                row.iter().map(|&n| (n as f64 + alpha) / denom).collect()
            })
            .collect();

        let total: u64 = self.n_c.iter().sum();
        let context_marginal: Vec<f64> = if total == 0 {
            vec![1.0 / k0 as f64; k0]
        } else {
            self.n_c.iter().map(|&n| n as f64 / total as f64).collect()
        };

        let c_given_o = (0..v)
            .map(|o| {
                let used = self.n_co.iter().any(|row| row[o] > 0);
                if !used {
                    return vec![0.0; k0];
                }
                let joint: Vec<f64> = (0..k0).map(|c| phi[c][o] * context_marginal[c]).collect();
                let z: f64 = joint.iter().sum();
                joint.into_iter().map(|j| j / z).collect()
            })
            .collect();

        ProbView {
            phi,
            theta,
            context_marginal,
            c_given_o,
        }
    }
}

fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// rho * H(o|c) + (1 - rho) * H(c|s), in nats.
pub fn system_entropy(model: &LdaModel, rho: f64) -> f64 {
    system_entropy_of(&model.prob_view(), rho)
}

pub(crate) fn system_entropy_of(view: &ProbView, rho: f64) -> f64 {
    let h_oc: f64 = view
        .phi
        .iter()
        .zip(&view.context_marginal)
        .map(|(row, pc)| pc * row.iter().copied().map(entropy_term).sum::<f64>())
        .sum();
    let h_cs = if view.theta.is_empty() {
        0.0
    } else {
        view.theta
            .iter()
            .map(|row| row.iter().copied().map(entropy_term).sum::<f64>())
            .sum::<f64>()
            / view.theta.len() as f64
    };
    rho * h_oc + (1.0 - rho) * h_cs
}

/// Largest possible system entropy for a model of this shape.
pub fn entropy_upper_bound(vocab_size: usize, k0: usize, rho: f64) -> f64 {
    rho * (vocab_size as f64).ln() + (1.0 - rho) * (k0 as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::{gibbs_fit, separable_corpus, Corpus, Priors, Scene, Vocabulary};

    fn hand_model(
        n_co: Vec<Vec<u64>>,
        scenes: Vec<(Vec<u32>, Vec<u32>)>,
        priors: Priors,
    ) -> LdaModel {
        let v = n_co[0].len();
        let k0 = n_co.len();
        let mut m = LdaModel::empty(Vocabulary::new(v).unwrap(), k0, priors, 0).unwrap();
        for (i, (toks, zs)) in scenes.into_iter().enumerate() {
            let mut row = vec![0; k0];
            for &z in &zs {
                row[z as usize] += 1;
            }
            m.scene_ids.push(i as u64);
            m.tokens.push(toks);
            m.assignments.push(zs);
            m.n_sc.push(row);
        }
        m.n_c = n_co.iter().map(|r| r.iter().sum()).collect();
        m.n_co = n_co;
        assert!(m.counts_consistent());
        m
    }

    #[test]
    fn unused_objects_get_zero_rows() {
        let corpus = Corpus::new(
            Vocabulary::new(6).unwrap(),
            vec![Scene::new(0, vec![0, 1, 1]), Scene::new(1, vec![2, 0])],
            None,
        )
        .unwrap();
        let view = gibbs_fit(&corpus, 2, 10, Priors::default(), 1)
            .unwrap()
            .prob_view();
        for o in 3..6 {
            assert_eq!(view.c_given_o[o], vec![0.0, 0.0]);
        }
        for o in 0..3 {
            assert!((view.c_given_o[o].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_context_bayes_is_certain() {
        let corpus = separable_corpus(2, 3, 6, 1);
        let view = gibbs_fit(&corpus, 1, 2, Priors::default(), 1)
            .unwrap()
            .prob_view();
        for row in &view.c_given_o {
            assert!(row == &vec![1.0] || row == &vec![0.0]);
        }
    }

    #[test]
    fn two_by_two_bayes_matches_hand_arithmetic() {
        // n_co = [[3,1],[1,3]]: scene 0 = {o0 x3 in c0, o1 in c0}, scene 1 = {o0 in c1, o1 x3 in c1}.
        let m = hand_model(
            vec![vec![3, 1], vec![1, 3]],
            vec![
                (vec![0, 0, 0, 1], vec![0, 0, 0, 0]),
                (vec![0, 1, 1, 1], vec![1, 1, 1, 1]),
            ],
            Priors {
                alpha: 0.9,
                beta: 0.01,
            },
        );
        let view = m.prob_view();
        // phi[0] = (3.01/4.02, 1.01/4.02), phi[1] = (1.01/4.02, 3.01/4.02); p(c) = (0.5, 0.5)
        // p(c0|o0) = 3.01 / (3.01 + 1.01) = 0.748756...
        let expected = [[3.01 / 4.02, 1.01 / 4.02], [1.01 / 4.02, 3.01 / 4.02]];
        for c in 0..2 {
            for o in 0..2 {
                assert!((view.phi[c][o] - expected[c][o]).abs() < 1e-15);
            }
        }
        let p_c0_o0 = 0.748_756_218_905_472_6;
        assert!((view.c_given_o[0][0] - p_c0_o0).abs() < 1e-12);
        assert!((view.c_given_o[0][1] - (1.0 - p_c0_o0)).abs() < 1e-12);
        assert!((view.c_given_o[1][0] - (1.0 - p_c0_o0)).abs() < 1e-12);
        // theta[0] = (4.9/5.8, 0.9/5.8)
        assert!((view.theta[0][0] - 4.9 / 5.8).abs() < 1e-15);
        assert!((view.theta[1][1] - 4.9 / 5.8).abs() < 1e-15);
    }

    #[test]
    fn uniform_model_entropy_closed_form() {
        let view = ProbView {
            phi: vec![vec![0.25; 4]; 2],
            theta: vec![vec![0.5; 2]; 3],
            context_marginal: vec![0.5; 2],
            c_given_o: vec![vec![0.5; 2]; 4],
        };
        let h = system_entropy_of(&view, DEFAULT_RHO);
        let expected = 0.9 * 4f64.ln() + 0.1 * 2f64.ln();
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 1.31696).abs() < 1e-4);
    }

    #[test]
    fn deterministic_model_has_zero_entropy() {
        let view = ProbView {
            phi: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            theta: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            context_marginal: vec![0.5, 0.5],
            c_given_o: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert_eq!(system_entropy_of(&view, 0.9), 0.0);
    }

    #[test]
    fn empty_model_has_uniform_marginal() {
        let m = LdaModel::empty(Vocabulary::new(4).unwrap(), 3, Priors::default(), 0).unwrap();
        let view = m.prob_view();
        assert_eq!(view.context_marginal, vec![1.0 / 3.0; 3]);
        assert!(view.theta.is_empty());
        let h = system_entropy(&m, 0.9);
        assert!((h - 0.9 * 4f64.ln()).abs() < 1e-12);
    }
}
