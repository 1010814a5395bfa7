//! Seeded randomness helpers shared by the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with task coordinates into an independent child seed
/// (splitmix64 finalizer applied per component).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix(base ^ 0x5eed_c1e7_0000_0001);
    for &p in parts {
        state = splitmix(state ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws from a symmetric Dirichlet(concentration * 1_dim).
///
/// Works in log space: for shape a < 1, Gamma(a) = Gamma(a + 1) * U^(1/a), which
/// keeps tiny concentrations such as 0.01 from underflowing every component to 0.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: f64, dim: usize) -> Vec<f64> {
    assert!(concentration > 0.0 && dim > 0);
    if dim == 1 {
        return vec![1.0];
    }
    let boosted = concentration < 1.0;
    let shape = if boosted {
        concentration + 1.0
    } else {
        concentration
    };
    let gamma = Gamma::new(shape, 1.0).expect("positive gamma shape");
    let logs: Vec<f64> = (0..dim)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mut lg = g.max(f64::MIN_POSITIVE).ln();
            if boosted {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                lg += u.ln() / concentration;
            }
            lg
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Samples an index proportional to non-negative `weights` whose sum is `total`.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // Round-off can leave u marginally above the last weight.
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .unwrap_or(weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_sums_to_one_even_for_sparse_priors() {
        let mut rng = seeded(3);
        for &conc in &[0.01, 0.9, 1.0, 5.0] {
            let p = dirichlet(&mut rng, conc, 1000);
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "conc {conc}: sum {s}");
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn dirichlet_moments_match_closed_form() {
        // Dir(a 1_K): E[p] = 1/K, Var[p] = (1/K)(1 - 1/K) / (K a + 1).
        let mut rng = seeded(11);
        for &(a, k) in &[(0.3, 3usize), (0.05, 4), (2.0, 2)] {
            let n = 40_000;
            let (mut m1, mut m2) = (0.0, 0.0);
            for _ in 0..n {
                let p = dirichlet(&mut rng, a, k)[0];
                m1 += p;
                m2 += p * p;
            }
            m1 /= n as f64;
            let var = m2 / n as f64 - m1 * m1;
            let mean_true = 1.0 / k as f64;
            let var_true = mean_true * (1.0 - mean_true) / (k as f64 * a + 1.0);
            assert!(
                (m1 - mean_true).abs() < 4.0 * (var_true / n as f64).sqrt(),
                "a={a} mean {m1}"
            );
            assert!(
                (var - var_true).abs() / var_true < 0.05,
                "a={a} var {var} vs {var_true}"
            );
        }
    }

    #[test]
    fn derived_seeds_differ_per_coordinate() {
        let a = derive_seed(1, &[2, 3]);
        assert_ne!(a, derive_seed(1, &[3, 2]));
        assert_ne!(a, derive_seed(2, &[2, 3]));
        assert_eq!(a, derive_seed(1, &[2, 3]));
    }

    #[test]
    fn categorical_respects_zero_weights() {
        let mut rng = seeded(5);
        for _ in 0..1000 {
            let i = categorical(&mut rng, &[0.0, 2.0, 0.0, 1.0], 3.0);
            assert!(i == 1 || i == 3);
        }
    }
}
