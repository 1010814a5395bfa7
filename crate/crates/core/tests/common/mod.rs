#![allow(dead_code)]

use cinet::rnn::{CellKind, RnnConfig, RnnModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Sample = (Vec<Vec<f64>>, u8);

pub fn random_model(
    cell: CellKind,
    layers: usize,
    hidden: usize,
    input: usize,
    seed: u64,
) -> RnnModel {
    let mut cfg = RnnConfig::new(cell, layers, input);
    cfg.hidden = hidden;
    cfg.seed = seed;
    let mut m = RnnModel::new(cfg).unwrap();
    // Spread weights further than the default init so every gate is exercised.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for s in m.params.slices_mut() {
        for v in s.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    m
}

pub fn random_batch(n: usize, input: usize, max_len: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let x = (0..len)
                .map(|_| (0..input).map(|_| rng.random::<f64>()).collect())
                .collect();
            (x, (i % 2) as u8)
        })
        .collect()
}

pub fn max_gradient_error(model: &RnnModel, batch: &[Sample], l2: f64) -> f64 {
    cinet::rnn::gradcheck::max_gradient_error(model, batch, l2).unwrap()
}
