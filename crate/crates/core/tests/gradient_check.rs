mod common;

use cinet::rnn::CellKind;
use common::{max_gradient_error, random_batch, random_model};
use proptest::prelude::*;

#[test]
fn every_cell_and_depth_matches_finite_differences() {
    for cell in CellKind::ALL {
        for layers in 1..=3 {
            let model = random_model(cell, layers, 4, 5, 10 + layers as u64);
            let batch = random_batch(3, 5, 4, 99);
            let err = max_gradient_error(&model, &batch, 0.01);
            assert!(err < 1e-4, "{cell} x{layers}: relative error {err:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_small_configurations(
        cell_idx in 0usize..3,
        layers in 1usize..=3,
        hidden in 1usize..=5,
        input in 1usize..=6,
        max_len in 1usize..=4,
        seed in any::<u64>(),
        l2 in prop_oneof![Just(0.0), Just(1e-3), Just(0.1)],
    ) {
        let cell = CellKind::ALL[cell_idx];
        let model = random_model(cell, layers, hidden, input, seed);
        let batch = random_batch(2, input, max_len, seed.wrapping_add(1));
        let err = max_gradient_error(&model, &batch, l2);
        prop_assert!(err < 1e-4, "{} x{} h{} in{}: {:e}", cell, layers, hidden, input, err);
    }
}
