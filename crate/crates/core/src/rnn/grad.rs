use rayon::prelude::*;

use super::cell::{backward_layer, run_layer};
use super::mat::{dot, sigmoid};
use super::{Params, RnnModel};
use crate::error::{Error, Result};

/// Predictions are clamped to [LOSS_CLAMP, 1 - LOSS_CLAMP] inside the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy.
pub fn bce(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "loss needs equal, non-zero numbers of predictions and labels ({} vs {})",
            predictions.len(),
            labels.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let q = p.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
            if q != p {
                log::debug!("clamped prediction {p} to {q} in loss");
            }
            if y == 1 {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Cross-entropy plus `l2_lambda` times the squared norm of all weights
/// (biases excluded).
pub fn loss(predictions: &[f64], labels: &[u8], model: &RnnModel, l2_lambda: f64) -> Result<f64> {
    Ok(bce(predictions, labels)? + l2_lambda * model.params.weight_sq_sum())
}

/// Gradient of one sample's cross-entropy (no L2 term) by backpropagation
/// through time, together with the forward prediction.
pub fn sample_gradients(model: &RnnModel, x: &[Vec<f64>], y: u8) -> Result<(Params, f64)> {
    model.check_input(x)?;
    let cfg = &model.config;
    let hd = cfg.hidden;
    let mut caches = Vec::with_capacity(model.params.layers.len());
    for (l, layer) in model.params.layers.iter().enumerate() {
        let layer_caches = if l == 0 {
            run_layer(cfg.cell, layer, hd, x)
        } else {
            let below: Vec<Vec<f64>> = caches
                .last()
                .map(|c: &Vec<super::cell::StepCache>| c.iter().map(|s| s.h.clone()).collect())
                .unwrap_or_default();
            run_layer(cfg.cell, layer, hd, &below)
        };
        caches.push(layer_caches);
    }
    let top = &caches.last().expect("at least one layer");
    let h_last = &top.last().expect("non-empty sequence").h;
    let y_hat = sigmoid(dot(&model.params.w_out, h_last) + model.params.b_out[0]);
    let d_logit = y_hat - f64::from(y);

    let mut grad = model.params.zeros_like();
    grad.w_out
        .iter_mut()
        .zip(h_last)
        .for_each(|(g, h)| *g = d_logit * h);
    grad.b_out[0] = d_logit;

    let steps = x.len();
    let mut dh_out = vec![vec![0.0; hd]; steps];
    dh_out[steps - 1] = model.params.w_out.iter().map(|w| w * d_logit).collect();
    for l in (0..model.params.layers.len()).rev() {
        dh_out = backward_layer(
            cfg.cell,
            &model.params.layers[l],
            &mut grad.layers[l],
            hd,
            &caches[l],
            &dh_out,
        );
    }
    Ok((grad, y_hat))
}

/// Samples per reduction chunk; fixed so the floating-point summation order
/// never depends on the thread count.
const CHUNK: usize = 8;

/// Batch gradient of `loss`: mean of per-sample gradients plus the L2
/// gradient once. Also returns the forward predictions.
pub fn gradients(
    model: &RnnModel,
    batch: &[(&[Vec<f64>], u8)],
    l2_lambda: f64,
) -> Result<(Params, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("gradient of an empty batch".into()));
    }
    let partials: Vec<(Params, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = model.params.zeros_like();
            let mut preds = Vec::with_capacity(chunk.len());
            for (x, y) in chunk {
                let (g, p) = sample_gradients(model, x, *y)?;
                acc.add_scaled(&g, 1.0);
                preds.push(p);
            }
            Ok((acc, preds))
        })
        .collect::<Result<_>>()?;

    let mut total = model.params.zeros_like();
    let mut preds = Vec::with_capacity(batch.len());
    for (g, p) in partials {
        total.add_scaled(&g, 1.0);
        preds.extend(p);
    }
    let inv_n = 1.0 / batch.len() as f64;
    for (dst, (w, is_weight)) in total.slices_mut().into_iter().zip(model.params.slices()) {
        for (d, wv) in dst.iter_mut().zip(w) {
            *d *= inv_n;
            if is_weight {
                *d += 2.0 * l2_lambda * wv;
            }
        }
    }
    Ok((total, preds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{CellKind, RnnConfig};

    #[test]
    fn symmetric_prediction_costs_ln2() {
        let m = RnnModel::zeroed(RnnConfig::new(CellKind::Vanilla, 1, 1)).unwrap();
        for y in [0, 1] {
            let l = loss(&[0.5], &[y], &m, 0.0).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_formula() {
        let l = bce(&[0.9], &[1]).unwrap();
        assert!((l - 0.105_360_515_657_826_3).abs() < 1e-12);
        let l = bce(&[0.9, 0.2], &[1, 0]).unwrap();
        assert!((l - (-(0.9f64.ln()) - 0.8f64.ln()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_only_when_predictions_perfect() {
        let mut cfg = RnnConfig::new(CellKind::Vanilla, 1, 1);
        cfg.hidden = 1;
        let mut m = RnnModel::zeroed(cfg).unwrap();
        m.params.layers[0].w_x.data[0] = 1.0;
        m.params.layers[0].w_h.data[0] = -2.0;
        m.params.layers[0].b[0] = 7.0; // biases are not penalised
        let l = loss(&[1.0, 0.0], &[1, 0], &m, 0.01).unwrap();
        assert!((l - 0.05).abs() < 1e-9, "{l}");
    }

    #[test]
    fn clamping_keeps_loss_finite() {
        let l = bce(&[0.0, 1.0], &[1, 0]).unwrap();
        assert!(l.is_finite());
        assert!((l - (-(LOSS_CLAMP.ln()))).abs() < 1e-3);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(bce(&[0.5], &[1, 0]).is_err());
        assert!(bce(&[], &[]).is_err());
    }

    #[test]
    fn output_bias_gradient_is_residual() {
        let mut cfg = RnnConfig::new(CellKind::Lstm, 2, 3);
        cfg.hidden = 4;
        let m = RnnModel::new(cfg).unwrap();
        let x = vec![vec![0.2, 0.5, 0.1], vec![0.9, 0.0, 0.3]];
        for y in [0, 1] {
            let (g, y_hat) = sample_gradients(&m, &x, y).unwrap();
            assert!((g.b_out[0] - (y_hat - f64::from(y))).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let mut cfg = RnnConfig::new(CellKind::Gru, 2, 3);
        cfg.hidden = 3;
        let m = RnnModel::new(cfg).unwrap();
        let xs = [
            vec![vec![0.2, 0.5, 0.1]],
            vec![vec![0.9, 0.0, 0.3], vec![0.1, 0.1, 0.1]],
            vec![
                vec![0.0, 1.0, 0.0],
                vec![0.4, 0.4, 0.2],
                vec![1.0, 0.0, 0.0],
            ],
        ];
        let batch: Vec<(&[Vec<f64>], u8)> = xs
            .iter()
            .zip([1, 0, 1])
            .map(|(x, y)| (x.as_slice(), y))
            .collect();
        let doubled: Vec<(&[Vec<f64>], u8)> = batch.iter().chain(batch.iter()).copied().collect();
        let (g1, _) = gradients(&m, &batch, 0.01).unwrap();
        let (g2, _) = gradients(&m, &doubled, 0.01).unwrap();
        for ((a, _), (b, _)) in g1.slices().iter().zip(g2.slices()) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }
}
