//! Finite-difference check of the analytic gradients.

use super::grad::{gradients, loss};
use super::RnnModel;
use crate::error::Result;

/// Batch loss through the forward pass alone.
pub fn batch_loss(model: &RnnModel, batch: &[(Vec<Vec<f64>>, u8)], l2: f64) -> Result<f64> {
    let preds = batch
        .iter()
        .map(|(x, _)| model.forward(x))
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<u8> = batch.iter().map(|b| b.1).collect();
    loss(&preds, &labels, model, l2)
}

/// Central differences of the batch loss for every parameter, in the order
/// of `Params::slices`, refined by one Richardson step: (4 D(h/2) - D(h)) / 3
/// has O(h^4) truncation error, so `step` can be large enough that round-off
/// stays negligible even for gradients near 1e-7.
pub fn numeric_gradient(model: &RnnModel, batch: &[(Vec<Vec<f64>>, u8)], l2: f64, step: f64) -> Result<Vec<Vec<f64>>> {
    let mut probe = model.clone();
    let lens: Vec<usize> = model.params.slices().iter().map(|(s, _)| s.len()).collect();
    let mut out = Vec::with_capacity(lens.len());
    for (k, len) in lens.into_iter().enumerate() {
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = probe.params.slices_mut()[k][i];
            let mut central = |h: f64| -> Result<f64> {
                probe.params.slices_mut()[k][i] = orig + h;
                let up = batch_loss(&probe, batch, l2)?;
                probe.params.slices_mut()[k][i] = orig - h;
                let down = batch_loss(&probe, batch, l2)?;
                probe.params.slices_mut()[k][i] = orig;
                Ok((up - down) / (2.0 * h))
            };
            let coarse = central(step)?;
            let fine = central(step / 2.0)?;
            *gi = (4.0 * fine - coarse) / 3.0;
        }
        out.push(g);
    }
    Ok(out)
}

/// |a - n| / max(|a|, |n|), with the denominator floored at 1e-8 so that
/// gradients that vanish up to round-off compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Worst relative error of the analytic batch gradient against
/// extrapolated central differences with step 1e-3.
pub fn max_gradient_error(model: &RnnModel, batch: &[(Vec<Vec<f64>>, u8)], l2: f64) -> Result<f64> {
    let refs: Vec<(&[Vec<f64>], u8)> = batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let (analytic, _) = gradients(model, &refs, l2)?;
    let numeric = numeric_gradient(model, batch, l2, 1e-3)?;
    let mut worst: f64 = 0.0;
    for ((a, _), n) in analytic.slices().iter().zip(&numeric) {
        for (av, nv) in a.iter().zip(n) {
            worst = worst.max(relative_error(*av, *nv));
        }
    }
    Ok(worst)
}
