//! Per-step forward passes with caches, and their reverse-mode counterparts.

use super::mat::sigmoid;
use super::{CellKind, Layer};

pub(crate) struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gate values, stacked like the weight blocks.
    gates: Vec<f64>,
    /// LSTM cell state (empty for other cells).
    c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Runs one layer over a sequence from zero initial state.
pub(crate) fn run_layer(
    cell: CellKind,
    layer: &Layer,
    hidden: usize,
    xs: &[Vec<f64>],
) -> Vec<StepCache> {
    let mut h = vec![0.0; hidden];
    let mut c = if cell == CellKind::Lstm {
        vec![0.0; hidden]
    } else {
        Vec::new()
    };
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let step = step_forward(cell, layer, hidden, x, &h, &c);
        h.clone_from(&step.h);
        c.clone_from(&step.c);
        out.push(step);
    }
    out
}

fn step_forward(
    cell: CellKind,
    layer: &Layer,
    hd: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> StepCache {
    let mut pre = layer.b.clone();
    layer.w_x.mul_vec_add(0, x, &mut pre);
    let (gates, c, h) = match cell {
        CellKind::Vanilla => {
            layer.w_h.mul_vec_add(0, h_prev, &mut pre);
            let h: Vec<f64> = pre.iter().map(|a| a.tanh()).collect();
            (h.clone(), Vec::new(), h)
        }
        CellKind::Gru => {
            // z and r see h_prev; the candidate sees r * h_prev.
            layer.w_h.mul_vec_add(0, h_prev, &mut pre[..2 * hd]);
            let mut gates = vec![0.0; 3 * hd];
            for i in 0..2 * hd {
                gates[i] = sigmoid(pre[i]);
            }
            let rh: Vec<f64> = (0..hd).map(|i| gates[hd + i] * h_prev[i]).collect();
            layer.w_h.mul_vec_add(2 * hd, &rh, &mut pre[2 * hd..]);
            for i in 0..hd {
                gates[2 * hd + i] = pre[2 * hd + i].tanh();
            }
            let h = (0..hd)
                .map(|i| {
                    let z = gates[i];
                    (1.0 - z) * gates[2 * hd + i] + z * h_prev[i]
                })
                .collect();
            (gates, Vec::new(), h)
        }
        CellKind::Lstm => {
            layer.w_h.mul_vec_add(0, h_prev, &mut pre);
            let mut gates = vec![0.0; 4 * hd];
            for i in 0..hd {
                gates[i] = sigmoid(pre[i]);
                gates[hd + i] = sigmoid(pre[hd + i]);
                gates[2 * hd + i] = pre[2 * hd + i].tanh();
                gates[3 * hd + i] = sigmoid(pre[3 * hd + i]);
            }
            let c: Vec<f64> = (0..hd)
                .map(|i| gates[hd + i] * c_prev[i] + gates[i] * gates[2 * hd + i])
                .collect();
            let h = (0..hd).map(|i| gates[3 * hd + i] * c[i].tanh()).collect();
            (gates, c, h)
        }
    };
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        h,
    }
}

/// Backpropagates through a whole layer. `dh_out[t]` is the loss gradient
/// arriving at h_t from above; returns the gradient for each input x_t and
/// accumulates parameter gradients into `grad`.
pub(crate) fn backward_layer(
    cell: CellKind,
    layer: &Layer,
    grad: &mut Layer,
    hd: usize,
    caches: &[StepCache],
    dh_out: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let in_dim = layer.w_x.cols;
    let mut dxs = vec![Vec::new(); caches.len()];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    for t in (0..caches.len()).rev() {
        let s = &caches[t];
        let dh: Vec<f64> = (0..hd).map(|i| dh_out[t][i] + dh_next[i]).collect();
        let mut dx = vec![0.0; in_dim];
        let mut dh_prev = vec![0.0; hd];
        match cell {
            CellKind::Vanilla => {
                let da: Vec<f64> = (0..hd).map(|i| dh[i] * (1.0 - s.h[i] * s.h[i])).collect();
                grad.w_x.outer_add(0, &da, &s.x);
                grad.w_h.outer_add(0, &da, &s.h_prev);
                grad.b.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
                layer.w_x.t_mul_vec_add(0, &da, &mut dx);
                layer.w_h.t_mul_vec_add(0, &da, &mut dh_prev);
            }
            CellKind::Gru => {
                let (z, r, n) = (&s.gates[..hd], &s.gates[hd..2 * hd], &s.gates[2 * hd..]);
                let mut da = vec![0.0; 3 * hd];
                for i in 0..hd {
                    da[i] = dh[i] * (s.h_prev[i] - n[i]) * z[i] * (1.0 - z[i]);
                    da[2 * hd + i] = dh[i] * (1.0 - z[i]) * (1.0 - n[i] * n[i]);
                    dh_prev[i] = dh[i] * z[i];
                }
                let mut d_rh = vec![0.0; hd];
                layer.w_h.t_mul_vec_add(2 * hd, &da[2 * hd..], &mut d_rh);
                let rh: Vec<f64> = (0..hd).map(|i| r[i] * s.h_prev[i]).collect();
                for i in 0..hd {
                    da[hd + i] = d_rh[i] * s.h_prev[i] * r[i] * (1.0 - r[i]);
                    dh_prev[i] += d_rh[i] * r[i];
                }
                grad.w_x.outer_add(0, &da, &s.x);
                grad.w_h.outer_add(0, &da[..2 * hd], &s.h_prev);
                grad.w_h.outer_add(2 * hd, &da[2 * hd..], &rh);
                grad.b.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
                layer.w_x.t_mul_vec_add(0, &da, &mut dx);
                layer.w_h.t_mul_vec_add(0, &da[..2 * hd], &mut dh_prev);
            }
            CellKind::Lstm => {
                let g = &s.gates;
                let mut da = vec![0.0; 4 * hd];
                for i in 0..hd {
                    let (ig, fg, cg, og) = (g[i], g[hd + i], g[2 * hd + i], g[3 * hd + i]);
                    let tc = s.c[i].tanh();
                    let dc = dc_next[i] + dh[i] * og * (1.0 - tc * tc);
                    da[i] = dc * cg * ig * (1.0 - ig);
                    da[hd + i] = dc * s.c_prev[i] * fg * (1.0 - fg);
                    da[2 * hd + i] = dc * ig * (1.0 - cg * cg);
                    da[3 * hd + i] = dh[i] * tc * og * (1.0 - og);
                    dc_next[i] = dc * fg;
                }
                grad.w_x.outer_add(0, &da, &s.x);
                grad.w_h.outer_add(0, &da, &s.h_prev);
                grad.b.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
                layer.w_x.t_mul_vec_add(0, &da, &mut dx);
                layer.w_h.t_mul_vec_add(0, &da, &mut dh_prev);
            }
        }
        dh_next = dh_prev;
        dxs[t] = dx;
    }
    dxs
}
