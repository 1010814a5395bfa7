//! CINet: a stacked recurrent sequence-to-label classifier that reads an LDA
//! model one context per step and outputs the probability that another
//! context should be added.

mod adam;
mod cell;
pub mod checkpoint;
mod grad;
pub mod gradcheck;
mod mat;
mod train;

pub use adam::AdamState;
pub use grad::{bce, gradients, loss, sample_gradients, LOSS_CLAMP};
pub use mat::Mat;
pub use train::{evaluate, metrics_csv, train, train_on, EpochRecord, Evaluation, TrainHistory};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::InputMode;
use crate::error::{Error, Result};
use crate::rng::seeded;
use mat::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Vanilla,
    Gru,
    Lstm,
}

impl CellKind {
    /// Number of stacked gate blocks in the input and recurrent matrices.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Vanilla => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    pub const ALL: [CellKind; 3] = [CellKind::Vanilla, CellKind::Gru, CellKind::Lstm];
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Vanilla => "vanilla",
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
        })
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" | "rnn" => Ok(CellKind::Vanilla),
            "gru" => Ok(CellKind::Gru),
            "lstm" => Ok(CellKind::Lstm),
            _ => Err(Error::Config(format!(
                "unknown cell kind {s:?} (expected vanilla, gru or lstm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub cell: CellKind,
    pub layers: usize,
    pub hidden: usize,
    pub input_dim: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
}

impl RnnConfig {
    pub fn new(cell: CellKind, layers: usize, input_dim: usize) -> Self {
        Self {
            cell,
            layers,
            hidden: 50,
            input_dim,
            l2_lambda: 1e-4,
            learning_rate: 1e-3,
            batch_size: 100,
            seed: 0,
            early_stop_patience: 10,
            max_epochs: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.layers) {
            return Err(Error::Config(format!(
                "layers must be 1, 2 or 3, got {}",
                self.layers
            )));
        }
        if self.hidden == 0 || self.input_dim == 0 {
            return Err(Error::Config(
                "hidden size and input dimension must be positive".into(),
            ));
        }
        if self.batch_size == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config(
                "batch size and patience must be positive".into(),
            ));
        }
        // Written negated so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.learning_rate > 0.0) || !(self.l2_lambda >= 0.0) {
            return Err(Error::Config(
                "learning rate must be positive and L2 non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of one recurrent layer; gate blocks are stacked row-wise
/// (GRU: update, reset, candidate; LSTM: input, forget, cell, output).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w_x: Mat,
    pub w_h: Mat,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: Vec<Layer>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl Params {
    pub fn zeros(cfg: &RnnConfig) -> Self {
        let g = cfg.cell.gates();
        let h = cfg.hidden;
        let layers = (0..cfg.layers)
            .map(|l| {
                let in_dim = if l == 0 { cfg.input_dim } else { h };
                Layer {
                    w_x: Mat::zeros(g * h, in_dim),
                    w_h: Mat::zeros(g * h, h),
                    b: vec![0.0; g * h],
                }
            })
            .collect();
        Self {
            layers,
            w_out: vec![0.0; h],
            b_out: vec![0.0],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut p = self.clone();
        p.slices_mut().into_iter().for_each(|s| s.fill(0.0));
        p
    }

    /// Every tensor in a fixed order, flagged true for weights (L2-penalised)
    /// and false for biases.
    pub fn slices(&self) -> Vec<(&[f64], bool)> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push((l.w_x.data.as_slice(), true));
            out.push((l.w_h.data.as_slice(), true));
            out.push((l.b.as_slice(), false));
        }
        out.push((self.w_out.as_slice(), true));
        out.push((self.b_out.as_slice(), false));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.w_x.data.as_mut_slice());
            out.push(l.w_h.data.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out.push(self.w_out.as_mut_slice());
        out.push(self.b_out.as_mut_slice());
        out
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|(s, _)| s.len()).sum()
    }

    pub fn weight_sq_sum(&self) -> f64 {
        self.slices()
            .iter()
            .filter(|(_, w)| *w)
            .flat_map(|(s, _)| s.iter())
            .map(|v| v * v)
            .sum()
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (dst, (src, _)) in self.slices_mut().into_iter().zip(other.slices()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|(s, _)| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub config: RnnConfig,
    pub params: Params,
    /// Encoding the model was trained on, if known.
    pub input_mode: Option<InputMode>,
}

impl RnnModel {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, and
    /// LSTM forget-gate biases at 1.
    pub fn new(config: RnnConfig) -> Result<Self> {
        config.validate()?;
        let mut params = Params::zeros(&config);
        let mut rng = seeded(config.seed);
        let h = config.hidden;
        let mut fill = |m: &mut [f64], fan_in: usize| {
            let r = 1.0 / (fan_in as f64).sqrt();
            m.iter_mut().for_each(|w| *w = rng.random_range(-r..r));
        };
        for layer in &mut params.layers {
            let fan_x = layer.w_x.cols;
            fill(&mut layer.w_x.data, fan_x);
            fill(&mut layer.w_h.data, h);
            if config.cell == CellKind::Lstm {
                layer.b[h..2 * h].fill(1.0);
            }
        }
        fill(&mut params.w_out, h);
        Ok(Self {
            config,
            params,
            input_mode: None,
        })
    }

    /// A model with every parameter set to zero.
    pub fn zeroed(config: RnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: Params::zeros(&config),
            config,
            input_mode: None,
        })
    }

    pub fn check_input(&self, x: &[Vec<f64>]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::InvalidInput(
                "input sequence must have at least one step".into(),
            ));
        }
        match x.iter().find(|s| s.len() != self.config.input_dim) {
            Some(step) => Err(Error::Shape {
                expected: self.config.input_dim,
                actual: step.len(),
            }),
            None => Ok(()),
        }
    }

    /// Probability that another context should be added.
    pub fn forward(&self, x: &[Vec<f64>]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[Vec<f64>]) -> f64 {
        let states = self.hidden_states_unchecked(x);
        let last = states
            .last()
            .and_then(|l| l.last())
            .expect("non-empty sequence");
        sigmoid(mat::dot(&self.params.w_out, last) + self.params.b_out[0])
    }

    /// Hidden-state sequence of every layer (bottom first).
    pub fn hidden_states(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.check_input(x)?;
        Ok(self.hidden_states_unchecked(x))
    }

    fn hidden_states_unchecked(&self, x: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.params.layers.len());
        for (l, layer) in self.params.layers.iter().enumerate() {
            let input = if l == 0 { x } else { &out[l - 1][..] };
            let caches = cell::run_layer(self.config.cell, layer, self.config.hidden, input);
            let hs = caches.into_iter().map(|c| c.h).collect();
            out.push(hs);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cell: CellKind, layers: usize, hidden: usize, input: usize) -> RnnConfig {
        RnnConfig {
            hidden,
            ..RnnConfig::new(cell, layers, input)
        }
    }

    #[test]
    fn zero_network_outputs_one_half() {
        for cell in CellKind::ALL {
            let m = RnnModel::zeroed(cfg(cell, 2, 4, 3)).unwrap();
            let x = vec![vec![0.3, 0.1, 0.9], vec![1.0, 0.0, 0.5]];
            assert_eq!(m.forward(&x).unwrap(), 0.5);
            let mut longer = x.clone();
            longer.push(vec![0.0; 3]);
            assert_eq!(m.forward(&longer).unwrap(), 0.5);
        }
    }

    #[test]
    fn vanilla_scalar_chain_matches_hand_evaluation() {
        let mut m = RnnModel::zeroed(cfg(CellKind::Vanilla, 1, 1, 1)).unwrap();
        let l = &mut m.params.layers[0];
        l.w_x.data[0] = 0.5;
        l.w_h.data[0] = -0.7;
        l.b[0] = 0.1;
        m.params.w_out[0] = 2.0;
        m.params.b_out[0] = -0.3;
        let x = vec![vec![1.0], vec![2.0]];
        let h1 = (0.5f64 * 1.0 + 0.1).tanh();
        let h2 = (0.5 * 2.0 - 0.7 * h1 + 0.1).tanh();
        let expected = 1.0 / (1.0 + (-(2.0 * h2 - 0.3)).exp());
        // h1 = tanh(0.6), h2 = tanh(1.1 - 0.7 tanh 0.6), y = sigmoid(2 h2 - 0.3)
        assert!((m.forward(&x).unwrap() - expected).abs() < 1e-15);
        assert!(
            (expected - 0.718_865_740_608_573_3).abs() < 1e-12,
            "{expected}"
        );
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let m = RnnModel::new(cfg(CellKind::Gru, 1, 3, 4)).unwrap();
        let err = m.forward(&[vec![0.0; 5]]).unwrap_err();
        assert!(matches!(
            err,
            Error::Shape {
                expected: 4,
                actual: 5
            }
        ));
        assert!(m.forward(&[]).is_err());
    }

    #[test]
    fn lstm_forget_bias_starts_at_one() {
        let m = RnnModel::new(cfg(CellKind::Lstm, 2, 3, 2)).unwrap();
        for l in &m.params.layers {
            assert_eq!(&l.b[3..6], &[1.0, 1.0, 1.0]);
            assert!(l.b[..3].iter().chain(&l.b[6..]).all(|b| *b == 0.0));
        }
    }

    #[test]
    fn config_validation() {
        assert!(RnnModel::new(cfg(CellKind::Lstm, 4, 3, 2)).is_err());
        assert!(RnnModel::new(cfg(CellKind::Lstm, 0, 3, 2)).is_err());
        assert!(RnnModel::new(cfg(CellKind::Lstm, 1, 0, 2)).is_err());
    }
}
