//! Labelled "add a context?" examples built from LDA fits of synthetic
//! corpora, and their JSON-lines persistence.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{atomic_write, check_version, parse_error, parse_line, read_lines, FORMAT_VERSION};
use crate::lda::{
    gibbs_fit, sample_corpus, GenerateParams, Priors, ProbView, SceneLength, Vocabulary,
};
use crate::rng::{derive_seed, seeded};

/// Which probability table is fed to the classifier, one context per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputMode {
    /// p(c_t | o_j) over all objects j.
    #[serde(rename = "P_C")]
    ContextGivenObject,
    /// p(o_j | c_t) over all objects j.
    #[serde(rename = "P_O")]
    ObjectGivenContext,
    /// P_O step followed by P_C step.
    #[serde(rename = "CONCAT")]
    Concat,
}

impl InputMode {
    pub fn input_dim(self, vocab_size: usize) -> usize {
        match self {
            InputMode::Concat => 2 * vocab_size,
            _ => vocab_size,
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::ContextGivenObject => "P_C",
            InputMode::ObjectGivenContext => "P_O",
            InputMode::Concat => "CONCAT",
        })
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "P_C" | "PC" => Ok(InputMode::ContextGivenObject),
            "P_O" | "PO" => Ok(InputMode::ObjectGivenContext),
            "CONCAT" => Ok(InputMode::Concat),
            _ => Err(Error::Config(format!(
                "unknown input mode {s:?} (expected P_C, P_O or CONCAT)"
            ))),
        }
    }
}

/// Encodes a fitted model as a sequence of k0 vectors in context order.
pub fn encode_input(view: &ProbView, mode: InputMode) -> Vec<Vec<f64>> {
    let k0 = view.phi.len();
    let p_c = |t: usize| {
        view.c_given_o
            .iter()
            .map(|row| row[t])
            .collect::<Vec<f64>>()
    };
    (0..k0)
        .map(|t| match mode {
            InputMode::ContextGivenObject => p_c(t),
            InputMode::ObjectGivenContext => view.phi[t].clone(),
            InputMode::Concat => {
                let mut step = view.phi[t].clone();
                step.extend(p_c(t));
                step
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairMeta {
    pub truth_k: usize,
    pub k0: usize,
    pub corpus_seed: u64,
    pub gibbs_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub x: Vec<Vec<f64>>,
    pub y: u8,
    pub meta: PairMeta,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub mode: InputMode,
    pub vocab_size: usize,
    pub pairs: Vec<TrainingPair>,
}

impl PairSet {
    pub fn new(mode: InputMode, vocab_size: usize) -> Self {
        Self {
            mode,
            vocab_size,
            pairs: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.mode.input_dim(self.vocab_size)
    }

    pub fn split(&self, split: Split) -> Vec<&TrainingPair> {
        self.pairs.iter().filter(|p| p.split == split).collect()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().filter(|p| p.y == 1).count() as f64 / self.pairs.len() as f64
    }

    /// Checks labels, dimensions, entry ranges and train/test corpus disjointness.
    pub fn validate(&self) -> Result<()> {
        let dim = self.input_dim();
        for p in &self.pairs {
            if p.x.is_empty() {
                return Err(Error::InvalidInput("pair with empty sequence".into()));
            }
            if let Some(step) = p.x.iter().find(|s| s.len() != dim) {
                return Err(Error::Shape {
                    expected: dim,
                    actual: step.len(),
                });
            }
            if p.x.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput("pair entry outside [0, 1]".into()));
            }
            if p.y > 1 || (p.y == 1) != (p.meta.k0 < p.meta.truth_k) {
                return Err(Error::InvalidInput(format!(
                    "label {} inconsistent with k0={} truth_k={}",
                    p.y, p.meta.k0, p.meta.truth_k
                )));
            }
        }
        let test: HashSet<(usize, u64)> = self
            .pairs
            .iter()
            .filter(|p| p.split == Split::Test)
            .map(|p| (p.meta.truth_k, p.meta.corpus_seed))
            .collect();
        if let Some(p) = self.pairs.iter().find(|p| {
            p.split != Split::Test && test.contains(&(p.meta.truth_k, p.meta.corpus_seed))
        }) {
            return Err(Error::InvalidInput(format!(
                "corpus (truth_k={}, seed={}) appears in both training and test splits",
                p.meta.truth_k, p.meta.corpus_seed
            )));
        }
        Ok(())
    }
}

/// Recipe for a labelled pair set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Training corpora per k.
    pub corpora_per_k: usize,
    /// Additional held-out corpora per k, used only for the test split.
    pub test_corpora_per_k: usize,
    pub num_scenes: usize,
    pub scene_len: SceneLength,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gibbs_iterations: usize,
    /// Gibbs seeds per positive (k0 < k) model; k0 = k models get
    /// max(k - 1, 1) times as many.
    pub seeds_per_positive: usize,
    pub mode: InputMode,
    /// Fraction of training pairs moved to the validation split.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 6,
            corpora_per_k: 4,
            test_corpora_per_k: 2,
            num_scenes: 30,
            scene_len: SceneLength::Fixed(20),
            vocab_size: 100,
            alpha: 0.9,
            beta: 0.01,
            gibbs_iterations: 200,
            seeds_per_positive: 4,
            mode: InputMode::ContextGivenObject,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl PairConfig {
    fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "context range {}..={} must be non-empty and start at 1 or more",
                self.k_min, self.k_max
            )));
        }
        if self.corpora_per_k == 0 || self.seeds_per_positive == 0 {
            return Err(Error::Config(
                "corpora per k and seeds per positive must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Seed of replicate corpus `rep` generated with `k` contexts.
    pub fn corpus_seed(&self, k: usize, rep: usize) -> u64 {
        derive_seed(self.seed, &[k as u64, rep as u64])
    }

    pub fn generate_params(&self, k: usize, corpus_seed: u64) -> Result<GenerateParams> {
        Ok(GenerateParams {
            k,
            num_scenes: self.num_scenes,
            vocab: Vocabulary::new(self.vocab_size)?,
            scene_len: self.scene_len,
            alpha: self.alpha,
            beta: self.beta,
            seed: corpus_seed,
        })
    }

    pub fn priors(&self) -> Priors {
        Priors {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

struct Task {
    truth_k: usize,
    rep: usize,
    k0: usize,
    corpus_seed: u64,
    gibbs_seed: u64,
}

/// Fits LDA models with k0 = 1..=k on every replicate corpus and labels
/// them y = 1 iff k0 < k. Output is sorted by metadata, so it does not
/// depend on how the fits were scheduled.
pub fn build_pairs(cfg: &PairConfig) -> Result<PairSet> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        for rep in 0..cfg.corpora_per_k + cfg.test_corpora_per_k {
            let corpus_seed = cfg.corpus_seed(k, rep);
            for k0 in 1..=k {
                let n_seeds = if k0 < k {
                    cfg.seeds_per_positive
                } else {
                    cfg.seeds_per_positive * (k - 1).max(1)
                };
                for j in 0..n_seeds {
                    tasks.push(Task {
                        truth_k: k,
                        rep,
                        k0,
                        corpus_seed,
                        gibbs_seed: derive_seed(corpus_seed, &[k0 as u64, j as u64]),
                    });
                }
            }
        }
    }

    let test_from = cfg.corpora_per_k;
    let mut pairs = tasks
        .par_iter()
        .map(|t| {
            let (corpus, _) = sample_corpus(&cfg.generate_params(t.truth_k, t.corpus_seed)?)?;
            let model = gibbs_fit(
                &corpus,
                t.k0,
                cfg.gibbs_iterations,
                cfg.priors(),
                t.gibbs_seed,
            )?;
            Ok(TrainingPair {
                x: encode_input(&model.prob_view(), cfg.mode),
                y: u8::from(t.k0 < t.truth_k),
                meta: PairMeta {
                    truth_k: t.truth_k,
                    k0: t.k0,
                    corpus_seed: t.corpus_seed,
                    gibbs_seed: t.gibbs_seed,
                },
                split: if t.rep >= test_from {
                    Split::Test
                } else {
                    Split::Train
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    pairs.sort_by_key(|p| p.meta);

    let mut train_idx: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs[i].split == Split::Train)
        .collect();
    let n_val = (train_idx.len() as f64 * cfg.validation_fraction).round() as usize;
    train_idx.shuffle(&mut seeded(derive_seed(cfg.seed, &[u64::MAX])));
    for &i in &train_idx[..n_val] {
        pairs[i].split = Split::Validation;
    }

    let set = PairSet {
        mode: cfg.mode,
        vocab_size: cfg.vocab_size,
        pairs,
    };
    set.validate()?;
    Ok(set)
}

#[derive(Debug, Serialize, Deserialize)]
struct PairHeader {
    mode: InputMode,
    vocab_size: usize,
    format_version: u32,
}

pub fn pairs_to_jsonl(set: &PairSet) -> Result<String> {
    let mut out = serde_json::to_string(&PairHeader {
        mode: set.mode,
        vocab_size: set.vocab_size,
        format_version: FORMAT_VERSION,
    })?;
    out.push('\n');
    for p in &set.pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_pairs(set: &PairSet, path: &Path) -> Result<()> {
    atomic_write(path, pairs_to_jsonl(set)?.as_bytes())
}

/// Loads a pair file; any malformed line aborts the whole load.
pub fn load_pairs(path: &Path) -> Result<PairSet> {
    let lines = read_lines(path)?;
    let Some(((header_line, header), rest)) = lines.split_first().map(|(h, r)| ((h.0, &h.1), r))
    else {
        return Err(parse_error(path, 1, "missing pair file header"));
    };
    let header: PairHeader = parse_line(path, header_line, header)?;
    check_version(header.format_version)?;
    let mut set = PairSet::new(header.mode, header.vocab_size);
    let dim = set.input_dim();
    for (line_no, line) in rest {
        let pair: TrainingPair = parse_line(path, *line_no, line)?;
        if let Some(step) = pair.x.iter().find(|s| s.len() != dim) {
            return Err(parse_error(
                path,
                *line_no,
                format!("step has {} entries, header implies {dim}", step.len()),
            ));
        }
        set.pairs.push(pair);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::separable_corpus;

    fn small_cfg() -> PairConfig {
        PairConfig {
            k_min: 1,
            k_max: 3,
            corpora_per_k: 3,
            num_scenes: 8,
            scene_len: SceneLength::Fixed(10),
            vocab_size: 20,
            gibbs_iterations: 20,
            seed: 5,
            ..PairConfig::default()
        }
    }

    #[test]
    fn single_context_gives_single_step() {
        let corpus = separable_corpus(2, 3, 5, 1);
        let view = gibbs_fit(&corpus, 1, 2, Priors::default(), 0)
            .unwrap()
            .prob_view();
        for mode in [
            InputMode::ContextGivenObject,
            InputMode::ObjectGivenContext,
            InputMode::Concat,
        ] {
            assert_eq!(encode_input(&view, mode).len(), 1);
        }
    }

    #[test]
    fn concat_stacks_po_then_pc() {
        let corpus = separable_corpus(3, 3, 6, 2);
        let view = gibbs_fit(&corpus, 3, 10, Priors::default(), 0)
            .unwrap()
            .prob_view();
        let cat = encode_input(&view, InputMode::Concat);
        assert_eq!(cat.len(), 3);
        for (t, step) in cat.iter().enumerate() {
            assert_eq!(step.len(), 60);
            let po: Vec<f64> = (0..30).map(|o| view.phi[t][o]).collect();
            let pc: Vec<f64> = (0..30).map(|o| view.c_given_o[o][t]).collect();
            assert_eq!(&step[..30], &po[..]);
            assert_eq!(&step[30..], &pc[..]);
        }
    }

    #[test]
    fn labels_follow_context_deficit() {
        let set = build_pairs(&small_cfg()).unwrap();
        for p in &set.pairs {
            assert_eq!(p.y == 1, p.meta.k0 < p.meta.truth_k);
            assert_eq!(p.x.len(), p.meta.k0);
        }
        assert!(set
            .pairs
            .iter()
            .any(|p| p.meta.truth_k == 3 && p.meta.k0 == 2 && p.y == 1));
        assert!(set
            .pairs
            .iter()
            .any(|p| p.meta.truth_k == 3 && p.meta.k0 == 3 && p.y == 0));
    }

    #[test]
    fn splits_do_not_leak_corpora() {
        let set = build_pairs(&small_cfg()).unwrap();
        set.validate().unwrap();
        assert!(!set.split(Split::Test).is_empty());
        assert!(!set.split(Split::Validation).is_empty());
        let mut leaky = set.clone();
        let test_meta = leaky.split(Split::Test)[0].meta;
        let j = leaky
            .pairs
            .iter()
            .position(|p| p.meta == test_meta)
            .unwrap();
        let mut dup = leaky.pairs[j].clone();
        dup.split = Split::Train;
        leaky.pairs.push(dup);
        assert!(leaky.validate().is_err());
    }

    #[test]
    fn zero_in_k_range_is_a_config_error() {
        let cfg = PairConfig {
            k_min: 0,
            ..small_cfg()
        };
        assert!(matches!(build_pairs(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn build_is_deterministic() {
        let a = pairs_to_jsonl(&build_pairs(&small_cfg()).unwrap()).unwrap();
        let b = pairs_to_jsonl(&build_pairs(&small_cfg()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_mode_parses_and_prints() {
        for m in [
            InputMode::ContextGivenObject,
            InputMode::ObjectGivenContext,
            InputMode::Concat,
        ] {
            assert_eq!(m.to_string().parse::<InputMode>().unwrap(), m);
        }
        assert!("P_X".parse::<InputMode>().is_err());
    }
}
