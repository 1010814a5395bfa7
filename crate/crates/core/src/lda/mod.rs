//! Scene corpora, collapsed-Gibbs LDA over contexts, and the probability
//! matrices and entropy derived from a fitted model.
//!
//! Scenes play the role of documents, objects the role of words and
//! contexts the role of topics.

mod generate;
pub mod io;
mod model;
mod view;

pub use generate::{sample_corpus, separable_corpus, GenerateParams, SceneLength};
pub use io::{
    corpus_to_jsonl, load_corpus, load_model, model_from_json, model_to_json, save_corpus,
    save_model,
};
pub use model::{gibbs_fit, LdaModel, Priors};
pub use view::{entropy_upper_bound, system_entropy, ProbView, DEFAULT_RHO};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Object vocabulary; object IDs are `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    size: usize,
}

impl Vocabulary {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("vocabulary size must be at least 1".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, object: u32) -> bool {
        (object as usize) < self.size
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub id: u64,
    pub objects: Vec<u32>,
}

impl Scene {
    pub fn new(id: u64, objects: Vec<u32>) -> Self {
        Self { id, objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub(crate) fn check_vocab(&self, vocab: Vocabulary) -> Result<()> {
        match self.objects.iter().find(|o| !vocab.contains(**o)) {
            Some(o) => Err(Error::InvalidInput(format!(
                "scene {} contains object {} outside vocabulary of size {}",
                self.id,
                o,
                vocab.size()
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub scenes: Vec<Scene>,
    /// Number of generating contexts, known only for synthetic corpora.
    pub truth_k: Option<usize>,
}

impl Corpus {
    pub fn new(vocabulary: Vocabulary, scenes: Vec<Scene>, truth_k: Option<usize>) -> Result<Self> {
        let corpus = Self {
            vocabulary,
            scenes,
            truth_k,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenes
            .iter()
            .try_for_each(|s| s.check_vocab(self.vocabulary))
    }

    pub fn num_tokens(&self) -> usize {
        self.scenes.iter().map(Scene::len).sum()
    }
}

/// The latent draws behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub k: usize,
    /// k x V, each row is p(o | c).
    pub phi_true: Vec<Vec<f64>>,
    /// One length-k mixture per scene.
    pub theta_true: Vec<Vec<f64>>,
    /// Generating context of every token, aligned with the scene objects.
    pub assignments: Vec<Vec<u32>>,
}

impl GroundTruth {
    /// Fraction of tokens generated by each context.
    pub fn token_marginal(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.k];
        let mut total = 0.0;
        for z in self.assignments.iter().flatten() {
            counts[*z as usize] += 1.0;
            total += 1.0;
        }
        if total > 0.0 {
            counts.iter_mut().for_each(|c| *c /= total);
        }
        counts
    }
}
