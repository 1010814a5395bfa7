use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{Corpus, GroundTruth, Scene, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::{categorical, dirichlet, seeded};

/// How many objects each generated scene holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SceneLength {
    Fixed(usize),
    /// Poisson(lambda), redrawn until non-zero.
    Poisson(f64),
}

impl Default for SceneLength {
    fn default() -> Self {
        SceneLength::Fixed(100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub k: usize,
    pub num_scenes: usize,
    pub vocab: Vocabulary,
    pub scene_len: SceneLength,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl GenerateParams {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("context count k must be at least 1".into()));
        }
        if self.num_scenes == 0 {
            return Err(Error::Config("number of scenes must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        match self.scene_len {
            SceneLength::Fixed(0) => Err(Error::Config(
                "fixed scene length must be at least 1".into(),
            )),
            SceneLength::Poisson(l) if !(l > 0.0 && l.is_finite()) => Err(Error::Config(format!(
                "Poisson scene length rate must be positive, got {l}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Runs the LDA generative process with a known number of contexts.
///
/// Each context's object distribution is drawn once from Dir(beta); every scene
/// draws its own context mixture from Dir(alpha), then a context and an object
/// per token.
pub fn sample_corpus(params: &GenerateParams) -> Result<(Corpus, GroundTruth)> {
    params.validate()?;
    let mut rng = seeded(params.seed);
    let v = params.vocab.size();

    let phi_true: Vec<Vec<f64>> = (0..params.k)
        .map(|_| dirichlet(&mut rng, params.beta, v))
        .collect();
    let poisson = match params.scene_len {
        SceneLength::Poisson(l) => Some(Poisson::new(l).map_err(|e| Error::Config(e.to_string()))?),
        SceneLength::Fixed(_) => None,
    };

    let mut scenes = Vec::with_capacity(params.num_scenes);
    let mut theta_true = Vec::with_capacity(params.num_scenes);
    let mut assignments = Vec::with_capacity(params.num_scenes);
    for id in 0..params.num_scenes {
        let theta = dirichlet(&mut rng, params.alpha, params.k);
        let len = match (params.scene_len, &poisson) {
            (SceneLength::Fixed(n), _) => n,
            (SceneLength::Poisson(_), Some(p)) => loop {
                let n: f64 = p.sample(&mut rng);
                if n >= 1.0 {
                    break n as usize;
                }
            },
            _ => unreachable!(),
        };
        let mut objects = Vec::with_capacity(len);
        let mut zs = Vec::with_capacity(len);
        for _ in 0..len {
            let c = categorical(&mut rng, &theta, 1.0);
            let o = categorical(&mut rng, &phi_true[c], 1.0);
            zs.push(c as u32);
            objects.push(o as u32);
        }
        scenes.push(Scene::new(id as u64, objects));
        theta_true.push(theta);
        assignments.push(zs);
    }

    let corpus = Corpus {
        vocabulary: params.vocab,
        scenes,
        truth_k: Some(params.k),
    };
    let truth = GroundTruth {
        k: params.k,
        phi_true,
        theta_true,
        assignments,
    };
    Ok((corpus, truth))
}

/// A corpus whose contexts own disjoint blocks of ten objects: scenes of
/// context h draw uniformly from objects `10h .. 10h + 9` only.
pub fn separable_corpus(
    contexts: usize,
    scenes_per_context: usize,
    scene_len: usize,
    seed: u64,
) -> Corpus {
    let mut rng = seeded(seed);
    let mut scenes = Vec::with_capacity(contexts * scenes_per_context);
    for h in 0..contexts {
        for _ in 0..scenes_per_context {
            let objects = (0..scene_len)
                .map(|_| (h * 10 + rng.random_range(0..10)) as u32)
                .collect();
            scenes.push(Scene::new(scenes.len() as u64, objects));
        }
    }
    Corpus {
        vocabulary: Vocabulary::new(contexts.max(1) * 10).expect("non-empty vocabulary"),
        scenes,
        truth_k: Some(contexts),
    }
}
