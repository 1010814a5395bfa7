use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Scene, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::{categorical, seeded, SeededRng};

/// Symmetric Dirichlet priors of the fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    /// Scene-context prior.
    pub alpha: f64,
    /// Context-object prior.
    pub beta: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 0.01,
        }
    }
}

impl Priors {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite())
        {
            return Err(Error::Config(format!(
                "priors must be positive (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Collapsed-Gibbs LDA state: tokens, their context assignments and the
/// count tables kept in sync with them.
#[derive(Debug, Clone)]
pub struct LdaModel {
    pub(crate) vocab: Vocabulary,
    pub(crate) priors: Priors,
    pub(crate) k0: usize,
    pub(crate) scene_ids: Vec<u64>,
    pub(crate) tokens: Vec<Vec<u32>>,
    pub(crate) assignments: Vec<Vec<u32>>,
    /// k0 x V: tokens of object o assigned to context c.
    pub(crate) n_co: Vec<Vec<u64>>,
    /// S x k0: tokens of scene s assigned to context c.
    pub(crate) n_sc: Vec<Vec<u64>>,
    pub(crate) n_c: Vec<u64>,
    pub(crate) rng_seed: u64,
    pub(crate) rng: SeededRng,
}

impl PartialEq for LdaModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.priors == other.priors
            && self.k0 == other.k0
            && self.scene_ids == other.scene_ids
            && self.tokens == other.tokens
            && self.assignments == other.assignments
            && self.n_co == other.n_co
            && self.n_sc == other.n_sc
            && self.n_c == other.n_c
    }
}

/// Fits an LDA model with `k0` contexts: uniform random initial assignments
/// followed by `iterations` full collapsed-Gibbs sweeps.
pub fn gibbs_fit(
    corpus: &Corpus,
    k0: usize,
    iterations: usize,
    priors: Priors,
    seed: u64,
) -> Result<LdaModel> {
    if corpus.scenes.is_empty() || corpus.num_tokens() == 0 {
        return Err(Error::InvalidInput(
            "cannot fit LDA on an empty corpus".into(),
        ));
    }
    if iterations == 0 {
        return Err(Error::Config("Gibbs iterations must be at least 1".into()));
    }
    corpus.validate()?;
    let mut model = LdaModel::empty(corpus.vocabulary, k0, priors, seed)?;
    for scene in &corpus.scenes {
        model.push_scene(scene);
    }
    model.sweep(iterations);
    Ok(model)
}

impl LdaModel {
    /// A model with `k0` contexts and no scenes yet.
    pub fn empty(vocab: Vocabulary, k0: usize, priors: Priors, seed: u64) -> Result<Self> {
        if k0 == 0 {
            return Err(Error::Config("context count k0 must be at least 1".into()));
        }
        priors.validate()?;
        Ok(Self {
            vocab,
            priors,
            k0,
            scene_ids: Vec::new(),
            tokens: Vec::new(),
            assignments: Vec::new(),
            n_co: vec![vec![0; vocab.size()]; k0],
            n_sc: Vec::new(),
            n_c: vec![0; k0],
            rng_seed: seed,
            rng: seeded(seed),
        })
    }

    /// A model over `corpus` with the given context of every token, without
    /// any sampling.
    pub fn from_assignments(
        corpus: &Corpus,
        k0: usize,
        priors: Priors,
        assignments: &[Vec<u32>],
    ) -> Result<Self> {
        corpus.validate()?;
        let mut model = Self::empty(corpus.vocabulary, k0, priors, 0)?;
        if assignments.len() != corpus.scenes.len() {
            return Err(Error::Shape {
                expected: corpus.scenes.len(),
                actual: assignments.len(),
            });
        }
        for (scene, zs) in corpus.scenes.iter().zip(assignments) {
            if zs.len() != scene.len() {
                return Err(Error::Shape {
                    expected: scene.len(),
                    actual: zs.len(),
                });
            }
            let mut row = vec![0u64; k0];
            for (&o, &z) in scene.objects.iter().zip(zs) {
                let c = z as usize;
                if c >= k0 {
                    return Err(Error::InvalidInput(format!(
                        "scene {} assigns context {c} of {k0}",
                        scene.id
                    )));
                }
                model.n_co[c][o as usize] += 1;
                model.n_c[c] += 1;
                row[c] += 1;
            }
            model.scene_ids.push(scene.id);
            model.tokens.push(scene.objects.clone());
            model.assignments.push(zs.clone());
            model.n_sc.push(row);
        }
        Ok(model)
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn vocabulary(&self) -> Vocabulary {
        self.vocab
    }

    pub fn priors(&self) -> Priors {
        self.priors
    }

    pub fn num_scenes(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_tokens(&self) -> u64 {
        self.n_c.iter().sum()
    }

    pub fn n_co(&self) -> &[Vec<u64>] {
        &self.n_co
    }

    pub fn n_sc(&self) -> &[Vec<u64>] {
        &self.n_sc
    }

    pub fn n_c(&self) -> &[u64] {
        &self.n_c
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.assignments
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// The scenes the model has absorbed, in insertion order.
    pub fn scenes(&self) -> impl Iterator<Item = Scene> + '_ {
        self.scene_ids
            .iter()
            .zip(&self.tokens)
            .map(|(id, objs)| Scene::new(*id, objs.clone()))
    }

    /// Appends a scene with uniformly random initial assignments.
    fn push_scene(&mut self, scene: &Scene) {
        let s = self.tokens.len();
        let mut row = vec![0u64; self.k0];
        let mut zs = Vec::with_capacity(scene.len());
        for &o in &scene.objects {
            let c = self.rng.random_range(0..self.k0);
            self.n_co[c][o as usize] += 1;
            self.n_c[c] += 1;
            row[c] += 1;
            zs.push(c as u32);
        }
        debug_assert_eq!(s, self.n_sc.len());
        self.scene_ids.push(scene.id);
        self.tokens.push(scene.objects.clone());
        self.assignments.push(zs);
        self.n_sc.push(row);
    }

    /// Runs `sweeps` full collapsed-Gibbs passes over every token.
    pub fn sweep(&mut self, sweeps: usize) {
        let k0 = self.k0;
        let Priors { alpha, beta } = self.priors;
        let v_beta = self.vocab.size() as f64 * beta;
        let mut weights = vec![0.0; k0];
        for _ in 0..sweeps {
            for s in 0..self.tokens.len() {
                for i in 0..self.tokens[s].len() {
                    let o = self.tokens[s][i] as usize;
                    let old = self.assignments[s][i] as usize;
                    self.n_co[old][o] -= 1;
                    self.n_c[old] -= 1;
                    self.n_sc[s][old] -= 1;

                    let mut total = 0.0;
                    for (c, w) in weights.iter_mut().enumerate() {
                        *w = (self.n_co[c][o] as f64 + beta) / (self.n_c[c] as f64 + v_beta)
                            * (self.n_sc[s][c] as f64 + alpha);
                        total += *w;
                    }
                    let new = categorical(&mut self.rng, &weights, total);

                    self.n_co[new][o] += 1;
                    self.n_c[new] += 1;
                    self.n_sc[s][new] += 1;
                    self.assignments[s][i] = new as u32;
                }
            }
        }
    }

    /// Absorbs a new scene and re-samples all tokens, warm-started from the
    /// current assignments. Empty scenes leave the model untouched.
    pub fn update_with_scene(&mut self, scene: &Scene, sweeps: usize) -> Result<()> {
        scene.check_vocab(self.vocab)?;
        if scene.is_empty() {
            return Ok(());
        }
        self.push_scene(scene);
        self.sweep(sweeps);
        Ok(())
    }

    /// Adds one empty context. Existing assignments and counts are kept;
    /// later sweeps may move tokens into it.
    pub fn add_context(&mut self) {
        self.k0 += 1;
        self.n_co.push(vec![0; self.vocab.size()]);
        self.n_c.push(0);
        for row in &mut self.n_sc {
            row.push(0);
        }
    }

    /// Discards the current assignments and refits from scratch with the same
    /// number of contexts.
    pub fn refit(&self, iterations: usize, seed: u64) -> Result<LdaModel> {
        let corpus = Corpus::new(self.vocab, self.scenes().collect(), None)?;
        gibbs_fit(&corpus, self.k0, iterations, self.priors, seed)
    }

    /// Recounts every table from the assignments and compares with the
    /// stored ones.
    pub fn counts_consistent(&self) -> bool {
        let mut n_co = vec![vec![0u64; self.vocab.size()]; self.k0];
        let mut n_sc = vec![vec![0u64; self.k0]; self.tokens.len()];
        let mut n_c = vec![0u64; self.k0];
        for (s, (toks, zs)) in self.tokens.iter().zip(&self.assignments).enumerate() {
            if toks.len() != zs.len() {
                return false;
            }
            for (&o, &z) in toks.iter().zip(zs) {
                let z = z as usize;
                if z >= self.k0 || o as usize >= self.vocab.size() {
                    return false;
                }
                n_co[z][o as usize] += 1;
                n_sc[s][z] += 1;
                n_c[z] += 1;
            }
        }
        n_co == self.n_co && n_sc == self.n_sc && n_c == self.n_c
    }
}
