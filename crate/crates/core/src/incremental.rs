//! Streaming context modeling: absorb scenes one at a time, periodically ask
//! a policy whether another context is needed, and log the decisions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{encode_input, InputMode};
use crate::error::{Error, Result};
use crate::lda::{
    gibbs_fit, system_entropy, Corpus, LdaModel, Priors, Scene, Vocabulary, DEFAULT_RHO,
};
use crate::rng::derive_seed;
use crate::rnn::RnnModel;

/// Entropy-threshold baseline: add a context once the entropy has levelled
/// off and a trial extra context would lower it noticeably.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRule {
    /// Relative-change threshold used for both tests.
    pub threshold: f64,
    /// Number of decision points the flatness test looks back over.
    pub window: usize,
    /// Gibbs sweeps spent on the trial model.
    pub trial_sweeps: usize,
}

impl Default for EntropyRule {
    fn default() -> Self {
        Self {
            threshold: 0.02,
            window: 1,
            trial_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub enum IncrementPolicy {
    /// Fire when the classifier's probability reaches `threshold`.
    Cinet {
        model: Box<RnnModel>,
        threshold: f64,
    },
    EntropyRule(EntropyRule),
    /// Fire while fewer than `truth_k` contexts exist.
    Oracle {
        truth_k: usize,
    },
}

impl IncrementPolicy {
    pub fn cinet(model: RnnModel) -> Self {
        IncrementPolicy::Cinet {
            model: Box::new(model),
            threshold: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IncrementPolicy::Cinet { threshold, .. } if !(*threshold > 0.0 && *threshold < 1.0) => {
                Err(Error::Config(format!(
                    "CINet threshold must be in (0, 1), got {threshold}"
                )))
            }
            IncrementPolicy::EntropyRule(r) if r.window == 0 => Err(Error::Config(
                "entropy rule window must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Gibbs sweeps over all tokens after each new scene.
    pub sweeps_per_scene: usize,
    /// A decision is taken every this many scenes, and after the last one.
    pub decide_every: usize,
    /// Extra sweeps after a context is added.
    pub settle_sweeps: usize,
    /// Refit from scratch instead of warm-starting after an increment; the
    /// refit runs `settle_sweeps` iterations.
    pub cold_refit: bool,
    pub max_k0: usize,
    pub rho: f64,
    /// Encoding fed to CINet; defaults to the one it was trained on.
    pub mode: Option<InputMode>,
    pub priors: Priors,
    pub seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            sweeps_per_scene: 50,
            decide_every: 5,
            settle_sweeps: 50,
            cold_refit: false,
            max_k0: 64,
            rho: DEFAULT_RHO,
            mode: None,
            priors: Priors::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub scenes_seen: usize,
    /// Context count after the decision.
    pub k0: usize,
    pub increment_prob: f64,
    /// System entropy after the decision (and settling, if it fired).
    pub entropy: f64,
    pub decision: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IncrementTrace {
    pub records: Vec<TraceRecord>,
    /// Set when the policy asked for a context beyond `max_k0`.
    pub hit_cap: bool,
}

impl IncrementTrace {
    pub fn final_k0(&self) -> Option<usize> {
        self.records.last().map(|r| r.k0)
    }
}

/// Whether the entropy rule fires, given entropies at past decision points
/// (oldest first, current last) and the relative entropy drop a trial extra
/// context achieved. Too little history never fires.
pub fn rule_fires(history: &[f64], rule: &EntropyRule, trial_drop: f64) -> bool {
    if rule.window == 0 || history.len() < rule.window + 1 {
        return false;
    }
    let old = history[history.len() - 1 - rule.window];
    let now = history[history.len() - 1];
    let recent_drop = if old > 0.0 { (old - now) / old } else { 0.0 };
    recent_drop < rule.threshold && trial_drop > rule.threshold
}

/// Evaluates the entropy rule on `model`; the trial context is added to a
/// copy, so `model` is untouched. Returns the decision and the trial's
/// relative entropy drop.
pub fn rule_decide(model: &LdaModel, rule: &EntropyRule, history: &[f64], rho: f64) -> (bool, f64) {
    if history.len() < rule.window + 1 {
        return (false, 0.0);
    }
    let now = system_entropy(model, rho);
    let mut trial = model.clone();
    trial.add_context();
    trial.sweep(rule.trial_sweeps);
    let after = system_entropy(&trial, rho);
    let drop = if now > 0.0 { (now - after) / now } else { 0.0 };
    (rule_fires(history, rule, drop), drop)
}

fn cinet_mode(model: &RnnModel, schedule: &Schedule, vocab: Vocabulary) -> Result<InputMode> {
    let mode = match (schedule.mode, model.input_mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "CINet was trained on {b} inputs but the stream requests {a}"
            )))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => InputMode::ContextGivenObject,
    };
    let dim = mode.input_dim(vocab.size());
    if dim != model.config.input_dim {
        return Err(Error::Shape {
            expected: model.config.input_dim,
            actual: dim,
        });
    }
    Ok(mode)
}

/// Streams `scenes` into an LDA model that starts with `initial_k0`
/// contexts, consulting `policy` at every decision point. At most one
/// context is added per decision.
pub fn run_stream(
    scenes: &[Scene],
    vocab: Vocabulary,
    initial_k0: usize,
    policy: &IncrementPolicy,
    schedule: &Schedule,
) -> Result<(LdaModel, IncrementTrace)> {
    policy.validate()?;
    if schedule.decide_every == 0 {
        return Err(Error::Config("decision cadence must be at least 1".into()));
    }
    if initial_k0 > schedule.max_k0 {
        return Err(Error::Config(format!(
            "initial k0 {initial_k0} exceeds the cap {}",
            schedule.max_k0
        )));
    }
    let mode = match policy {
        IncrementPolicy::Cinet { model, .. } => Some(cinet_mode(model, schedule, vocab)?),
        _ => None,
    };
    let mut model = LdaModel::empty(vocab, initial_k0, schedule.priors, schedule.seed)?;
    let mut trace = IncrementTrace::default();
    let mut history: Vec<f64> = Vec::new();

    for (i, scene) in scenes.iter().enumerate() {
        model.update_with_scene(scene, schedule.sweeps_per_scene)?;
        let seen = i + 1;
        if seen % schedule.decide_every != 0 && seen != scenes.len() {
            continue;
        }
        let entropy_now = system_entropy(&model, schedule.rho);
        history.push(entropy_now);
        let (prob, fire) = match policy {
            IncrementPolicy::Cinet {
                model: net,
                threshold,
            } => {
                let x = encode_input(&model.prob_view(), mode.expect("mode set for CINet"));
                let p = net.forward(&x)?;
                (p, p >= *threshold)
            }
            IncrementPolicy::EntropyRule(rule) => {
                let (fire, _) = rule_decide(&model, rule, &history, schedule.rho);
                (if fire { 1.0 } else { 0.0 }, fire)
            }
            IncrementPolicy::Oracle { truth_k } => {
                let fire = model.k0() < *truth_k;
                (if fire { 1.0 } else { 0.0 }, fire)
            }
        };
        let mut decided = false;
        if fire {
            if model.k0() < schedule.max_k0 {
                model.add_context();
                if schedule.cold_refit {
                    let seed = derive_seed(schedule.seed, &[seen as u64]);
                    model = model.refit(schedule.settle_sweeps.max(1), seed)?;
                } else {
                    model.sweep(schedule.settle_sweeps);
                }
                decided = true;
            } else {
                trace.hit_cap = true;
            }
        }
        let entropy = if decided {
            let h = system_entropy(&model, schedule.rho);
            *history.last_mut().expect("pushed above") = h;
            h
        } else {
            entropy_now
        };
        trace.records.push(TraceRecord {
            scenes_seen: seen,
            k0: model.k0(),
            increment_prob: prob,
            entropy,
            decision: decided,
        });
    }
    Ok((model, trace))
}

/// Runs a stream under the oracle policy until `truth_k` contexts exist.
/// Convenience for comparison curves.
pub fn oracle_stream(
    scenes: &[Scene],
    vocab: Vocabulary,
    truth_k: usize,
    schedule: &Schedule,
) -> Result<(LdaModel, IncrementTrace)> {
    run_stream(
        scenes,
        vocab,
        1,
        &IncrementPolicy::Oracle { truth_k },
        schedule,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k0: usize,
    pub mean_prob: f64,
    pub std_prob: f64,
}

/// CINet's increment probability for fresh LDA fits of `corpus` at each
/// k0, averaged over `fits_per_k0` Gibbs seeds.
pub fn sweep_increment(
    corpus: &Corpus,
    cinet: &RnnModel,
    k0_range: &[usize],
    fits_per_k0: usize,
    gibbs_iterations: usize,
    priors: Priors,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if k0_range.is_empty() || fits_per_k0 == 0 {
        return Err(Error::Config(
            "sweep needs at least one k0 and one fit per k0".into(),
        ));
    }
    let mode = cinet_mode(cinet, &Schedule::default(), corpus.vocabulary)?;
    k0_range
        .iter()
        .map(|&k0| {
            let probs = (0..fits_per_k0)
                .into_par_iter()
                .map(|j| {
                    let model = gibbs_fit(
                        corpus,
                        k0,
                        gibbs_iterations,
                        priors,
                        derive_seed(seed, &[k0 as u64, j as u64]),
                    )?;
                    cinet.forward(&encode_input(&model.prob_view(), mode))
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = probs.len() as f64;
            let mean = probs.iter().sum::<f64>() / n;
            let var = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
            Ok(SweepPoint {
                k0,
                mean_prob: mean,
                std_prob: var.sqrt(),
            })
        })
        .collect()
}

pub fn trace_csv(trace: &IncrementTrace) -> String {
    let mut out = String::from("scenes_seen,k0,increment_prob,entropy,decision\n");
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenes_seen,
            r.k0,
            r.increment_prob,
            r.entropy,
            u8::from(r.decision)
        ));
    }
    out
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("k0,mean_prob,std_prob\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.k0, p.mean_prob, p.std_prob));
    }
    out
}
