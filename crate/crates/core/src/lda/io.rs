//! Corpus JSON-lines files and LDA model checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, LdaModel, Priors, Scene, Vocabulary};
use crate::error::{Error, Result};
use crate::io::{atomic_write, check_version, parse_error, parse_line, read_lines, FORMAT_VERSION};
use crate::rng::seeded;

#[derive(Debug, Serialize, Deserialize)]
struct CorpusHeader {
    vocab_size: usize,
    truth_k: Option<usize>,
}

pub fn corpus_to_jsonl(corpus: &Corpus) -> Result<String> {
    let mut out = serde_json::to_string(&CorpusHeader {
        vocab_size: corpus.vocabulary.size(),
        truth_k: corpus.truth_k,
    })?;
    out.push('\n');
    for scene in &corpus.scenes {
        out.push_str(&serde_json::to_string(scene)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    atomic_write(path, corpus_to_jsonl(corpus)?.as_bytes())
}

/// Reads a corpus file. Without a header line the vocabulary is sized to
/// the largest object ID seen.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let lines = read_lines(path)?;
    let mut header: Option<CorpusHeader> = None;
    let mut scenes = Vec::new();
    for (idx, (line_no, line)) in lines.iter().enumerate() {
        let value: serde_json::Value = parse_line(path, *line_no, line)?;
        if idx == 0 && value.get("vocab_size").is_some() {
            header = Some(parse_line(path, *line_no, line)?);
            continue;
        }
        let scene: Scene = parse_line(path, *line_no, line)?;
        if let Some(h) = &header {
            if let Some(o) = scene.objects.iter().find(|o| **o as usize >= h.vocab_size) {
                return Err(parse_error(
                    path,
                    *line_no,
                    format!(
                        "scene {} has object {o} outside vocabulary of size {}",
                        scene.id, h.vocab_size
                    ),
                ));
            }
        }
        scenes.push(scene);
    }
    let (vocab_size, truth_k) = match header {
        Some(h) => (h.vocab_size, h.truth_k),
        None => {
            let max = scenes.iter().flat_map(|s| &s.objects).max().copied();
            (max.map_or(1, |m| m as usize + 1), None)
        }
    };
    Corpus::new(Vocabulary::new(vocab_size)?, scenes, truth_k)
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    k0: usize,
    alpha: f64,
    beta: f64,
    vocab_size: usize,
    n_co: Vec<Vec<u64>>,
    n_sc: Vec<Vec<u64>>,
    assignments: Vec<Vec<u32>>,
    scene_ids: Vec<u64>,
    scenes: Vec<Vec<u32>>,
    rng_seed: u64,
    rng_word_pos: u128,
}

pub fn model_to_json(model: &LdaModel) -> Result<String> {
    let ckpt = Checkpoint {
        format_version: FORMAT_VERSION,
        k0: model.k0,
        alpha: model.priors.alpha,
        beta: model.priors.beta,
        vocab_size: model.vocab.size(),
        n_co: model.n_co.clone(),
        n_sc: model.n_sc.clone(),
        assignments: model.assignments.clone(),
        scene_ids: model.scene_ids.clone(),
        scenes: model.tokens.clone(),
        rng_seed: model.rng_seed,
        rng_word_pos: model.rng.get_word_pos(),
    };
    Ok(serde_json::to_string(&ckpt)?)
}

pub fn save_model(model: &LdaModel, path: &Path) -> Result<()> {
    let mut s = model_to_json(model)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn model_from_json(json: &str) -> Result<LdaModel> {
    let ckpt: Checkpoint = serde_json::from_str(json)?;
    check_version(ckpt.format_version)?;
    let mut model = LdaModel::empty(
        Vocabulary::new(ckpt.vocab_size)?,
        ckpt.k0,
        Priors {
            alpha: ckpt.alpha,
            beta: ckpt.beta,
        },
        ckpt.rng_seed,
    )?;
    let shapes_ok = ckpt.n_co.len() == ckpt.k0
        && ckpt.n_co.iter().all(|r| r.len() == ckpt.vocab_size)
        && ckpt.n_sc.len() == ckpt.scenes.len()
        && ckpt.n_sc.iter().all(|r| r.len() == ckpt.k0)
        && ckpt.scene_ids.len() == ckpt.scenes.len()
        && ckpt.assignments.len() == ckpt.scenes.len();
    if !shapes_ok {
        return Err(Error::InvalidInput(
            "checkpoint tables have inconsistent shapes".into(),
        ));
    }
    model.n_c = ckpt.n_co.iter().map(|r| r.iter().sum()).collect();
    model.n_co = ckpt.n_co;
    model.n_sc = ckpt.n_sc;
    model.assignments = ckpt.assignments;
    model.scene_ids = ckpt.scene_ids;
    model.tokens = ckpt.scenes;
    model.rng = seeded(ckpt.rng_seed);
    model.rng.set_word_pos(ckpt.rng_word_pos);
    if !model.counts_consistent() {
        return Err(Error::InvalidInput(
            "checkpoint count tables disagree with its assignments".into(),
        ));
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<LdaModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
