use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grad::{bce, gradients};
use super::{AdamState, RnnConfig, RnnModel};
use crate::dataset::{PairSet, Split, TrainingPair};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch, L2 term included.
    pub train_loss: f64,
    /// Accuracy of the predictions made while training through the epoch.
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub stopping_epoch: usize,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub probabilities: Vec<f64>,
}

/// Predicts "increment" when the probability is at least one half.
pub fn evaluate(model: &RnnModel, pairs: &[&TrainingPair]) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput(
            "cannot evaluate on an empty pair set".into(),
        ));
    }
    let probabilities = pairs
        .par_iter()
        .map(|p| model.forward(&p.x))
        .collect::<Result<Vec<f64>>>()?;
    let correct = probabilities
        .iter()
        .zip(pairs)
        .filter(|(prob, p)| u8::from(**prob >= 0.5) == p.y)
        .count();
    Ok(Evaluation {
        accuracy: correct as f64 / pairs.len() as f64,
        probabilities,
    })
}

/// Trains on the train split with early stopping on the validation split.
pub fn train(pairs: &PairSet, cfg: &RnnConfig) -> Result<(RnnModel, TrainHistory)> {
    if pairs.input_dim() != cfg.input_dim {
        return Err(Error::Shape {
            expected: cfg.input_dim,
            actual: pairs.input_dim(),
        });
    }
    let (model, history) = train_on(
        &pairs.split(Split::Train),
        &pairs.split(Split::Validation),
        cfg,
    )?;
    Ok((
        RnnModel {
            input_mode: Some(pairs.mode),
            ..model
        },
        history,
    ))
}

/// Shuffled mini-batch Adam. After every epoch the validation accuracy is
/// measured; training stops once it has failed to improve for
/// `early_stop_patience` epochs (equal accuracy with lower validation loss
/// counts as an improvement) and the best snapshot is returned.
pub fn train_on(
    train: &[&TrainingPair],
    val: &[&TrainingPair],
    cfg: &RnnConfig,
) -> Result<(RnnModel, TrainHistory)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput(
            "training and validation splits must be non-empty".into(),
        ));
    }
    let mut model = RnnModel::new(cfg.clone())?;
    for p in train.iter().chain(val) {
        model.check_input(&p.x)?;
    }
    let mut adam = AdamState::new(&model);
    let mut rng = seeded(derive_seed(cfg.seed, &[0x7a1]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let val_labels: Vec<u8> = val.iter().map(|p| p.y).collect();

    let mut history = TrainHistory::default();
    let mut best = (model.clone(), f64::NEG_INFINITY, f64::INFINITY);
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[Vec<f64>], u8)> = chunk
                .iter()
                .map(|&i| (train[i].x.as_slice(), train[i].y))
                .collect();
            let labels: Vec<u8> = batch.iter().map(|b| b.1).collect();
            let (grads, preds) = gradients(&model, &batch, cfg.l2_lambda)?;
            let batch_loss = bce(&preds, &labels)? + cfg.l2_lambda * model.params.weight_sq_sum();
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    learning_rate: cfg.learning_rate,
                });
            }
            loss_sum += batch_loss * batch.len() as f64;
            correct += preds
                .iter()
                .zip(&labels)
                .filter(|(p, y)| u8::from(**p >= 0.5) == **y)
                .count();
            adam.step(&mut model, &grads, cfg.learning_rate);
        }

        let eval = evaluate(&model, val)?;
        let val_loss = bce(&eval.probabilities, &val_labels)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_acc: eval.accuracy,
            val_loss,
        });
        history.stopping_epoch = epoch;
        log::debug!(
            "epoch {epoch}: loss {:.4} train acc {:.3} val acc {:.3}",
            loss_sum / train.len() as f64,
            correct as f64 / train.len() as f64,
            eval.accuracy
        );

        if eval.accuracy > best.1 || (eval.accuracy == best.1 && val_loss < best.2) {
            best = (model.clone(), eval.accuracy, val_loss);
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    Ok((best.0, history))
}

/// `epoch,train_loss,train_acc,val_acc` rows.
pub fn metrics_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
    for r in &history.records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.train_loss, r.train_acc, r.val_acc
        ));
    }
    out
}
