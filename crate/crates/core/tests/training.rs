use cinet::dataset::{InputMode, PairMeta, Split, TrainingPair};
use cinet::rnn::{checkpoint, evaluate, metrics_csv, train_on, CellKind, RnnConfig};
use cinet::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn random_pairs(n: usize, dim: usize, seed: u64) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=4);
            TrainingPair {
                x: (0..len)
                    .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                    .collect(),
                y: rng.random_range(0..=1),
                meta: PairMeta {
                    truth_k: len,
                    k0: len,
                    corpus_seed: i as u64,
                    gibbs_seed: 0,
                },
                split: Split::Train,
            }
        })
        .collect()
}

fn config(cell: CellKind) -> RnnConfig {
    RnnConfig {
        hidden: 16,
        learning_rate: 1e-2,
        batch_size: 5,
        early_stop_patience: 1000,
        max_epochs: 200,
        ..RnnConfig::new(cell, 1, 6)
    }
}

#[test]
fn memorizes_a_tiny_set() {
    let pairs = random_pairs(20, 6, 1);
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    for cell in CellKind::ALL {
        let (model, history) = train_on(&refs, &refs, &config(cell)).unwrap();
        assert_eq!(history.stopping_epoch, 200);
        assert_eq!(evaluate(&model, &refs).unwrap().accuracy, 1.0, "{cell}");
    }
}

#[test]
fn training_is_deterministic() {
    let pairs = random_pairs(30, 6, 2);
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    let cfg = RnnConfig {
        max_epochs: 5,
        ..config(CellKind::Lstm)
    };
    let (a, ha) = train_on(&refs[..25], &refs[25..], &cfg).unwrap();
    let (b, hb) = train_on(&refs[..25], &refs[25..], &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(metrics_csv(&ha), metrics_csv(&hb));
}

#[test]
fn history_epochs_increase_and_best_is_kept() {
    let pairs = random_pairs(30, 6, 3);
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    let cfg = RnnConfig {
        max_epochs: 40,
        early_stop_patience: 3,
        ..config(CellKind::Gru)
    };
    let (model, history) = train_on(&refs[..20], &refs[20..], &cfg).unwrap();
    assert!(history.records.windows(2).all(|w| w[0].epoch < w[1].epoch));
    let best = history
        .records
        .iter()
        .find(|r| r.epoch == history.best_epoch)
        .unwrap();
    assert_eq!(
        evaluate(&model, &refs[20..]).unwrap().accuracy,
        best.val_acc
    );
    assert!(history.records.iter().all(|r| r.val_acc <= best.val_acc));
    assert!(history.stopping_epoch <= history.best_epoch + 3);
}

#[test]
fn evaluation_edge_cases() {
    let pairs = random_pairs(4, 6, 4);
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    let model = cinet::rnn::RnnModel::zeroed(config(CellKind::Vanilla)).unwrap();
    assert!(matches!(evaluate(&model, &[]), Err(Error::InvalidInput(_))));
    // A zero network outputs exactly one half, which counts as "increment".
    let eval = evaluate(&model, &refs).unwrap();
    assert!(eval.probabilities.iter().all(|&p| p == 0.5));
    let positives = pairs.iter().filter(|p| p.y == 1).count();
    assert_eq!(eval.accuracy, positives as f64 / 4.0);

    let narrow = random_pairs(2, 3, 5);
    let err = evaluate(&model, &narrow.iter().collect::<Vec<_>>()).unwrap_err();
    assert!(matches!(
        err,
        Error::Shape {
            expected: 6,
            actual: 3
        }
    ));
}

#[test]
fn checkpoint_round_trip() {
    let pairs = random_pairs(10, 6, 6);
    let refs: Vec<&TrainingPair> = pairs.iter().collect();
    let cfg = RnnConfig {
        max_epochs: 3,
        layers: 2,
        ..config(CellKind::Lstm)
    };
    let (mut model, _) = train_on(&refs, &refs, &cfg).unwrap();
    model.input_mode = Some(InputMode::Concat);
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("net.json");
    checkpoint::save(&model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.params, model.params);
    assert_eq!(back.input_mode, Some(InputMode::Concat));
    for p in &pairs {
        assert_eq!(back.forward(&p.x).unwrap(), model.forward(&p.x).unwrap());
    }
}
