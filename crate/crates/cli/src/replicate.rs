use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use cinet::dataset::{build_pairs, save_pairs, Split};
use cinet::incremental::{
    run_stream, sweep_csv, sweep_increment, trace_csv, EntropyRule, IncrementPolicy,
};
use cinet::io::atomic_write;
use cinet::lda::{gibbs_fit, sample_corpus, save_corpus, system_entropy, Corpus};
use cinet::rng::derive_seed;
use cinet::rnn::{checkpoint, metrics_csv};
use cinet::Result;

use crate::{cooc, fit_classifier, predictions_csv, NetArgs, PairArgs, StreamArgs};

#[derive(Args)]
pub(crate) struct ReplicatePaper {
    #[command(flatten)]
    pairs: PairArgs,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    stream: StreamArgs,
    /// Gibbs fits per k0 in the probability sweeps.
    #[arg(long, default_value_t = 5)]
    fits: usize,
    /// Largest k0 in the probability sweeps.
    #[arg(long, default_value_t = 10)]
    sweep_k0_max: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    test_accuracy: f64,
    stopping_epoch: usize,
    best_epoch: usize,
    stream_final_k0: Option<usize>,
    stream_final_entropy: f64,
    single_context_entropy: f64,
}

/// Held-out corpus with `k` contexts, drawn from a seed stream disjoint from
/// the pair set's.
fn held_out(args: &ReplicatePaper, k: usize) -> Result<Corpus> {
    let cfg = args.pairs.config(args.seed);
    let (corpus, _) =
        sample_corpus(&cfg.generate_params(k, derive_seed(args.seed, &[u64::MAX - 1, k as u64]))?)?;
    Ok(corpus)
}

pub(crate) fn run(args: ReplicatePaper) -> Result<()> {
    fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    let cfg = args.pairs.config(args.seed);
    let priors = cfg.priors();

    let set = build_pairs(&cfg)?;
    save_pairs(&set, &dir.join("pairs.jsonl"))?;
    let (model, history) = fit_classifier(&set, &args.net, false, derive_seed(args.seed, &[1]))?;
    checkpoint::save(&model, &dir.join("cinet.json"))?;
    atomic_write(&dir.join("metrics.csv"), metrics_csv(&history).as_bytes())?;
    let (test_accuracy, preds) = predictions_csv(&set, Split::Test, &model)?;
    atomic_write(&dir.join("predictions.csv"), preds.as_bytes())?;

    let k0s: Vec<usize> = (1..=args.sweep_k0_max).collect();
    let mut five = None;
    for k in [5usize, 9] {
        let corpus = held_out(&args, k)?;
        save_corpus(&corpus, &dir.join(format!("corpus_k{k}.jsonl")))?;
        let points = sweep_increment(
            &corpus,
            &model,
            &k0s,
            args.fits,
            cfg.gibbs_iterations,
            priors,
            derive_seed(args.seed, &[2, k as u64]),
        )?;
        atomic_write(
            &dir.join(format!("sweep_k{k}.csv")),
            sweep_csv(&points).as_bytes(),
        )?;
        if k == 5 {
            five = Some(corpus);
        }
    }
    let corpus = five.expect("k = 5 corpus generated above");
    let schedule = args
        .stream
        .schedule(priors, None, derive_seed(args.seed, &[3]));
    let policies = [
        ("trace.csv", IncrementPolicy::cinet(model)),
        (
            "trace_entropy_rule.csv",
            IncrementPolicy::EntropyRule(EntropyRule::default()),
        ),
        ("trace_oracle.csv", IncrementPolicy::Oracle { truth_k: 5 }),
    ];
    let mut summary_stream = None;
    for (name, policy) in &policies {
        let (lda, trace) = run_stream(
            &corpus.scenes,
            corpus.vocabulary,
            args.stream.initial_k0,
            policy,
            &schedule,
        )?;
        atomic_write(&dir.join(name), trace_csv(&trace).as_bytes())?;
        if summary_stream.is_none() {
            summary_stream = Some((trace.final_k0(), system_entropy(&lda, schedule.rho)));
        }
    }
    let (stream_final_k0, stream_final_entropy) = summary_stream.expect("three policies ran");

    let single = gibbs_fit(
        &corpus,
        1,
        cfg.gibbs_iterations,
        priors,
        derive_seed(args.seed, &[4]),
    )?;
    let truth = gibbs_fit(
        &corpus,
        5,
        cfg.gibbs_iterations,
        priors,
        derive_seed(args.seed, &[5]),
    )?;
    atomic_write(
        &dir.join("cooc.csv"),
        cooc::cooc_csv(cfg.vocab_size, Some(&truth)).as_bytes(),
    )?;

    let summary = Summary {
        test_accuracy,
        stopping_epoch: history.stopping_epoch,
        best_epoch: history.best_epoch,
        stream_final_k0,
        stream_final_entropy,
        single_context_entropy: system_entropy(&single, schedule.rho),
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    atomic_write(&dir.join("summary.json"), json.as_bytes())?;
    println!(
        "test accuracy {test_accuracy:.4}; artifacts in {}",
        dir.display()
    );
    Ok(())
}
