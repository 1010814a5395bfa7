mod cooc;
mod replicate;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cinet::dataset::{build_pairs, load_pairs, save_pairs, InputMode, PairConfig, PairSet, Split};
use cinet::incremental::{
    run_stream, sweep_csv, sweep_increment, trace_csv, EntropyRule, IncrementPolicy, Schedule,
};
use cinet::io::{atomic_write, FORMAT_VERSION};
use cinet::lda::{
    gibbs_fit, load_corpus, load_model, sample_corpus, save_corpus, save_model, GenerateParams,
    Priors, SceneLength, Vocabulary,
};
use cinet::rnn::{
    checkpoint, evaluate, metrics_csv, train, train_on, CellKind, RnnConfig, RnnModel,
};
use cinet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cinet",
    version,
    about = "Learn when an incremental LDA scene model needs another context"
)]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// File format version every loaded file must carry.
    #[arg(long, global = true, default_value_t = FORMAT_VERSION)]
    format_version: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic scene corpus from the LDA generative process.
    GenCorpus(GenCorpus),
    /// Fit an LDA model to a corpus with collapsed Gibbs sampling.
    FitLda(FitLda),
    /// Build labelled training pairs from many synthetic corpora.
    BuildPairs(BuildPairs),
    /// Train the increment classifier.
    TrainCinet(TrainCinet),
    /// Score the classifier on one split of a pair file.
    EvalCinet(EvalCinet),
    /// Increment probability across k0 for one corpus.
    Sweep(SweepCmd),
    /// Stream a corpus scene by scene, letting a policy add contexts.
    RunStream(RunStream),
    /// Context-by-object assignment counts of a fitted model.
    ExportCooc(ExportCooc),
    /// Run the whole desk-scale pipeline into one directory.
    ReplicatePaper(replicate::ReplicatePaper),
}

#[derive(Args, Clone, Copy)]
struct PriorArgs {
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
}

impl PriorArgs {
    fn priors(self) -> Priors {
        Priors {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

#[derive(Args)]
struct GenCorpus {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 30)]
    scenes: usize,
    #[arg(long, default_value_t = 100)]
    vocab: usize,
    /// Objects per scene.
    #[arg(long, default_value_t = 100, conflicts_with = "poisson_len")]
    scene_len: usize,
    /// Draw scene lengths from a Poisson with this mean instead.
    #[arg(long)]
    poisson_len: Option<f64>,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitLda {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    k0: usize,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
pub(crate) struct PairArgs {
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 6)]
    k_max: usize,
    #[arg(long, default_value_t = 4)]
    corpora_per_k: usize,
    /// Extra corpora per k reserved for the test split.
    #[arg(long, default_value_t = 2)]
    test_corpora_per_k: usize,
    #[arg(long, default_value_t = 30)]
    scenes: usize,
    #[arg(long, default_value_t = 20)]
    scene_len: usize,
    #[arg(long, default_value_t = 100)]
    vocab: usize,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 4)]
    seeds_per_positive: usize,
    #[arg(long, default_value_t = InputMode::ContextGivenObject)]
    mode: InputMode,
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
}

impl PairArgs {
    pub(crate) fn config(&self, seed: u64) -> PairConfig {
        PairConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            corpora_per_k: self.corpora_per_k,
            test_corpora_per_k: self.test_corpora_per_k,
            num_scenes: self.scenes,
            scene_len: SceneLength::Fixed(self.scene_len),
            vocab_size: self.vocab,
            alpha: self.priors.alpha,
            beta: self.priors.beta,
            gibbs_iterations: self.iterations,
            seeds_per_positive: self.seeds_per_positive,
            mode: self.mode,
            validation_fraction: self.validation_fraction,
            seed,
        }
    }
}

#[derive(Args)]
struct BuildPairs {
    #[command(flatten)]
    pairs: PairArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CellArg {
    Vanilla,
    Gru,
    Lstm,
}

impl From<CellArg> for CellKind {
    fn from(c: CellArg) -> Self {
        match c {
            CellArg::Vanilla => CellKind::Vanilla,
            CellArg::Gru => CellKind::Gru,
            CellArg::Lstm => CellKind::Lstm,
        }
    }
}

#[derive(Args, Clone)]
pub(crate) struct NetArgs {
    #[arg(long, value_enum, default_value_t = CellArg::Lstm)]
    cell: CellArg,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 50)]
    hidden: usize,
    #[arg(long, default_value_t = 3e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 40)]
    patience: usize,
    #[arg(long, default_value_t = 300)]
    max_epochs: usize,
}

impl NetArgs {
    pub(crate) fn config(&self, input_dim: usize, seed: u64) -> RnnConfig {
        RnnConfig {
            hidden: self.hidden,
            l2_lambda: self.l2,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            early_stop_patience: self.patience,
            max_epochs: self.max_epochs,
            ..RnnConfig::new(self.cell.into(), self.layers, input_dim)
        }
    }
}

#[derive(Args)]
struct TrainCinet {
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    net: NetArgs,
    /// Stop early on the test split rather than the validation split.
    #[arg(long)]
    stop_on_test: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
}

#[derive(Args)]
struct EvalCinet {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Per-pair predictions CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1)]
    k0_min: usize,
    #[arg(long, default_value_t = 10)]
    k0_max: usize,
    #[arg(long, default_value_t = 5)]
    fits: usize,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Cinet,
    Entropy,
    Oracle,
}

#[derive(Args, Clone)]
pub(crate) struct StreamArgs {
    #[arg(long, default_value_t = 1)]
    initial_k0: usize,
    #[arg(long, default_value_t = 50)]
    sweeps_per_scene: usize,
    #[arg(long, default_value_t = 5)]
    decide_every: usize,
    #[arg(long, default_value_t = 50)]
    settle_sweeps: usize,
    #[arg(long)]
    cold_refit: bool,
    #[arg(long, default_value_t = 64)]
    max_k0: usize,
    #[arg(long, default_value_t = cinet::lda::DEFAULT_RHO)]
    rho: f64,
}

impl StreamArgs {
    pub(crate) fn schedule(&self, priors: Priors, mode: Option<InputMode>, seed: u64) -> Schedule {
        Schedule {
            sweeps_per_scene: self.sweeps_per_scene,
            decide_every: self.decide_every,
            settle_sweeps: self.settle_sweeps,
            cold_refit: self.cold_refit,
            max_k0: self.max_k0,
            rho: self.rho,
            mode,
            priors,
            seed,
        }
    }
}

#[derive(Args)]
struct RunStream {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Cinet)]
    policy: PolicyArg,
    /// Classifier checkpoint, required by the cinet policy.
    #[arg(long, required_if_eq("policy", "cinet"))]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Input encoding; defaults to the classifier's training encoding.
    #[arg(long)]
    mode: Option<InputMode>,
    /// Context count for the oracle policy; defaults to the corpus header.
    #[arg(long)]
    truth_k: Option<usize>,
    #[arg(long, default_value_t = EntropyRule::default().threshold)]
    rule_threshold: f64,
    #[arg(long, default_value_t = EntropyRule::default().window)]
    rule_window: usize,
    #[arg(long, default_value_t = EntropyRule::default().trial_sweeps)]
    rule_trial_sweeps: usize,
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    priors: PriorArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also save the final LDA model.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportCooc {
    #[arg(long)]
    corpus: PathBuf,
    /// Fitted model; may be omitted only for an empty corpus.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "this build reads format version {FORMAT_VERSION}, not {}",
            cli.format_version
        )));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(a),
        Command::FitLda(a) => fit_lda(a),
        Command::BuildPairs(a) => {
            let set = build_pairs(&a.pairs.config(a.seed))?;
            save_pairs(&set, &a.out)
        }
        Command::TrainCinet(a) => train_cinet(a),
        Command::EvalCinet(a) => eval_cinet(a),
        Command::Sweep(a) => sweep(a),
        Command::RunStream(a) => stream(a),
        Command::ExportCooc(a) => export_cooc(a),
        Command::ReplicatePaper(a) => replicate::run(a),
    }
}

fn gen_corpus(a: GenCorpus) -> Result<()> {
    let scene_len = match a.poisson_len {
        Some(lambda) => SceneLength::Poisson(lambda),
        None => SceneLength::Fixed(a.scene_len),
    };
    let (corpus, _) = sample_corpus(&GenerateParams {
        k: a.k,
        num_scenes: a.scenes,
        vocab: Vocabulary::new(a.vocab)?,
        scene_len,
        alpha: a.priors.alpha,
        beta: a.priors.beta,
        seed: a.seed,
    })?;
    save_corpus(&corpus, &a.out)
}

fn fit_lda(a: FitLda) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let model = gibbs_fit(&corpus, a.k0, a.iterations, a.priors.priors(), a.seed)?;
    save_model(&model, &a.out)
}

pub(crate) fn fit_classifier(
    set: &PairSet,
    net: &NetArgs,
    stop_on_test: bool,
    seed: u64,
) -> Result<(RnnModel, cinet::rnn::TrainHistory)> {
    let cfg = net.config(set.input_dim(), seed);
    if stop_on_test {
        let (mut model, history) =
            train_on(&set.split(Split::Train), &set.split(Split::Test), &cfg)?;
        model.input_mode = Some(set.mode);
        Ok((model, history))
    } else {
        train(set, &cfg)
    }
}

fn train_cinet(a: TrainCinet) -> Result<()> {
    let set = load_pairs(&a.pairs)?;
    let (model, history) = fit_classifier(&set, &a.net, a.stop_on_test, a.seed)?;
    log::info!(
        "stopped after epoch {}, kept epoch {}",
        history.stopping_epoch,
        history.best_epoch
    );
    checkpoint::save(&model, &a.out)?;
    if let Some(path) = &a.metrics {
        atomic_write(path, metrics_csv(&history).as_bytes())?;
    }
    Ok(())
}

pub(crate) fn check_compatible(model: &RnnModel, set: &PairSet) -> Result<()> {
    if model.config.input_dim != set.input_dim() {
        return Err(Error::Shape {
            expected: model.config.input_dim,
            actual: set.input_dim(),
        });
    }
    match model.input_mode {
        Some(m) if m != set.mode => Err(Error::Config(format!(
            "classifier was trained on {m} inputs but the pairs are {}",
            set.mode
        ))),
        _ => Ok(()),
    }
}

pub(crate) fn predictions_csv(
    set: &PairSet,
    split: Split,
    model: &RnnModel,
) -> Result<(f64, String)> {
    let pairs = set.split(split);
    let eval = evaluate(model, &pairs)?;
    let mut out = String::from("truth_k,k0,corpus_seed,gibbs_seed,y,prob\n");
    for (p, prob) in pairs.iter().zip(&eval.probabilities) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.meta.truth_k, p.meta.k0, p.meta.corpus_seed, p.meta.gibbs_seed, p.y, prob
        )
        .unwrap();
    }
    Ok((eval.accuracy, out))
}

fn eval_cinet(a: EvalCinet) -> Result<()> {
    let set = load_pairs(&a.pairs)?;
    let model = checkpoint::load(&a.model)?;
    check_compatible(&model, &set)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Validation => Split::Validation,
        SplitArg::Test => Split::Test,
    };
    let (accuracy, csv) = predictions_csv(&set, split, &model)?;
    println!("accuracy {accuracy:.4} on {} pairs", set.split(split).len());
    if let Some(path) = &a.out {
        atomic_write(path, csv.as_bytes())?;
    }
    Ok(())
}

fn sweep(a: SweepCmd) -> Result<()> {
    if a.k0_min == 0 || a.k0_min > a.k0_max {
        return Err(Error::Config(format!(
            "empty k0 range {}..={}",
            a.k0_min, a.k0_max
        )));
    }
    let corpus = load_corpus(&a.corpus)?;
    let model = checkpoint::load(&a.model)?;
    let k0s: Vec<usize> = (a.k0_min..=a.k0_max).collect();
    let points = sweep_increment(
        &corpus,
        &model,
        &k0s,
        a.fits,
        a.iterations,
        a.priors.priors(),
        a.seed,
    )?;
    atomic_write(&a.out, sweep_csv(&points).as_bytes())
}

fn stream(a: RunStream) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let policy = match a.policy {
        PolicyArg::Cinet => {
            let path = a.model.as_deref().expect("clap enforces --model for cinet");
            IncrementPolicy::Cinet {
                model: Box::new(checkpoint::load(path)?),
                threshold: a.threshold,
            }
        }
        PolicyArg::Entropy => IncrementPolicy::EntropyRule(EntropyRule {
            threshold: a.rule_threshold,
            window: a.rule_window,
            trial_sweeps: a.rule_trial_sweeps,
        }),
        PolicyArg::Oracle => {
            let truth_k = a.truth_k.or(corpus.truth_k).ok_or_else(|| {
                Error::Config(
                    "oracle policy needs --truth-k or a corpus header with truth_k".into(),
                )
            })?;
            IncrementPolicy::Oracle { truth_k }
        }
    };
    let schedule = a.stream.schedule(a.priors.priors(), a.mode, a.seed);
    let (model, trace) = run_stream(
        &corpus.scenes,
        corpus.vocabulary,
        a.stream.initial_k0,
        &policy,
        &schedule,
    )?;
    if trace.hit_cap {
        log::warn!("policy asked for more than {} contexts", schedule.max_k0);
    }
    atomic_write(&a.out, trace_csv(&trace).as_bytes())?;
    if let Some(path) = &a.model_out {
        save_model(&model, path)?;
    }
    Ok(())
}

fn export_cooc(a: ExportCooc) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let vocab = corpus.vocabulary.size();
    let csv = if corpus.scenes.is_empty() {
        cooc::cooc_csv(vocab, None)
    } else {
        let path = a
            .model
            .as_deref()
            .ok_or_else(|| Error::Config("--model is required for a non-empty corpus".into()))?;
        let model = load_model(path)?;
        check_covers(&model, &corpus, path)?;
        cooc::cooc_csv(vocab, Some(&model))
    };
    atomic_write(&a.out, csv.as_bytes())
}

fn check_covers(
    model: &cinet::lda::LdaModel,
    corpus: &cinet::lda::Corpus,
    path: &Path,
) -> Result<()> {
    let same = model.vocabulary() == corpus.vocabulary
        && model.num_scenes() == corpus.scenes.len()
        && model.scenes().zip(&corpus.scenes).all(|(a, b)| &a == b);
    if same {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "model {} was not fitted on this corpus",
            path.display()
        )))
    }
}
