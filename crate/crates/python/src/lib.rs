//! Python bindings: corpora, LDA models, pair sets, the classifier and the
//! streaming loop.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cinet::dataset::{self, PairConfig, Split};
use cinet::incremental::{self, EntropyRule, IncrementPolicy, Schedule};
use cinet::lda::{self, GenerateParams, Priors, Scene, SceneLength, Vocabulary};
use cinet::rnn::{self, checkpoint, CellKind, RnnConfig};
use cinet::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e @ Error::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(value: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

fn split_of(name: &str) -> PyResult<Split> {
    match name {
        "train" => Ok(Split::Train),
        "validation" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        other => Err(PyValueError::new_err(format!("unknown split {other:?}"))),
    }
}

#[pyclass(name = "Corpus", module = "pycinet")]
struct PyCorpus {
    inner: lda::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Scenes given as lists of object IDs; IDs are assigned in order.
    #[new]
    #[pyo3(signature = (scenes, vocab_size, truth_k=None))]
    fn new(scenes: Vec<Vec<u32>>, vocab_size: usize, truth_k: Option<usize>) -> PyResult<Self> {
        let scenes = scenes
            .into_iter()
            .enumerate()
            .map(|(i, objects)| Scene::new(i as u64, objects))
            .collect();
        let inner = lda::Corpus::new(Vocabulary::new(vocab_size).map_err(to_py)?, scenes, truth_k)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (k, num_scenes, vocab_size, scene_len=100, alpha=0.9, beta=0.01, seed=0))]
    fn generate(
        k: usize,
        num_scenes: usize,
        vocab_size: usize,
        scene_len: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let (inner, _) = lda::sample_corpus(&GenerateParams {
            k,
            num_scenes,
            vocab: Vocabulary::new(vocab_size).map_err(to_py)?,
            scene_len: SceneLength::Fixed(scene_len),
            alpha,
            beta,
            seed,
        })
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: lda::load_corpus(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        lda::save_corpus(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocabulary.size()
    }

    #[getter]
    fn truth_k(&self) -> Option<usize> {
        self.inner.truth_k
    }

    #[getter]
    fn scenes(&self) -> Vec<Vec<u32>> {
        self.inner
            .scenes
            .iter()
            .map(|s| s.objects.clone())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.scenes.len()
    }
}

#[pyclass(name = "LdaModel", module = "pycinet")]
struct PyLdaModel {
    inner: lda::LdaModel,
}

#[pymethods]
impl PyLdaModel {
    #[staticmethod]
    #[pyo3(signature = (corpus, k0, iterations=200, alpha=0.9, beta=0.01, seed=0))]
    fn fit(
        corpus: &PyCorpus,
        k0: usize,
        iterations: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = lda::gibbs_fit(&corpus.inner, k0, iterations, Priors { alpha, beta }, seed)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (vocab_size, k0, alpha=0.9, beta=0.01, seed=0))]
    fn empty(vocab_size: usize, k0: usize, alpha: f64, beta: f64, seed: u64) -> PyResult<Self> {
        let vocab = Vocabulary::new(vocab_size).map_err(to_py)?;
        let inner = lda::LdaModel::empty(vocab, k0, Priors { alpha, beta }, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: lda::load_model(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        lda::save_model(&self.inner, &path).map_err(to_py)
    }

    #[pyo3(signature = (objects, scene_id, sweeps=50))]
    fn update_with_scene(
        &mut self,
        objects: Vec<u32>,
        scene_id: u64,
        sweeps: usize,
    ) -> PyResult<()> {
        self.inner
            .update_with_scene(&Scene::new(scene_id, objects), sweeps)
            .map_err(to_py)
    }

    fn add_context(&mut self) {
        self.inner.add_context();
    }

    fn sweep(&mut self, sweeps: usize) {
        self.inner.sweep(sweeps);
    }

    #[getter]
    fn k0(&self) -> usize {
        self.inner.k0()
    }

    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        self.inner.prob_view().phi
    }

    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        self.inner.prob_view().theta
    }

    #[getter]
    fn c_given_o(&self) -> Vec<Vec<f64>> {
        self.inner.prob_view().c_given_o
    }

    #[getter]
    fn n_co(&self) -> Vec<Vec<u64>> {
        self.inner.n_co().to_vec()
    }

    #[pyo3(signature = (rho=lda::DEFAULT_RHO))]
    fn system_entropy(&self, rho: f64) -> f64 {
        lda::system_entropy(&self.inner, rho)
    }

    /// Classifier input for this model: one list per context.
    #[pyo3(signature = (mode="P_C"))]
    fn encode(&self, mode: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(dataset::encode_input(&self.inner.prob_view(), parse(mode)?))
    }
}

#[pyclass(name = "PairSet", module = "pycinet")]
struct PyPairSet {
    inner: dataset::PairSet,
}

#[pymethods]
impl PyPairSet {
    #[staticmethod]
    #[pyo3(signature = (
        k_min=1, k_max=6, corpora_per_k=4, test_corpora_per_k=2, num_scenes=30, scene_len=20,
        vocab_size=100, alpha=0.9, beta=0.01, gibbs_iterations=200, seeds_per_positive=4,
        mode="P_C", validation_fraction=0.1, seed=0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        k_min: usize,
        k_max: usize,
        corpora_per_k: usize,
        test_corpora_per_k: usize,
        num_scenes: usize,
        scene_len: usize,
        vocab_size: usize,
        alpha: f64,
        beta: f64,
        gibbs_iterations: usize,
        seeds_per_positive: usize,
        mode: &str,
        validation_fraction: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = PairConfig {
            k_min,
            k_max,
            corpora_per_k,
            test_corpora_per_k,
            num_scenes,
            scene_len: SceneLength::Fixed(scene_len),
            vocab_size,
            alpha,
            beta,
            gibbs_iterations,
            seeds_per_positive,
            mode: parse(mode)?,
            validation_fraction,
            seed,
        };
        Ok(Self {
            inner: dataset::build_pairs(&cfg).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dataset::load_pairs(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataset::save_pairs(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn split_size(&self, split: &str) -> PyResult<usize> {
        Ok(self.inner.split(split_of(split)?).len())
    }

    fn positive_fraction(&self) -> f64 {
        self.inner.positive_fraction()
    }

    fn __len__(&self) -> usize {
        self.inner.pairs.len()
    }
}

#[pyclass(name = "Cinet", module = "pycinet")]
struct PyCinet {
    inner: rnn::RnnModel,
}

#[pymethods]
impl PyCinet {
    /// An untrained network with seeded random weights.
    #[new]
    #[pyo3(signature = (input_dim, cell="lstm", layers=2, hidden=50, seed=0))]
    fn new(
        input_dim: usize,
        cell: &str,
        layers: usize,
        hidden: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cell: CellKind = parse(cell)?;
        let cfg = RnnConfig {
            hidden,
            seed,
            ..RnnConfig::new(cell, layers, input_dim)
        };
        Ok(Self {
            inner: rnn::RnnModel::new(cfg).map_err(to_py)?,
        })
    }

    /// Trains on the pair set's train split with early stopping on its
    /// validation split; returns the network and per-epoch records.
    #[staticmethod]
    #[pyo3(signature = (
        pairs, cell="lstm", layers=2, hidden=50, learning_rate=3e-3, l2_lambda=1e-3,
        batch_size=100, patience=40, max_epochs=300, seed=0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train<'py>(
        py: Python<'py>,
        pairs: &PyPairSet,
        cell: &str,
        layers: usize,
        hidden: usize,
        learning_rate: f64,
        l2_lambda: f64,
        batch_size: usize,
        patience: usize,
        max_epochs: usize,
        seed: u64,
    ) -> PyResult<(Self, Vec<Bound<'py, PyDict>>)> {
        let cfg = RnnConfig {
            hidden,
            learning_rate,
            l2_lambda,
            batch_size,
            early_stop_patience: patience,
            max_epochs,
            seed,
            ..RnnConfig::new(parse(cell)?, layers, pairs.inner.input_dim())
        };
        let (inner, history) = py
            .detach(|| rnn::train(&pairs.inner, &cfg))
            .map_err(to_py)?;
        let records = history
            .records
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("epoch", r.epoch)?;
                d.set_item("train_loss", r.train_loss)?;
                d.set_item("train_acc", r.train_acc)?;
                d.set_item("val_acc", r.val_acc)?;
                d.set_item("val_loss", r.val_loss)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok((Self { inner }, records))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: checkpoint::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, &path).map_err(to_py)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.forward(&x).map_err(to_py)
    }

    /// Accuracy on one split (`train`, `validation` or `test`).
    #[pyo3(signature = (pairs, split="test"))]
    fn evaluate(&self, pairs: &PyPairSet, split: &str) -> PyResult<f64> {
        let subset = pairs.inner.split(split_of(split)?);
        Ok(rnn::evaluate(&self.inner, &subset).map_err(to_py)?.accuracy)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.config.input_dim
    }

    #[getter]
    fn input_mode(&self) -> Option<String> {
        self.inner.input_mode.map(|m| m.to_string())
    }
}

/// Streams the corpus into a fresh LDA model under one policy (`cinet`,
/// `entropy` or `oracle`). Returns the final model and one dict per
/// decision point.
#[pyfunction]
#[pyo3(signature = (
    corpus, policy="cinet", model=None, threshold=0.5, truth_k=None, initial_k0=1,
    sweeps_per_scene=50, decide_every=5, settle_sweeps=50, max_k0=64, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn run_stream<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    policy: &str,
    model: Option<&PyCinet>,
    threshold: f64,
    truth_k: Option<usize>,
    initial_k0: usize,
    sweeps_per_scene: usize,
    decide_every: usize,
    settle_sweeps: usize,
    max_k0: usize,
    seed: u64,
) -> PyResult<(PyLdaModel, Vec<Bound<'py, PyDict>>)> {
    let policy = match policy {
        "cinet" => IncrementPolicy::Cinet {
            model: Box::new(
                model
                    .ok_or_else(|| PyValueError::new_err("the cinet policy needs a model"))?
                    .inner
                    .clone(),
            ),
            threshold,
        },
        "entropy" => IncrementPolicy::EntropyRule(EntropyRule::default()),
        "oracle" => IncrementPolicy::Oracle {
            truth_k: truth_k
                .or(corpus.inner.truth_k)
                .ok_or_else(|| PyValueError::new_err("the oracle policy needs truth_k"))?,
        },
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    };
    let c = &corpus.inner;
    let schedule = Schedule {
        sweeps_per_scene,
        decide_every,
        settle_sweeps,
        max_k0,
        seed,
        ..Schedule::default()
    };
    let (lda_model, trace) = py
        .detach(|| incremental::run_stream(&c.scenes, c.vocabulary, initial_k0, &policy, &schedule))
        .map_err(to_py)?;
    let records = trace
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scenes_seen", r.scenes_seen)?;
            d.set_item("k0", r.k0)?;
            d.set_item("increment_prob", r.increment_prob)?;
            d.set_item("entropy", r.entropy)?;
            d.set_item("decision", r.decision)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((PyLdaModel { inner: lda_model }, records))
}

/// Mean and standard deviation of the increment probability for fresh fits
/// at each k0, as `(k0, mean, std)` tuples.
#[pyfunction]
#[pyo3(signature = (corpus, model, k0s, fits_per_k0=5, iterations=200, alpha=0.9, beta=0.01, seed=0))]
#[allow(clippy::too_many_arguments)]
fn sweep_increment(
    py: Python<'_>,
    corpus: &PyCorpus,
    model: &PyCinet,
    k0s: Vec<usize>,
    fits_per_k0: usize,
    iterations: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> PyResult<Vec<(usize, f64, f64)>> {
    let points = py
        .detach(|| {
            incremental::sweep_increment(
                &corpus.inner,
                &model.inner,
                &k0s,
                fits_per_k0,
                iterations,
                Priors { alpha, beta },
                seed,
            )
        })
        .map_err(to_py)?;
    Ok(points
        .iter()
        .map(|p| (p.k0, p.mean_prob, p.std_prob))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (predictions, labels, l2_lambda=0.0, model=None))]
fn loss(
    predictions: Vec<f64>,
    labels: Vec<u8>,
    l2_lambda: f64,
    model: Option<&PyCinet>,
) -> PyResult<f64> {
    match model {
        Some(m) => rnn::loss(&predictions, &labels, &m.inner, l2_lambda).map_err(to_py),
        None => rnn::bce(&predictions, &labels).map_err(to_py),
    }
}

#[pyfunction]
#[pyo3(signature = (vocab_size, k0, rho=lda::DEFAULT_RHO))]
fn entropy_upper_bound(vocab_size: usize, k0: usize, rho: f64) -> f64 {
    lda::entropy_upper_bound(vocab_size, k0, rho)
}

#[pymodule]
fn pycinet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyLdaModel>()?;
    m.add_class::<PyPairSet>()?;
    m.add_class::<PyCinet>()?;
    m.add_function(wrap_pyfunction!(run_stream, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_increment, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_upper_bound, m)?)?;
    m.add("FORMAT_VERSION", cinet::io::FORMAT_VERSION)?;
    Ok(())
}
