//! Python bindings for `spsketch`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spsketch::analysis::{self, BernsteinParams};
use spsketch::matrix::{self, PowerIterationConfig};
use spsketch::select::{self, EntryStream};
use spsketch::sparsifier;
use spsketch::{DenseMatrix, SketchError, SparseSketch};

fn err(e: SketchError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn power_cfg(n: usize, seed: Option<u64>) -> PowerIterationConfig {
    let mut cfg = PowerIterationConfig::for_dimension(n);
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg
}

/// Dense square matrix built from a list of rows.
#[pyclass(name = "DenseMatrix", module = "spsketch", from_py_object)]
#[derive(Clone)]
pub struct PyDenseMatrix {
    inner: DenseMatrix,
}

#[pymethods]
impl PyDenseMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        DenseMatrix::from_rows(&rows)
            .map(|inner| PyDenseMatrix { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        DenseMatrix::identity(n)
            .map(|inner| PyDenseMatrix { inner })
            .map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    #[pyo3(signature = (seed=None))]
    fn spectral_norm(&self, seed: Option<u64>) -> PyResult<f64> {
        matrix::spectral_norm(&self.inner, &power_cfg(self.inner.n(), seed))
            .map(|e| e.value)
            .map_err(err)
    }

    #[pyo3(signature = (seed=None))]
    fn stable_rank(&self, seed: Option<u64>) -> PyResult<f64> {
        matrix::stable_rank(&self.inner, &power_cfg(self.inner.n(), seed)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DenseMatrix(n={})", self.inner.n())
    }
}

/// Sparse sketch as 0-based `(row, col, value)` triples.
#[pyclass(name = "SparseSketch", module = "spsketch", from_py_object)]
#[derive(Clone)]
pub struct PySparseSketch {
    inner: SparseSketch,
}

#[pymethods]
impl PySparseSketch {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn s(&self) -> u64 {
        self.inner.s
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn triples(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .triples
            .iter()
            .map(|e| (e.row, e.col, e.value))
            .collect()
    }

    fn to_dense(&self) -> PyDenseMatrix {
        PyDenseMatrix {
            inner: self.inner.to_dense(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "SparseSketch(n={}, s={}, nnz={})",
            self.inner.n,
            self.inner.s,
            self.inner.nnz()
        )
    }
}

#[pyfunction]
fn threshold_zero(a: &PyDenseMatrix, epsilon: f64) -> PyResult<PyDenseMatrix> {
    sparsifier::threshold_zero(&a.inner, epsilon)
        .map(|inner| PyDenseMatrix { inner })
        .map_err(err)
}

#[pyfunction]
fn sample_size(n: usize, frob_norm_sq: f64, epsilon: f64) -> PyResult<u64> {
    sparsifier::sample_size(n, frob_norm_sq, epsilon).map_err(err)
}

#[pyfunction]
fn lemma4_sample_size(n: usize, frob_norm_sq: f64, epsilon: f64, delta: f64) -> PyResult<u64> {
    analysis::lemma4_sample_size(n, frob_norm_sq, epsilon, delta).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, epsilon, seed=0, samples=None))]
fn sparsify(
    a: &PyDenseMatrix,
    epsilon: f64,
    seed: u64,
    samples: Option<u64>,
) -> PyResult<PySparseSketch> {
    let sk = match samples {
        Some(s) => sparsifier::sparsify_with_samples(&a.inner, epsilon, s, seed),
        None => sparsifier::sparsify(&a.inner, epsilon, seed),
    };
    sk.map(|inner| PySparseSketch { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, epsilon_rel, seed=0))]
fn sparsify_relative(a: &PyDenseMatrix, epsilon_rel: f64, seed: u64) -> PyResult<PySparseSketch> {
    sparsifier::sparsify_relative(&a.inner, epsilon_rel, seed, &power_cfg(a.inner.n(), None))
        .map(|inner| PySparseSketch { inner })
        .map_err(err)
}

/// One-pass sampling over every entry of `a`, row-major.
#[pyfunction]
#[pyo3(signature = (a, epsilon, s, seed=0))]
fn one_pass_sparsify(a: &PyDenseMatrix, epsilon: f64, s: u64, seed: u64) -> PyResult<PySparseSketch> {
    let mut stream = EntryStream::from_matrix(&a.inner);
    select::one_pass_sparsify(&mut stream, epsilon, s, seed)
        .map(|inner| PySparseSketch { inner })
        .map_err(err)
}

#[pyfunction]
fn bernstein_tail(s: u64, tau: f64, rho_sq: f64, gamma: f64, n: usize) -> PyResult<f64> {
    analysis::bernstein_tail(&BernsteinParams {
        s,
        tau,
        rho_sq,
        gamma,
        n,
    })
    .map_err(err)
}

#[pyfunction]
fn measure_error(a: &PyDenseMatrix, sketch: &PySparseSketch) -> PyResult<f64> {
    analysis::measure_error(&a.inner, &sketch.inner, &power_cfg(a.inner.n(), None)).map_err(err)
}

#[pyfunction]
fn verify_zero_mean(a_hat: &PyDenseMatrix) -> PyResult<bool> {
    analysis::verify_zero_mean(&a_hat.inner).map_err(err)
}

/// Exact second moments as a JSON string.
#[pyfunction]
fn exact_second_moment(a_hat: &PyDenseMatrix) -> PyResult<String> {
    let d = analysis::exact_second_moment(&a_hat.inner).map_err(err)?;
    serde_json::to_string(&d).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Experiment report as a JSON string.
#[pyfunction]
#[pyo3(signature = (a, epsilon, trials, base_seed=0))]
fn run_experiment(
    a: &PyDenseMatrix,
    epsilon: f64,
    trials: usize,
    base_seed: u64,
) -> PyResult<String> {
    let r = analysis::run_experiment(&a.inner, epsilon, trials, base_seed).map_err(err)?;
    let mut buf = Vec::new();
    r.write_json(&mut buf).map_err(err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn spsketch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDenseMatrix>()?;
    m.add_class::<PySparseSketch>()?;
    m.add_function(wrap_pyfunction!(threshold_zero, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(lemma4_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify_relative, m)?)?;
    m.add_function(wrap_pyfunction!(one_pass_sparsify, m)?)?;
    m.add_function(wrap_pyfunction!(bernstein_tail, m)?)?;
    m.add_function(wrap_pyfunction!(measure_error, m)?)?;
    m.add_function(wrap_pyfunction!(verify_zero_mean, m)?)?;
    m.add_function(wrap_pyfunction!(exact_second_moment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
