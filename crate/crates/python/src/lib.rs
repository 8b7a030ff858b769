//! Python bindings. Matrices cross the boundary as nested lists, reports as
//! dictionaries with the same layout as the CLI's JSON.

use std::str::FromStr;

use num_complex::Complex64;
use posmap_core::catalog::{self, ChoiParams, Generator};
use posmap_core::cli;
use posmap_core::coherence::{self, CoherenceVector, Hermitian3, MapMatrix};
use posmap_core::extremality;
use posmap_core::linalg::{CMat3, Mat8, Vec8};
use posmap_core::positivity;
use posmap_core::semigroup::{self, SemigroupError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn semigroup_err(e: SemigroupError) -> PyErr {
    match e {
        SemigroupError::OrbitSearchFailed { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn rows_of(m: &Mat8) -> Vec<Vec<f64>> {
    (0..8).map(|i| (0..8).map(|j| m[(i, j)]).collect()).collect()
}

/// Real 8x8 matrix `x` of the map `S_x`.
#[pyclass(name = "MapMatrix", module = "posmap", frozen)]
struct PyMapMatrix {
    inner: MapMatrix,
}

#[pymethods]
impl PyMapMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        if rows.len() != 8 || rows.iter().any(|r| r.len() != 8) {
            return Err(PyValueError::new_err("expected 8 rows of 8 numbers"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PyValueError::new_err("entries must be finite"));
        }
        Ok(Self {
            inner: MapMatrix::new(Mat8::from_fn(|i, j| rows[i][j])),
        })
    }

    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: MapMatrix::identity(),
        }
    }

    #[staticmethod]
    fn zero() -> Self {
        Self { inner: MapMatrix::zero() }
    }

    /// A named generator such as `"choi:t=0.25"` or `"adunitary:seed=3"`.
    #[staticmethod]
    fn generator(name: &str) -> PyResult<Self> {
        let g = Generator::from_str(name).map_err(value_err)?;
        Ok(Self { inner: g.matrix() })
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.matrix())
    }

    fn operator_norm(&self) -> f64 {
        self.inner.operator_norm()
    }

    fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    fn apply(&self, a: PyRef<'_, PyHermitian3>) -> PyHermitian3 {
        PyHermitian3 {
            inner: self.inner.apply(&a.inner),
        }
    }

    fn __matmul__(&self, other: PyRef<'_, PyMapMatrix>) -> Self {
        Self {
            inner: self.inner.clone() * other.inner.clone(),
        }
    }

    fn __add__(&self, other: PyRef<'_, PyMapMatrix>) -> Self {
        Self {
            inner: self.inner.clone() + other.inner.clone(),
        }
    }

    fn __sub__(&self, other: PyRef<'_, PyMapMatrix>) -> Self {
        Self {
            inner: self.inner.clone() - other.inner.clone(),
        }
    }

    fn __mul__(&self, s: f64) -> Self {
        Self {
            inner: self.inner.clone() * s,
        }
    }

    fn __rmul__(&self, s: f64) -> Self {
        self.__mul__(s)
    }

    fn __repr__(&self) -> String {
        format!("MapMatrix(norm={:.6})", self.inner.operator_norm())
    }
}

/// A 3x3 complex self-adjoint matrix.
#[pyclass(name = "Hermitian3", module = "posmap", frozen)]
struct PyHermitian3 {
    inner: Hermitian3,
}

#[pymethods]
impl PyHermitian3 {
    /// Accepts a 3x3 nested list of (complex or real) numbers.
    #[new]
    fn new(entries: Vec<Vec<Complex64>>) -> PyResult<Self> {
        if entries.len() != 3 || entries.iter().any(|r| r.len() != 3) {
            return Err(PyValueError::new_err("expected a 3x3 nested list"));
        }
        let m = CMat3::from_fn(|i, j| entries[i][j]);
        Ok(Self {
            inner: Hermitian3::new(m).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn diag(d: [f64; 3]) -> Self {
        Self {
            inner: Hermitian3::diag(d),
        }
    }

    fn entries(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn min_eigenvalue(&self) -> f64 {
        self.inner.min_eigenvalue()
    }

    fn __repr__(&self) -> String {
        format!("Hermitian3({:?})", self.entries())
    }
}

/// Coordinates `(a0, ā)` in the normalised Gell-Mann basis.
#[pyclass(name = "CoherenceVector", module = "posmap", frozen)]
struct PyCoherenceVector {
    inner: CoherenceVector,
}

#[pymethods]
impl PyCoherenceVector {
    #[new]
    fn new(a0: f64, avec: [f64; 8]) -> Self {
        Self {
            inner: CoherenceVector::new(a0, avec),
        }
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.inner.a0
    }

    #[getter]
    fn avec(&self) -> Vec<f64> {
        self.inner.avec.iter().copied().collect()
    }

    fn __repr__(&self) -> String {
        format!("CoherenceVector(a0={}, avec={:?})", self.inner.a0, self.avec())
    }
}

fn map(inner: MapMatrix) -> PyMapMatrix {
    PyMapMatrix { inner }
}

#[pyfunction]
fn gellmann_basis() -> Vec<PyHermitian3> {
    (0..9)
        .map(|mu| PyHermitian3 {
            inner: Hermitian3::basis_element(mu),
        })
        .collect()
}

#[pyfunction]
fn to_coherence(a: PyRef<'_, PyHermitian3>) -> PyCoherenceVector {
    PyCoherenceVector {
        inner: coherence::to_coherence(&a.inner),
    }
}

#[pyfunction]
fn from_coherence(v: PyRef<'_, PyCoherenceVector>) -> PyHermitian3 {
    PyHermitian3 {
        inner: coherence::from_coherence(&v.inner),
    }
}

#[pyfunction]
fn choi_matrix(t: f64) -> PyResult<PyMapMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(PyValueError::new_err("t must lie in [0, 1]"));
    }
    Ok(map(catalog::choi_matrix(t)))
}

/// Matrix of the generalised Choi map with parameters `a, b, c`.
#[pyfunction]
fn choi_map(a: f64, b: f64, c: f64) -> PyResult<PyMapMatrix> {
    let p = ChoiParams::new(a, b, c).map_err(value_err)?;
    catalog::choi_map(&p).map(map).map_err(value_err)
}

#[pyfunction]
fn s0_matrix() -> PyMapMatrix {
    map(catalog::s0_matrix())
}

#[pyfunction]
fn transpose_matrix() -> PyMapMatrix {
    map(catalog::transpose_matrix())
}

#[pyfunction]
fn adunitary(seed: u64) -> PyMapMatrix {
    map(catalog::adunitary(seed))
}

#[pyfunction]
#[pyo3(signature = (x, tol = positivity::DEFAULT_TOL, budget = positivity::DEFAULT_BUDGET, seed = 0))]
fn is_positive(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, tol: f64, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inner = x.inner.clone();
    let r = py
        .detach(|| positivity::is_positive(&inner, tol, budget, seed))
        .map_err(value_err)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (x, budget = positivity::DEFAULT_BUDGET, seed = 0))]
fn min_expectation(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inner = x.inner.clone();
    let r = py
        .detach(|| positivity::min_expectation(&inner, budget, seed))
        .map_err(value_err)?;
    to_dict(py, &r)
}

#[pyfunction]
fn kadison_schwarz_violation(x: PyRef<'_, PyMapMatrix>, a: PyRef<'_, PyHermitian3>) -> f64 {
    positivity::kadison_schwarz_violation(&x.inner, &a.inner)
}

#[pyfunction]
fn adjoint_rep(u: Vec<Vec<Complex64>>) -> PyResult<PyMapMatrix> {
    if u.len() != 3 || u.iter().any(|r| r.len() != 3) {
        return Err(PyValueError::new_err("expected a 3x3 nested list"));
    }
    let m = CMat3::from_fn(|i, j| u[i][j]);
    semigroup::adjoint_rep(&m).map(|g| map(MapMatrix::new(g))).map_err(semigroup_err)
}

#[pyfunction]
fn idempotent_of(py: Python<'_>, x: PyRef<'_, PyMapMatrix>) -> PyResult<Py<PyAny>> {
    let r = semigroup::idempotent_of(&x.inner, semigroup::PERIPHERAL_TOL).map_err(semigroup_err)?;
    to_dict(py, &r)
}

/// Idempotent, decomposition and unit singular value count in one dict.
#[pyfunction]
#[pyo3(signature = (x, tol = semigroup::Q_TOL))]
fn decompose(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, tol: f64) -> PyResult<Py<PyAny>> {
    let e = semigroup::idempotent_of(&x.inner, semigroup::PERIPHERAL_TOL).map_err(semigroup_err)?;
    let d = semigroup::decompose(&x.inner, &e, semigroup::DECOMPOSE_TOL).map_err(semigroup_err)?;
    let q = semigroup::q_index_of(&d, tol).map_err(semigroup_err)?;
    #[derive(Serialize)]
    struct Out<'a> {
        idempotent: &'a semigroup::IdempotentRecord,
        decomposition: &'a semigroup::Decomposition,
        q_index: &'a semigroup::QIndex,
    }
    to_dict(
        py,
        &Out {
            idempotent: &e,
            decomposition: &d,
            q_index: &q,
        },
    )
}

#[pyfunction]
#[pyo3(signature = (x, tol = semigroup::Q_TOL))]
fn q_index(x: PyRef<'_, PyMapMatrix>, tol: f64) -> PyResult<usize> {
    semigroup::q_index(&x.inner, tol).map(|q| q.index).map_err(semigroup_err)
}

#[pyfunction]
#[pyo3(signature = (x, budget = semigroup::DEFAULT_ORBIT_BUDGET, seed = 0))]
fn reduce_canonical(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inner = x.inner.clone();
    let r = py
        .detach(|| semigroup::reduce_canonical(&inner, budget, seed))
        .map_err(semigroup_err)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (x, tol = extremality::ACTIVE_TOL, budget = positivity::DEFAULT_BUDGET, seed = 0))]
fn extreme_in_lambda(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, tol: f64, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inner = x.inner.clone();
    let r = py
        .detach(|| extremality::extreme_in_lambda(&inner, tol, budget, seed))
        .map_err(value_err)?;
    to_dict(py, &r)
}

/// Active pairs as a list of `(m, n, value)` tuples.
#[pyfunction]
#[pyo3(signature = (x, tol = extremality::ACTIVE_TOL, budget = positivity::DEFAULT_BUDGET, seed = 0))]
fn active_pairs(
    py: Python<'_>,
    x: PyRef<'_, PyMapMatrix>,
    tol: f64,
    budget: usize,
    seed: u64,
) -> PyResult<Vec<(Vec<f64>, Vec<f64>, f64)>> {
    let inner = x.inner.clone();
    let a = py
        .detach(|| extremality::active_pairs(&inner, tol, budget, seed))
        .map_err(value_err)?;
    let v = |x: &Vec8| x.iter().copied().collect::<Vec<f64>>();
    Ok(a.pairs.iter().map(|p| (v(&p.m), v(&p.n), p.value)).collect())
}

#[pyfunction]
#[pyo3(signature = (x, budget = positivity::DEFAULT_BUDGET, seed = 0))]
fn classify_candidate(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inner = x.inner.clone();
    let r = py
        .detach(|| extremality::classify_candidate(&inner, budget, seed))
        .map_err(semigroup_err)?;
    to_dict(py, &r)
}

/// Positivity, idempotent, decomposition, candidate group and extremality.
#[pyfunction]
#[pyo3(signature = (x, tol = positivity::DEFAULT_TOL, budget = positivity::DEFAULT_BUDGET, seed = 0))]
fn pipeline(py: Python<'_>, x: PyRef<'_, PyMapMatrix>, tol: f64, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let inner = x.inner.clone();
    let r = py
        .detach(|| cli::classification_record(&inner, tol, budget, seed))
        .map_err(value_err)?;
    to_dict(py, &r)
}

#[pymodule]
fn posmap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMapMatrix>()?;
    m.add_class::<PyHermitian3>()?;
    m.add_class::<PyCoherenceVector>()?;
    m.add_function(wrap_pyfunction!(gellmann_basis, m)?)?;
    m.add_function(wrap_pyfunction!(to_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(from_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(choi_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(choi_map, m)?)?;
    m.add_function(wrap_pyfunction!(s0_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(transpose_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(adunitary, m)?)?;
    m.add_function(wrap_pyfunction!(is_positive, m)?)?;
    m.add_function(wrap_pyfunction!(min_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(kadison_schwarz_violation, m)?)?;
    m.add_function(wrap_pyfunction!(adjoint_rep, m)?)?;
    m.add_function(wrap_pyfunction!(idempotent_of, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(q_index, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_canonical, m)?)?;
    m.add_function(wrap_pyfunction!(extreme_in_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(active_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(classify_candidate, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    Ok(())
}
