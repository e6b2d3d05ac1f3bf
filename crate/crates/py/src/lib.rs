//! Python bindings for the descriptor-system library.
//!
//! Matrices cross the boundary as nested lists of numbers (anything
//! Python can turn into `complex`), row major; results come back the same
//! way. Every library failure raises `DescredError` with the library's
//! message. The `shift` keyword everywhere is the complex number `lambda`
//! making `A - lambda E` invertible; it is auto-selected when omitted.

use num_complex::Complex64;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use descred::{
    analyze_with, brute_force_identities, check_residual as check_residual_rs, consistency_space,
    matrix_index as matrix_index_rs, qw_decompose, qw_reconstruct, reduce_via_corange,
    reduce_via_range, shift as shift_rs, to_standard as to_standard_rs, CMatrix, PolynomialInput,
    RankTolerance, Side,
};

pyo3::create_exception!(descred_py, DescredError, PyException);

fn to_py_err(err: descred::Error) -> PyErr {
    DescredError::new_err(err.to_string())
}

type Rows = Vec<Vec<Complex64>>;

fn matrix_from_py(rows: &[Vec<Complex64>]) -> PyResult<CMatrix> {
    CMatrix::from_rows(rows).map_err(to_py_err)
}

fn matrix_to_py(m: &CMatrix) -> Rows {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
        .collect()
}

fn column_from_py(entries: &[Complex64]) -> PyResult<CMatrix> {
    CMatrix::column(entries).map_err(to_py_err)
}

fn tol_from(tol: Option<f64>) -> PyResult<RankTolerance> {
    match tol {
        None => Ok(RankTolerance::Machine),
        Some(value) => {
            let t = RankTolerance::Relative(value);
            t.validate().map_err(to_py_err)?;
            Ok(t)
        }
    }
}

fn side_from(text: &str) -> PyResult<Side> {
    match text {
        "range" => Ok(Side::Range),
        "corange" => Ok(Side::Corange),
        other => Err(DescredError::new_err(format!(
            "side must be \"range\" or \"corange\", got {other:?}"
        ))),
    }
}

/// `E x' = A x + B u` with square `E`, `A` and optional input matrix `B`.
#[pyclass(frozen, name = "DescriptorSystem")]
struct PySystem {
    inner: descred::DescriptorSystem,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (e, a, b=None))]
    fn new(e: Rows, a: Rows, b: Option<Rows>) -> PyResult<Self> {
        let b = b.as_deref().map(matrix_from_py).transpose()?;
        let inner = descred::DescriptorSystem::new(matrix_from_py(&e)?, matrix_from_py(&a)?, b)
            .map_err(to_py_err)?;
        Ok(PySystem { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn e(&self) -> Rows {
        matrix_to_py(self.inner.e())
    }

    #[getter]
    fn a(&self) -> Rows {
        matrix_to_py(self.inner.a())
    }

    #[getter]
    fn b(&self) -> Option<Rows> {
        self.inner.b().map(matrix_to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "DescriptorSystem(n={}, m={})",
            self.inner.n(),
            self.inner.m()
        )
    }
}

/// Index, rank sequence and consistency dimension of a regular pencil.
#[pyclass(frozen, name = "IndexReport")]
struct PyIndexReport {
    inner: descred::IndexReport,
}

#[pymethods]
impl PyIndexReport {
    /// The system index `k*`.
    #[getter]
    fn index(&self) -> usize {
        self.inner.k_star
    }

    /// Ranks of `F^0, F^1, ...`, ending one step past stabilization.
    #[getter]
    fn rank_sequence(&self) -> Vec<usize> {
        self.inner.rank_sequence.clone()
    }

    #[getter]
    fn consistency_dim(&self) -> usize {
        self.inner.consistency_dim
    }

    #[getter]
    fn is_pure(&self) -> bool {
        self.inner.is_pure
    }

    /// The shift the analysis ran at.
    #[getter]
    fn shift(&self) -> Complex64 {
        self.inner.lambda
    }

    fn __repr__(&self) -> String {
        format!(
            "IndexReport(index={}, rank_sequence={:?}, consistency_dim={}, is_pure={})",
            self.inner.k_star,
            self.inner.rank_sequence,
            self.inner.consistency_dim,
            self.inner.is_pure
        )
    }
}

/// Reduced shifted system `F~ z' = (I + shift F~) z` of order `rank(F^k)`,
/// with `x = lift z` and `z = proj x`.
#[pyclass(frozen, name = "ReducedSystem")]
struct PyReduced {
    inner: descred::ReducedSystem,
}

#[pymethods]
impl PyReduced {
    #[getter]
    fn f_tilde(&self) -> Rows {
        matrix_to_py(&self.inner.f_tilde)
    }

    #[getter]
    fn lift(&self) -> Rows {
        matrix_to_py(&self.inner.lift)
    }

    #[getter]
    fn proj(&self) -> Rows {
        matrix_to_py(&self.inner.proj)
    }

    #[getter]
    fn k_used(&self) -> usize {
        self.inner.k_used
    }

    /// Index of the reduced system: `max(k* - k_used, 0)`.
    #[getter]
    fn index(&self) -> usize {
        self.inner.index
    }

    #[getter]
    fn side(&self) -> String {
        self.inner.side.to_string()
    }

    #[getter]
    fn shift(&self) -> Complex64 {
        self.inner.lambda
    }

    fn __repr__(&self) -> String {
        format!(
            "ReducedSystem(order={}, k_used={}, index={}, side={:?})",
            self.inner.f_tilde.rows(),
            self.inner.k_used,
            self.inner.index,
            self.inner.side.to_string()
        )
    }
}

/// Explicit ODE `z' = A~ z` equivalent to the system on its consistency
/// space.
#[pyclass(frozen, name = "StandardSystem")]
struct PyStandard {
    inner: descred::StandardSystem,
}

#[pymethods]
impl PyStandard {
    #[getter]
    fn a_tilde(&self) -> Rows {
        matrix_to_py(&self.inner.a_tilde)
    }

    #[getter]
    fn lift(&self) -> Rows {
        matrix_to_py(&self.inner.lift)
    }

    #[getter]
    fn proj(&self) -> Rows {
        matrix_to_py(&self.inner.proj)
    }

    fn __repr__(&self) -> String {
        format!("StandardSystem(order={})", self.inner.a_tilde.rows())
    }
}

/// Slow/fast decoupling `x = lift1 z1 + lift2 z2` with `z1' = A~ z1 + B1~ u`
/// and the nilpotent chain `N~ z2' = z2 + B2~ u`.
#[pyclass(frozen, name = "QuasiWeierstrass")]
struct PyQw {
    inner: descred::QuasiWeierstrass,
}

#[pymethods]
impl PyQw {
    #[getter]
    fn a_tilde(&self) -> Rows {
        matrix_to_py(&self.inner.a_tilde)
    }

    #[getter]
    fn b1_tilde(&self) -> Rows {
        matrix_to_py(&self.inner.b1_tilde)
    }

    #[getter]
    fn n_tilde(&self) -> Rows {
        matrix_to_py(&self.inner.n_tilde)
    }

    #[getter]
    fn b2_tilde(&self) -> Rows {
        matrix_to_py(&self.inner.b2_tilde)
    }

    #[getter]
    fn lift1(&self) -> Rows {
        matrix_to_py(&self.inner.lift1)
    }

    #[getter]
    fn lift2(&self) -> Rows {
        matrix_to_py(&self.inner.lift2)
    }

    #[getter]
    fn proj1(&self) -> Rows {
        matrix_to_py(&self.inner.proj1)
    }

    #[getter]
    fn proj2(&self) -> Rows {
        matrix_to_py(&self.inner.proj2)
    }

    /// Smallest known `k` with `N~^k = 0`.
    #[getter]
    fn k_nilpotent(&self) -> usize {
        self.inner.k_nilpotent
    }

    #[getter]
    fn shift(&self) -> Complex64 {
        self.inner.lambda
    }

    #[getter]
    fn slow_dim(&self) -> usize {
        self.inner.slow_dim()
    }

    #[getter]
    fn fast_dim(&self) -> usize {
        self.inner.fast_dim()
    }

    /// `x = lift1 z1 + lift2 z2` for coordinate vectors given as lists.
    fn reconstruct(&self, z1: Vec<Complex64>, z2: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let x = qw_reconstruct(&self.inner, &column_from_py(&z1)?, &column_from_py(&z2)?)
            .map_err(to_py_err)?;
        Ok(x.entries_row_major())
    }

    fn __repr__(&self) -> String {
        format!(
            "QuasiWeierstrass(slow_dim={}, fast_dim={}, k_nilpotent={})",
            self.inner.slow_dim(),
            self.inner.fast_dim(),
            self.inner.k_nilpotent
        )
    }
}

/// Residuals of a closed-form trajectory against `E x' = A x + B u`.
#[pyclass(frozen, name = "ResidualReport")]
struct PyResidualReport {
    inner: descred::ResidualReport,
}

#[pymethods]
impl PyResidualReport {
    #[getter]
    fn max_residual(&self) -> f64 {
        self.inner.max_residual
    }

    #[getter]
    fn identity_residual(&self) -> f64 {
        self.inner.identity_residual
    }

    #[getter]
    fn max_state_norm(&self) -> f64 {
        self.inner.max_state_norm()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.clone()
    }

    #[getter]
    fn per_sample(&self) -> Vec<f64> {
        self.inner.per_sample.clone()
    }

    #[getter]
    fn state_norms(&self) -> Vec<f64> {
        self.inner.state_norms.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "ResidualReport(max_residual={:.3e}, identity_residual={:.3e})",
            self.inner.max_residual, self.inner.identity_residual
        )
    }
}

/// Index, rank sequence, consistency dimension and pureness of `system`.
#[pyfunction]
#[pyo3(signature = (system, shift=None, tol=None))]
fn analyze(
    system: &PySystem,
    shift: Option<Complex64>,
    tol: Option<f64>,
) -> PyResult<PyIndexReport> {
    let report = analyze_with(&system.inner, shift, &tol_from(tol)?).map_err(to_py_err)?;
    Ok(PyIndexReport { inner: report })
}

/// Smallest `k` with `rank(M^(k+1)) = rank(M^k)` for a square matrix.
#[pyfunction]
#[pyo3(signature = (matrix, tol=None))]
fn matrix_index(matrix: Rows, tol: Option<f64>) -> PyResult<usize> {
    matrix_index_rs(&matrix_from_py(&matrix)?, &tol_from(tol)?).map_err(to_py_err)
}

/// Orthonormal basis (as columns) of the space of consistent initial
/// states.
#[pyfunction]
#[pyo3(signature = (system, tol=None))]
fn consistency_basis(system: &PySystem, tol: Option<f64>) -> PyResult<Rows> {
    let basis = consistency_space(&system.inner, &tol_from(tol)?).map_err(to_py_err)?;
    Ok(matrix_to_py(&basis))
}

/// Equivalent system of order `rank(F^k)`; `k` defaults to `max(k*, 1)`.
#[pyfunction]
#[pyo3(signature = (system, k=None, side="range", shift=None, tol=None))]
fn reduce(
    system: &PySystem,
    k: Option<usize>,
    side: &str,
    shift: Option<Complex64>,
    tol: Option<f64>,
) -> PyResult<PyReduced> {
    let tol = tol_from(tol)?;
    let side = side_from(side)?;
    let report = analyze_with(&system.inner, shift, &tol).map_err(to_py_err)?;
    let shifted = shift_rs(&system.inner, report.lambda).map_err(to_py_err)?;
    let k = k.unwrap_or(report.k_star.max(1));
    let red = match side {
        Side::Range => reduce_via_range(&shifted, k, None, &tol),
        Side::Corange => reduce_via_corange(&shifted, k, None, &tol),
    }
    .map_err(to_py_err)?;
    Ok(PyReduced { inner: red })
}

/// Explicit ODE on the consistency space (index-0 reduction).
#[pyfunction]
#[pyo3(signature = (system, side="range", shift=None, tol=None))]
fn to_standard(
    system: &PySystem,
    side: &str,
    shift: Option<Complex64>,
    tol: Option<f64>,
) -> PyResult<PyStandard> {
    let tol = tol_from(tol)?;
    let side = side_from(side)?;
    let report = analyze_with(&system.inner, shift, &tol).map_err(to_py_err)?;
    let shifted = shift_rs(&system.inner, report.lambda).map_err(to_py_err)?;
    let std_form = to_standard_rs(&shifted, side, &tol).map_err(to_py_err)?;
    Ok(PyStandard { inner: std_form })
}

/// Full slow/fast decoupling; requires a singular `E` and a nonzero
/// consistency space.
#[pyfunction]
#[pyo3(signature = (system, k=None, shift=None, tol=None))]
fn decompose(
    system: &PySystem,
    k: Option<usize>,
    shift: Option<Complex64>,
    tol: Option<f64>,
) -> PyResult<PyQw> {
    let qw = qw_decompose(&system.inner, shift, k, &tol_from(tol)?).map_err(to_py_err)?;
    Ok(PyQw { inner: qw })
}

/// Certifies a decoupling: rebuilds the closed-form trajectory from `z1_0`
/// and a polynomial input (list of per-degree coefficient rows) and
/// reports the worst residual of `E x' = A x + B u` on a grid.
#[pyfunction]
#[pyo3(signature = (system, qw, z1_0, input=None, t_end=2.0, samples=9))]
fn check_residual(
    system: &PySystem,
    qw: &PyQw,
    z1_0: Vec<Complex64>,
    input: Option<Rows>,
    t_end: f64,
    samples: usize,
) -> PyResult<PyResidualReport> {
    let input = input
        .map(|coeffs| {
            let rows = coeffs
                .iter()
                .map(|c| CMatrix::column(c))
                .collect::<descred::Result<Vec<_>>>()?;
            PolynomialInput::new(rows)
        })
        .transpose()
        .map_err(to_py_err)?;
    let report = check_residual_rs(
        &system.inner,
        &qw.inner,
        &column_from_py(&z1_0)?,
        input.as_ref(),
        t_end,
        samples,
    )
    .map_err(to_py_err)?;
    Ok(PyResidualReport { inner: report })
}

/// Runs the brute-force identity suite and returns
/// `(name, value, threshold, passed)` per identity.
#[pyfunction]
#[pyo3(signature = (system, shift=None, tol=None))]
fn verify_identities(
    system: &PySystem,
    shift: Option<Complex64>,
    tol: Option<f64>,
) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let report =
        brute_force_identities(&system.inner, shift, &tol_from(tol)?).map_err(to_py_err)?;
    Ok(report
        .checks
        .iter()
        .map(|c| (c.name.clone(), c.value, c.threshold, c.pass))
        .collect())
}

#[pymodule]
fn descred_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyIndexReport>()?;
    m.add_class::<PyReduced>()?;
    m.add_class::<PyStandard>()?;
    m.add_class::<PyQw>()?;
    m.add_class::<PyResidualReport>()?;
    m.add("DescredError", m.py().get_type::<DescredError>())?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_index, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_basis, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(to_standard, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(check_residual, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identities, m)?)?;
    Ok(())
}
