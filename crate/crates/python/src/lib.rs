//! Python bindings. Reports and verdicts cross the boundary as plain dicts.

use gflab::calculus::{self, ProjectionExponent};
use gflab::config::ScenarioConfig;
use gflab::evolution::{self, Sign};
use gflab::fiber::{FiberOperator, C64};
use gflab::grid;
use gflab::locality::{self as loc, GlobalOperator};
use gflab::presets::{self, PresetKind};
use gflab::rng::Ensemble;
use gflab::scenario::{self, Command};
use gflab::symmetry::{self, CriterionOptions, IrreducibilityOptions};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn err(e: gflab::Error) -> PyErr {
    match e {
        gflab::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_dict<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn rows_to_matrix(rows: Vec<Vec<C64>>) -> PyResult<DMatrix<C64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Periodic grid on the unit torus (or with a given spacing).
#[pyclass(frozen, name = "Grid", module = "gflab")]
struct PyGrid(grid::GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (sizes, spacing=None))]
    fn new(sizes: Vec<usize>, spacing: Option<f64>) -> PyResult<Self> {
        let g = match spacing {
            Some(h) => grid::GridSpec::new(sizes, h),
            None => grid::GridSpec::unit_torus(sizes),
        };
        g.map(PyGrid).map_err(err)
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.0.sizes().to_vec()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.0.spacing().to_vec()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.0.cells()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(sizes={:?}, spacing={:?})",
            self.0.sizes(),
            self.0.spacing()
        )
    }
}

/// Orthogonal projection on C^d.
#[pyclass(frozen, name = "Projection", module = "gflab")]
struct PyProjection(gflab::fiber::Projection);

#[pymethods]
impl PyProjection {
    /// Validates idempotence and Hermitian symmetry to `tol`.
    #[new]
    #[pyo3(signature = (matrix, tol=1e-12))]
    fn new(matrix: Vec<Vec<C64>>, tol: f64) -> PyResult<Self> {
        let m = rows_to_matrix(matrix)?;
        gflab::fiber::Projection::new(FiberOperator(m), tol)
            .map(PyProjection)
            .map_err(err)
    }

    /// Projection onto the coordinate subspace spanned by `coords` (0-based).
    #[staticmethod]
    fn coordinate(d: usize, coords: Vec<usize>) -> PyResult<Self> {
        if coords.iter().any(|&c| c >= d) {
            return Err(PyValueError::new_err("coordinate out of range"));
        }
        Ok(PyProjection(gflab::fiber::Projection::coordinate(
            d, &coords,
        )))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    fn matrix(&self) -> Vec<Vec<C64>> {
        matrix_to_rows(self.0.matrix())
    }

    /// `e^{zP}` as a nested list.
    fn exp(&self, z: C64) -> Vec<Vec<C64>> {
        matrix_to_rows(&calculus::exp_projection(&self.0, ProjectionExponent::new(z)).0)
    }

    /// Lattice-ideal verdicts (sampled criterion and structural test).
    #[pyo3(signature = (samples=100, seed=0))]
    fn ideal_verdict(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let v = calculus::is_ideal_projection(&self.0, samples, &mut Ensemble::new(seed));
        to_dict(py, &v)
    }
}

/// Cell-major field of C^d vectors.
#[pyclass(frozen, name = "Field", module = "gflab")]
struct PyField(grid::Field);

#[pymethods]
impl PyField {
    /// Builds a field from `cells * d` values, component `c` of cell `x` at `x*d + c`.
    #[new]
    fn new(grid: &PyGrid, d: usize, values: Vec<C64>) -> PyResult<Self> {
        grid::Field::from_values(&grid.0, d, values)
            .map(PyField)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (grid, d, seed=0))]
    fn random(grid: &PyGrid, d: usize, seed: u64) -> Self {
        PyField(grid::Field::random(&grid.0, d, &mut Ensemble::new(seed)))
    }

    fn values(&self) -> Vec<C64> {
        self.0.values().to_vec()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Dirichlet energy of the forward-difference gradient.
    fn energy(&self) -> f64 {
        grid::form_a(&self.0)
    }

    fn heat(&self, t: f64) -> PyResult<Self> {
        evolution::evolve_heat(&self.0, t).map(PyField).map_err(err)
    }

    /// `e^{±itΔ}` applied exactly; `sign` is `+1` or `-1`.
    #[pyo3(signature = (t, sign=1))]
    fn schrodinger(&self, t: f64, sign: i32) -> PyResult<Self> {
        let s = match sign {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            _ => return Err(PyValueError::new_err("sign must be +1 or -1")),
        };
        evolution::evolve_schrodinger(&self.0, t, s)
            .map(PyField)
            .map_err(err)
    }
}

/// Cellwise projection field `x ↦ P_x`.
#[pyclass(frozen, name = "ProjectionField", module = "gflab")]
struct PyProjectionField(grid::ProjectionField);

#[pymethods]
impl PyProjectionField {
    /// `constant`, `step` or `rotating`.
    #[staticmethod]
    fn preset(name: &str, grid: &PyGrid, d: usize) -> PyResult<Self> {
        let kind: PresetKind = name.parse().map_err(err)?;
        let p = match kind {
            PresetKind::Constant => Ok(presets::constant(&grid.0, d)),
            PresetKind::Step => presets::step(&grid.0, d),
            PresetKind::Rotating => presets::rotating(&grid.0, d),
            PresetKind::FromFile => {
                return Err(PyValueError::new_err("use ProjectionField.from_file"))
            }
        };
        p.map(PyProjectionField).map_err(err)
    }

    #[staticmethod]
    fn from_file(path: PathBuf, grid: &PyGrid, d: usize) -> PyResult<Self> {
        gflab::io::load_projection_field(&path, &grid.0, d)
            .map(PyProjectionField)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (grid, d, seed=0))]
    fn random_smooth(grid: &PyGrid, d: usize, seed: u64) -> PyResult<Self> {
        presets::random_smooth(&grid.0, d, &mut Ensemble::new(seed))
            .map(PyProjectionField)
            .map_err(err)
    }

    fn at(&self, x: usize) -> PyResult<PyProjection> {
        if x >= self.0.grid().cells() {
            return Err(PyValueError::new_err("cell index out of range"));
        }
        Ok(PyProjection(self.0.at(x).clone()))
    }

    fn apply(&self, f: &PyField) -> PyResult<PyField> {
        evolution::apply_projection_field(&self.0, &f.0)
            .map(PyField)
            .map_err(err)
    }

    /// `e^{is𝒫} f`.
    fn rotate(&self, s: f64, f: &PyField) -> PyResult<PyField> {
        evolution::apply_exp_group(&self.0, s, &f.0)
            .map(PyField)
            .map_err(err)
    }

    fn leakage(&self, f: &PyField, times: Vec<f64>) -> PyResult<Vec<f64>> {
        evolution::leakage(&self.0, &f.0, &times).map_err(err)
    }

    #[pyo3(signature = (trials=8, seed=0))]
    fn invariance(&self, py: Python<'_>, trials: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let opts = CriterionOptions {
            trials,
            seed,
            ..CriterionOptions::default()
        };
        let r = symmetry::check_invariance_criterion(&self.0, &opts).map_err(err)?;
        to_dict(py, &r)
    }

    fn gauge_sup_norm(&self, s: f64) -> f64 {
        symmetry::gauge_field(&self.0, s).sup_norm()
    }

    fn gauge_energy(&self, s: f64, f: &PyField) -> PyResult<f64> {
        symmetry::form_a_s(&self.0, s, &f.0).map_err(err)
    }

    fn gauge_energy_exact(&self, s: f64, f: &PyField) -> PyResult<f64> {
        symmetry::form_a_s_exact(&self.0, s, &f.0).map_err(err)
    }

    /// Number of locally constant components.
    #[pyo3(signature = (eps=1e-8))]
    fn components(&self, eps: f64) -> usize {
        symmetry::detect_locally_constant(&self.0, eps).count()
    }

    /// Lifts to the global matrix and reports localizability.
    fn locality(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let g = GlobalOperator::lift(&self.0).map_err(err)?;
        to_dict(py, &loc::is_localizable(&g).map_err(err)?)
    }
}

/// Localizability report of the even-part projection `(f(x) + f(-x)) / 2`.
#[pyfunction]
fn even_part_locality(py: Python<'_>, grid: &PyGrid, d: usize) -> PyResult<Py<PyAny>> {
    let g = GlobalOperator::even_part(&grid.0, d).map_err(err)?;
    to_dict(py, &loc::is_localizable(&g).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (grid, d, t=0.01, seed=0))]
fn irreducibility_scan(
    py: Python<'_>,
    grid: &PyGrid,
    d: usize,
    t: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let opts = IrreducibilityOptions {
        seed,
        ..IrreducibilityOptions::default()
    };
    let r = py
        .detach(|| symmetry::irreducibility_scan(&grid.0, d, t, &opts))
        .map_err(err)?;
    to_dict(py, &r)
}

/// Runs a scenario from config text and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (config="", command="run", out=None))]
fn run_scenario(
    py: Python<'_>,
    config: &str,
    command: &str,
    out: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = ScenarioConfig::parse(config).map_err(err)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let command: Command = command.parse().map_err(err)?;
    let report = py
        .detach(|| scenario::run_scenario(&cfg, command))
        .map_err(err)?;
    to_dict(py, &report)
}

#[pymodule(name = "gflab")]
fn gflab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyProjection>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyProjectionField>()?;
    m.add_function(wrap_pyfunction!(even_part_locality, m)?)?;
    m.add_function(wrap_pyfunction!(irreducibility_scan, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
