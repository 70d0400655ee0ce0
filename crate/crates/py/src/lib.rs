//! Python bindings: meshes, parameters, constants, cell tensors, Darcy and the ε sweep.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::microdarcy::analysis::{self, ConstantsReport, WellPosednessVerdict, DEFAULT_SAFETY_FACTOR};
use ::microdarcy::cell::{self, CellProblem, DimensionlessParams, EffectiveTensors};
use ::microdarcy::cli;
use ::microdarcy::darcy::{self, DarcyTensors};
use ::microdarcy::epsweep::{self, ConvergenceReport, SweepConfig};
use ::microdarcy::forcing::Forcing;
use ::microdarcy::mesh::{self, ObstacleSpec};
use ::microdarcy::Error;

create_exception!(microdarcy, WellPosednessViolated, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match cli::exit_code(&e) {
        2 => PyValueError::new_err(e.to_string()),
        3 => WellPosednessViolated::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn forcing(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Forcing> {
    let f = match obj {
        None => Forcing::default(),
        Some(o) => match o.extract::<String>() {
            Ok(name) => Forcing::Named(name),
            Err(_) => {
                let v: [f64; 3] = o.extract()?;
                Forcing::Constant(v)
            }
        },
    };
    f.validate().map_err(py_err)?;
    Ok(f)
}

#[pyclass(name = "Params", frozen, from_py_object)]
#[derive(Clone)]
pub struct Params(DimensionlessParams);

#[pymethods]
impl Params {
    /// `alpha=None` picks the `γ = 0` value `1/α = N²(1+β)`.
    #[new]
    #[pyo3(signature = (n2, rc, alpha=None, beta=1.0))]
    fn new(n2: f64, rc: f64, alpha: Option<f64>, beta: f64) -> PyResult<Self> {
        let p = match alpha {
            Some(a) => DimensionlessParams::new(n2, rc, a, beta),
            None => DimensionlessParams::gamma_zero(n2, rc, beta),
        };
        p.map(Params).map_err(py_err)
    }

    #[getter]
    fn n2(&self) -> f64 {
        self.0.n2
    }

    #[getter]
    fn rc(&self) -> f64 {
        self.0.rc
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!("Params(n2={}, rc={}, alpha={}, beta={})", p.n2, p.rc, p.alpha, p.beta)
    }
}

#[pyclass(name = "CellMesh", frozen)]
pub struct CellMesh(mesh::CellMesh);

#[pymethods]
impl CellMesh {
    #[new]
    #[pyo3(signature = (resolution, radius=0.25, center=[0.5, 0.5, 0.5]))]
    fn new(resolution: usize, radius: f64, center: [f64; 3]) -> PyResult<Self> {
        mesh::build_unit_cell_mesh(resolution, ObstacleSpec::sphere(center, radius)).map(CellMesh).map_err(py_err)
    }

    #[getter]
    fn resolution(&self) -> usize {
        self.0.resolution
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.0.mesh.n_vertices()
    }

    #[getter]
    fn n_tets(&self) -> usize {
        self.0.mesh.n_tets()
    }

    #[getter]
    fn fluid_volume(&self) -> f64 {
        self.0.fluid_volume()
    }
}

#[pyclass(name = "Constants", frozen)]
pub struct Constants(ConstantsReport);

#[pymethods]
impl Constants {
    #[getter]
    fn cp(&self) -> f64 {
        self.0.cp
    }

    #[getter]
    fn ct(&self) -> f64 {
        self.0.ct
    }

    #[getter]
    fn cpt(&self) -> f64 {
        self.0.cpt
    }

    #[getter]
    fn cg(&self) -> f64 {
        self.0.cg
    }

    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }

    #[getter]
    fn delta_infsup(&self) -> f64 {
        self.0.delta_infsup
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("serializes")
    }
}

#[pyclass(name = "Verdict", frozen)]
pub struct Verdict(WellPosednessVerdict);

#[pymethods]
impl Verdict {
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    #[getter]
    fn bound(&self) -> f64 {
        self.0.bound
    }

    #[getter]
    fn satisfied(&self) -> bool {
        self.0.satisfied
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }

    #[getter]
    fn coercivity_certified(&self) -> bool {
        self.0.coercivity_certified
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("serializes")
    }
}

#[pyclass(name = "Tensors", frozen)]
pub struct Tensors(EffectiveTensors);

#[pymethods]
impl Tensors {
    #[getter]
    fn k1(&self) -> [[f64; 3]; 3] {
        self.0.k1
    }

    #[getter]
    fn k2(&self) -> [[f64; 3]; 3] {
        self.0.k2
    }

    #[getter]
    fn l1(&self) -> [[f64; 3]; 3] {
        self.0.l1
    }

    #[getter]
    fn l2(&self) -> [[f64; 3]; 3] {
        self.0.l2
    }

    #[getter]
    fn porosity(&self) -> f64 {
        self.0.porosity
    }

    fn k1_sym_min_eigenvalue(&self) -> f64 {
        self.0.k1_sym_min_eigenvalue()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        EffectiveTensors::from_json(s).map(Tensors).map_err(py_err)
    }
}

#[pyclass(name = "DarcyResult", frozen)]
pub struct DarcyResult {
    inner: darcy::DarcySolution,
    f: Forcing,
    g: Forcing,
}

#[pymethods]
impl DarcyResult {
    /// Pressure at the mesh vertices (zero mean).
    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.mesh.vertices.clone()
    }

    fn p_at(&self, x: [f64; 3]) -> Option<f64> {
        self.inner.p_at(x)
    }

    fn summary_json(&self) -> String {
        let (f, g) = (self.f.field(), self.g.field());
        serde_json::to_string(&self.inner.summary(&f, &g)).expect("serializes")
    }

    fn write_vtk(&self, path: &str) -> PyResult<()> {
        self.inner.write_vtk(path.as_ref()).map_err(|e| py_err(e.into()))
    }
}

#[pyclass(name = "SweepReport", frozen)]
pub struct SweepReport(ConvergenceReport);

#[pymethods]
impl SweepReport {
    #[getter]
    fn epsilons(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.epsilon).collect()
    }

    fn all_bounded(&self) -> bool {
        self.0.all_bounded()
    }

    fn all_monotone(&self) -> bool {
        self.0.all_monotone()
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }
}

#[pyfunction]
#[pyo3(name = "estimate_constants")]
fn py_estimate_constants(py: Python<'_>, mesh: &CellMesh) -> PyResult<Constants> {
    py.detach(|| analysis::estimate_constants(&mesh.0)).map(Constants).map_err(py_err)
}

#[pyfunction]
#[pyo3(name = "check_wellposedness", signature = (params, constants, safety_factor=DEFAULT_SAFETY_FACTOR))]
fn py_check_wellposedness(params: &Params, constants: &Constants, safety_factor: f64) -> Verdict {
    Verdict(analysis::check_wellposedness(&params.0, &constants.0, safety_factor))
}

/// Solves the six cell problems and returns the effective tensors.
#[pyfunction]
#[pyo3(signature = (mesh, params, constants=None, safety_factor=DEFAULT_SAFETY_FACTOR))]
fn cell_tensors(
    py: Python<'_>,
    mesh: &CellMesh,
    params: &Params,
    constants: Option<&Constants>,
    safety_factor: f64,
) -> PyResult<Tensors> {
    let c = constants.map(|c| &c.0);
    py.detach(|| {
        let sols = CellProblem::with_safety(&mesh.0, params.0, c, safety_factor)?.solve_all()?;
        cell::compute_effective_tensors(&sols)
    })
    .map(Tensors)
    .map_err(py_err)
}

/// `f`, `g`: a 3-sequence or one of the named forcings.
#[pyfunction]
#[pyo3(signature = (tensors, f=None, g=None, resolution=8))]
fn solve_darcy(
    py: Python<'_>,
    tensors: &Tensors,
    f: Option<&Bound<'_, PyAny>>,
    g: Option<&Bound<'_, PyAny>>,
    resolution: usize,
) -> PyResult<DarcyResult> {
    let (f, g) = (forcing(f)?, forcing(g)?);
    let t = DarcyTensors::from(&tensors.0);
    let inner = py.detach(|| darcy::solve_darcy_on_cube(t, &f.field(), &g.field(), resolution)).map_err(py_err)?;
    Ok(DarcyResult { inner, f, g })
}

#[pyfunction]
#[pyo3(signature = (epsilons, per_cell_resolution=6, params=None, f=None, g=None, darcy_resolution=12, radius=0.25))]
#[allow(clippy::too_many_arguments)]
fn eps_sweep(
    py: Python<'_>,
    epsilons: Vec<f64>,
    per_cell_resolution: usize,
    params: Option<&Params>,
    f: Option<&Bound<'_, PyAny>>,
    g: Option<&Bound<'_, PyAny>>,
    darcy_resolution: usize,
    radius: f64,
) -> PyResult<SweepReport> {
    let d = SweepConfig::default();
    let cfg = SweepConfig {
        epsilons,
        per_cell_resolution,
        obstacle: ObstacleSpec::sphere([0.5; 3], radius),
        params: params.map(|p| p.0).unwrap_or(d.params),
        f: if f.is_some() { forcing(f)? } else { d.f.clone() },
        g: forcing(g)?,
        darcy_resolution,
        safety_factor: d.safety_factor,
    };
    py.detach(|| epsweep::run_sweep(&cfg, false)).map(|o| SweepReport(o.report)).map_err(py_err)
}

/// Runs the command-line driver; returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("microdarcy".to_string()).chain(args).collect();
    py.detach(|| cli::main_with_args(argv))
}

#[pymodule]
#[pyo3(name = "microdarcy")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<CellMesh>()?;
    m.add_class::<Constants>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<Tensors>()?;
    m.add_class::<DarcyResult>()?;
    m.add_class::<SweepReport>()?;
    m.add("WellPosednessViolated", m.py().get_type::<WellPosednessViolated>())?;
    m.add_function(wrap_pyfunction!(py_estimate_constants, m)?)?;
    m.add_function(wrap_pyfunction!(py_check_wellposedness, m)?)?;
    m.add_function(wrap_pyfunction!(cell_tensors, m)?)?;
    m.add_function(wrap_pyfunction!(solve_darcy, m)?)?;
    m.add_function(wrap_pyfunction!(eps_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
