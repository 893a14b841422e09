//! Python bindings: ambient spaces, surfaces, spectra and the minimal graph solver.

use std::cell::RefCell;

use ektau::grid::{Rect, UniformGrid};
use ektau::horizontal::{fmp_tangency_curve, fmp_tangency_determinant, solve_dirichlet, NewtonOptions};
use ektau::parabolicity::{cutoff_energy, CutoffFamily};
use ektau::spectra::{cylinder_eigenvalue, cylinder_stability_verdict, SpectralProblem, DEFAULT_SWEEP};
use ektau::surface::{fundamental_forms, mean_curvature, Immersion, SurfaceSpec};
use ektau::SpaceParams;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: ektau::Error) -> PyErr {
    use ektau::Error as E;
    match e {
        E::NoConvergence { .. } | E::Singular(_) | E::NotPositiveDefinite(_) | E::Numeric(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rect(d: (f64, f64, f64, f64)) -> PyResult<Rect> {
    Rect::new(d.0, d.1, d.2, d.3).map_err(to_py)
}

/// Homogeneous space E(kappa, tau).
#[pyclass(name = "Space", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySpace(SpaceParams);

#[pymethods]
impl PySpace {
    #[new]
    fn new(kappa: f64, tau: f64) -> PyResult<Self> {
        SpaceParams::new(kappa, tau).map(PySpace).map_err(to_py)
    }

    #[staticmethod]
    fn nil() -> Self {
        PySpace(SpaceParams::nil())
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    fn __repr__(&self) -> String {
        format!("Space(kappa={}, tau={})", self.0.kappa(), self.0.tau())
    }
}

/// Parametrized surface built from a short spec such as `cylinder:k=1`.
#[pyclass(name = "Surface", frozen)]
struct PySurface {
    spec: SurfaceSpec,
    imm: Box<dyn Immersion>,
}

#[pymethods]
impl PySurface {
    #[new]
    #[pyo3(signature = (spec, space, domain=None))]
    fn new(spec: &str, space: PySpace, domain: Option<(f64, f64, f64, f64)>) -> PyResult<Self> {
        let mut spec: SurfaceSpec = spec.parse().map_err(to_py)?;
        if let Some(d) = domain {
            spec = spec.with_domain(rect(d)?);
        }
        let imm = spec.build(space.0).map_err(to_py)?;
        Ok(PySurface { spec, imm })
    }

    #[getter]
    fn domain(&self) -> (f64, f64, f64, f64) {
        let r = self.imm.domain();
        (r.s0, r.s1, r.t0, r.t1)
    }

    fn mean_curvature(&self, s: f64, t: f64) -> PyResult<f64> {
        mean_curvature(self.imm.as_ref(), s, t).map_err(to_py)
    }

    /// Curvatures, orthonormal second fundamental form and stability potentials at `(s, t)`.
    fn forms<'py>(&self, py: Python<'py>, s: f64, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let f = fundamental_forms(self.imm.as_ref(), s, t).map_err(to_py)?;
        let sp = self.imm.space();
        let ii = f.second_orthonormal();
        let d = PyDict::new(py);
        d.set_item("H", f.mean)?;
        d.set_item("K", f.gauss)?;
        d.set_item("K_ext", f.extrinsic)?;
        d.set_item("angle", f.angle)?;
        d.set_item("second_form", [[ii[(0, 0)], ii[(0, 1)]], [ii[(1, 0)], ii[(1, 1)]]])?;
        d.set_item("shape_norm_sq", f.shape_norm_sq())?;
        d.set_item("ricci_normal", f.ricci_normal)?;
        d.set_item("q", f.potential_q())?;
        d.set_item("q_tilde", f.potential_qtilde(&sp))?;
        Ok(d)
    }

    /// First Dirichlet eigenvalue of the stability operator on the surface domain.
    #[pyo3(signature = (nodes=64))]
    fn first_eigenvalue<'py>(&self, py: Python<'py>, nodes: usize) -> PyResult<Bound<'py, PyDict>> {
        let omega = self.imm.domain();
        let res = SpectralProblem::new(self.imm.as_ref(), omega, nodes, nodes)
            .and_then(|p| p.first_eigenvalue())
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("lambda1", res.lambda1)?;
        d.set_item("iterations", res.iterations)?;
        d.set_item("residual", res.residual)?;
        if let SurfaceSpec::Cylinder { k_gamma, .. } = self.spec {
            let sp = self.imm.space();
            d.set_item("predicted", cylinder_eigenvalue(&sp, k_gamma, omega.width(), omega.height()))?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Surface({:?})", self.spec)
    }
}

/// `lambda1` of the rectangle `[0, a] x [0, b]` on a vertical cylinder, in closed form.
#[pyfunction]
fn cylinder_lambda1(space: PySpace, k_gamma: f64, a: f64, b: f64) -> f64 {
    cylinder_eigenvalue(&space.0, k_gamma, a, b)
}

/// Stability verdict of the vertical cylinder over a curve of curvature `k_gamma`.
#[pyfunction]
#[pyo3(signature = (space, k_gamma, sides=None, nodes=48))]
fn stability_sweep<'py>(
    py: Python<'py>,
    space: PySpace,
    k_gamma: f64,
    sides: Option<Vec<f64>>,
    nodes: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let sides = sides.unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let rep = cylinder_stability_verdict(space.0, k_gamma, &sides, nodes).map_err(to_py)?;
    json(py, &rep)
}

/// Dirichlet energies of the logarithmic plane cutoffs `j = 1..=members`.
#[pyfunction]
#[pyo3(signature = (members, r0=1.0, nodes=256))]
fn log_cutoff_energies(members: usize, r0: f64, nodes: usize) -> PyResult<Vec<f64>> {
    let fam = CutoffFamily::log_plane(r0, members).map_err(to_py)?;
    (1..=members).map(|j| cutoff_energy(&fam, j, nodes).map_err(to_py)).collect()
}

#[pyfunction]
fn tangency_determinant(theta: f64, alpha: f64, x: f64, y: f64) -> PyResult<f64> {
    fmp_tangency_determinant(theta, alpha, x, y).map_err(to_py)
}

#[pyfunction]
fn tangency_curve<'py>(py: Python<'py>, theta: f64, alpha: f64, ys: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    json(py, &fmp_tangency_curve(theta, alpha, &ys).map_err(to_py)?)
}

/// Solves the horizontal minimal graph equation in Nil with data `boundary(y, z)`.
///
/// Returns the summary dictionary plus the solution as a list of rows indexed by `z`.
#[pyfunction]
#[pyo3(signature = (boundary, domain=(0.0, 1.0, 0.0, 1.0), grid=41, tol=1e-8))]
fn solve_graph<'py>(
    py: Python<'py>,
    boundary: Bound<'py, PyAny>,
    domain: (f64, f64, f64, f64),
    grid: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let g = UniformGrid::new(rect(domain)?, grid, grid).map_err(to_py)?;
    let failure: RefCell<Option<PyErr>> = RefCell::new(None);
    let data = |y: f64, z: f64| match boundary.call1((y, z)).and_then(|v| v.extract::<f64>()) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let opts = NewtonOptions {
        tol,
        ..Default::default()
    };
    let sol = solve_dirichlet(g, &data, None, &opts);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let sol = sol.map_err(to_py)?;
    let out = json(py, &sol.summary())?;
    let u = sol.solution.values();
    let rows: Vec<Vec<f64>> = (0..g.nt).map(|j| (0..g.ns).map(|i| u.get(i, j)).collect()).collect();
    out.set_item("u", rows)?;
    Ok(out)
}

#[pymodule(name = "ektau")]
fn ektau_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PySurface>()?;
    m.add_function(wrap_pyfunction!(cylinder_lambda1, m)?)?;
    m.add_function(wrap_pyfunction!(stability_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(log_cutoff_energies, m)?)?;
    m.add_function(wrap_pyfunction!(tangency_determinant, m)?)?;
    m.add_function(wrap_pyfunction!(tangency_curve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_graph, m)?)?;
    Ok(())
}
