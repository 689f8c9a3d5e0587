//! Python bindings: meshes, the saddle-point solve, the estimator, the
//! adaptive loop, the criss-cross scaling study and the verification suites.

use afem_stokes::adaptive::{anfem, rate_fit, AdaptiveParams, StepRecord, StopReason};
use afem_stokes::assembly;
use afem_stokes::counterexample::{scaling_study, DEFAULT_SIZES};
use afem_stokes::estimator;
use afem_stokes::mesh::{builders, Triangulation};
use afem_stokes::problem::{LoadFunction, ProblemId};
use afem_stokes::spaces::DiscreteSolution;
use afem_stokes::verify::{run_suites, Suite, VerifyOptions};
use afem_stokes::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Parse { .. } | Error::InsufficientData(_) | Error::MeshMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn load(problem: &str, mu: f64) -> PyResult<LoadFunction> {
    Ok(problem.parse::<ProblemId>().map_err(to_py)?.load(mu))
}

/// A conforming triangulation with newest-vertex-bisection data.
#[pyclass(name = "Mesh", module = "afem_stokes_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Triangulation,
}

#[pymethods]
impl PyMesh {
    /// Unit square with `n x n` cells, each cut by its rising diagonal.
    #[staticmethod]
    fn unit_square(n: usize) -> PyResult<Self> {
        Ok(PyMesh {
            inner: builders::unit_square(n).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn lshape() -> Self {
        PyMesh {
            inner: builders::lshape(),
        }
    }

    #[staticmethod]
    fn diamond() -> Self {
        PyMesh {
            inner: builders::diamond(),
        }
    }

    #[staticmethod]
    fn read(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyMesh {
            inner: Triangulation::read(path).map_err(to_py)?,
        })
    }

    fn write(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write(path).map_err(to_py)
    }

    /// Bisects the marked elements plus the conforming closure.
    fn bisect(&self, marked: Vec<usize>) -> PyResult<Self> {
        Ok(PyMesh {
            inner: self.inner.bisect(&marked).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (rounds = 1))]
    fn refine_uniform(&self, rounds: usize) -> PyResult<Self> {
        Ok(PyMesh {
            inner: self.inner.refine_uniform(rounds).map_err(to_py)?,
        })
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p[0], p[1])).collect()
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().iter().map(|t| t.vertices).collect()
    }

    fn centroids(&self) -> Vec<(f64, f64)> {
        (0..self.inner.num_elements())
            .map(|k| {
                let c = self.inner.centroid(k);
                (c[0], c[1])
            })
            .collect()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(vertices={}, elements={})",
            self.inner.num_vertices(),
            self.inner.num_elements()
        )
    }
}

/// CR velocity and piecewise constant pressure on a mesh.
#[pyclass(name = "Solution", module = "afem_stokes_py", frozen)]
struct PySolution {
    mesh: Triangulation,
    inner: DiscreteSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn pressure(&self) -> Vec<f64> {
        self.inner.pressure.clone()
    }

    /// Velocity at the element centroids.
    fn velocity_at_centroids(&self) -> Vec<(f64, f64)> {
        (0..self.mesh.num_elements())
            .map(|k| {
                let u = self.inner.velocity.eval(&self.mesh, k, [1.0 / 3.0; 3]);
                (u[0], u[1])
            })
            .collect()
    }

    /// Elementwise divergence of the velocity.
    fn divergence(&self) -> Vec<f64> {
        self.inner
            .velocity_gradients(&self.mesh)
            .iter()
            .map(|g| g[0][0] + g[1][1])
            .collect()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }
}

/// Solves the discrete Stokes problem with a built-in load.
#[pyfunction]
#[pyo3(signature = (mesh, problem = "smooth1", mu = 1.0))]
fn solve(py: Python<'_>, mesh: &PyMesh, problem: &str, mu: f64) -> PyResult<PySolution> {
    let g = load(problem, mu)?;
    let tri = mesh.inner.clone();
    let sol = py.detach(|| assembly::solve(&tri, &g, mu)).map_err(to_py)?;
    Ok(PySolution { mesh: tri, inner: sol })
}

/// Element indicators `eta`, `volume` and `jump` of a solution.
#[pyfunction]
#[pyo3(signature = (solution, problem = "smooth1"))]
fn estimate<'py>(py: Python<'py>, solution: &PySolution, problem: &str) -> PyResult<Bound<'py, PyDict>> {
    let g = load(problem, solution.inner.mu)?;
    let rep = estimator::estimate(&solution.mesh, &solution.inner, &g).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("eta", rep.eta)?;
    d.set_item("volume", rep.volume)?;
    d.set_item("jump", rep.jump)?;
    Ok(d)
}

fn record_dict<'py>(py: Python<'py>, r: &StepRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iter", r.iter)?;
    d.set_item("nelems", r.nelems)?;
    d.set_item("ndofs", r.ndofs)?;
    d.set_item("eta2", r.eta2)?;
    d.set_item("eta_tilde2", r.eta_tilde2)?;
    d.set_item("osc2", r.osc2)?;
    d.set_item("vol2", r.vol2)?;
    d.set_item("nmarked", r.nmarked)?;
    d.set_item("gamma", r.gamma)?;
    d.set_item("err_u2", r.err_u2)?;
    d.set_item("err_p2", r.err_p2)?;
    d.set_item("Lambda", r.lambda)?;
    d.set_item("alpha", r.alpha)?;
    Ok(d)
}

/// Runs the adaptive loop and returns `(trace, final_mesh, summary)`.
#[pyfunction]
#[pyo3(signature = (mesh, problem = "smooth1", theta = 0.3, eps = 1e-3, mu = 1.0, dof_cap = 200_000, max_iter = None))]
#[allow(clippy::too_many_arguments)]
fn adapt<'py>(
    py: Python<'py>,
    mesh: &PyMesh,
    problem: &str,
    theta: f64,
    eps: f64,
    mu: f64,
    dof_cap: usize,
    max_iter: Option<usize>,
) -> PyResult<(Vec<Bound<'py, PyDict>>, PyMesh, Bound<'py, PyDict>)> {
    let g = load(problem, mu)?;
    let params = AdaptiveParams {
        theta,
        eps,
        mu,
        dof_cap,
        max_iter,
        ..AdaptiveParams::default()
    };
    let t0 = mesh.inner.clone();
    let run = py.detach(|| anfem(&t0, &g, &params)).map_err(to_py)?;
    let trace = run
        .trace
        .records
        .iter()
        .map(|r| record_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    let summary = PyDict::new(py);
    summary.set_item(
        "stop",
        match run.trace.stop {
            StopReason::Converged => "converged",
            StopReason::DofCap => "dof-cap",
            StopReason::MaxIterations => "max-iterations",
        },
    )?;
    summary.set_item("rate", rate_fit(&run.trace).ok())?;
    summary.set_item("kappa", run.trace.kappa)?;
    Ok((trace, PyMesh { inner: run.mesh }, summary))
}

/// Scaling study of the criss-cross family; returns `(rows, exponent)`.
#[pyfunction]
#[pyo3(signature = (sizes = None))]
fn counterexample<'py>(
    py: Python<'py>,
    sizes: Option<Vec<usize>>,
) -> PyResult<(Vec<Bound<'py, PyDict>>, f64)> {
    let sizes = sizes.unwrap_or_else(|| DEFAULT_SIZES.to_vec());
    let study = scaling_study(&sizes).map_err(to_py)?;
    let rows = study
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("N", r.n)?;
            d.set_item("boundary_sum", r.boundary_sum)?;
            d.set_item("grad_norm_sq", r.grad_norm_sq)?;
            d.set_item("C", r.constant)?;
            d.set_item("closed_form", r.closed_form)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((rows, study.exponent))
}

/// Runs verification suites; returns `(suite, check, passed, detail)` rows.
#[pyfunction]
#[pyo3(signature = (suites = None, mutate = false, seed = 0))]
fn verify(
    py: Python<'_>,
    suites: Option<Vec<String>>,
    mutate: bool,
    seed: u64,
) -> PyResult<Vec<(String, String, bool, String)>> {
    let suites = match suites {
        None => Suite::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|s| s.parse::<Suite>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?,
    };
    let opts = VerifyOptions {
        seed,
        mutate,
        ..VerifyOptions::default()
    };
    let report = py.detach(|| run_suites(&suites, &opts)).map_err(to_py)?;
    Ok(report
        .checks
        .into_iter()
        .map(|c| (c.suite.name().to_string(), c.name.to_string(), c.passed, c.detail))
        .collect())
}

#[pymodule]
fn afem_stokes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
