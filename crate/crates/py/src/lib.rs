use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

use shellvar::admissibility::check_admissible;
use shellvar::geometry::{curvatures, fundamental_forms, Vec3};
use shellvar::io::{dispatch, parse_config, Command};
use shellvar::minimize::SolverConfig;
use shellvar::verify;
use shellvar::{BoundaryConditions, EnergySpec, EnergyVariant, Gamma0Spec, LoadSpec, ShellConfig, SurfaceConfiguration, SurfacePreset};

create_exception!(shellvar_py, ShellError, PyException);

fn err(e: shellvar::ShellError) -> PyErr {
    ShellError::new_err(e.to_string())
}

fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_str()?.to_owned());
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// Accepts a JSON string or a plain Python object of the same shape.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let text = json_text(obj)?;
    serde_json::from_str(&text).map_err(|e| ShellError::new_err(format!("{what}: {e}")))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| ShellError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn loads(n: usize, f: Option<Vec3>, m: Option<Vec3>) -> LoadSpec {
    LoadSpec::uniform(n, f.unwrap_or([0.0; 3]), m.unwrap_or([0.0; 3]))
}

/// Discrete midsurface on a parameter grid.
#[pyclass(module = "shellvar_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Surface {
    inner: SurfaceConfiguration,
}

#[pymethods]
impl Surface {
    /// Sample a preset (`"plate"`, or e.g. `{"kind": "torus", "R": 2, "r": 0.5}`) on an `nx` by `ny` grid.
    #[staticmethod]
    fn preset(preset: &Bound<'_, PyAny>, nx: usize, ny: usize) -> PyResult<Self> {
        let text = json_text(preset)?;
        let value: serde_json::Value = serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text));
        let value = match value {
            serde_json::Value::String(s) => serde_json::json!({ "kind": s }),
            v => v,
        };
        let p: SurfacePreset = serde_json::from_value(value).map_err(|e| ShellError::new_err(format!("preset: {e}")))?;
        p.validate().map_err(err)?;
        let inner = p.discrete_config(&p.grid(nx, ny).map_err(err)?).map_err(err)?;
        Ok(Self { inner })
    }

    /// Same grid, new node positions.
    fn with_psi(&self, psi: Vec<Vec3>) -> PyResult<Self> {
        Ok(Self { inner: SurfaceConfiguration::from_psi(&self.inner.grid, psi).map_err(err)? })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.grid.nx, self.inner.grid.ny)
    }

    #[getter]
    fn psi(&self) -> Vec<Vec3> {
        self.inner.psi.clone()
    }

    #[getter]
    fn normals(&self) -> Vec<Vec3> {
        self.inner.a3.clone()
    }

    #[getter]
    fn sqrt_a(&self) -> Vec<f64> {
        self.inner.sqrt_a.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.grid.weights()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Nodal `H`, `K` and principal curvatures.
    fn curvature<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let c = curvatures(&fundamental_forms(&self.inner).map_err(err)?);
        to_py(py, &serde_json::json!({ "H": c.h, "K": c.k, "kappa1": c.kappa1, "kappa2": c.kappa2 }))
    }

    /// Quadrature of `f * sqrt(a)` over the parameter domain.
    fn integrate(&self, f: Vec<f64>) -> PyResult<f64> {
        let v: Vec<f64> = f.iter().zip(&self.inner.sqrt_a).map(|(a, b)| a * b).collect();
        self.inner.grid.integrate(&v).map_err(err)
    }

    fn identity_checks<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &verify::identity_checks(&self.inner).map_err(err)?)
    }

    fn to_obj(&self) -> PyResult<String> {
        shellvar::io::obj_string(&self.inner.grid, &self.inner.psi).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Surface(nx={}, ny={})", self.inner.grid.nx, self.inner.grid.ny)
    }
}

/// Reference midsurface together with the half-thickness.
#[pyclass(module = "shellvar_py", frozen)]
struct Shell {
    inner: ShellConfig,
}

#[pymethods]
impl Shell {
    #[new]
    fn new(reference: &Surface, epsilon: f64) -> PyResult<Self> {
        Ok(Self { inner: ShellConfig::new(epsilon, reference.inner.clone()).map_err(err)? })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn reference(&self) -> Surface {
        Surface { inner: self.inner.reference.clone() }
    }

    fn max_eps_kappa(&self) -> f64 {
        self.inner.max_eps_kappa()
    }

    /// Admissibility report of `surface` (no boundary conditions).
    fn check<'py>(&self, py: Python<'py>, surface: &Surface) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &check_admissible(&surface.inner, &self.inner, None).map_err(err)?)
    }
}

/// Stored energy: `{"helfrich": {...}}` or `{"poly_family": {...}}` plus `epsilon`.
#[pyclass(module = "shellvar_py", frozen)]
struct Energy {
    inner: EnergySpec,
}

#[pymethods]
impl Energy {
    #[new]
    fn new(variant: &Bound<'_, PyAny>, epsilon: f64) -> PyResult<Self> {
        let variant: EnergyVariant = from_py(variant, "energy")?;
        let inner = EnergySpec { variant, epsilon };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn is_helfrich(&self) -> bool {
        self.inner.is_helfrich()
    }

    #[pyo3(signature = (samples = 10000, seed = 0))]
    fn polyconvexity_probe<'py>(&self, py: Python<'py>, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &verify::polyconvexity_probe(&self.inner, samples, seed).map_err(err)?)
    }

    #[pyo3(signature = (shell, samples = 10000, seed = 0))]
    fn coercivity_probe<'py>(&self, py: Python<'py>, shell: &Shell, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &verify::coercivity_probe(&self.inner, &shell.inner, samples, seed).map_err(err)?)
    }

    #[pyo3(signature = (steps = 40))]
    fn blowup_probe<'py>(&self, py: Python<'py>, steps: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &verify::blowup_probe(&self.inner, steps).map_err(err)?)
    }

    /// Verdict of the polyconvexity and blow-up probes.
    #[pyo3(signature = (samples = 10000, steps = 40, seed = 0))]
    fn classify(&self, samples: usize, steps: usize, seed: u64) -> PyResult<&'static str> {
        let c = verify::polyconvexity_probe(&self.inner, samples, seed).map_err(err)?;
        let b = verify::blowup_probe(&self.inner, steps).map_err(err)?;
        Ok(verify::classify(&c, &b))
    }
}

/// Stored energy minus the work of uniform loads `f`, `m`.
#[pyfunction]
#[pyo3(signature = (surface, energy, shell, f = None, m = None))]
fn total_energy(surface: &Surface, energy: &Energy, shell: &Shell, f: Option<Vec3>, m: Option<Vec3>) -> PyResult<f64> {
    let l = loads(surface.inner.len(), f, m);
    shellvar::energy::total_energy(&surface.inner, &energy.inner, &l, &shell.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (surface, energy, shell, f = None, m = None))]
fn energy_gradient(surface: &Surface, energy: &Energy, shell: &Shell, f: Option<Vec3>, m: Option<Vec3>) -> PyResult<Vec<Vec3>> {
    let l = loads(surface.inner.len(), f, m);
    shellvar::energy::energy_gradient(&surface.inner, &energy.inner, &l, &shell.inner).map_err(err)
}

/// Minimize from `start` with `gamma0` (edge names or `{"nodes": [[i, j], ...]}`)
/// clamped to the reference. Returns the final surface and a summary dict.
#[pyfunction]
#[pyo3(signature = (start, energy, shell, gamma0, f = None, m = None, normal_penalty_weight = 1e3, solver = None))]
#[allow(clippy::too_many_arguments)]
fn minimize<'py>(
    py: Python<'py>,
    start: &Surface,
    energy: &Energy,
    shell: &Shell,
    gamma0: &Bound<'py, PyAny>,
    f: Option<Vec3>,
    m: Option<Vec3>,
    normal_penalty_weight: f64,
    solver: Option<&Bound<'py, PyAny>>,
) -> PyResult<(Surface, Bound<'py, PyAny>)> {
    let g0: serde_json::Value = serde_json::from_str(&json_text(gamma0)?).map_err(|e| ShellError::new_err(format!("gamma0: {e}")))?;
    let g0 = if g0.is_array() { serde_json::json!({ "edges": g0 }) } else { g0 };
    let g0: Gamma0Spec = serde_json::from_value(g0).map_err(|e| ShellError::new_err(format!("gamma0: {e}")))?;
    let cfg: SolverConfig = match solver {
        Some(s) => from_py(s, "solver")?,
        None => SolverConfig::default(),
    };
    let bc = BoundaryConditions::clamped(&g0, &shell.inner.reference, normal_penalty_weight).map_err(err)?;
    let l = loads(start.inner.len(), f, m);
    let r = py.detach(|| shellvar::minimize::minimize(&start.inner, &energy.inner, &l, &shell.inner, &bc, &cfg)).map_err(err)?;
    let summary = serde_json::json!({
        "converged": r.converged,
        "energy_history": r.energy_history,
        "objective_history": r.objective_history,
        "grad_norm_history": r.grad_norm_history,
        "stages": r.stages,
        "norm_history": r.norm_history,
        "admissibility": r.admissibility,
        "iterations": r.iterations,
        "stall": r.stall,
    });
    Ok((Surface { inner: r.psi_final }, to_py(py, &summary)?))
}

/// Same as the `shellvar` CLI: returns `(exit_code, report)`.
#[pyfunction]
#[pyo3(signature = (command, config, out = None, seed = None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let cmd: Command = command.parse().map_err(err)?;
    let text = std::fs::read_to_string(&config).map_err(|e| err(e.into()))?;
    let mut cfg = parse_config(&text).map_err(err)?;
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = config.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    let o = py.detach(|| dispatch(cmd, &cfg, &base)).map_err(err)?;
    Ok((o.exit_code(), py.import("json")?.call_method1("loads", (o.report,))?))
}

#[pymodule]
pub fn shellvar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ShellError", m.py().get_type::<ShellError>())?;
    m.add_class::<Surface>()?;
    m.add_class::<Shell>()?;
    m.add_class::<Energy>()?;
    m.add_function(wrap_pyfunction!(total_energy, m)?)?;
    m.add_function(wrap_pyfunction!(energy_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
