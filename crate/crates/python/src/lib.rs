//! Python bindings for the Curie-Weiss-Potts engine.

use std::path::Path;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use cwp_core::config::ModelConfig;
use cwp_core::observable::{Observable, ObservableSpec};
use cwp_core::pgm::{self, McOptions, Proposal};
use cwp_core::pressure::{EntropyOptions, PressureMap};
use cwp_core::quadratic::{self, MaximaOptions};
use cwp_core::{xy, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::OutOfRange(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializes through JSON so results arrive as plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_proposal(name: &str) -> PyResult<Proposal> {
    match name {
        "auto" => Ok(Proposal::Auto),
        "product" => Ok(Proposal::Product),
        "latent" | "latentField" => Ok(Proposal::LatentField),
        _ => Err(PyValueError::new_err(format!("unknown proposal {name:?}"))),
    }
}

/// A model built from a JSON config, with its pressure cache.
#[pyclass(name = "Model", module = "cwp", frozen)]
struct PyModel {
    config: ModelConfig,
    pm: Arc<PressureMap>,
}

impl PyModel {
    fn from_config(config: ModelConfig) -> PyResult<Self> {
        let model = config.build_model().map_err(py_err)?;
        let pm = PressureMap::with_options(Arc::new(model), config.solver);
        Ok(PyModel { config, pm: Arc::new(pm) })
    }

    fn observable(&self, spec: Option<&str>) -> PyResult<Observable> {
        let spec: ObservableSpec = match spec {
            Some(text) => serde_json::from_str(text)
                .map_err(|e| PyValueError::new_err(format!("observable JSON: {e}")))?,
            None => self
                .config
                .observable
                .clone()
                .ok_or_else(|| PyValueError::new_err("no observable given and none in the config"))?,
        };
        spec.build(self.pm.model().alphabet()).map_err(py_err)
    }
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        Self::from_config(ModelConfig::from_json(config_json).map_err(py_err)?)
    }

    /// Loads a config file; a file alphabet is resolved relative to it.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Self::from_config(ModelConfig::load(Path::new(path)).map_err(py_err)?)
    }

    #[getter]
    fn q(&self) -> usize {
        self.pm.q()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.config.beta
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.pm.model().alphabet().labels().to_vec()
    }

    fn config_json(&self) -> String {
        self.config.to_json()
    }

    fn spectral(&self, py: Python<'_>, t: Vec<f64>) -> PyResult<Py<PyAny>> {
        let pm = self.pm.clone();
        let sd = py.detach(move || pm.spectral(&t)).map_err(py_err)?;
        to_py(py, &sd)
    }

    fn pressure(&self, py: Python<'_>, t: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let pm = self.pm.clone();
        let p = py.detach(move || pm.pressure(&t)).map_err(py_err)?;
        Ok((p.p, p.grad))
    }

    #[pyo3(signature = (t, h=1e-4))]
    fn hessian(&self, py: Python<'_>, t: Vec<f64>, h: f64) -> PyResult<Vec<Vec<f64>>> {
        let pm = self.pm.clone();
        let m = py.detach(move || pm.hessian(&t, h)).map_err(py_err)?;
        Ok(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn h_top(&self) -> PyResult<f64> {
        self.pm.h_top().map_err(py_err)
    }

    fn entropy(&self, py: Python<'_>, z: Vec<f64>) -> PyResult<Py<PyAny>> {
        let pm = self.pm.clone();
        let h = py
            .detach(move || pm.entropy(&z, &EntropyOptions::default()))
            .map_err(py_err)?;
        to_py(py, &h)
    }

    #[pyo3(signature = (beta=None, k=None, grid=None, multistarts=8))]
    fn maxima(
        &self,
        py: Python<'_>,
        beta: Option<f64>,
        k: Option<f64>,
        grid: Option<f64>,
        multistarts: usize,
    ) -> PyResult<Py<PyAny>> {
        let beta = beta.unwrap_or(self.config.beta);
        let opts = MaximaOptions {
            k,
            grid_step: grid,
            multistarts,
            radial: self.config.radial,
        };
        let pm = self.pm.clone();
        let set = py.detach(move || quadratic::find_maxima(&pm, beta, &opts)).map_err(py_err)?;
        to_py(py, &set)
    }

    /// Exact finite-n Gibbs expectation; `observable` is a JSON observable spec.
    #[pyo3(signature = (n, beta=None, observable=None, cap=pgm::DEFAULT_EXACT_CAP))]
    fn exact_pgm(
        &self,
        py: Python<'_>,
        n: usize,
        beta: Option<f64>,
        observable: Option<&str>,
        cap: usize,
    ) -> PyResult<Py<PyAny>> {
        let f = self.observable(observable)?;
        let beta = beta.unwrap_or(self.config.beta);
        let pm = self.pm.clone();
        let est = py.detach(move || pgm::exact_pgm(pm.model(), n, beta, &f, cap)).map_err(py_err)?;
        to_py(py, &est)
    }

    #[pyo3(signature = (n, beta=None, observable=None, samples=100_000, seed=None, proposal="auto"))]
    #[allow(clippy::too_many_arguments)]
    fn mc_pgm(
        &self,
        py: Python<'_>,
        n: usize,
        beta: Option<f64>,
        observable: Option<&str>,
        samples: usize,
        seed: Option<u64>,
        proposal: &str,
    ) -> PyResult<Py<PyAny>> {
        let f = self.observable(observable)?;
        let opts = McOptions {
            samples,
            seed: seed.unwrap_or(self.config.seed),
            proposal: parse_proposal(proposal)?,
        };
        let beta = beta.unwrap_or(self.config.beta);
        let pm = self.pm.clone();
        let est = py.detach(move || pgm::mc_pgm(pm.model(), n, beta, &f, &opts)).map_err(py_err)?;
        to_py(py, &est)
    }

    #[pyo3(signature = (beta=None))]
    fn limit_mixture(&self, py: Python<'_>, beta: Option<f64>) -> PyResult<Py<PyAny>> {
        let beta = beta.unwrap_or(self.config.beta);
        let opts = MaximaOptions {
            radial: self.config.radial,
            ..MaximaOptions::default()
        };
        let pm = self.pm.clone();
        let mix = py
            .detach(move || {
                let set = quadratic::find_maxima(&pm, beta, &opts)?;
                pgm::limit_mixture(&pm, &set)
            })
            .map_err(py_err)?;
        to_py(py, &mix)
    }

    fn __repr__(&self) -> String {
        format!("Model(q={}, symbols={}, beta={})", self.pm.q(), self.pm.model().alphabet().len(), self.config.beta)
    }
}

#[pyfunction]
fn bessel_i0(x: f64) -> PyResult<f64> {
    xy::bessel_i0(x).map_err(py_err)
}

#[pyfunction]
fn bessel_ratio(x: f64) -> PyResult<f64> {
    xy::bessel_ratio(x).map_err(py_err)
}

#[pyfunction]
fn xy_phi(py: Python<'_>, beta: f64, x: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &xy::xy_phi(beta, x).map_err(py_err)?)
}

#[pyfunction]
fn xy_critical_point(py: Python<'_>, beta: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &xy::xy_critical_point(beta).map_err(py_err)?)
}

/// Finite-n XY expectation of cos(theta_0 - theta_1) by radial quadrature.
#[pyfunction]
fn xy_finite_n_cos_diff(beta: f64, n: usize) -> PyResult<f64> {
    xy::xy_finite_n_expectation(beta, n, |x| Ok(xy::bessel_ratio(x)?.powi(2))).map_err(py_err)
}

#[pyfunction]
fn laplace_tail(py: Python<'_>, alpha: f64, gamma: f64, n: f64, b_n: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &xy::laplace_tail(alpha, gamma, n, b_n).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (xi, nodes=64))]
fn hubbard_stratonovich_check(xi: Vec<f64>, nodes: usize) -> PyResult<f64> {
    pgm::hubbard_stratonovich_check(&xi, nodes).map_err(py_err)
}

#[pymodule]
fn cwp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(bessel_i0, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(xy_phi, m)?)?;
    m.add_function(wrap_pyfunction!(xy_critical_point, m)?)?;
    m.add_function(wrap_pyfunction!(xy_finite_n_cos_diff, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_tail, m)?)?;
    m.add_function(wrap_pyfunction!(hubbard_stratonovich_check, m)?)?;
    Ok(())
}
