//! Python bindings (`import pynexlab`). Points are lists of floats in the
//! model's coordinate convention; structured results come back as dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use nexlab::fixpoint;
use nexlab::lab::{self, ExperimentConfig};
use nexlab::mapping;
use nexlab::perturbation;

create_exception!(pynexlab, NexlabError, PyException);

fn err(e: nexlab::LabError) -> PyErr {
    NexlabError::new_err(e.to_string())
}

/// Serializable value to Python objects through `json.loads`.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let s = serde_json::to_string(v).map_err(|e| NexlabError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn pt(c: Vec<f64>) -> nexlab::Point {
    nexlab::Point::new(c)
}

#[pyclass(name = "SpaceModel", frozen)]
#[derive(Clone)]
struct PySpaceModel(nexlab::SpaceModel);

#[pymethods]
impl PySpaceModel {
    #[staticmethod]
    fn euclidean(dim: usize) -> PyResult<Self> {
        nexlab::SpaceModel::euclidean(dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn half_space(dim: usize) -> PyResult<Self> {
        nexlab::SpaceModel::half_space(dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn l1(dim: usize) -> PyResult<Self> {
        nexlab::SpaceModel::l1(dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn hyperboloid2() -> Self {
        Self(nexlab::SpaceModel::hyperboloid2())
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name()
    }

    #[getter]
    fn tolerance(&self) -> f64 {
        self.0.tolerance()
    }

    fn origin(&self) -> Vec<f64> {
        self.0.origin().coords
    }

    fn dist(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.0.dist(&pt(x), &pt(y)).map_err(err)
    }

    /// `(1-lam) x ⊕ lam y`.
    fn combine(&self, x: Vec<f64>, y: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
        self.0.combine(&pt(x), &pt(y), lam).map(|p| p.coords).map_err(err)
    }

    #[pyo3(signature = (x, d, hint=None))]
    fn point_at_distance(&self, x: Vec<f64>, d: f64, hint: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let h = hint.map(pt);
        self.0.point_at_distance(&pt(x), d, h.as_ref()).map(|r| r.point.coords).map_err(err)
    }

    #[pyo3(signature = (samples=10_000, seed=0))]
    fn verify_hyperbolicity(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<PyObject> {
        let r = nexlab::geodesic::verify_hyperbolicity(&self.0, samples, seed).map_err(err)?;
        to_py(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("SpaceModel({})", self.0.name())
    }
}

#[pyclass(name = "Map", frozen)]
#[derive(Clone)]
struct PyMap(nexlab::NonexpMap);

#[pymethods]
impl PyMap {
    #[staticmethod]
    fn identity(model: &PySpaceModel) -> Self {
        Self(nexlab::NonexpMap::identity(&model.0))
    }

    #[staticmethod]
    fn constant(model: &PySpaceModel, p: Vec<f64>) -> PyResult<Self> {
        nexlab::NonexpMap::constant(&model.0, &pt(p)).map(Self).map_err(err)
    }

    #[staticmethod]
    fn affine(model: &PySpaceModel, matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> PyResult<Self> {
        nexlab::NonexpMap::affine(&model.0, &matrix, &offset).map(Self).map_err(err)
    }

    #[staticmethod]
    fn affine_1d(model: &PySpaceModel, a: f64, b: f64) -> PyResult<Self> {
        nexlab::NonexpMap::affine_1d(&model.0, a, b).map(Self).map_err(err)
    }

    fn contract_toward(&self, theta: Vec<f64>, gamma: f64) -> PyResult<Self> {
        nexlab::NonexpMap::contract_toward(&self.0, &pt(theta), gamma).map(Self).map_err(err)
    }

    fn blend_constant(&self, p: Vec<f64>, weight: f64) -> PyResult<Self> {
        nexlab::NonexpMap::blend_constant(&self.0, &pt(p), weight).map(Self).map_err(err)
    }

    /// `self ∘ inner`.
    fn compose(&self, inner: &PyMap) -> PyResult<Self> {
        nexlab::NonexpMap::compose(&self.0, &inner.0).map(Self).map_err(err)
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.eval(&pt(x)).map(|p| p.coords).map_err(err)
    }

    #[getter]
    fn claimed_lip(&self) -> f64 {
        self.0.claimed_lip()
    }

    fn describe(&self) -> String {
        self.0.describe()
    }

    fn __repr__(&self) -> String {
        format!("Map({})", self.0.describe())
    }
}

#[pyclass(name = "Gauge", frozen)]
#[derive(Clone)]
struct PyGauge(nexlab::Gauge);

#[pymethods]
impl PyGauge {
    #[staticmethod]
    fn log() -> Self {
        Self(nexlab::Gauge::log())
    }

    #[staticmethod]
    fn power() -> Self {
        Self(nexlab::Gauge::power())
    }

    #[staticmethod]
    fn porosity_power(s: f64) -> PyResult<Self> {
        nexlab::Gauge::porosity_power(s).map(Self).map_err(err)
    }

    fn phi(&self, t: f64) -> f64 {
        self.0.phi(t)
    }

    fn phi_inv(&self, u: f64) -> f64 {
        self.0.phi_inv(u)
    }

    #[getter]
    fn c_phi(&self) -> f64 {
        self.0.c_phi
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name()
    }
}

#[pyclass(name = "Metric", frozen)]
struct PyMetric(nexlab::MapMetric);

#[pymethods]
impl PyMetric {
    #[staticmethod]
    #[pyo3(signature = (model, theta, gauge, truncation=None, budget=2000))]
    fn series(model: &PySpaceModel, theta: Vec<f64>, gauge: &PyGauge, truncation: Option<usize>, budget: usize) -> PyResult<Self> {
        nexlab::MapMetric::series(&model.0, &pt(theta), &gauge.0, truncation, budget).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (model, theta, s, budget=2000))]
    fn weighted(model: &PySpaceModel, theta: Vec<f64>, s: f64, budget: usize) -> PyResult<Self> {
        nexlab::MapMetric::weighted(&model.0, &pt(theta), s, budget).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (model, truncation=None))]
    fn pointwise(model: &PySpaceModel, truncation: Option<usize>) -> PyResult<Self> {
        nexlab::MapMetric::pointwise(&model.0, truncation).map(Self).map_err(err)
    }

    /// Dict with `value`, `tail_bound`, `certified`, `sampled`.
    #[pyo3(signature = (f, g, seed=0))]
    fn distance<'py>(&self, py: Python<'py>, f: &PyMap, g: &PyMap, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let v = py.allow_threads(|| self.0.distance(&f.0, &g.0, seed)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("value", v.value)?;
        d.set_item("tail_bound", v.tail_bound)?;
        d.set_item("certified", v.certified())?;
        d.set_item("sampled", v.sampled)?;
        Ok(d)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name()
    }
}

#[pyclass(name = "Witness", frozen)]
struct PyWitness(perturbation::PorosityWitness);

#[pymethods]
impl PyWitness {
    #[getter]
    fn r(&self) -> f64 {
        self.0.r
    }

    #[getter]
    fn radius_log2(&self) -> f64 {
        self.0.radius_log2
    }

    #[getter]
    fn predicate(&self) -> &'static str {
        self.0.predicate.name()
    }

    #[getter]
    fn center(&self) -> PyMap {
        PyMap(self.0.center_g.clone())
    }

    #[getter]
    fn params(&self) -> std::collections::BTreeMap<String, f64> {
        self.0.params.clone()
    }

    #[pyo3(signature = (members=100, budget=2000, seed=0))]
    fn verify(&self, py: Python<'_>, members: usize, budget: usize, seed: u64) -> PyResult<PyObject> {
        let v = py.allow_threads(|| perturbation::verify_witness(&self.0, members, budget, seed)).map_err(err)?;
        to_py(py, &v)
    }
}

#[pyfunction]
fn ball_invariance_witness(f: &PyMap, r: f64, theta: Vec<f64>, metric: &PyMetric) -> PyResult<PyWitness> {
    perturbation::ball_invariance_witness(&f.0, r, &pt(theta), &metric.0).map(PyWitness).map_err(err)
}

#[pyfunction]
fn rakotch_witness(f: &PyMap, r: f64, n: usize, theta: Vec<f64>, metric: &PyMetric) -> PyResult<PyWitness> {
    perturbation::rakotch_witness(&f.0, r, n, &pt(theta), &metric.0).map(PyWitness).map_err(err)
}

#[pyfunction]
fn modcont_witness(f: &PyMap, r: f64, t0: f64, mu: f64, theta: Vec<f64>, metric: &PyMetric) -> PyResult<PyWitness> {
    perturbation::modcont_witness(&f.0, r, t0, mu, &pt(theta), &metric.0).map(PyWitness).map_err(err)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn shrink_witness(f: &PyMap, x: Vec<f64>, y: Vec<f64>, theta: Vec<f64>, gamma: f64, r: f64, metric: &PyMetric) -> PyResult<PyWitness> {
    perturbation::shrink_witness(&f.0, &pt(x), &pt(y), &pt(theta), gamma, r, &metric.0).map(PyWitness).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (f, x0, tol=1e-8, max_iter=fixpoint::DEFAULT_MAX_ITER))]
fn iterate(py: Python<'_>, f: &PyMap, x0: Vec<f64>, tol: f64, max_iter: usize) -> PyResult<PyObject> {
    let r = fixpoint::iterate(&f.0, &pt(x0), tol, max_iter).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (f, theta, n_max, budget=2000, seed=0))]
fn rakotch_gauges(py: Python<'_>, f: &PyMap, theta: Vec<f64>, n_max: usize, budget: usize, seed: u64) -> PyResult<Vec<f64>> {
    let g = py.allow_threads(|| mapping::rakotch_gauges(&f.0, &pt(theta), n_max, budget, seed)).map_err(err)?;
    Ok(g.gauges)
}

#[pyfunction]
#[pyo3(signature = (f, x, r, budget=2000, seed=0))]
fn local_lipschitz(py: Python<'_>, f: &PyMap, x: Vec<f64>, r: f64, budget: usize, seed: u64) -> PyResult<f64> {
    py.allow_threads(|| mapping::local_lipschitz(&f.0, &pt(x), r, budget, seed)).map(|e| e.value).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (f, center, radius, budget=2000, seed=0))]
fn empirical_lipschitz(py: Python<'_>, f: &PyMap, center: Vec<f64>, radius: f64, budget: usize, seed: u64) -> PyResult<f64> {
    py.allow_threads(|| mapping::empirical_lipschitz(&f.0, &pt(center), radius, budget, seed)).map(|e| e.value).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (f, points, a, eps, theta))]
fn isometry_patch(f: &PyMap, points: Vec<Vec<f64>>, a: f64, eps: f64, theta: Vec<f64>) -> PyResult<PyMap> {
    let model = f.0.model();
    let net = perturbation::SeparatedNet::from_points(model, points.into_iter().map(pt).collect(), a).map_err(err)?;
    perturbation::isometry_patch(&f.0, &net, a, eps, &pt(theta)).map(PyMap).map_err(err)
}

/// Runs a CLI command on a TOML config string; returns the report as a dict.
#[pyfunction]
fn run_command(py: Python<'_>, command: &str, config: &str) -> PyResult<PyObject> {
    let cmd = match command {
        "verify-axioms" => lab::Command::VerifyAxioms,
        "metric" => lab::Command::Metric,
        "witness" => lab::Command::Witness,
        "fixpoint" => lab::Command::Fixpoint,
        "lipschitz-profile" => lab::Command::LipschitzProfile,
        other => return Err(NexlabError::new_err(format!("unknown command {other:?}"))),
    };
    let cfg = ExperimentConfig::from_toml(config).map_err(err)?;
    let report = py.allow_threads(|| lab::run_command(cmd, &cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn pynexlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NexlabError", m.py().get_type::<NexlabError>())?;
    m.add("__version__", nexlab::VERSION)?;
    m.add_class::<PySpaceModel>()?;
    m.add_class::<PyMap>()?;
    m.add_class::<PyGauge>()?;
    m.add_class::<PyMetric>()?;
    m.add_class::<PyWitness>()?;
    m.add_function(wrap_pyfunction!(ball_invariance_witness, m)?)?;
    m.add_function(wrap_pyfunction!(rakotch_witness, m)?)?;
    m.add_function(wrap_pyfunction!(modcont_witness, m)?)?;
    m.add_function(wrap_pyfunction!(shrink_witness, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(rakotch_gauges, m)?)?;
    m.add_function(wrap_pyfunction!(local_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(isometry_patch, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
