//! Python bindings. Everything here marshals arguments into the shared entry
//! points in `discrete_dp_core::api`; results match the command line for the
//! same seed and flags.
//!
//! Errors raise `DiscreteDpError` with `args == (message, code)`.

use discrete_dp_core::api::{self, AuditConfig, QuerySpec, SampleDist, SamplerSpec};
use discrete_dp_core::{config, EntropySource, Error};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(discrete_dp, DiscreteDpError, PyException);

fn to_py(e: Error) -> PyErr {
    DiscreteDpError::new_err((e.to_string(), e.code()))
}

fn spec(dist: &str, num: u64, den: u64, mu: i64, algo: &str) -> PyResult<SamplerSpec> {
    let dist: SampleDist = dist.parse().map_err(to_py)?;
    Ok(SamplerSpec {
        dist,
        num,
        den,
        mu,
        algo: algo.to_string(),
    })
}

/// Round trip through Python's json module, so dict-like inputs arrive as
/// serde values without a second conversion layer.
fn dict_to_value(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = py.import_bound("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| to_py(e.into()))
}

fn value_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    let text = serde_json::to_string(v).map_err(|e| to_py(e.into()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

/// `count` samples; seeded if `seed` is given, OS randomness otherwise.
#[pyfunction]
#[pyo3(signature = (dist, num=1, den=1, mu=0, count=1, seed=None, algo="auto"))]
fn sample(dist: &str, num: u64, den: u64, mu: i64, count: u64, seed: Option<u64>, algo: &str) -> PyResult<Vec<i64>> {
    api::sample_many(&spec(dist, num, den, mu, algo)?, count, seed).map_err(to_py)
}

/// Runs the audit described by `config` (same keys as the JSON form, with a
/// `kind` of pmf, two-sample, dp, renyi or cuts) and returns the report.
#[pyfunction]
fn audit(py: Python<'_>, config: &Bound<'_, PyDict>) -> PyResult<PyObject> {
    let cfg = AuditConfig::from_json(dict_to_value(py, config.as_any())?).map_err(to_py)?;
    let report = api::run_audit(&cfg).map_err(to_py)?;
    value_to_py(py, &report.to_json())
}

/// Runs a DP query over `data`. There is no ledger on this path.
#[pyfunction]
#[pyo3(signature = (spec, data, seed=None))]
fn query(py: Python<'_>, spec: &Bound<'_, PyDict>, data: Vec<i64>, seed: Option<u64>) -> PyResult<PyObject> {
    let spec: QuerySpec = serde_json::from_value(dict_to_value(py, spec.as_any())?)
        .map_err(|e| to_py(Error::Parse(format!("query spec: {e}"))))?;
    let out = api::run_query(&spec, &data, seed, None).map_err(to_py)?;
    value_to_py(py, &out)
}

/// A sampler owning its entropy source. Not safe to share between threads;
/// use one per thread.
#[pyclass(unsendable)]
struct Sampler {
    spec: SamplerSpec,
    draw: Box<dyn FnMut(&mut EntropySource) -> discrete_dp_core::Result<i64>>,
    src: EntropySource,
}

#[pymethods]
impl Sampler {
    #[new]
    #[pyo3(signature = (dist, num=1, den=1, mu=0, seed=None, algo="auto"))]
    fn new(dist: &str, num: u64, den: u64, mu: i64, seed: Option<u64>, algo: &str) -> PyResult<Self> {
        let spec = spec(dist, num, den, mu, algo)?;
        let draw = Box::new(spec.sampler().map_err(to_py)?);
        Ok(Sampler {
            spec,
            draw,
            src: EntropySource::from_seed(seed),
        })
    }

    fn sample(&mut self) -> PyResult<i64> {
        (self.draw)(&mut self.src).map_err(to_py)
    }

    fn sample_many(&mut self, count: u64) -> PyResult<Vec<i64>> {
        (0..count).map(|_| self.sample()).collect()
    }

    /// Entropy bytes consumed so far.
    #[getter]
    fn consumed(&self) -> u64 {
        self.src.consumed()
    }

    fn __repr__(&self) -> String {
        let s = &self.spec;
        format!("Sampler({}, {}/{}, mu={}, algo={})", s.dist, s.num, s.den, s.mu, s.algo)
    }
}

#[pymodule]
fn discrete_dp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    // Precision is fixed for the life of the process.
    m.add("PRECISION_BITS", config::env_precision_bits())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DiscreteDpError", m.py().get_type_bound::<DiscreteDpError>())?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(query, m)?)?;
    m.add_class::<Sampler>()?;
    Ok(())
}
