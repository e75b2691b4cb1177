//! Python bindings: the distribution spec with its MGF/privacy/utility
//! operations, baseline values, the shape threshold, the calibrator and the
//! release mechanism.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rdp_core::mechanism::{Dataset, Query, QueryJob};
use rdp_core::optimizer::{FamilyKind, Metric, OptimizationProblem};
use rdp_core::{DistributionSpec, MetricValue};

/// A randomizing distribution for the reciprocal noise scale 1/b.
#[pyclass(frozen)]
struct Spec {
    inner: DistributionSpec,
}

#[pymethods]
impl Spec {
    /// Parse the JSON wire format, e.g.
    /// {"terms":[{"coef":1.0,"family":{"gamma":{"k":2.0,"theta":0.5}}}]}
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        DistributionSpec::from_json(text)
            .map(|inner| Spec { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// M_{1/b}(t); +inf when the MGF does not exist at t.
    fn mgf(&self, t: f64) -> f64 {
        self.inner.mgf(t)
    }

    fn mgf_deriv(&self, t: f64) -> f64 {
        self.inner.mgf_deriv(t)
    }

    fn mean_inv_b(&self) -> f64 {
        self.inner.mean_inv_b()
    }

    /// `n` draws of 1/b under a fixed seed.
    fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.inner.sample_inv_b(&mut rng)).collect()
    }

    /// Exact privacy guarantee at sensitivity delta_q.
    fn eps(&self, delta_q: f64) -> PyResult<f64> {
        if delta_q <= 0.0 {
            return Err(PyValueError::new_err("delta_q must be positive"));
        }
        Ok(rdp_core::eps_general(&self.inner, delta_q))
    }

    /// (holds, margin) of the improvement necessary condition e^ε < M(Δq).
    fn necessary_condition(&self, delta_q: f64) -> PyResult<(bool, f64)> {
        if delta_q <= 0.0 {
            return Err(PyValueError::new_err("delta_q must be positive"));
        }
        let n = rdp_core::necessary_condition(&self.inner, delta_q);
        Ok((n.holds, n.margin))
    }

    fn usefulness(&self, gamma: f64) -> PyResult<f64> {
        if gamma <= 0.0 {
            return Err(PyValueError::new_err("gamma must be positive"));
        }
        Ok(rdp_core::usefulness(&self.inner, gamma))
    }

    fn pdf(&self, x: f64) -> f64 {
        rdp_core::pdf_noise(&self.inner, x)
    }

    fn cdf(&self, x: f64) -> f64 {
        rdp_core::cdf_noise(&self.inner, x)
    }

    /// Expected absolute error; None when the integral diverges.
    fn l1(&self) -> Option<f64> {
        rdp_core::l1_error(&self.inner).finite()
    }

    fn l2(&self) -> Option<f64> {
        rdp_core::l2_error(&self.inner).finite()
    }

    /// (table_form, full_line) noise entropy; None when divergent.
    fn entropy(&self) -> (Option<f64>, Option<f64>) {
        let table = rdp_core::utility::entropy_table(&self.inner);
        let full = match table {
            MetricValue::Finite(v) => Some(v + std::f64::consts::LN_2),
            MetricValue::Divergent => None,
        };
        (table.finite(), full)
    }

    fn __repr__(&self) -> String {
        format!("Spec({})", self.inner.compact_string())
    }
}

/// Plain Laplace usefulness 1 - e^{-gamma·eps/delta_q}.
#[pyfunction]
#[pyo3(signature = (eps, gamma, delta_q = 1.0))]
fn baseline_usefulness(eps: f64, gamma: f64, delta_q: f64) -> PyResult<f64> {
    if eps <= 0.0 || gamma <= 0.0 || delta_q <= 0.0 {
        return Err(PyValueError::new_err("all arguments must be positive"));
    }
    Ok(rdp_core::baseline_usefulness(eps, gamma, delta_q))
}

/// Smallest improving Gamma shape for theta·delta_q = theta_ratio.
#[pyfunction]
fn gamma_threshold(delta_q: f64, theta_ratio: f64) -> PyResult<f64> {
    if delta_q <= 0.0 || theta_ratio <= 0.0 || theta_ratio >= 1.0 {
        return Err(PyValueError::new_err(
            "need delta_q > 0 and theta_ratio in (0, 1)",
        ));
    }
    Ok(rdp_core::gamma_threshold(delta_q, theta_ratio))
}

fn parse_families(text: &str) -> PyResult<(Vec<FamilyKind>, bool)> {
    let mut kinds = Vec::new();
    let mut combined = false;
    for raw in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if raw == "combined" {
            combined = true;
        } else {
            let kind = FamilyKind::parse(raw)
                .ok_or_else(|| PyValueError::new_err(format!("unknown family {raw:?}")))?;
            kinds.push(kind);
        }
    }
    if kinds.is_empty() && !combined {
        return Err(PyValueError::new_err("no family selected"));
    }
    Ok((kinds, combined))
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use pyo3::IntoPyObjectExt;
    match v {
        serde_json::Value::Null => py.None().into_bound_py_any(py),
        serde_json::Value::Bool(b) => b.into_bound_py_any(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_bound_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)
            }
        }
        serde_json::Value::String(s) => s.into_bound_py_any(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_bound_py_any(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_bound_py_any(py)
        }
    }
}

/// Calibrate a spec against an exact ε target; returns the result as a dict
/// (best_spec, objective, eps_achieved, constraint_residual, ...).
#[pyfunction]
#[pyo3(signature = (eps_target, delta_q = 1.0, gamma = 1.0, metric = "usefulness",
                    families = "combined", restarts = 64, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    eps_target: f64,
    delta_q: f64,
    gamma: f64,
    metric: &str,
    families: &str,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let metric =
        Metric::parse(metric).ok_or_else(|| PyValueError::new_err("unknown metric"))?;
    let (kinds, combined) = parse_families(families)?;
    let problem = OptimizationProblem {
        metric,
        families: kinds,
        combined,
        restarts,
        seed,
        ..OptimizationProblem::new(eps_target, delta_q, gamma)
    };
    let result = rdp_core::optimize(&problem).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let value = serde_json::to_value(&result).expect("result serializes");
    json_to_py(py, &value)
}

/// One differentially private release of a query over a CSV column.
#[pyfunction]
#[pyo3(signature = (data, column, query, epsilon, clip = None, gamma = 1.0,
                    metric = "usefulness", seed = 0, spec = None, restarts = 64))]
#[allow(clippy::too_many_arguments)]
fn release<'py>(
    py: Python<'py>,
    data: &str,
    column: &str,
    query: &str,
    epsilon: f64,
    clip: Option<(f64, f64)>,
    gamma: f64,
    metric: &str,
    seed: u64,
    spec: Option<&Spec>,
    restarts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let dataset = Dataset::from_csv_path(std::path::Path::new(data), column)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let query = match (query, clip) {
        ("count", _) => Query::Count,
        ("sum", Some((clip_lo, clip_hi))) => Query::Sum { clip_lo, clip_hi },
        ("mean", Some((clip_lo, clip_hi))) => Query::Mean { clip_lo, clip_hi },
        ("sum" | "mean", None) => {
            return Err(PyValueError::new_err("sum/mean queries need clip=(lo, hi)"))
        }
        _ => return Err(PyValueError::new_err("query must be count, sum or mean")),
    };
    let metric =
        Metric::parse(metric).ok_or_else(|| PyValueError::new_err("unknown metric"))?;
    let job = QueryJob {
        dataset,
        query,
        eps_target: epsilon,
        gamma,
        metric,
        seed,
        spec_override: spec.map(|s| s.inner.clone()),
        restarts,
    };
    let record = rdp_core::release(&job).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let value = serde_json::to_value(&record).expect("record serializes");
    json_to_py(py, &value)
}

#[pymodule]
fn rdp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Spec>()?;
    m.add_function(wrap_pyfunction!(baseline_usefulness, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(release, m)?)?;
    Ok(())
}
