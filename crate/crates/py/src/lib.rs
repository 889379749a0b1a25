//! Python bindings: domains, forms and the verifier entry points.
//!
//! Core objects (`Domain`, `FormMatrix`, `BdlParts`) are exposed as classes;
//! report-producing operations return plain dicts mirroring the JSON report
//! schemas, with boundary measures encoded as floats (`math.inf` pins a
//! node).

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use formlab::verify::{SweepConfig, SweepDomains, SweepGenerator};
use formlab::{BoundaryKind, BoundaryMeasure, BoundaryOperator, LocalityVerdict};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// serde_json::Value -> Python object (dicts, lists, scalars).
fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py(py)
        }
    })
}

fn report_to_py<T: serde::Serialize>(py: Python<'_>, report: &T) -> PyResult<PyObject> {
    let value = serde_json::to_value(report).map_err(err)?;
    json_to_py(py, &value)
}

fn measure_from_values(values: Vec<f64>) -> PyResult<BoundaryMeasure> {
    BoundaryMeasure::new(values).map_err(err)
}

fn matrix_to_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Discrete domain: node partition, stencil edges, masses and surface weights.
#[pyclass(frozen, module = "formlab_py")]
#[derive(Clone)]
struct Domain {
    inner: Arc<formlab::Domain>,
}

#[pymethods]
impl Domain {
    /// 1D grid on an interval with lumped finite-element scaling.
    #[staticmethod]
    fn interval(n: usize, length: f64) -> PyResult<Domain> {
        Ok(Domain {
            inner: Arc::new(formlab::build_interval(n, length).map_err(err)?),
        })
    }

    /// 2D five-point-stencil grid with a perimeter boundary.
    #[staticmethod]
    fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> PyResult<Domain> {
        Ok(Domain {
            inner: Arc::new(formlab::build_rectangle(nx, ny, lx, ly).map_err(err)?),
        })
    }

    /// Weighted graph with a designated boundary; weights default to one.
    #[staticmethod]
    #[pyo3(signature = (edges, boundary, mass=None, boundary_weight=None))]
    fn graph(
        edges: Vec<(usize, usize, f64)>,
        boundary: Vec<usize>,
        mass: Option<Vec<f64>>,
        boundary_weight: Option<Vec<f64>>,
    ) -> PyResult<Domain> {
        Ok(Domain {
            inner: Arc::new(
                formlab::build_graph(&edges, &boundary, mass, boundary_weight).map_err(err)?,
            ),
        })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn boundary(&self) -> Vec<usize> {
        self.inner.boundary().to_vec()
    }

    #[getter]
    fn interior(&self) -> Vec<usize> {
        self.inner.interior().to_vec()
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    #[getter]
    fn boundary_weights(&self) -> Vec<f64> {
        self.inner.boundary_weights().to_vec()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.i, e.j, e.conductance))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Domain> {
        Ok(Domain {
            inner: Arc::new(formlab::Domain::from_json(text).map_err(err)?),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Domain(n_nodes={}, boundary={:?})",
            self.inner.n_nodes(),
            self.inner.boundary()
        )
    }
}

/// Symmetric bilinear form over a domain, with its pinned node set.
#[pyclass(frozen, module = "formlab_py")]
#[derive(Clone)]
struct FormMatrix {
    inner: formlab::FormMatrix,
}

#[pymethods]
impl FormMatrix {
    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.matrix())
    }

    #[getter]
    fn pinned(&self) -> Vec<usize> {
        self.inner.pinned().iter().copied().collect()
    }

    #[getter]
    fn domain(&self) -> Domain {
        Domain {
            inner: self.inner.domain().clone(),
        }
    }

    /// a(u, v) = u' A v.
    fn energy(&self, u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        let un = nalgebra::DVector::from_vec(u);
        let vn = nalgebra::DVector::from_vec(v);
        self.inner.energy(&un, &vn).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<FormMatrix> {
        Ok(FormMatrix {
            inner: formlab::FormMatrix::from_json(text).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "FormMatrix(n={}, pinned={:?})",
            self.inner.n(),
            self.inner.pinned()
        )
    }
}

/// Jump and killing parts of a decomposed form.
#[pyclass(frozen, module = "formlab_py")]
struct BdlParts {
    inner: formlab::BdlParts,
    domain: Arc<formlab::Domain>,
}

#[pymethods]
impl BdlParts {
    /// Jump weight per stencil edge, aligned with `Domain.edges`.
    #[getter]
    fn stencil_jump(&self) -> Vec<f64> {
        self.inner.stencil_jump.clone()
    }

    /// `{(i, j): jump}` over non-adjacent pairs.
    #[getter]
    fn nonlocal_jump(&self) -> std::collections::BTreeMap<(usize, usize), f64> {
        self.inner.nonlocal_jump.clone()
    }

    #[getter]
    fn killing(&self) -> Vec<f64> {
        self.inner.killing.clone()
    }

    #[getter]
    fn markovian(&self) -> bool {
        self.inner.markovian
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json(&self.domain).map_err(err)
    }
}

#[pyfunction]
fn neumann_form(domain: &Domain) -> FormMatrix {
    FormMatrix {
        inner: formlab::neumann_form(&domain.inner),
    }
}

#[pyfunction]
fn dirichlet_form(domain: &Domain) -> PyResult<FormMatrix> {
    Ok(FormMatrix {
        inner: formlab::dirichlet_form(&domain.inner).map_err(err)?,
    })
}

/// Robin form for a measure given per boundary node; `math.inf` pins.
#[pyfunction]
fn robin_form(domain: &Domain, mu: Vec<f64>) -> PyResult<FormMatrix> {
    let measure = measure_from_values(mu)?;
    Ok(FormMatrix {
        inner: formlab::robin_form(&domain.inner, &measure).map_err(err)?,
    })
}

/// Nonlocal Robin form for a symmetric boundary operator given as rows.
#[pyfunction]
fn nonlocal_robin_form(domain: &Domain, b: Vec<Vec<f64>>) -> PyResult<FormMatrix> {
    let op = BoundaryOperator::from_rows(&b).map_err(err)?;
    Ok(FormMatrix {
        inner: formlab::nonlocal_robin_form(&domain.inner, &op).map_err(err)?,
    })
}

/// `(markovian, witness)` with witness `(i, j, value)` or `None`.
#[pyfunction]
fn is_markovian(form: &FormMatrix) -> (bool, Option<(usize, usize, f64)>) {
    let v = formlab::is_markovian(&form.inner);
    (v.is_markovian(), v.witness())
}

/// `(gap_rows, nonnegative, witness)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn ouhabaz_gap(
    a: &FormMatrix,
    b: &FormMatrix,
) -> PyResult<(Vec<Vec<f64>>, bool, Option<(usize, usize, f64)>)> {
    let gap = formlab::ouhabaz_gap(&a.inner, &b.inner).map_err(err)?;
    Ok((matrix_to_rows(&gap.gap), gap.nonnegative, gap.witness))
}

#[pyfunction]
fn cross_form_energy(form: &FormMatrix, u: Vec<f64>) -> PyResult<f64> {
    formlab::cross_form_energy(&form.inner, &u).map_err(err)
}

#[pyfunction]
fn bdl_decompose(form: &FormMatrix) -> PyResult<BdlParts> {
    Ok(BdlParts {
        inner: formlab::bdl_decompose(&form.inner).map_err(err)?,
        domain: form.inner.domain().clone(),
    })
}

#[pyfunction]
fn bdl_reconstruct(parts: &BdlParts, domain: &Domain) -> PyResult<FormMatrix> {
    Ok(FormMatrix {
        inner: formlab::bdl_reconstruct(&parts.inner, &domain.inner).map_err(err)?,
    })
}

/// `None` when stencil-local, else the witness `(i, j, jump)`.
#[pyfunction]
fn classify_locality(form: &FormMatrix) -> Option<(usize, usize, f64)> {
    match formlab::classify_locality(&form.inner) {
        formlab::Locality::StencilLocal => None,
        formlab::Locality::Nonlocal { i, j, jump } => Some((i, j, jump)),
    }
}

/// Dense snapshot of exp(-t M^-1 A) as nested lists.
#[pyfunction]
fn expm(form: &FormMatrix, t: f64) -> PyResult<Vec<Vec<f64>>> {
    let snap = formlab::expm(&form.inner, t).map_err(err)?;
    Ok(matrix_to_rows(&snap.matrix))
}

#[pyfunction]
fn min_entry_profile(form: &FormMatrix, times: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    formlab::min_entry_profile(&form.inner, &times).map_err(err)
}

#[pyfunction]
fn is_positivity_preserving(py: Python<'_>, form: &FormMatrix, times: Vec<f64>) -> PyResult<PyObject> {
    let report = formlab::is_positivity_preserving(&form.inner, &times).map_err(err)?;
    report_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (lower, upper, times, tol=None))]
fn dominates(
    py: Python<'_>,
    lower: &FormMatrix,
    upper: &FormMatrix,
    times: Vec<f64>,
    tol: Option<f64>,
) -> PyResult<PyObject> {
    let report = formlab::dominates(&lower.inner, &upper.inner, &times, tol).map_err(err)?;
    report_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (form, t_max=10.0, bisect_tol=1e-6))]
fn eventually_positive(
    py: Python<'_>,
    form: &FormMatrix,
    t_max: f64,
    bisect_tol: f64,
) -> PyResult<PyObject> {
    let report = formlab::eventually_positive(&form.inner, t_max, bisect_tol).map_err(err)?;
    report_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (form, times, tol=None))]
fn check_sandwich(
    py: Python<'_>,
    form: &FormMatrix,
    times: Vec<f64>,
    tol: Option<f64>,
) -> PyResult<PyObject> {
    let report = formlab::check_sandwich(&form.inner, &times, tol).map_err(err)?;
    report_to_py(py, &report)
}

/// Dict with `verdict` plus `mu`/`beta` on success; infinite measure values
/// come back as `math.inf`.
#[pyfunction]
fn extract_boundary_measure(py: Python<'_>, form: &FormMatrix) -> PyResult<PyObject> {
    let extraction = formlab::extract_boundary_measure(&form.inner);
    let dict = PyDict::new_bound(py);
    let verdict = serde_json::to_value(&extraction.verdict).map_err(err)?;
    for (k, v) in verdict.as_object().into_iter().flatten() {
        dict.set_item(k, json_to_py(py, v)?)?;
    }
    if let Some(mu) = &extraction.mu {
        dict.set_item("mu", mu.values().to_vec())?;
    }
    if let Some(beta) = &extraction.beta {
        dict.set_item("beta", beta.values().to_vec())?;
    }
    Ok(dict.into_py(py))
}

#[pyfunction]
fn verify_characterization(
    py: Python<'_>,
    domain: &Domain,
    mu: Vec<f64>,
    times: Vec<f64>,
) -> PyResult<PyObject> {
    let measure = measure_from_values(mu)?;
    let report =
        formlab::verify_characterization(&domain.inner, &measure, &times).map_err(err)?;
    report_to_py(py, &report)
}

/// Dict report; `verdict` is `"local"`, `"not_applicable"` or
/// `"theorem_violation"`.
#[pyfunction]
fn locality_from_domination(
    py: Python<'_>,
    form: &FormMatrix,
    times: Vec<f64>,
) -> PyResult<PyObject> {
    let report = formlab::locality_from_domination(&form.inner, &times).map_err(err)?;
    let dict = PyDict::new_bound(py);
    let label = match &report.verdict {
        LocalityVerdict::Local { .. } => "local",
        LocalityVerdict::NotApplicable { .. } => "not_applicable",
        LocalityVerdict::TheoremViolation { .. } => "theorem_violation",
    };
    dict.set_item("verdict", label)?;
    dict.set_item("detail", report_to_py(py, &report)?)?;
    Ok(dict.into_py(py))
}

#[pyfunction]
#[pyo3(signature = (n, times=None))]
fn example_aw45(py: Python<'_>, n: usize, times: Option<Vec<f64>>) -> PyResult<PyObject> {
    let report = formlab::example_aw45(n, times).map_err(err)?;
    report_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (trials, seed, generator="planted-measure", times=None, max_interval=65, max_side=15, include_2d=true))]
#[allow(clippy::too_many_arguments)]
fn sweep_random(
    py: Python<'_>,
    trials: usize,
    seed: u64,
    generator: &str,
    times: Option<Vec<f64>>,
    max_interval: usize,
    max_side: usize,
    include_2d: bool,
) -> PyResult<PyObject> {
    let generator: SweepGenerator = generator.parse().map_err(err)?;
    let mut config = SweepConfig::new(trials, seed, generator);
    config.domains = SweepDomains {
        max_interval,
        max_side,
        include_2d,
    };
    if let Some(times) = times {
        config.times = times;
    }
    let report = formlab::sweep_random(&config).map_err(err)?;
    report_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (kind, sizes, k, beta=None))]
fn eigen_convergence(
    py: Python<'_>,
    kind: &str,
    sizes: Vec<usize>,
    k: usize,
    beta: Option<f64>,
) -> PyResult<PyObject> {
    let kind = match kind {
        "neumann" => BoundaryKind::Neumann,
        "dirichlet" => BoundaryKind::Dirichlet,
        "robin" => BoundaryKind::Robin {
            beta: beta.ok_or_else(|| PyValueError::new_err("robin kind requires beta"))?,
        },
        other => return Err(PyValueError::new_err(format!("unknown kind '{other}'"))),
    };
    let table = formlab::eigen_convergence(kind, &sizes, k).map_err(err)?;
    report_to_py(py, &table)
}

/// First positive roots of the Robin characteristic function, by bracketed
/// bisection.
#[pyfunction]
fn robin_reference_roots(beta: f64, count: usize) -> PyResult<Vec<f64>> {
    formlab::robin_reference_roots(beta, count).map_err(err)
}

#[pymodule]
fn formlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Domain>()?;
    m.add_class::<FormMatrix>()?;
    m.add_class::<BdlParts>()?;
    m.add_function(wrap_pyfunction!(neumann_form, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_form, m)?)?;
    m.add_function(wrap_pyfunction!(robin_form, m)?)?;
    m.add_function(wrap_pyfunction!(nonlocal_robin_form, m)?)?;
    m.add_function(wrap_pyfunction!(is_markovian, m)?)?;
    m.add_function(wrap_pyfunction!(ouhabaz_gap, m)?)?;
    m.add_function(wrap_pyfunction!(cross_form_energy, m)?)?;
    m.add_function(wrap_pyfunction!(bdl_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(bdl_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(classify_locality, m)?)?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(min_entry_profile, m)?)?;
    m.add_function(wrap_pyfunction!(is_positivity_preserving, m)?)?;
    m.add_function(wrap_pyfunction!(dominates, m)?)?;
    m.add_function(wrap_pyfunction!(eventually_positive, m)?)?;
    m.add_function(wrap_pyfunction!(check_sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(extract_boundary_measure, m)?)?;
    m.add_function(wrap_pyfunction!(verify_characterization, m)?)?;
    m.add_function(wrap_pyfunction!(locality_from_domination, m)?)?;
    m.add_function(wrap_pyfunction!(example_aw45, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_random, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(robin_reference_roots, m)?)?;
    Ok(())
}
