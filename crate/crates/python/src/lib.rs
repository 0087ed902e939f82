//! Python bindings: the service engine, knowledge bases, the answer parsers
//! and the evaluation metrics.
//!
//! Structured results cross the boundary as JSON and are decoded with the
//! standard `json` module, so Python sees plain dicts and lists.

use std::path::PathBuf;

use blendkit_core::diagnostics::Diagnostics;
use blendkit_core::eval;
use blendkit_core::kb::KnowledgeBase;
use blendkit_core::llm::{self, EntityKind};
use blendkit_core::semantic;
use blendkit_core::service::{BlendRequest, Config, Engine, RequestOptions, ServiceError};
use blendkit_core::stage1::Strategy;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(blendkit, BlendkitError, PyException, "Raised for engine and knowledge-base failures.");

fn service_err(e: ServiceError) -> PyErr {
    let body = e.body();
    BlendkitError::new_err((e.status(), body.code, body.message))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_kind(kind: &str) -> PyResult<EntityKind> {
    EntityKind::ALL
        .into_iter()
        .find(|k| k.as_str() == kind)
        .ok_or_else(|| PyValueError::new_err(format!("unknown entity kind {kind:?}")))
}

/// Loaded domains plus the configured providers.
#[pyclass(name = "Engine", module = "blendkit", frozen)]
struct PyEngine {
    inner: Engine,
}

#[pymethods]
impl PyEngine {
    /// Builds an engine from a TOML config (or `$BLENDKIT_CONFIG`).
    /// `cache_dir` overrides the response cache location.
    #[new]
    #[pyo3(signature = (config=None, cache_dir=None, offline=true))]
    fn new(config: Option<PathBuf>, cache_dir: Option<PathBuf>, offline: bool) -> PyResult<Self> {
        let mut cfg = Config::from_env(config.as_deref()).map_err(service_err)?;
        if let Some(dir) = cache_dir {
            cfg.cache_dir = dir;
        }
        cfg.offline = cfg.offline || offline;
        let inner = Engine::from_config(&cfg, &mut Diagnostics::new()).map_err(service_err)?;
        Ok(Self { inner })
    }

    /// Summaries of every loaded domain.
    fn domains<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.domains())
    }

    #[pyo3(signature = (term, k=None))]
    fn related_words(&self, term: &str, k: Option<usize>) -> PyResult<Vec<String>> {
        self.inner.related_words(Some(term), k).map_err(service_err)
    }

    /// Runs both stages and returns the response as a dict.
    #[pyo3(signature = (domain, product, related=None, strategies=None, cutoff=None, drop_ratio=None, offline=true))]
    #[allow(clippy::too_many_arguments)]
    fn blend<'py>(
        &self,
        py: Python<'py>,
        domain: &str,
        product: &str,
        related: Option<Vec<String>>,
        strategies: Option<Vec<String>>,
        cutoff: Option<f64>,
        drop_ratio: Option<f64>,
        offline: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let json = self.blend_json(py, domain, product, related, strategies, cutoff, drop_ratio, offline)?;
        py.import("json")?.call_method1("loads", (json,))
    }

    /// Same as `blend` but returns the canonical JSON text.
    #[pyo3(signature = (domain, product, related=None, strategies=None, cutoff=None, drop_ratio=None, offline=true))]
    #[allow(clippy::too_many_arguments)]
    fn blend_json(
        &self,
        py: Python<'_>,
        domain: &str,
        product: &str,
        related: Option<Vec<String>>,
        strategies: Option<Vec<String>>,
        cutoff: Option<f64>,
        drop_ratio: Option<f64>,
        offline: bool,
    ) -> PyResult<String> {
        let strategies = match strategies {
            Some(names) => names
                .iter()
                .map(|s| Strategy::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown strategy {s:?}"))))
                .collect::<PyResult<Vec<_>>>()?,
            None => Strategy::ALL.to_vec(),
        };
        let request = BlendRequest {
            domain_id: domain.to_string(),
            product_term: product.to_string(),
            selected_related: related.unwrap_or_default(),
            strategies,
            options: RequestOptions {
                cutoff,
                drop_ratio,
                offline,
            },
        };
        let response = py.detach(|| self.inner.blend(&request)).map_err(service_err)?;
        Ok(response.to_canonical_json())
    }
}

/// A persisted domain knowledge base.
#[pyclass(name = "KnowledgeBase", module = "blendkit", frozen)]
struct PyKnowledgeBase {
    inner: KnowledgeBase,
}

#[pymethods]
impl PyKnowledgeBase {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = KnowledgeBase::load(&path).map_err(|e| BlendkitError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = KnowledgeBase::from_json(text).map_err(|e| BlendkitError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn domain_id(&self) -> &str {
        self.inner.domain_id()
    }

    #[getter]
    fn sentences(&self) -> Vec<String> {
        self.inner.sentences.iter().map(|s| s.resolved_text.clone()).collect()
    }

    #[getter]
    fn entities<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.entities)
    }

    #[getter]
    fn attributes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.attributes)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.entities.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeBase({:?}, sentences={}, entities={}, attributes={})",
            self.inner.domain_id(),
            self.inner.sentences.len(),
            self.inner.entities.len(),
            self.inner.attributes.len()
        )
    }
}

/// Splits a list answer into at most `expected` items.
#[pyfunction]
fn parse_enumerated_list(text: &str, expected: usize) -> PyResult<Vec<String>> {
    llm::parse_enumerated_list(text, expected)
        .map(|p| p.items)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Parses an "I associate X with Y because of Z" answer into a dict.
#[pyfunction]
fn parse_direct_association<'py>(py: Python<'py>, text: &str, product: &str, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    let parsed = llm::parse_direct_association(text, product, parse_kind(kind)?)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &parsed)
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(semantic::cosine(&a, &b))
}

/// Cohen's kappa over paired yes/no judgements.
#[pyfunction]
fn cohens_kappa(pairs: Vec<(bool, bool)>) -> PyResult<f64> {
    eval::cohens_kappa(&pairs).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn pearson_r(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    eval::pearson_r(&xs, &ys).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
pub fn blendkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BlendkitError", m.py().get_type::<BlendkitError>())?;
    m.add_class::<PyEngine>()?;
    m.add_class::<PyKnowledgeBase>()?;
    m.add_function(wrap_pyfunction!(parse_enumerated_list, m)?)?;
    m.add_function(wrap_pyfunction!(parse_direct_association, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    Ok(())
}
