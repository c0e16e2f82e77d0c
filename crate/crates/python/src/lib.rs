use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use neckscope::app::{exit_code, heatmap, piece_table, run_suite, tree_text, Field, RunOptions, Setup, Suite};
use neckscope::config::{parse_config, parse_str};
use neckscope::emit::{pieces_dot, tree_dot};
use neckscope::neck_ode::{lemma_a_check, neck_profile, ode_solve, OdeSolution, PROFILE_DT};
use neckscope::Error;

fn py_err(e: Error) -> PyErr {
    if exit_code(&e) == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// A configuration with its family and decomposition.
#[pyclass(name = "Decomposition", module = "neckscope_py")]
struct PyDecomposition {
    inner: Setup,
}

#[pymethods]
impl PyDecomposition {
    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        let c = parse_config(path).map_err(py_err)?;
        Ok(PyDecomposition { inner: Setup::new(c).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let c = parse_str(text).map_err(py_err)?;
        Ok(PyDecomposition { inner: Setup::new(c).map_err(py_err)? })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.graph.delta()
    }

    #[getter]
    fn t_values(&self) -> Vec<f64> {
        self.inner.config.parameters.t_values.clone()
    }

    /// `(label, kind)` for every piece.
    fn pieces(&self) -> Vec<(String, String)> {
        self.inner.graph.pieces().iter().map(|p| (p.label.clone(), p.kind.as_str().to_string())).collect()
    }

    fn ghosts(&self) -> Vec<String> {
        self.inner.graph.ghosts().iter().map(|g| g.id.clone()).collect()
    }

    fn is_valid_at(&self, t: f64) -> bool {
        self.inner.graph.validate_at_index(t).passed
    }

    fn tree_text(&self) -> String {
        tree_text(&self.inner.graph)
    }

    fn tree_dot(&self) -> String {
        tree_dot(&self.inner.graph)
    }

    fn pieces_dot(&self) -> String {
        pieces_dot(&self.inner.graph)
    }

    fn piece_table(&self, t: f64) -> String {
        piece_table(&self.inner.graph, t)
    }

    /// Runs a suite and returns `(report text, any check failed)`.
    #[pyo3(signature = (suite="all", seed=None, t_values=None))]
    fn verify(&self, suite: &str, seed: Option<u64>, t_values: Option<Vec<f64>>) -> PyResult<(String, bool)> {
        let suite: Suite = suite.parse().map_err(py_err)?;
        let mut opts = RunOptions::from_config(&self.inner.config);
        if let Some(s) = seed {
            opts.seed = s;
        }
        if let Some(ts) = t_values {
            opts.t_values = ts;
        }
        let r = run_suite(&self.inner, suite, &opts).map_err(py_err)?;
        Ok((r.render(), r.failed()))
    }

    /// Row-major `n x n` samples of `omega`, `gradnorm` or `distance`; NaN
    /// outside the region.
    fn heatmap(&self, field: &str, t: f64, n: usize) -> PyResult<Vec<f64>> {
        let field: Field = field.parse().map_err(py_err)?;
        Ok(heatmap(&self.inner, field, t, n).map_err(py_err)?.1)
    }

    /// Circle energies along a simple neck, spaced by the profile step.
    fn profile(&self, neck: &str, t: f64) -> PyResult<Vec<f64>> {
        let g = &self.inner.graph;
        let p = g
            .piece_by_label(neck)
            .ok_or_else(|| PyValueError::new_err(format!("no piece `{neck}`")))?;
        Ok(neck_profile(&self.inner.family, g, p.id, t, PROFILE_DT).map_err(py_err)?.f)
    }
}

/// Solution of `g'' = gamma^2 g` with `g(0) = a`, `g(T) = b`.
#[pyclass(name = "OdeSolution", module = "neckscope_py")]
struct PyOdeSolution {
    inner: OdeSolution,
}

#[pymethods]
impl PyOdeSolution {
    #[new]
    fn new(a: f64, b: f64, gamma: f64, big_t: f64) -> PyResult<Self> {
        Ok(PyOdeSolution { inner: ode_solve(a, b, gamma, big_t).map_err(py_err)? })
    }

    #[getter]
    fn e1(&self) -> f64 {
        self.inner.e1
    }

    #[getter]
    fn e2(&self) -> f64 {
        self.inner.e2
    }

    fn g(&self, t: f64) -> f64 {
        self.inner.g(t)
    }

    fn dg(&self, t: f64) -> f64 {
        self.inner.dg(t)
    }

    fn log_d(&self, t: f64) -> f64 {
        self.inner.log_d(t)
    }

    fn log_dd(&self, t: f64) -> f64 {
        self.inner.log_dd(t)
    }

    /// `(sup |log g'| on [1,T], inf g on [0,1], status)`.
    fn lemma_check(&self) -> PyResult<(f64, f64, String)> {
        let r = lemma_a_check(&self.inner).map_err(py_err)?;
        Ok((r.sup_log_d, r.inf_g, r.status.to_string()))
    }
}

#[pyfunction]
fn bubble_metric_f(r: f64) -> f64 {
    neckscope::metrics::bubble_metric_f(r)
}

#[pyfunction]
fn annulus_distance(re: f64, im: f64, inner: f64, outer: f64) -> PyResult<f64> {
    let o = num_complex::Complex64::new(0.0, 0.0);
    neckscope::distance::annulus_distance(num_complex::Complex64::new(re, im), o, inner, outer).map_err(py_err)
}

#[pymodule]
fn neckscope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyOdeSolution>()?;
    m.add_function(wrap_pyfunction!(bubble_metric_f, m)?)?;
    m.add_function(wrap_pyfunction!(annulus_distance, m)?)?;
    Ok(())
}
