//! Python bindings. Exact rationals cross the boundary as `"p/q"` strings.

use asaw::enumerate::mass_table;
use asaw::interaction::{asaw_weight, conditional_weight, interaction_product, Memory, ModelParams};
use asaw::lattice::{Plaquette, Point};
use asaw::rational::{fmt_q, parse_q};
use asaw::stepdist::parse_distribution;
use asaw::walks::{adj_pairs, classify, Walk};
use asaw::AsawError;
use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: AsawError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (d = 2, dist = "nn", kappa = "0"))]
    fn new(d: usize, dist: &str, kappa: &str) -> PyResult<Self> {
        let dist = parse_distribution(d, dist).map_err(err)?;
        let kappa = parse_q(kappa).map_err(err)?;
        Ok(PyModelParams { inner: ModelParams::new(kappa, dist).map_err(err)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn kappa(&self) -> String {
        fmt_q(self.inner.kappa())
    }

    #[getter]
    fn p1(&self) -> String {
        fmt_q(self.inner.dist().p1())
    }

    #[getter]
    fn k0(&self) -> usize {
        self.inner.k0()
    }

    #[getter]
    fn z0(&self) -> String {
        fmt_q(&self.inner.z0())
    }

    #[getter]
    fn lambda_(&self) -> String {
        fmt_q(&self.inner.lambda())
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(d={}, dist='{}', kappa='{}')", self.inner.d(), self.inner.dist().label(), self.kappa())
    }

    /// `W_κ(ω)` as `"p/q"`.
    fn weight(&self, w: &PyWalk) -> String {
        fmt_q(&asaw_weight(&self.inner, &w.inner))
    }

    /// `Π (1 − U_ij) · P_n` as `"p/q"`.
    fn interaction_product(&self, w: &PyWalk) -> String {
        fmt_q(&interaction_product(&self.inner, &w.inner))
    }

    /// `W_κ(ω; η)` for a memory ending at the origin.
    fn conditional_weight(&self, w: &PyWalk, memory: &PyWalk) -> PyResult<String> {
        let eta = Memory::new(memory.inner.clone()).map_err(err)?;
        Ok(fmt_q(&conditional_weight(&self.inner, &w.inner, &eta)))
    }

    /// Rows `(n, c_n, b_n, h_n)` with rational strings.
    fn masses(&self, max_n: usize) -> PyResult<Vec<(usize, String, String, String)>> {
        let t = mass_table(&self.inner, max_n).map_err(err)?;
        let (c, b, h) = (t.c(), t.b(), t.h());
        Ok((0..c.len()).map(|n| (n, fmt_q(&c[n]), fmt_q(&b[n]), fmt_q(&h[n]))).collect())
    }

    /// Whether the lace expansion identity holds exactly to `order`.
    fn lace_residual_is_zero(&self, order: usize) -> PyResult<bool> {
        Ok(asaw::lace::recursion_residual(&self.inner, order).map_err(err)?.is_zero())
    }
}

#[pyclass(name = "Walk", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyWalk {
    inner: Walk,
}

#[pymethods]
impl PyWalk {
    /// Parses the `"x,y;x,y;..."` text form.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyWalk { inner: Walk::parse(text).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Walk('{}')", self.inner.to_text())
    }

    fn vertices(&self) -> Vec<Vec<i64>> {
        self.inner.vertices().iter().map(|p| p.coords().to_vec()).collect()
    }

    fn is_self_avoiding(&self) -> bool {
        self.inner.is_self_avoiding()
    }

    fn is_polygon(&self) -> bool {
        self.inner.is_polygon()
    }

    fn is_bridge(&self) -> bool {
        classify(&self.inner).bridge
    }

    fn is_half_space(&self) -> bool {
        classify(&self.inner).half_space
    }

    /// `(pair_count, plaquette_count)`.
    fn adjacency(&self) -> (usize, usize) {
        let a = adj_pairs(&self.inner);
        (a.pair_count, a.plaquettes.len())
    }

    fn flip(&self, p: &PyPlaquette) -> PyWalk {
        PyWalk { inner: asaw::flips::flip(&p.inner, &self.inner) }
    }

    fn is_flippable(&self, p: &PyPlaquette) -> bool {
        asaw::flips::is_flippable(&p.inner, &self.inner)
    }

    /// Classical unfolding: `(unfolded walk, spans)`.
    fn unfold(&self) -> PyResult<(PyWalk, Vec<i64>)> {
        let r = asaw::unfold::classical_unfold(&self.inner).map_err(err)?;
        Ok((PyWalk { inner: r.unfolded }, r.spans))
    }
}

#[pyclass(name = "Plaquette", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPlaquette {
    inner: Plaquette,
}

#[pymethods]
impl PyPlaquette {
    #[new]
    #[pyo3(signature = (base, i = 0, j = 1))]
    fn new(base: Vec<i64>, i: usize, j: usize) -> PyResult<Self> {
        Ok(PyPlaquette { inner: Plaquette::new(Point::new(&base), i, j).map_err(err)? })
    }

    fn vertices(&self) -> Vec<Vec<i64>> {
        self.inner.vertices().iter().map(|p| p.coords().to_vec()).collect()
    }
}

/// Number of partitions of `n` into distinct parts.
#[pyfunction]
fn distinct_partitions(n: usize) -> BigUint {
    asaw::unfold::distinct_partitions(n)
}

/// Runs the command-line interface in-process: `(exit code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let o = asaw::cli::run_args(std::iter::once("asaw".to_string()).chain(args));
    (o.code, o.stdout, o.stderr)
}

#[pymodule]
fn asaw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyWalk>()?;
    m.add_class::<PyPlaquette>()?;
    m.add_function(wrap_pyfunction!(distinct_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
