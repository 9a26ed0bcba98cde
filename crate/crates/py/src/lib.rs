//! Python bindings: the stable family, cell trees, spines and the
//! experiment registry.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gfsim_core::cellsystem::{
    area_martingale, area_profile, tree_text, CellTree, KillPlacement, TreeEngine, TruncationPolicy,
};
use gfsim_core::cumulant::{find_roots, StableFamily};
use gfsim_core::harness::{run_experiment, to_csv, Config, Settings, REGISTRY};
use gfsim_core::lamperti::{exp_functional_moment, ExpFunctionalOptions};
use gfsim_core::levy::{SamplerOptions, SpineSign};
use gfsim_core::rng::StreamSeed;
use gfsim_core::spine::{prob_i_leq, SpineConfig, SpineEngine};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// The stable-maps family `κ_θ`, `θ ∈ (1, 3/2]`.
#[pyclass(name = "StableFamily", frozen)]
struct PyStableFamily {
    inner: StableFamily,
}

#[pymethods]
impl PyStableFamily {
    #[new]
    fn new(theta: f64) -> PyResult<Self> {
        Ok(Self { inner: StableFamily::new(theta).map_err(err)? })
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn omega_minus(&self) -> f64 {
        self.inner.omega_minus()
    }

    #[getter]
    fn omega_plus(&self) -> f64 {
        self.inner.omega_plus()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    fn kappa(&self, q: f64) -> PyResult<f64> {
        self.inner.kappa(q).map_err(err)
    }

    /// The two Cramér roots, found numerically.
    fn roots(&self) -> PyResult<(f64, f64)> {
        let f = &self.inner;
        find_roots(|q| f.kappa(q).unwrap_or(f64::NAN), f.bracket_hint()).and_then(|r| r.cramer()).map_err(err)
    }

    /// `(q_star, q0, upper_exponent)`.
    fn log_bound_exponents(&self) -> (f64, f64, f64) {
        let e = self.inner.log_bound_exponents();
        (e.q_star, e.q0, e.upper_exponent)
    }

    fn __repr__(&self) -> String {
        format!("StableFamily(theta={})", self.inner.theta)
    }
}

/// A truncated cell system.
#[pyclass(name = "CellTree", frozen)]
struct PyCellTree {
    inner: CellTree,
}

#[pymethods]
impl PyCellTree {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn x(&self) -> f64 {
        self.inner.x
    }

    #[getter]
    fn max_generation(&self) -> usize {
        self.inner.max_generation()
    }

    /// `M(n)`; `n` must not exceed the generation cap of the tree.
    fn martingale(&self, n: u32) -> PyResult<f64> {
        if n > self.inner.policy.max_generation {
            return Err(PyValueError::new_err(format!("generation {n} is past the cap")));
        }
        Ok(area_martingale(&self.inner, n))
    }

    /// `(breakpoints, cumulative)` of the area profile `t ↦ A(t)`.
    fn area_profile(&self) -> (Vec<f64>, Vec<f64>) {
        let p = area_profile(&self.inner);
        (p.breakpoints, p.cumulative)
    }

    fn to_text(&self) -> String {
        tree_text(&self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (theta, x, seed, x_min=None, max_generation=None, horizon=None))]
fn grow_tree(
    theta: f64,
    x: f64,
    seed: u64,
    x_min: Option<f64>,
    max_generation: Option<u32>,
    horizon: Option<f64>,
) -> PyResult<PyCellTree> {
    let s = Settings::default();
    let params = StableFamily::new(theta).and_then(|f| f.params()).map_err(err)?;
    let engine = TreeEngine::new(&params, s.resolution(), KillPlacement::BirthHeight).map_err(err)?;
    let pol = TruncationPolicy {
        x_min: x_min.unwrap_or(s.x_min * x),
        max_generation: max_generation.unwrap_or(u32::MAX),
        max_cells: s.max_cells,
        horizon: horizon.unwrap_or(f64::INFINITY),
    };
    let tree = engine.grow(x, &pol, &mut StreamSeed::new(seed, "grow-tree").replica(0)).map_err(err)?;
    Ok(PyCellTree { inner: tree })
}

type SpinePath = (Vec<(f64, f64, f64)>, Option<f64>);

/// Jumps `(t, before, after)` of a spine and its absorption time, if any.
#[pyfunction]
#[pyo3(signature = (theta, sign, x, seed, horizon=10.0))]
fn simulate_spine(theta: f64, sign: &str, x: f64, seed: u64, horizon: f64) -> PyResult<SpinePath> {
    let sign = match sign {
        "minus" => SpineSign::Minus,
        "plus" => SpineSign::Plus,
        other => return Err(PyValueError::new_err(format!("sign must be 'minus' or 'plus', got {other:?}"))),
    };
    let s = Settings::default();
    let mut c = SpineConfig::new(sign, theta, x);
    c.horizon = horizon;
    c.delta = s.spine_delta;
    c.stop = s.stop();
    let engine = SpineEngine::from_config(&c).map_err(err)?;
    let path = engine.simulate(&c, &mut StreamSeed::new(seed, "spine").replica(0));
    Ok((path.jumps(), path.absorption_time))
}

/// `P_1^-(I <= t)` as `(mean, stderr)`.
#[pyfunction]
fn prob_absorbed_by(theta: f64, t: f64, n: u64, seed: u64) -> PyResult<(f64, f64)> {
    let s = Settings::default();
    let engine = SpineEngine::new(theta, s.spine_delta, SamplerOptions::default(), s.stop()).map_err(err)?;
    let e = prob_i_leq(&engine, t, n, StreamSeed::new(seed, "prob"));
    Ok((e.mean, e.stderr))
}

/// `E[I^power]` of the absorbed spine as `(mean, stderr)`.
#[pyfunction]
fn exp_functional(theta: f64, power: f64, n: u64, seed: u64) -> PyResult<(f64, f64)> {
    let s = Settings::default();
    let fam = StableFamily::new(theta).map_err(err)?;
    let mut triplet = fam.spine_triplet(SpineSign::Minus).map_err(err)?;
    triplet.jumps = triplet.jumps.with_cutoff(s.spine_delta).map_err(err)?;
    let opts = ExpFunctionalOptions { stop: s.stop(), ..ExpFunctionalOptions::default() };
    let e =
        exp_functional_moment(&triplet, fam.alpha(), power, n, StreamSeed::new(seed, "exfunc"), &opts).map_err(err)?;
    Ok((e.estimate.mean, e.estimate.stderr))
}

#[pyfunction]
fn list_experiments() -> Vec<(&'static str, &'static str)> {
    REGISTRY.iter().map(|e| (e.id, e.anchor)).collect()
}

/// Runs a registered experiment; returns `(passed, summary, csv)`.
#[pyfunction]
#[pyo3(signature = (id, seed=None, replicas=None, config=None))]
fn verify(
    py: Python<'_>,
    id: &str,
    seed: Option<u64>,
    replicas: Option<u64>,
    config: Option<&str>,
) -> PyResult<(Option<bool>, Vec<String>, String)> {
    let cfg = Config::parse(config.unwrap_or("")).map_err(err)?;
    let mut s = Settings::from_config(&cfg).map_err(err)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if replicas.is_some() {
        s.replicas = replicas;
    }
    let r = py.detach(|| run_experiment(id, &s)).map_err(err)?;
    Ok((r.passed, r.summary.clone(), to_csv(&r.manifest, &r.table)))
}

#[pymodule]
fn gfsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStableFamily>()?;
    m.add_class::<PyCellTree>()?;
    m.add_function(wrap_pyfunction!(grow_tree, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_spine, m)?)?;
    m.add_function(wrap_pyfunction!(prob_absorbed_by, m)?)?;
    m.add_function(wrap_pyfunction!(exp_functional, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
