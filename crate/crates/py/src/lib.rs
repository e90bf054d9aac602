use std::collections::BTreeSet;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gridnk::{
    compute_phi, fixtures, is_feasible_attack, parse_case, parse_geo, solve_exhaustive, solve_inner,
    solve_interdiction, AttackPlan, AttackerModel, BoundsMode, DistanceMode, HighsBackend, SolveConfig,
};

create_exception!(gridnk, GridnkError, PyValueError, "Raised for invalid input or a failed solve.");

fn err(e: gridnk::Error) -> PyErr {
    GridnkError::new_err(e.to_string())
}

fn parse_flag<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

/// A DC power network: buses with demand and generation, lines with
/// reactance and thermal limit, all in per unit.
#[pyclass(name = "Network", module = "gridnk", frozen)]
struct PyNetwork {
    inner: gridnk::Network,
}

#[pymethods]
impl PyNetwork {
    /// Parses case text, optionally with a `bus_id,lat,lon` CSV.
    #[new]
    #[pyo3(signature = (case_text, geo_csv=None))]
    fn new(case_text: &str, geo_csv: Option<&str>) -> PyResult<Self> {
        let mut net = parse_case(case_text).map_err(err)?;
        if let Some(geo) = geo_csv {
            net = parse_geo(geo, &net).map_err(err)?;
        }
        Ok(PyNetwork { inner: net })
    }

    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        fixtures::builtin(name)
            .map(|inner| PyNetwork { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown built-in case `{name}`")))
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        fixtures::BUILTIN_NAMES.to_vec()
    }

    fn with_geo(&self, geo_csv: &str) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: parse_geo(geo_csv, &self.inner).map_err(err)?,
        })
    }

    #[getter]
    fn num_buses(&self) -> usize {
        self.inner.num_buses()
    }

    #[getter]
    fn num_lines(&self) -> usize {
        self.inner.num_lines()
    }

    #[getter]
    fn base_mva(&self) -> f64 {
        self.inner.base_mva
    }

    #[getter]
    fn total_load(&self) -> f64 {
        gridnk::total_load(&self.inner)
    }

    #[getter]
    fn bus_ids(&self) -> Vec<u32> {
        self.inner.buses.iter().map(|b| b.id).collect()
    }

    /// `(id, from_bus, to_bus)` per line.
    #[getter]
    fn lines(&self) -> Vec<(u32, u32, u32)> {
        self.inner.lines.iter().map(|l| (l.id, l.from_bus, l.to_bus)).collect()
    }

    #[getter]
    fn geolocated(&self) -> bool {
        self.inner.all_geolocated()
    }

    fn to_case_text(&self) -> String {
        self.inner.to_case_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(buses={}, lines={}, load={:.4})",
            self.inner.num_buses(),
            self.inner.num_lines(),
            gridnk::total_load(&self.inner)
        )
    }
}

impl PyNetwork {
    fn positions(&self, ids: &[u32]) -> PyResult<BTreeSet<usize>> {
        ids.iter()
            .map(|&id| {
                self.inner
                    .line_pos(id)
                    .ok_or_else(|| PyValueError::new_err(format!("unknown line id {id}")))
            })
            .collect()
    }
}

#[pyclass(name = "Attacker", module = "gridnk", frozen)]
struct PyAttacker {
    inner: AttackerModel,
}

#[pymethods]
impl PyAttacker {
    #[staticmethod]
    fn traditional(k: usize) -> PyResult<Self> {
        Ok(PyAttacker {
            inner: AttackerModel::traditional(k).map_err(err)?,
        })
    }

    #[staticmethod]
    fn spatial(k: usize, d_km: f64) -> PyResult<Self> {
        Ok(PyAttacker {
            inner: AttackerModel::spatial(k, d_km).map_err(err)?,
        })
    }

    #[staticmethod]
    fn topological(k: usize) -> PyResult<Self> {
        Ok(PyAttacker {
            inner: AttackerModel::topological(k).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn d_km(&self) -> Option<f64> {
        self.inner.d_km()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn __repr__(&self) -> String {
        format!("Attacker({})", self.inner)
    }
}

/// Result of a constraint-generation run. Line and bus references are ids.
#[pyclass(name = "Outcome", module = "gridnk", frozen, get_all)]
struct PyOutcome {
    eta_star: f64,
    eta_up: f64,
    status: String,
    iterations: usize,
    rel_gap: f64,
    interdicted_lines: Vec<u32>,
    center_bus: Option<u32>,
    /// Shed fraction per bus, in bus order.
    shed: Vec<f64>,
    /// `(iteration, attack, eta, eta_star, eta_up)` per iteration.
    history: Vec<(usize, Vec<u32>, f64, f64, f64)>,
    exact_eta: f64,
    wall_time_s: f64,
}

#[pymethods]
impl PyOutcome {
    fn __repr__(&self) -> String {
        format!(
            "Outcome(eta_star={:.6}, lines={:?}, status={}, iterations={})",
            self.eta_star, self.interdicted_lines, self.status, self.iterations
        )
    }
}

/// Finds the attack that maximizes load shed, to relative tolerance `eps`.
#[pyfunction]
#[pyo3(signature = (network, attacker, eps=0.01, bounds="heuristic", center=None, max_iters=10_000, seed=0, distance="haversine"))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    network: &PyNetwork,
    attacker: &PyAttacker,
    eps: f64,
    bounds: &str,
    center: Option<u32>,
    max_iters: usize,
    seed: u64,
    distance: &str,
) -> PyResult<PyOutcome> {
    let config = SolveConfig {
        epsilon: eps,
        bounds_mode: parse_flag::<BoundsMode>(bounds)?,
        center_bus: center,
        max_iters,
        distance_mode: parse_flag::<DistanceMode>(distance)?,
        ..SolveConfig::default()
    };
    let net = &network.inner;
    let model = attacker.inner;
    let out = py
        .detach(|| solve_interdiction(net, &model, &config, &HighsBackend::with_seed(seed)))
        .map_err(err)?;
    let ids = |lines: &[usize]| lines.iter().map(|&l| net.lines[l].id).collect::<Vec<_>>();
    Ok(PyOutcome {
        eta_star: out.eta_star,
        eta_up: out.state.eta_up,
        status: status_name(out.status),
        iterations: out.state.iterations,
        rel_gap: out.gap(&config),
        interdicted_lines: out.attack.line_ids(net),
        center_bus: out.attack.center_bus.map(|b| net.buses[b].id),
        shed: out.solution.shed.clone(),
        history: out
            .state
            .history
            .iter()
            .map(|h| (h.iteration, ids(&h.attack), h.eta, h.eta_star, h.eta_up))
            .collect(),
        exact_eta: out.certificate.exact_eta,
        wall_time_s: out.wall_time_s,
    })
}

fn status_name(s: gridnk::SolveStatus) -> String {
    match s {
        gridnk::SolveStatus::Converged => "converged",
        gridnk::SolveStatus::Exhausted => "exhausted",
        gridnk::SolveStatus::IterationLimit => "iteration_limit",
    }
    .to_string()
}

/// Minimum load shed after removing the given line ids.
#[pyfunction]
fn inner_shed(py: Python<'_>, network: &PyNetwork, lines: Vec<u32>) -> PyResult<f64> {
    let plan = AttackPlan::new(network.positions(&lines)?);
    let net = &network.inner;
    let sol = py.detach(|| solve_inner(net, &plan, &HighsBackend::default())).map_err(err)?;
    Ok(sol.eta)
}

/// Enumerates every feasible attack. Returns `(eta, line_ids, evaluated)`.
#[pyfunction]
#[pyo3(signature = (network, attacker, budget=1_000_000, distance="haversine"))]
fn exhaustive(
    py: Python<'_>,
    network: &PyNetwork,
    attacker: &PyAttacker,
    budget: u128,
    distance: &str,
) -> PyResult<(f64, Vec<u32>, usize)> {
    let mode = parse_flag::<DistanceMode>(distance)?;
    let net = &network.inner;
    let model = attacker.inner;
    let res = py
        .detach(|| {
            let fp = model.d_km().map(|d| compute_phi(net, d, mode)).transpose()?;
            solve_exhaustive(net, &model, fp.as_ref(), &HighsBackend::default(), budget)
        })
        .map_err(err)?;
    Ok((res.best_eta, res.best_attack.line_ids(net), res.evaluated))
}

/// Whether the attacker may remove exactly these line ids.
#[pyfunction]
#[pyo3(signature = (network, attacker, lines, distance="haversine"))]
fn is_feasible(network: &PyNetwork, attacker: &PyAttacker, lines: Vec<u32>, distance: &str) -> PyResult<bool> {
    let mode = parse_flag::<DistanceMode>(distance)?;
    let net = &network.inner;
    let set = network.positions(&lines)?;
    let fp = attacker
        .inner
        .d_km()
        .map(|d| compute_phi(net, d, mode))
        .transpose()
        .map_err(err)?;
    Ok(is_feasible_attack(net, &attacker.inner, fp.as_ref(), &set))
}

#[pymodule]
#[pyo3(name = "gridnk")]
fn gridnk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("GridnkError", m.py().get_type::<GridnkError>())?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyAttacker>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(inner_shed, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(is_feasible, m)?)?;
    Ok(())
}
