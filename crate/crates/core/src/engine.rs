//! Constraint generation over attacks: a master MILP proposes an attack and
//! an upper bound, the inner LP prices it, and each priced attack contributes
//! an optimality cut and a no-good cut.

use std::collections::BTreeSet;
use std::time::Instant;

use log::{debug, info};

use crate::attackers::{compute_phi, encode_feasible_set, DistanceMode, MasterEncoding, SpatialFootprint};
use crate::bounds::{bounds_for, BoundsMode, DualBounds};
use crate::error::{Error, Result};
use crate::inner::{cut_coefficients, solve_inner, AttackPlan, InnerSolution};
use crate::lp::{Backend, LinearProgram, LpStatus, Sense, Var};
use crate::netmodel::{total_load, AttackerModel, Network};

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Relative optimality tolerance.
    pub epsilon: f64,
    /// Denominator floor for the relative gap.
    pub abs_floor: f64,
    pub max_iters: usize,
    pub bounds_mode: BoundsMode,
    /// Overrides the network's big-M.
    pub big_m: Option<f64>,
    pub distance_mode: DistanceMode,
    /// Known spatial center, as a bus id.
    pub center_bus: Option<u32>,
    /// Heuristic runs on networks with at most this many lines are repeated
    /// with valid bounds and the two answers compared.
    pub cross_check_max_lines: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            epsilon: 0.01,
            abs_floor: 1e-6,
            max_iters: 10_000,
            bounds_mode: BoundsMode::Heuristic,
            big_m: None,
            distance_mode: DistanceMode::Haversine,
            center_bus: None,
            cross_check_max_lines: 12,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidModel(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.abs_floor > 0.0) {
            return Err(Error::InvalidModel("abs_floor must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidModel("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// `η ≤ eta + Σ coef_l x_l`.
#[derive(Debug, Clone)]
pub struct Cut {
    pub eta: f64,
    pub coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Proposed attack, as line positions.
    pub attack: Vec<usize>,
    pub center_bus: Option<usize>,
    /// Load shed of the proposed attack.
    pub eta: f64,
    pub eta_star: f64,
    pub eta_up: f64,
}

#[derive(Debug, Clone)]
pub struct MasterState {
    pub cuts: Vec<Cut>,
    pub nogood: Vec<BTreeSet<usize>>,
    pub incumbent: Option<AttackPlan>,
    pub eta_star: f64,
    /// `+∞` until the first master solve.
    pub eta_up: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

impl MasterState {
    fn new() -> Self {
        MasterState {
            cuts: Vec::new(),
            nogood: Vec::new(),
            incumbent: None,
            eta_star: 0.0,
            eta_up: f64::INFINITY,
            iterations: 0,
            history: Vec::new(),
        }
    }
}

/// Relative gap `(η^u − η*) / max(η*, abs_floor)`.
pub fn gap(state: &MasterState, config: &SolveConfig) -> Result<f64> {
    if state.iterations == 0 || state.incumbent.is_none() || !state.eta_up.is_finite() {
        return Err(Error::GapUndefined);
    }
    Ok((state.eta_up - state.eta_star) / state.eta_star.max(config.abs_floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Gap closed to within epsilon.
    Converged,
    /// Every feasible attack was priced; the incumbent is exact.
    Exhausted,
    IterationLimit,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self != SolveStatus::IterationLimit
    }
}

/// Independent checks of a finished run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Certificate {
    /// Load shed from a fresh inner solve at the returned attack.
    pub exact_eta: f64,
    /// Optimum found by repeating the run with valid bounds, when performed.
    pub valid_eta: Option<f64>,
    pub valid_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub attack: AttackPlan,
    pub eta_star: f64,
    pub status: SolveStatus,
    pub state: MasterState,
    pub bounds: DualBounds,
    pub solution: InnerSolution,
    pub certificate: Certificate,
    pub wall_time_s: f64,
}

impl SolveOutcome {
    pub fn gap(&self, config: &SolveConfig) -> f64 {
        gap(&self.state, config).unwrap_or(0.0)
    }
}

/// Builds the footprint, encoding and bounds for a run.
pub fn prepare<B: Backend + ?Sized>(
    net: &Network,
    model: &AttackerModel,
    config: &SolveConfig,
    backend: &B,
) -> Result<(Option<SpatialFootprint>, MasterEncoding, DualBounds)> {
    let footprint = match model.d_km() {
        Some(d) => Some(compute_phi(net, d, config.distance_mode)?),
        None => None,
    };
    let mut enc = encode_feasible_set(net, model, footprint.as_ref())?;
    if let Some(id) = config.center_bus {
        let pos = net.bus_pos(id).ok_or_else(|| Error::UnknownBus {
            bus: id,
            context: "center pin".into(),
        })?;
        enc.pin_center(pos)?;
    }
    let bounds = bounds_for(config.bounds_mode, net, &enc, backend)?;
    Ok((footprint, enc, bounds))
}

fn solve_master<B: Backend + ?Sized>(
    net: &Network,
    enc: &MasterEncoding,
    state: &MasterState,
    backend: &B,
) -> Result<Option<(AttackPlan, f64)>> {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let vars = enc.install(&mut lp, false);
    let x: Vec<Var> = (0..net.num_lines()).map(|l| vars[enc.line_var(l)]).collect();
    let eta = lp.add_var(0.0, total_load(net), 1.0);

    for cut in &state.cuts {
        let mut terms = vec![(eta, 1.0)];
        terms.extend(x.iter().zip(&cut.coef).filter(|(_, &c)| c != 0.0).map(|(&v, &c)| (v, -c)));
        lp.add_row(f64::NEG_INFINITY, cut.eta, terms);
    }
    // Hamming distance at least one from every priced attack.
    for seen in &state.nogood {
        let terms = x
            .iter()
            .enumerate()
            .map(|(l, &v)| (v, if seen.contains(&l) { -1.0 } else { 1.0 }));
        lp.add_row(1.0 - seen.len() as f64, f64::INFINITY, terms);
    }

    let sol = backend.solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => return Err(Error::Backend("master problem unbounded".into())),
        LpStatus::Optimal => {}
    }
    let lines = x.iter().enumerate().filter(|(_, &v)| sol.value(v) > 0.5).map(|(l, _)| l);
    let mut plan = AttackPlan::new(lines);
    if let Some(c) = enc.center_vars().iter().position(|&v| sol.value(vars[v]) > 0.5) {
        plan = plan.with_center(c);
    }
    let bound = if sol.bound.is_finite() { sol.bound.max(sol.objective) } else { sol.objective };
    Ok(Some((plan, bound)))
}

/// Runs constraint generation to an epsilon-optimal attack.
pub fn solve_interdiction<B: Backend + ?Sized>(
    net: &Network,
    model: &AttackerModel,
    config: &SolveConfig,
    backend: &B,
) -> Result<SolveOutcome> {
    config.validate()?;
    if net.num_buses() == 0 {
        return Err(Error::InvalidNetwork("network has no buses".into()));
    }
    let start = Instant::now();
    let owned;
    let net = match config.big_m {
        Some(m) => {
            owned = net.with_big_m(m)?;
            &owned
        }
        None => net,
    };
    let (_, enc, bounds) = prepare(net, model, config, backend)?;
    let (state, status, solution) = run_loop(net, &enc, &bounds, config, backend)?;

    let exact = solve_inner(net, &solution.attack, backend)?;
    let mut certificate = Certificate {
        exact_eta: exact.eta,
        valid_eta: None,
        valid_iterations: None,
    };
    if config.bounds_mode == BoundsMode::Heuristic && net.num_lines() <= config.cross_check_max_lines {
        let valid_cfg = SolveConfig {
            bounds_mode: BoundsMode::Valid,
            ..config.clone()
        };
        let valid_bounds = bounds_for(BoundsMode::Valid, net, &enc, backend)?;
        let (vs, _, _) = run_loop(net, &enc, &valid_bounds, &valid_cfg, backend)?;
        certificate.valid_eta = Some(vs.eta_star);
        certificate.valid_iterations = Some(vs.iterations);
    }

    Ok(SolveOutcome {
        attack: solution.attack.clone(),
        eta_star: state.eta_star,
        status,
        state,
        bounds,
        solution,
        certificate,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn run_loop<B: Backend + ?Sized>(
    net: &Network,
    enc: &MasterEncoding,
    bounds: &DualBounds,
    config: &SolveConfig,
    backend: &B,
) -> Result<(MasterState, SolveStatus, InnerSolution)> {
    let mut state = MasterState::new();
    let mut best: Option<InnerSolution> = None;
    let status = loop {
        if state.iterations >= config.max_iters {
            break SolveStatus::IterationLimit;
        }
        let Some((plan, bound)) = solve_master(net, enc, &state, backend)? else {
            if state.iterations == 0 {
                return Err(Error::NoFeasibleAttack(format!("{} admits no attack on this network", enc.model)));
            }
            state.eta_up = state.eta_star;
            break SolveStatus::Exhausted;
        };
        state.iterations += 1;

        let sol = solve_inner(net, &plan, backend)?;
        if best.is_none() || sol.eta > state.eta_star {
            state.eta_star = sol.eta;
            state.incumbent = Some(plan.clone());
            best = Some(sol.clone());
        }
        state.eta_up = state.eta_up.min(bound).max(state.eta_star);
        state.history.push(IterationRecord {
            iteration: state.iterations,
            attack: plan.lines.iter().copied().collect(),
            center_bus: plan.center_bus,
            eta: sol.eta,
            eta_star: state.eta_star,
            eta_up: state.eta_up,
        });
        debug!(
            "iteration {}: attack {:?} eta {:.6} eta* {:.6} eta^u {:.6}",
            state.iterations, plan.lines, sol.eta, state.eta_star, state.eta_up
        );

        if gap(&state, config)? <= config.epsilon {
            break SolveStatus::Converged;
        }
        state.cuts.push(Cut {
            eta: sol.eta,
            coef: cut_coefficients(&sol, bounds),
        });
        state.nogood.push(plan.lines);
    };
    info!(
        "{} finished after {} iterations ({:?}), eta* = {:.6}",
        enc.model, state.iterations, status, state.eta_star
    );
    let best = best.expect("at least one iteration ran");
    Ok((state, status, best))
}
