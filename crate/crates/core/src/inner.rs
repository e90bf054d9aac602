//! The defender's problem: minimum load shedding under DC power flow for a
//! fixed attack, its thermal-penalized variant, and the right-hand side of the
//! optimality cuts built from an inner solution.

use std::collections::BTreeSet;

use log::warn;

use crate::bounds::DualBounds;
use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::lp::{Backend, LinearProgram, LpStatus, RowId, Sense, Var};
use crate::netmodel::Network;

/// Required slack on the relaxed Ohm rows of interdicted lines.
pub const BIG_M_SLACK: f64 = 1e-4;
/// Number of big-M doublings attempted before giving up with a warning.
pub const BIG_M_DOUBLINGS: usize = 10;

/// A set of interdicted lines (positions into `Network::lines`) and, for
/// spatial attacks, the chosen center bus (position into `Network::buses`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttackPlan {
    pub lines: BTreeSet<usize>,
    pub center_bus: Option<usize>,
}

impl AttackPlan {
    pub fn new<I: IntoIterator<Item = usize>>(lines: I) -> Self {
        AttackPlan {
            lines: lines.into_iter().collect(),
            center_bus: None,
        }
    }

    pub fn with_center(mut self, bus: usize) -> Self {
        self.center_bus = Some(bus);
        self
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn contains(&self, line: usize) -> bool {
        self.lines.contains(&line)
    }

    /// Line ids as written in reports.
    pub fn line_ids(&self, net: &Network) -> Vec<u32> {
        self.lines.iter().map(|&l| net.lines[l].id).collect()
    }

    /// Interdiction indicator per line.
    pub fn indicator(&self, num_lines: usize) -> Vec<bool> {
        let mut x = vec![false; num_lines];
        for &l in &self.lines {
            x[l] = true;
        }
        x
    }

    pub(crate) fn check(&self, net: &Network) -> Result<()> {
        if let Some(&bad) = self.lines.iter().find(|&&l| l >= net.num_lines()) {
            return Err(Error::UnknownLine(bad));
        }
        Ok(())
    }
}

/// Optimal defender response to one attack.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    /// Optimal load shed (p.u.).
    pub eta: f64,
    /// Shed fraction per bus, in `[0, 1]`.
    pub shed: Vec<f64>,
    /// Flow per line (p.u.), positive from `from_bus` to `to_bus`.
    pub flow: Vec<f64>,
    pub gen: Vec<f64>,
    /// Voltage angles, pinned to zero at the lowest-indexed bus of each island.
    pub angle: Vec<f64>,
    /// Duals `(μ¹, μ²)` of the lower/upper sides of the Ohm rows.
    pub duals_mu: Vec<(f64, f64)>,
    /// Duals `(π¹, π²)` of the lower/upper thermal limits.
    pub duals_pi: Vec<(f64, f64)>,
    pub status: LpStatus,
    /// The big-M the reported solution was computed with.
    pub big_m: f64,
    /// Whether every interdicted line's Ohm rows were slack by at least
    /// [`BIG_M_SLACK`].
    pub big_m_slack_ok: bool,
    pub attack: AttackPlan,
}

impl InnerSolution {
    /// Positive and negative parts of a line flow.
    pub fn flow_parts(&self, line: usize) -> (f64, f64) {
        let p = self.flow[line];
        (p.max(0.0), (-p).max(0.0))
    }
}

/// Column/row handles of one inner LP.
struct InnerModel {
    lp: LinearProgram,
    shed: Vec<Var>,
    gen: Vec<Var>,
    angle: Vec<Var>,
    flow: Vec<Var>,
    ohm: Vec<RowId>,
    thermal: Vec<RowId>,
}

/// Islands of the network once the attacked lines are removed; returns the
/// representative (smallest bus position) of each bus.
fn island_roots(net: &Network, attack: &AttackPlan) -> Vec<usize> {
    let mut dsu = DisjointSet::new(net.num_buses());
    for l in 0..net.num_lines() {
        if !attack.contains(l) {
            let (f, t) = net.ends(l);
            dsu.union(f, t);
        }
    }
    (0..net.num_buses()).map(|b| dsu.find(b)).collect()
}

/// Variables and rows shared by the exact and the penalized inner problems:
/// shed, generation, angles, flows, flow balance and the Ohm rows with the
/// given big-M.
fn build_common(net: &Network, attack: &AttackPlan, big_m: f64) -> InnerModel {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let nb = net.num_buses();
    let roots = island_roots(net, attack);

    let shed: Vec<Var> = net.buses.iter().map(|b| lp.add_var(0.0, 1.0, b.demand)).collect();
    let gen: Vec<Var> = net.buses.iter().map(|b| lp.add_var(0.0, b.gen_cap, 0.0)).collect();
    let angle: Vec<Var> = (0..nb)
        .map(|b| {
            if roots[b] == b {
                lp.add_var(0.0, 0.0, 0.0)
            } else {
                lp.add_free_var(0.0)
            }
        })
        .collect();
    let flow: Vec<Var> = (0..net.num_lines()).map(|_| lp.add_free_var(0.0)).collect();

    // p^g_i + d_i ℓ_i - Σ_out p + Σ_in p = d_i
    for (i, bus) in net.buses.iter().enumerate() {
        let mut terms = vec![(gen[i], 1.0), (shed[i], bus.demand)];
        terms.extend(net.out_lines(i).iter().map(|&l| (flow[l], -1.0)));
        terms.extend(net.in_lines(i).iter().map(|&l| (flow[l], 1.0)));
        lp.add_row(bus.demand, bus.demand, terms);
    }

    // -M x ≤ p + b (θ_i - θ_j) ≤ M x
    let ohm = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let (f, t) = net.ends(l);
            let m = if attack.contains(l) { big_m } else { 0.0 };
            lp.add_row(
                -m,
                m,
                [(flow[l], 1.0), (angle[f], line.susceptance), (angle[t], -line.susceptance)],
            )
        })
        .collect();

    InnerModel {
        lp,
        shed,
        gen,
        angle,
        flow,
        ohm,
        thermal: Vec::new(),
    }
}

fn build_inner(net: &Network, attack: &AttackPlan, big_m: f64) -> InnerModel {
    let mut m = build_common(net, attack, big_m);
    // -t (1 - x) ≤ p ≤ t (1 - x), kept as rows so their duals are reported
    m.thermal = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let cap = if attack.contains(l) { 0.0 } else { line.thermal };
            m.lp.add_row(-cap, cap, [(m.flow[l], 1.0)])
        })
        .collect();
    m
}

fn solve_once<B: Backend + ?Sized>(
    net: &Network,
    attack: &AttackPlan,
    big_m: f64,
    backend: &B,
) -> Result<InnerSolution> {
    let model = build_inner(net, attack, big_m);
    let sol = backend.solve(&model.lp)?;
    if sol.status != LpStatus::Optimal {
        // The all-shed point is always feasible, so anything else is numerical.
        return Err(Error::Backend(format!(
            "inner problem for attack {:?} returned {:?}",
            attack.lines, sol.status
        )));
    }

    let split = |r: RowId| {
        let y = sol.dual(r);
        (y.max(0.0), (-y).max(0.0))
    };
    let flow: Vec<f64> = model.flow.iter().map(|&v| sol.value(v)).collect();
    let angle: Vec<f64> = model.angle.iter().map(|&v| sol.value(v)).collect();
    let slack_ok = attack.lines.iter().all(|&l| {
        let (f, t) = net.ends(l);
        let b = net.lines[l].susceptance;
        let activity = flow[l] + b * (angle[f] - angle[t]);
        big_m - activity.abs() >= BIG_M_SLACK
    });

    Ok(InnerSolution {
        eta: sol.objective,
        shed: model.shed.iter().map(|&v| sol.value(v).clamp(0.0, 1.0)).collect(),
        flow,
        gen: model.gen.iter().map(|&v| sol.value(v)).collect(),
        angle,
        duals_mu: model.ohm.iter().map(|&r| split(r)).collect(),
        duals_pi: model.thermal.iter().map(|&r| split(r)).collect(),
        status: sol.status,
        big_m,
        big_m_slack_ok: slack_ok,
        attack: attack.clone(),
    })
}

/// Solves the minimum load-shed LP for a fixed attack.
///
/// If an interdicted line's relaxed Ohm rows come within [`BIG_M_SLACK`] of
/// the big-M, the problem is re-solved with big-M doubled, up to
/// [`BIG_M_DOUBLINGS`] times.
pub fn solve_inner<B: Backend + ?Sized>(net: &Network, attack: &AttackPlan, backend: &B) -> Result<InnerSolution> {
    attack.check(net)?;
    let mut big_m = net.big_m();
    let mut sol = solve_once(net, attack, big_m, backend)?;
    let mut doublings = 0;
    while !sol.big_m_slack_ok && doublings < BIG_M_DOUBLINGS {
        big_m *= 2.0;
        doublings += 1;
        sol = solve_once(net, attack, big_m, backend)?;
    }
    if doublings > 0 {
        if sol.big_m_slack_ok {
            warn!("big-M raised to {big_m} for attack {:?}", attack.lines);
        } else {
            warn!(
                "Ohm rows of interdicted lines still tight after {doublings} big-M doublings (M = {big_m})"
            );
        }
    }
    Ok(sol)
}

/// Optimal value of the thermal-penalized inner problem.
///
/// Thermal limits are relaxed to `|p| ≤ t` and any violation of the
/// attack-dependent limit `|p| ≤ t (1 - x)` is charged `π̄¹` (below) or `π̄²`
/// (above) per unit through a nonnegative slack. Ohm rows use the same big-M
/// form as the exact problem; on interdicted lines the corresponding bounds
/// `μ̄` are zero so those rows carry no penalty.
pub fn solve_penalized_inner<B: Backend + ?Sized>(
    net: &Network,
    attack: &AttackPlan,
    bounds: &DualBounds,
    backend: &B,
) -> Result<f64> {
    bounds.check(net.num_lines())?;
    // Same big-M as the exact problem, so both relax the Ohm rows equally.
    let big_m = solve_inner(net, attack, backend)?.big_m;
    let mut m = build_common(net, attack, big_m);
    for (l, line) in net.lines.iter().enumerate() {
        let p = m.flow[l];
        m.lp.add_row(-line.thermal, line.thermal, [(p, 1.0)]);
        let cap = if attack.contains(l) { 0.0 } else { line.thermal };
        let below = m.lp.add_var(0.0, f64::INFINITY, bounds.pi1[l]);
        let above = m.lp.add_var(0.0, f64::INFINITY, bounds.pi2[l]);
        // p + s¹ ≥ -t(1-x),  p - s² ≤ t(1-x)
        m.lp.add_row(-cap, f64::INFINITY, [(p, 1.0), (below, 1.0)]);
        m.lp.add_row(f64::NEG_INFINITY, cap, [(p, 1.0), (above, -1.0)]);
    }
    let sol = backend.solve(&m.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Backend(format!(
            "penalized inner problem for attack {:?} returned {:?}",
            attack.lines, sol.status
        )));
    }
    Ok(sol.objective)
}

/// Per-line cut coefficients `π̄¹ p⁻ + π̄² p⁺` taken from an inner solution.
pub fn cut_coefficients(sol: &InnerSolution, bounds: &DualBounds) -> Vec<f64> {
    (0..sol.flow.len())
        .map(|l| {
            let (pos, neg) = sol.flow_parts(l);
            bounds.pi1[l] * neg + bounds.pi2[l] * pos
        })
        .collect()
}

/// Right-hand side of the optimality cut generated at `sol`'s attack,
/// evaluated at a candidate attack.
pub fn cut_rhs(sol: &InnerSolution, bounds: &DualBounds, candidate: &AttackPlan) -> f64 {
    let coef = cut_coefficients(sol, bounds);
    sol.eta + candidate.lines.iter().map(|&l| coef[l]).sum::<f64>()
}

/// Largest violation of flow balance, generation, Ohm, thermal and shed
/// bounds in an inner solution.
pub fn primal_residual(net: &Network, sol: &InnerSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, bus) in net.buses.iter().enumerate() {
        let out: f64 = net.out_lines(i).iter().map(|&l| sol.flow[l]).sum();
        let inc: f64 = net.in_lines(i).iter().map(|&l| sol.flow[l]).sum();
        let lhs = sol.gen[i] - (1.0 - sol.shed[i]) * bus.demand;
        worst = worst.max((lhs - (out - inc)).abs());
        worst = worst.max((-sol.gen[i]).max(sol.gen[i] - bus.gen_cap));
        worst = worst.max((-sol.shed[i]).max(sol.shed[i] - 1.0));
    }
    for (l, line) in net.lines.iter().enumerate() {
        let (f, t) = net.ends(l);
        let x = if sol.attack.contains(l) { 1.0 } else { 0.0 };
        let ohm = sol.flow[l] + line.susceptance * (sol.angle[f] - sol.angle[t]);
        worst = worst.max(ohm.abs() - sol.big_m * x);
        worst = worst.max(sol.flow[l].abs() - line.thermal * (1.0 - x));
    }
    let eta: f64 = net.buses.iter().zip(&sol.shed).map(|(b, s)| b.demand * s).sum();
    worst.max((eta - sol.eta).abs())
}
