//! Upper bounds on the thermal-limit duals, used as penalty weights in the
//! optimality cuts.

use rayon::prelude::*;

use crate::attackers::MasterEncoding;
use crate::error::{Error, Result};
use crate::lp::{Backend, LinearProgram, LpStatus, Sense, Var};
use crate::netmodel::{total_load, Network};

/// Margin below the thermal limit under which a line counts as never
/// congested.
pub const PRUNE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsMode {
    Valid,
    #[default]
    Heuristic,
}

impl std::str::FromStr for BoundsMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "valid" => Ok(BoundsMode::Valid),
            "heuristic" => Ok(BoundsMode::Heuristic),
            other => Err(format!("unknown bounds mode `{other}` (expected valid|heuristic)")),
        }
    }
}

impl std::fmt::Display for BoundsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundsMode::Valid => "valid",
            BoundsMode::Heuristic => "heuristic",
        })
    }
}

/// Per-line bounds `(π̄¹, π̄²)` on the lower/upper thermal duals. The Ohm-row
/// bounds `μ̄` are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBounds {
    pub pi1: Vec<f64>,
    pub pi2: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub mode: BoundsMode,
}

impl DualBounds {
    pub fn uniform(num_lines: usize, value: f64, mode: BoundsMode) -> Self {
        DualBounds {
            pi1: vec![value; num_lines],
            pi2: vec![value; num_lines],
            mu1: vec![0.0; num_lines],
            mu2: vec![0.0; num_lines],
            mode,
        }
    }

    pub(crate) fn check(&self, num_lines: usize) -> Result<()> {
        let lens = [self.pi1.len(), self.pi2.len(), self.mu1.len(), self.mu2.len()];
        if lens.iter().any(|&n| n != num_lines) {
            return Err(Error::InvalidNetwork(format!(
                "dual bounds sized {lens:?} for a network with {num_lines} lines"
            )));
        }
        if self.pi1.iter().chain(&self.pi2).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidNetwork("dual bounds must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// `π̄¹ = π̄² = 1` on every line.
pub fn heuristic_bounds(net: &Network) -> DualBounds {
    DualBounds::uniform(net.num_lines(), 1.0, BoundsMode::Heuristic)
}

/// Relaxation used to find never-congested lines: flow balance, generation,
/// big-M Ohm rows and thermal limits with the interdiction variables relaxed
/// to `[0, 1]`, plus the attacker's feasible-set rows with every binary
/// relaxed.
pub struct CongestionRelaxation {
    pub lp: LinearProgram,
    pub flow: Vec<Var>,
    pub interdict: Vec<Var>,
}

pub fn congestion_relaxation(net: &Network, encoding: &MasterEncoding) -> CongestionRelaxation {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let enc = encoding.install(&mut lp, true);
    let x: Vec<Var> = (0..net.num_lines()).map(|l| enc[encoding.line_var(l)]).collect();

    let shed: Vec<Var> = net.buses.iter().map(|_| lp.add_var(0.0, 1.0, 0.0)).collect();
    let gen: Vec<Var> = net.buses.iter().map(|b| lp.add_var(0.0, b.gen_cap, 0.0)).collect();
    let angle: Vec<Var> = net.buses.iter().map(|_| lp.add_free_var(0.0)).collect();
    let flow: Vec<Var> = net.lines.iter().map(|_| lp.add_free_var(0.0)).collect();
    let big_m = net.big_m();

    for (i, bus) in net.buses.iter().enumerate() {
        let mut terms = vec![(gen[i], 1.0), (shed[i], bus.demand)];
        terms.extend(net.out_lines(i).iter().map(|&l| (flow[l], -1.0)));
        terms.extend(net.in_lines(i).iter().map(|&l| (flow[l], 1.0)));
        lp.add_row(bus.demand, bus.demand, terms);
    }
    for (l, line) in net.lines.iter().enumerate() {
        let (f, t) = net.ends(l);
        let b = line.susceptance;
        // p + b Δθ + M x ≥ 0  and  p + b Δθ - M x ≤ 0
        lp.add_row(0.0, f64::INFINITY, [(flow[l], 1.0), (angle[f], b), (angle[t], -b), (x[l], big_m)]);
        lp.add_row(f64::NEG_INFINITY, 0.0, [(flow[l], 1.0), (angle[f], b), (angle[t], -b), (x[l], -big_m)]);
        // p - t x ≥ -t  and  p + t x ≤ t
        lp.add_row(-line.thermal, f64::INFINITY, [(flow[l], 1.0), (x[l], -line.thermal)]);
        lp.add_row(f64::NEG_INFINITY, line.thermal, [(flow[l], 1.0), (x[l], line.thermal)]);
    }
    CongestionRelaxation { lp, flow, interdict: x }
}

/// Which thermal side a never-congested direction prunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SideMapping {
    /// `max -p < t` zeroes `π̄¹` (the lower limit `p ≥ -t`) and `max p < t`
    /// zeroes `π̄²` (the upper limit `p ≤ t`).
    #[default]
    Canonical,
    /// `max p < t` zeroes `π̄¹` and `max -p < t` zeroes `π̄²`.
    Swapped,
}

/// Bounds from the never-congested test: for each line maximize the activity
/// of both thermal rows, `p + t x ≤ t` and `-p + t x ≤ t`, over the
/// relaxation. A row that never becomes tight gets a zero bound; every other
/// entry is the total load, floored at one per-unit, the marginal value of
/// capacity on a lone supply path. An interdicted line always has both rows tight,
/// so only lines the attacker can never reach are pruned.
pub fn valid_bounds<B: Backend + ?Sized>(net: &Network, encoding: &MasterEncoding, backend: &B) -> Result<DualBounds> {
    valid_bounds_with(net, encoding, backend, SideMapping::Canonical)
}

pub fn valid_bounds_with<B: Backend + ?Sized>(
    net: &Network,
    encoding: &MasterEncoding,
    backend: &B,
    mapping: SideMapping,
) -> Result<DualBounds> {
    let relax = congestion_relaxation(net, encoding);
    let load = total_load(net).max(1.0);

    let extremes: Vec<(f64, f64)> = (0..net.num_lines())
        .into_par_iter()
        .map(|l| -> Result<(f64, f64)> {
            let mut out = [0.0; 2];
            for (slot, dir) in [1.0, -1.0].into_iter().enumerate() {
                let mut lp = relax.lp.clone();
                // activity of the thermal row ±p + t x ≤ t
                lp.set_cost(relax.flow[l], dir);
                lp.set_cost(relax.interdict[l], net.lines[l].thermal);
                let sol = backend.solve(&lp)?;
                out[slot] = match sol.status {
                    LpStatus::Optimal => sol.objective,
                    LpStatus::Infeasible => f64::NEG_INFINITY,
                    LpStatus::Unbounded => f64::INFINITY,
                };
            }
            Ok((out[0], out[1]))
        })
        .collect::<Result<_>>()?;

    let mut bounds = DualBounds::uniform(net.num_lines(), load, BoundsMode::Valid);
    for (l, &(max_p, max_neg_p)) in extremes.iter().enumerate() {
        let t = net.lines[l].thermal;
        let (lower_idle, upper_idle) = (max_neg_p < t - PRUNE_MARGIN, max_p < t - PRUNE_MARGIN);
        let (zero1, zero2) = match mapping {
            SideMapping::Canonical => (lower_idle, upper_idle),
            SideMapping::Swapped => (upper_idle, lower_idle),
        };
        if zero1 {
            bounds.pi1[l] = 0.0;
        }
        if zero2 {
            bounds.pi2[l] = 0.0;
        }
    }
    Ok(bounds)
}

/// Bounds for the requested mode.
pub fn bounds_for<B: Backend + ?Sized>(
    mode: BoundsMode,
    net: &Network,
    encoding: &MasterEncoding,
    backend: &B,
) -> Result<DualBounds> {
    match mode {
        BoundsMode::Heuristic => Ok(heuristic_bounds(net)),
        BoundsMode::Valid => valid_bounds(net, encoding, backend),
    }
}
