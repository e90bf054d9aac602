//! Exhaustive enumeration of feasible attacks.

use std::cmp::Ordering;

use itertools::Itertools;
use rayon::prelude::*;

use crate::attackers::{is_feasible_attack, SpatialFootprint};
use crate::error::{Error, Result};
use crate::inner::{solve_inner, AttackPlan};
use crate::lp::Backend;
use crate::netmodel::{AttackerModel, Network};

/// Load-shed differences at or below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_attack: AttackPlan,
    pub best_eta: f64,
    pub evaluated: usize,
    /// Every feasible attack, by decreasing load shed then line ids.
    pub ranking: Vec<(AttackPlan, f64)>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Number of subsets the oracle would enumerate for a model.
pub fn candidate_count(num_lines: usize, model: &AttackerModel) -> u128 {
    match *model {
        AttackerModel::Spatial { k, .. } => (1..=k).map(|j| binomial(num_lines, j)).fold(0, u128::saturating_add),
        _ => binomial(num_lines, model.k()),
    }
}

/// Solves every feasible attack and returns the maximizer, breaking ties
/// toward the lexicographically smallest set of line ids.
pub fn solve_exhaustive<B: Backend + ?Sized>(
    net: &Network,
    model: &AttackerModel,
    footprint: Option<&SpatialFootprint>,
    backend: &B,
    budget: u128,
) -> Result<OracleResult> {
    let count = candidate_count(net.num_lines(), model);
    if count > budget {
        return Err(Error::BudgetExceeded { count, budget });
    }
    if model.is_spatial() && footprint.is_none() {
        return Err(Error::InvalidModel("spatial model needs a footprint".into()));
    }
    let sizes = match *model {
        AttackerModel::Spatial { k, .. } => 1..=k,
        _ => model.k()..=model.k(),
    };
    let plans: Vec<AttackPlan> = sizes
        .flat_map(|j| (0..net.num_lines()).combinations(j))
        .filter_map(|lines| {
            let plan = AttackPlan::new(lines);
            if !is_feasible_attack(net, model, footprint, &plan.lines) {
                return None;
            }
            match footprint {
                Some(fp) if model.is_spatial() => {
                    let center = fp.common_centers(&plan.lines)[0];
                    Some(plan.with_center(center))
                }
                _ => Some(plan),
            }
        })
        .collect();
    if plans.is_empty() {
        return Err(Error::NoFeasibleAttack(format!("{model} admits no attack on this network")));
    }

    let mut ranking: Vec<(AttackPlan, f64)> = plans
        .into_par_iter()
        .map(|plan| solve_inner(net, &plan, backend).map(|s| (plan, s.eta)))
        .collect::<Result<_>>()?;
    let key = |p: &AttackPlan| p.line_ids(net);
    ranking.sort_by(|(pa, ea), (pb, eb)| {
        eb.partial_cmp(ea)
            .unwrap_or(Ordering::Equal)
            .then_with(|| key(pa).cmp(&key(pb)))
    });

    let top = ranking[0].1;
    let (best_attack, best_eta) = ranking
        .iter()
        .take_while(|(_, e)| *e >= top - TIE_TOLERANCE)
        .min_by(|(pa, _), (pb, _)| key(pa).cmp(&key(pb)))
        .cloned()
        .expect("ranking is nonempty");
    Ok(OracleResult {
        best_attack,
        best_eta,
        evaluated: ranking.len(),
        ranking,
    })
}

/// The ranking as CSV with columns `rank,lines,eta`; line ids are
/// space-separated.
pub fn ranking_csv(result: &OracleResult, net: &Network) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "lines", "eta"]).expect("in-memory write");
    for (i, (plan, eta)) in result.ranking.iter().enumerate() {
        let lines = plan.line_ids(net).iter().map(u32::to_string).join(" ");
        w.write_record([(i + 1).to_string(), lines, format!("{eta:?}")])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
