//! A small linear/mixed-integer program builder and the solver backend
//! boundary. The builder is solver-agnostic; [`HighsBackend`] is the shipped
//! implementation.

use std::ffi::CStr;

use highs::{HighsModelStatus, RowProblem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
struct Column {
    lower: f64,
    upper: f64,
    cost: f64,
    integer: bool,
}

#[derive(Debug, Clone)]
struct Constraint {
    lower: f64,
    upper: f64,
    terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    cols: Vec<Column>,
    rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            cols: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_integer(&self) -> usize {
        self.cols.iter().filter(|c| c.integer).count()
    }

    /// Adds a continuous variable. Infinite bounds are allowed.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> Var {
        self.cols.push(Column {
            lower,
            upper,
            cost,
            integer: false,
        });
        Var(self.cols.len() - 1)
    }

    pub fn add_free_var(&mut self, cost: f64) -> Var {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn add_integer_var(&mut self, lower: f64, upper: f64, cost: f64) -> Var {
        let v = self.add_var(lower, upper, cost);
        self.cols[v.0].integer = true;
        v
    }

    pub fn add_binary(&mut self, cost: f64) -> Var {
        self.add_integer_var(0.0, 1.0, cost)
    }

    /// Adds `lower <= Σ coef·var <= upper`. Repeated variables are summed.
    pub fn add_row<I>(&mut self, lower: f64, upper: f64, terms: I) -> RowId
    where
        I: IntoIterator<Item = (Var, f64)>,
    {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (v, c) in terms {
            debug_assert!(v.0 < self.cols.len(), "row references unknown variable");
            match merged.iter_mut().find(|(i, _)| *i == v.0) {
                Some(slot) => slot.1 += c,
                None => merged.push((v.0, c)),
            }
        }
        self.rows.push(Constraint {
            lower,
            upper,
            terms: merged,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_cost(&mut self, v: Var, cost: f64) {
        self.cols[v.0].cost = cost;
    }

    pub fn clear_costs(&mut self) {
        for c in &mut self.cols {
            c.cost = 0.0;
        }
    }

    pub fn set_bounds(&mut self, v: Var, lower: f64, upper: f64) {
        self.cols[v.0].lower = lower;
        self.cols[v.0].upper = upper;
    }

    pub fn bounds(&self, v: Var) -> (f64, f64) {
        (self.cols[v.0].lower, self.cols[v.0].upper)
    }

    /// Drops every integrality restriction.
    pub fn relax(&mut self) {
        for c in &mut self.cols {
            c.integer = false;
        }
    }

    /// Evaluates `Σ coef·x` for a row at a point.
    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].terms.iter().map(|&(i, c)| c * x[i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a backend solve.
///
/// `row_duals` follow one convention regardless of the solver: the dual of a
/// row is the rate of change of the optimal objective with respect to the
/// active bound of that row, taking minimization as the reference sense. For a
/// minimization a positive value means the lower bound is binding and a
/// negative value the upper bound. Empty for integer programs.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Best proven bound on the objective (equals `objective` for LPs).
    pub bound: f64,
    pub values: Vec<f64>,
    pub row_duals: Vec<f64>,
}

impl LpSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.row_duals[r.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// What the algorithms need from an optimization engine: solve an LP or MILP
/// to proven optimality and report primal values, row duals and status.
pub trait Backend: Send + Sync {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        (**self).solve(lp)
    }
}

/// HiGHS, run single-threaded with a fixed seed so repeated solves agree.
#[derive(Debug, Clone)]
pub struct HighsBackend {
    pub seed: i32,
    pub mip_rel_gap: f64,
    pub time_limit_s: Option<f64>,
}

impl Default for HighsBackend {
    fn default() -> Self {
        HighsBackend {
            seed: 0,
            mip_rel_gap: 1e-9,
            time_limit_s: None,
        }
    }
}

impl HighsBackend {
    pub fn with_seed(seed: u64) -> Self {
        HighsBackend {
            seed: (seed % i32::MAX as u64) as i32,
            ..Default::default()
        }
    }
}

const MIP_DUAL_BOUND: &CStr = c"mip_dual_bound";

impl Backend for HighsBackend {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        let mut pb = RowProblem::default();
        let cols: Vec<_> = lp
            .cols
            .iter()
            .map(|c| {
                if c.integer {
                    pb.add_integer_column(c.cost, c.lower..=c.upper)
                } else {
                    pb.add_column(c.cost, c.lower..=c.upper)
                }
            })
            .collect();
        for r in &lp.rows {
            pb.add_row(r.lower..=r.upper, r.terms.iter().map(|&(i, c)| (cols[i], c)));
        }
        let is_mip = lp.num_integer() > 0;
        let sense = match lp.sense {
            Sense::Minimize => highs::Sense::Minimise,
            Sense::Maximize => highs::Sense::Maximise,
        };

        let mut model = pb.try_optimise(sense).map_err(|s| Error::Backend(format!("{s:?}")))?;
        model.make_quiet();
        let set = |model: &mut highs::Model, name: &str, v: OptionValue| {
            let r = match v {
                OptionValue::Int(i) => model.try_set_option(name, i),
                OptionValue::Float(f) => model.try_set_option(name, f),
                OptionValue::Str(s) => model.try_set_option(name, s.as_bytes()),
            };
            r.map_err(|e| Error::Backend(format!("option {name}: {e:?}")))
        };
        set(&mut model, "threads", OptionValue::Int(1))?;
        set(&mut model, "random_seed", OptionValue::Int(self.seed))?;
        if is_mip {
            set(&mut model, "mip_rel_gap", OptionValue::Float(self.mip_rel_gap))?;
            set(&mut model, "mip_abs_gap", OptionValue::Float(1e-9))?;
        } else {
            // Simplex gives vertex solutions with exact duals.
            set(&mut model, "solver", OptionValue::Str("simplex"))?;
        }
        if let Some(t) = self.time_limit_s {
            set(&mut model, "time_limit", OptionValue::Float(t))?;
        }

        let solved = model.try_solve().map_err(|s| Error::Backend(format!("{s:?}")))?;
        let status = match solved.status() {
            HighsModelStatus::Optimal => LpStatus::Optimal,
            HighsModelStatus::Infeasible => LpStatus::Infeasible,
            HighsModelStatus::Unbounded => LpStatus::Unbounded,
            HighsModelStatus::UnboundedOrInfeasible => {
                // Presolve could not tell which; callers treat both as failure.
                return Err(Error::Backend("model is unbounded or infeasible".into()));
            }
            HighsModelStatus::ModelEmpty => LpStatus::Optimal,
            other => return Err(Error::Backend(format!("solver stopped with status {other:?}"))),
        };
        if status != LpStatus::Optimal {
            return Ok(LpSolution {
                status,
                objective: f64::NAN,
                bound: f64::NAN,
                values: Vec::new(),
                row_duals: Vec::new(),
            });
        }

        let objective = if lp.cols.is_empty() { 0.0 } else { solved.objective_value() };
        let sol = solved.get_solution();
        let values = sol.columns().to_vec();
        let (bound, row_duals) = if is_mip {
            let b = solved.double_info_value(MIP_DUAL_BOUND).unwrap_or(objective);
            let b = if b.is_finite() { b } else { objective };
            (b, Vec::new())
        } else {
            let sign = match lp.sense {
                Sense::Minimize => 1.0,
                Sense::Maximize => -1.0,
            };
            (objective, sol.dual_rows().iter().map(|d| sign * d).collect())
        };
        Ok(LpSolution {
            status,
            objective,
            bound,
            values,
            row_duals,
        })
    }
}

enum OptionValue {
    Int(i32),
    Float(f64),
    Str(&'static str),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_sign_convention_lower_binding() {
        // min x  s.t. x >= 2  -> dual +1 on the lower bound
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_free_var(1.0);
        let r = lp.add_row(2.0, f64::INFINITY, [(x, 1.0)]);
        let s = HighsBackend::default().solve(&lp).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.dual(r) - 1.0).abs() < 1e-9, "dual {}", s.dual(r));
    }

    #[test]
    fn dual_sign_convention_upper_binding() {
        // min -x  s.t. x <= 3  -> objective falls as the bound rises
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_free_var(-1.0);
        let r = lp.add_row(f64::NEG_INFINITY, 3.0, [(x, 1.0)]);
        let s = HighsBackend::default().solve(&lp).unwrap();
        assert!((s.dual(r) + 1.0).abs() < 1e-9, "dual {}", s.dual(r));
    }

    #[test]
    fn dual_sign_convention_maximize() {
        // max x  s.t. x <= 3 is min -x; upper binding gives a negative dual
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_free_var(1.0);
        let r = lp.add_row(f64::NEG_INFINITY, 3.0, [(x, 1.0)]);
        let s = HighsBackend::default().solve(&lp).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!((s.dual(r) + 1.0).abs() < 1e-9, "dual {}", s.dual(r));
    }

    #[test]
    fn small_milp_and_infeasibility() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let a = lp.add_binary(1.0);
        let b = lp.add_binary(0.64);
        lp.add_row(f64::NEG_INFINITY, 1.5, [(a, 1.0), (b, 1.0)]);
        let s = HighsBackend::default().solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value(a) - 1.0).abs() < 1e-9);
        assert!(s.value(b).abs() < 1e-9);
        assert!(s.bound >= s.objective - 1e-9);

        lp.add_row(2.0, f64::INFINITY, [(a, 1.0), (b, 1.0)]);
        let s = HighsBackend::default().solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn repeated_terms_are_merged() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(0.0, 10.0, 1.0);
        let r = lp.add_row(4.0, f64::INFINITY, [(x, 1.0), (x, 1.0)]);
        let s = HighsBackend::default().solve(&lp).unwrap();
        assert!((s.value(x) - 2.0).abs() < 1e-9);
        assert!((lp.row_activity(r, &s.values) - 4.0).abs() < 1e-9);
    }
}
