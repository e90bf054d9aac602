//! Worst-case N-k line interdiction on DC power networks.
//!
//! An attacker removes up to `k` transmission lines; the operator then
//! re-dispatches generation and sheds as little load as possible. This crate
//! finds the attack that forces the most shedding, for unrestricted,
//! spatially clustered and connected attackers, by constraint generation over
//! a penalized form of the operator's LP. A brute-force oracle is included for
//! small networks.
//!
//! ```no_run
//! use gridnk::{fixtures, solve_interdiction, AttackerModel, HighsBackend, SolveConfig};
//!
//! let net = fixtures::rts96_api();
//! let model = AttackerModel::traditional(2).unwrap();
//! let out = solve_interdiction(&net, &model, &SolveConfig::default(), &HighsBackend::default()).unwrap();
//! println!("{:.2} p.u. shed by lines {:?}", out.eta_star, out.attack.line_ids(&net));
//! ```

pub mod attackers;
pub mod bounds;
mod dsu;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod inner;
pub mod lp;
pub mod netmodel;
pub mod oracle;

pub use attackers::{compute_phi, haversine_km, is_feasible_attack, DistanceMode, SpatialFootprint};
pub use bounds::{heuristic_bounds, valid_bounds, valid_bounds_with, BoundsMode, DualBounds, SideMapping};
pub use engine::{solve_interdiction, SolveConfig, SolveOutcome, SolveStatus};
pub use error::{Error, Result};
pub use inner::{solve_inner, solve_penalized_inner, AttackPlan, InnerSolution};
pub use lp::{Backend, HighsBackend};
pub use netmodel::{parse_case, parse_geo, total_load, AttackerModel, Bus, Line, Network};
pub use oracle::{solve_exhaustive, OracleResult};
