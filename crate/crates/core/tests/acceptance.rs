//! One check per acceptance criterion. Each test prints a single
//! `PASS`/`FAIL`/`SKIP` line and fails on `FAIL`, unless the criterion is
//! listed in `KNOWN_RED`.

use gridnk::attackers::{compute_phi, encode_feasible_set, is_feasible_attack, DistanceMode};
use gridnk::engine::{solve_interdiction, SolveConfig};
use gridnk::inner::{cut_rhs, solve_inner, solve_penalized_inner, AttackPlan, BIG_M_SLACK};
use gridnk::oracle::solve_exhaustive;
use gridnk::{fixtures, valid_bounds, AttackerModel, BoundsMode, Error, HighsBackend, Network};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 0.01;
const FLOOR: f64 = 1e-6;
/// Spatial distance limit used on the synthetic fixtures.
const FIXTURE_D_KM: f64 = 40.0;

/// Criteria whose targets this data set cannot reach. They still print `FAIL`.
const KNOWN_RED: &[u32] = &[6];

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn report(id: u32, name: &str, v: Verdict) {
    let (tag, detail) = match &v {
        Verdict::Pass(d) => ("PASS", d),
        Verdict::Fail(d) => ("FAIL", d),
        Verdict::Skip(d) => ("SKIP", d),
    };
    println!("[{tag}] criterion {id} ({name}): {detail}");
    if let Verdict::Fail(d) = v {
        if KNOWN_RED.contains(&id) {
            println!("  criterion {id} is known red; see README");
            return;
        }
        panic!("criterion {id} failed: {d}");
    }
}

fn cfg(mode: BoundsMode) -> SolveConfig {
    SolveConfig {
        epsilon: EPS,
        abs_floor: FLOOR,
        bounds_mode: mode,
        cross_check_max_lines: 0,
        ..Default::default()
    }
}

fn models(k: usize) -> [AttackerModel; 3] {
    [
        AttackerModel::traditional(k).unwrap(),
        AttackerModel::spatial(k, FIXTURE_D_KM).unwrap(),
        AttackerModel::topological(k).unwrap(),
    ]
}

/// Random attack of `1..=max_k` lines.
fn random_attack(rng: &mut ChaCha8Rng, net: &Network, max_k: usize) -> AttackPlan {
    let mut lines: Vec<usize> = (0..net.num_lines()).collect();
    lines.shuffle(rng);
    let k = rng.gen_range(1..=max_k.min(net.num_lines()));
    AttackPlan::new(lines.into_iter().take(k))
}

#[test]
fn criterion_1_oracle_equivalence() {
    let be = HighsBackend::default();
    let start = std::time::Instant::now();
    let mut cells = 0;
    let mut failures = Vec::new();
    for (name, net) in fixtures::synthetic() {
        for k in 1..=3 {
            for model in models(k) {
                let fp = model.d_km().map(|d| compute_phi(&net, d, DistanceMode::Haversine).unwrap());
                let oracle = solve_exhaustive(&net, &model, fp.as_ref(), &be, 1_000_000);
                let engine = solve_interdiction(&net, &model, &cfg(BoundsMode::Valid), &be);
                cells += 1;
                match (oracle, engine) {
                    (Ok(o), Ok(e)) => {
                        let tol = EPS * e.eta_star.max(FLOOR);
                        let feasible = is_feasible_attack(&net, &model, fp.as_ref(), &e.attack.lines);
                        if (o.best_eta - e.eta_star).abs() > tol + 1e-9 || !feasible {
                            failures.push(format!(
                                "{name} {model}: oracle {} engine {} feasible {feasible}",
                                o.best_eta, e.eta_star
                            ));
                        }
                    }
                    (Err(Error::NoFeasibleAttack(_) | Error::SpatiallyInfeasible { .. }), Err(_)) => {}
                    (o, e) => failures.push(format!("{name} {model}: oracle {:?} engine {:?}", o.err(), e.err())),
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let v = if failures.is_empty() {
        Verdict::Pass(format!("{cells} cells agree in {secs:.1}s"))
    } else {
        Verdict::Fail(failures.join("; "))
    };
    report(1, "oracle equivalence", v);
}

#[test]
fn criterion_2_penalized_matches_exact() {
    let be = HighsBackend::default();
    let nets = fixtures::synthetic();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (_, net) = nets.choose(&mut rng).unwrap();
        let attack = random_attack(&mut rng, net, 3);
        let model = AttackerModel::traditional(attack.len()).unwrap();
        let enc = encode_feasible_set(net, &model, None).unwrap();
        let bounds = valid_bounds(net, &enc, &be).unwrap();
        let exact = solve_inner(net, &attack, &be).unwrap().eta;
        let pen = solve_penalized_inner(net, &attack, &bounds, &be).unwrap();
        worst = worst.max((exact - pen).abs());
    }
    let v = if worst <= 1e-6 {
        Verdict::Pass(format!("max |penalized - exact| = {worst:.2e} over 50 pairs"))
    } else {
        Verdict::Fail(format!("max |penalized - exact| = {worst:.2e}"))
    };
    report(2, "penalized equals exact", v);
}

#[test]
fn criterion_3_interdicted_ohm_duals_vanish() {
    let be = HighsBackend::default();
    let nets = fixtures::synthetic();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut tries, mut worst) = (0, 0, 0.0f64);
    while checked < 50 && tries < 500 {
        tries += 1;
        let (_, net) = nets.choose(&mut rng).unwrap();
        let attack = random_attack(&mut rng, net, 3);
        let sol = solve_inner(net, &attack, &be).unwrap();
        if !sol.big_m_slack_ok {
            continue;
        }
        checked += 1;
        for &l in &attack.lines {
            let (a, b) = sol.duals_mu[l];
            worst = worst.max(a.abs()).max(b.abs());
        }
    }
    let v = if checked < 50 {
        Verdict::Fail(format!("only {checked} attacks passed the {BIG_M_SLACK:e} slack test"))
    } else if worst <= 1e-8 {
        Verdict::Pass(format!("max interdicted Ohm dual {worst:.1e} over {checked} attacks"))
    } else {
        Verdict::Fail(format!("interdicted Ohm dual {worst:.3e}"))
    };
    report(3, "interdicted Ohm duals", v);
}

#[test]
fn criterion_4_cut_validity() {
    let be = HighsBackend::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = Vec::new();
    let mut pairs = 0;
    for (name, net) in fixtures::synthetic() {
        let max_k = net.num_lines().min(3);
        let bounds: Vec<_> = (1..=max_k)
            .map(|k| {
                let enc = encode_feasible_set(&net, &AttackerModel::traditional(k).unwrap(), None).unwrap();
                valid_bounds(&net, &enc, &be).unwrap()
            })
            .collect();
        for _ in 0..100 {
            let k = rng.gen_range(1..=max_k);
            let mut pick = || {
                let mut lines: Vec<usize> = (0..net.num_lines()).collect();
                lines.shuffle(&mut rng);
                AttackPlan::new(lines.into_iter().take(k))
            };
            let (hat, x) = (pick(), pick());
            let sol_hat = solve_inner(&net, &hat, &be).unwrap();
            let eta_x = solve_inner(&net, &x, &be).unwrap().eta;
            let rhs = cut_rhs(&sol_hat, &bounds[k - 1], &x);
            pairs += 1;
            if eta_x > rhs + 1e-6 {
                violations.push(format!("{name} x̂={:?} x={:?}: {eta_x} > {rhs}", hat.lines, x.lines));
            }
        }
    }
    let v = if violations.is_empty() {
        Verdict::Pass(format!("{pairs} pairs, no violation"))
    } else {
        Verdict::Fail(format!("{} of {pairs} pairs violate, e.g. {}", violations.len(), violations[0]))
    };
    report(4, "cut validity", v);
}

fn check_targets(net: &Network, rows: &[(AttackerModel, f64)]) -> Verdict {
    let be = HighsBackend::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for (model, target) in rows {
        match solve_interdiction(net, model, &cfg(BoundsMode::Heuristic), &be) {
            Ok(out) => {
                let rel = (out.eta_star - target).abs() / target;
                ok &= rel <= 0.01 && out.status.is_converged();
                lines.push(format!(
                    "{model}: {:.2} vs {target} ({:.2}%, {} it)",
                    out.eta_star,
                    100.0 * rel,
                    out.state.iterations
                ));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{model}: {e}"));
            }
        }
    }
    if ok {
        Verdict::Pass(lines.join("; "))
    } else {
        Verdict::Fail(lines.join("; "))
    }
}

#[test]
fn criterion_5_rts96_table() {
    let net = fixtures::rts96_api();
    let mut rows: Vec<(AttackerModel, f64)> = [(2, 4.0), (3, 7.37), (4, 11.05), (5, 14.21), (6, 15.96)]
        .into_iter()
        .map(|(k, v)| (AttackerModel::traditional(k).unwrap(), v))
        .collect();
    rows.push((AttackerModel::topological(5).unwrap(), 11.05));
    let v = check_targets(&net, &rows);
    report(5, "RTS96 traditional and topological rows", v);
    report(
        5,
        "RTS96 spatial D = 10 km row",
        Verdict::Skip("no bus geolocation is available for the RTS96 case".into()),
    );
}

/// Best of all 100,128 line pairs, lines 436 and 437.
const WECC_K2_OPTIMUM: f64 = 207.7666;

#[test]
fn criterion_6_wecc_spot_checks() {
    let net = fixtures::wecc240_api();
    let rows = [
        (AttackerModel::traditional(2).unwrap(), 219.19),
        (AttackerModel::topological(6).unwrap(), 332.03),
    ];
    let v = match check_targets(&net, &rows) {
        Verdict::Fail(d) => Verdict::Fail(format!("{d}; enumerated traditional k=2 optimum is {WECC_K2_OPTIMUM}")),
        v => v,
    };
    report(6, "WECC 240 spot checks", v);
}

#[test]
fn criterion_7_structural_invariants() {
    let be = HighsBackend::default();
    let mut problems = Vec::new();
    let mut runs = 0;
    for (name, net) in fixtures::synthetic() {
        for k in 1..=3usize.min(net.num_lines()) {
            let trad = AttackerModel::traditional(k).unwrap();
            let trad_out = solve_interdiction(&net, &trad, &cfg(BoundsMode::Valid), &be).unwrap();
            runs += 1;
            let h = &trad_out.state.history;
            if h.windows(2).any(|w| w[1].eta_up > w[0].eta_up + 1e-9 || w[1].eta_star < w[0].eta_star - 1e-9) {
                problems.push(format!("{name} k={k}: bounds not monotone"));
            }
            let subsets = (0..k).fold(1u64, |acc, i| acc * (net.num_lines() - i) as u64 / (i as u64 + 1));
            if trad_out.state.iterations as u64 > subsets {
                problems.push(format!("{name} k={k}: {} iterations > {subsets}", trad_out.state.iterations));
            }

            let topo = AttackerModel::topological(k).unwrap();
            match solve_interdiction(&net, &topo, &cfg(BoundsMode::Valid), &be) {
                Ok(t) => {
                    runs += 1;
                    if t.eta_star > trad_out.eta_star + 1e-6 {
                        problems.push(format!("{name} k={k}: topological {} > traditional {}", t.eta_star, trad_out.eta_star));
                    }
                }
                Err(Error::NoFeasibleAttack(_)) => {}
                Err(e) => problems.push(format!("{name} k={k} topological: {e}")),
            }

            let mut prev: Option<f64> = None;
            for d in [10.0, 20.0, 40.0, 60.0, 100.0, 200.0] {
                let sp = AttackerModel::spatial(k, d).unwrap();
                let eta = match solve_interdiction(&net, &sp, &cfg(BoundsMode::Valid), &be) {
                    Ok(o) => {
                        runs += 1;
                        Some(o.eta_star)
                    }
                    Err(Error::SpatiallyInfeasible { .. } | Error::NoFeasibleAttack(_)) => None,
                    Err(e) => {
                        problems.push(format!("{name} k={k} D={d}: {e}"));
                        None
                    }
                };
                match (prev, eta) {
                    (Some(p), Some(e)) if e < p - 1e-6 => {
                        problems.push(format!("{name} k={k}: spatial drops from {p} to {e} at D={d}"))
                    }
                    (Some(_), None) => problems.push(format!("{name} k={k}: spatial infeasible at larger D={d}")),
                    _ => {}
                }
                prev = eta.or(prev);
            }
        }
    }
    let v = if problems.is_empty() {
        Verdict::Pass(format!("{runs} runs, all invariants hold"))
    } else {
        Verdict::Fail(problems.join("; "))
    };
    report(7, "structural invariants", v);
}

#[test]
fn criterion_8_heuristic_bounds() {
    let be = HighsBackend::default();
    let mut problems = Vec::new();
    let (mut cells, mut fewer) = (0, 0);
    for (name, net) in fixtures::synthetic() {
        for k in 1..=3 {
            for model in models(k) {
                let heur = solve_interdiction(&net, &model, &cfg(BoundsMode::Heuristic), &be);
                let valid = solve_interdiction(&net, &model, &cfg(BoundsMode::Valid), &be);
                let (Ok(h), Ok(v)) = (heur, valid) else {
                    continue;
                };
                cells += 1;
                if (h.eta_star - v.eta_star).abs() > EPS * v.eta_star.max(FLOOR) + 1e-9 {
                    problems.push(format!("{name} {model}: heuristic {} valid {}", h.eta_star, v.eta_star));
                }
                if h.state.iterations > v.state.iterations {
                    problems.push(format!(
                        "{name} {model}: heuristic {} iterations > valid {}",
                        h.state.iterations, v.state.iterations
                    ));
                }
                if h.state.iterations < v.state.iterations {
                    fewer += 1;
                }
            }
        }
    }
    let v = if problems.is_empty() {
        Verdict::Pass(format!("{cells} cells agree; heuristic needs fewer iterations in {fewer}"))
    } else {
        Verdict::Fail(format!("{} of {cells} cells: {}", problems.len(), problems.join("; ")))
    };
    report(8, "heuristic bounds", v);
}
