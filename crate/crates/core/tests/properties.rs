use std::collections::BTreeSet;

use itertools::Itertools;
use proptest::prelude::*;

use gridnk::attackers::{
    compute_phi, encode_feasible_set, haversine_km, is_feasible_attack, lines_connected, DistanceMode, GeoPoint,
};
use gridnk::inner::{primal_residual, solve_inner, solve_penalized_inner, AttackPlan};
use gridnk::lp::{Backend, LinearProgram, LpStatus, Sense};
use gridnk::{
    heuristic_bounds, parse_case, solve_exhaustive, solve_interdiction, total_load, valid_bounds, AttackerModel,
    BoundsMode, Bus, HighsBackend, Line, Network, SolveConfig,
};

/// Connected network: a random spanning tree plus extra non-loop edges, buses
/// scattered within about 60 km.
fn arb_network(max_buses: usize, max_extra: usize) -> impl Strategy<Value = Network> {
    (2..=max_buses)
        .prop_flat_map(move |n| {
            let parents = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
            let extra = proptest::collection::vec((0..n, 0..n), 0..=max_extra);
            let buses = proptest::collection::vec((0.0..1.0f64, 0.0..1.5f64, -0.3..0.3f64, -0.3..0.3f64), n);
            let params = proptest::collection::vec((0.02..0.5f64, 0.1..1.2f64), n - 1 + max_extra);
            (parents, extra, buses, params)
        })
        .prop_map(|(parents, extra, buses, params)| {
            let buses: Vec<Bus> = buses
                .iter()
                .enumerate()
                .map(|(i, &(d, g, dlat, dlon))| Bus::new(i as u32 + 1, d, g).with_geo(40.0 + dlat, -111.0 + dlon))
                .collect();
            let mut edges: Vec<(usize, usize)> =
                parents.iter().enumerate().map(|(i, p)| (p.index(i + 1), i + 1)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            let lines = edges
                .iter()
                .zip(&params)
                .enumerate()
                .map(|(l, (&(a, b), &(x, t)))| Line::new(l as u32 + 1, a as u32 + 1, b as u32 + 1, x, t))
                .collect();
            Network::new(100.0, buses, lines).unwrap()
        })
}

fn arb_model(max_k: usize) -> impl Strategy<Value = AttackerModel> {
    (1..=max_k, 0..3u8, 20.0..80.0f64).prop_map(|(k, kind, d)| match kind {
        0 => AttackerModel::traditional(k).unwrap(),
        1 => AttackerModel::spatial(k, d).unwrap(),
        _ => AttackerModel::topological(k).unwrap(),
    })
}

fn subsets(n: usize, max_k: usize) -> impl Iterator<Item = BTreeSet<usize>> {
    (0..=max_k.min(n)).flat_map(move |j| (0..n).combinations(j).map(BTreeSet::from_iter))
}

fn arb_point() -> impl Strategy<Value = GeoPoint> {
    (-89.0..89.0f64, -179.0..179.0f64).prop_map(|(lat, lon)| GeoPoint::new(lat, lon))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haversine_is_a_metric(a in arb_point(), b in arb_point(), c in arb_point()) {
        prop_assert!(haversine_km(a, a).abs() < 1e-9);
        prop_assert!((haversine_km(a, b) - haversine_km(b, a)).abs() < 1e-9);
        prop_assert!(haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-6);
        prop_assert!(haversine_km(a, b) <= std::f64::consts::PI * gridnk::attackers::EARTH_RADIUS_KM + 1e-6);
    }

    #[test]
    fn case_text_round_trips(net in arb_network(7, 4)) {
        let back = parse_case(&net.to_case_text()).unwrap();
        prop_assert_eq!(back.num_buses(), net.num_buses());
        prop_assert_eq!(back.num_lines(), net.num_lines());
        for (a, b) in back.buses.iter().zip(&net.buses) {
            prop_assert_eq!(a.id, b.id);
            prop_assert!((a.demand - b.demand).abs() < 1e-9);
            prop_assert!((a.gen_cap - b.gen_cap).abs() < 1e-9);
        }
        for (a, b) in back.lines.iter().zip(&net.lines) {
            prop_assert_eq!((a.from_bus, a.to_bus), (b.from_bus, b.to_bus));
            prop_assert!((a.reactance - b.reactance).abs() < 1e-9);
            prop_assert!((a.thermal - b.thermal).abs() < 1e-9);
        }
    }

    #[test]
    fn footprints_nest(net in arb_network(7, 3), d in 5.0..100.0f64, grow in 0.0..100.0f64) {
        let small = compute_phi(&net, d, DistanceMode::Haversine).unwrap();
        let large = compute_phi(&net, d + grow, DistanceMode::Haversine).unwrap();
        for (a, b) in small.phi.iter().zip(&large.phi) {
            prop_assert!(a.iter().all(|l| b.contains(l)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_solution_is_feasible_and_bounded(net in arb_network(7, 4), picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..4)) {
        let be = HighsBackend::default();
        let attack = AttackPlan::new(picks.iter().map(|p| p.index(net.num_lines())));
        let sol = solve_inner(&net, &attack, &be).unwrap();
        prop_assert!(sol.eta >= -1e-9 && sol.eta <= total_load(&net) + 1e-9);
        prop_assert!(primal_residual(&net, &sol) < 1e-6);
        for &(a, b) in sol.duals_pi.iter().chain(&sol.duals_mu) {
            prop_assert!(a >= -1e-9 && b >= -1e-9);
        }
        for &l in &attack.lines {
            prop_assert!(sol.flow[l].abs() < 1e-9);
        }
    }

    #[test]
    fn penalized_never_exceeds_exact(net in arb_network(6, 3), pick in any::<prop::sample::Index>(), valid in any::<bool>()) {
        let be = HighsBackend::default();
        let attack = AttackPlan::new([pick.index(net.num_lines())]);
        let bounds = if valid {
            let enc = encode_feasible_set(&net, &AttackerModel::traditional(1).unwrap(), None).unwrap();
            valid_bounds(&net, &enc, &be).unwrap()
        } else {
            heuristic_bounds(&net)
        };
        let exact = solve_inner(&net, &attack, &be).unwrap().eta;
        let pen = solve_penalized_inner(&net, &attack, &bounds, &be).unwrap();
        prop_assert!(pen <= exact + 1e-7, "penalized {pen} > exact {exact}");
    }

    #[test]
    fn valid_bounds_give_exact_penalty(net in arb_network(5, 2), k in 1usize..=2) {
        let be = HighsBackend::default();
        let model = AttackerModel::traditional(k).unwrap();
        let enc = encode_feasible_set(&net, &model, None).unwrap();
        let bounds = valid_bounds(&net, &enc, &be).unwrap();
        let feasible: Vec<AttackPlan> = subsets(net.num_lines(), k)
            .filter(|s| s.len() == k)
            .map(AttackPlan::new)
            .collect();
        let sols: Vec<_> = feasible.iter().map(|a| solve_inner(&net, a, &be).unwrap()).collect();
        for (a, s) in feasible.iter().zip(&sols) {
            let pen = solve_penalized_inner(&net, a, &bounds, &be).unwrap();
            prop_assert!((pen - s.eta).abs() < 1e-6, "attack {:?}: penalized {pen} vs exact {}", a.lines, s.eta);
        }
    }

    #[test]
    fn pruned_sides_carry_no_dual(net in arb_network(5, 3), model in arb_model(3)) {
        let be = HighsBackend::default();
        let fp = model.d_km().and_then(|d| compute_phi(&net, d, DistanceMode::Haversine).ok());
        let Ok(enc) = encode_feasible_set(&net, &model, fp.as_ref()) else {
            return Ok(());
        };
        let bounds = valid_bounds(&net, &enc, &be).unwrap();
        for s in subsets(net.num_lines(), model.k()) {
            if !is_feasible_attack(&net, &model, fp.as_ref(), &s) {
                continue;
            }
            let sol = solve_inner(&net, &AttackPlan::new(s.iter().copied()), &be).unwrap();
            for l in 0..net.num_lines() {
                let (lo, hi) = sol.duals_pi[l];
                prop_assert!(bounds.pi1[l] > 0.0 || lo <= 1e-9, "line {l} lower dual {lo} under {s:?}");
                prop_assert!(bounds.pi2[l] > 0.0 || hi <= 1e-9, "line {l} upper dual {hi} under {s:?}");
            }
        }
    }

    #[test]
    fn encoding_matches_predicate(net in arb_network(5, 3), model in arb_model(3)) {
        let be = HighsBackend::default();
        let fp = match model.d_km() {
            Some(d) => Some(compute_phi(&net, d, DistanceMode::Haversine).unwrap()),
            None => None,
        };
        let enc = match encode_feasible_set(&net, &model, fp.as_ref()) {
            Ok(enc) => enc,
            Err(_) => {
                for s in subsets(net.num_lines(), model.k()) {
                    prop_assert!(!is_feasible_attack(&net, &model, fp.as_ref(), &s));
                }
                return Ok(());
            }
        };
        for s in subsets(net.num_lines(), model.k() + 1) {
            let mut lp = LinearProgram::new(Sense::Minimize);
            let vars = enc.install(&mut lp, false);
            for l in 0..net.num_lines() {
                let v = if s.contains(&l) { 1.0 } else { 0.0 };
                lp.set_bounds(vars[enc.line_var(l)], v, v);
            }
            let status = be.solve(&lp).unwrap().status;
            let expected = is_feasible_attack(&net, &model, fp.as_ref(), &s);
            prop_assert_eq!(status == LpStatus::Optimal, expected, "{} lines {:?}", model, s);
        }
    }

    #[test]
    fn oracle_is_deterministic(net in arb_network(5, 2), model in arb_model(2)) {
        let be = HighsBackend::default();
        let fp = model.d_km().and_then(|d| compute_phi(&net, d, DistanceMode::Haversine).ok());
        if model.is_spatial() && fp.is_none() {
            return Ok(());
        }
        let a = solve_exhaustive(&net, &model, fp.as_ref(), &be, 1 << 20);
        let b = solve_exhaustive(&net, &model, fp.as_ref(), &be, 1 << 20);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.best_attack.lines, b.best_attack.lines);
                prop_assert_eq!(a.best_eta, b.best_eta);
                prop_assert_eq!(a.evaluated, b.evaluated);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "oracle runs disagree"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_matches_oracle(net in arb_network(5, 3), model in arb_model(3)) {
        let be = HighsBackend::default();
        let cfg = SolveConfig {
            epsilon: 1e-6,
            bounds_mode: BoundsMode::Valid,
            cross_check_max_lines: 0,
            ..SolveConfig::default()
        };
        let fp = model.d_km().and_then(|d| compute_phi(&net, d, DistanceMode::Haversine).ok());
        let engine = solve_interdiction(&net, &model, &cfg, &be);
        let oracle = match (&fp, model.is_spatial()) {
            (None, true) => {
                prop_assert!(engine.is_err());
                return Ok(());
            }
            _ => solve_exhaustive(&net, &model, fp.as_ref(), &be, 1 << 20),
        };
        match (engine, oracle) {
            (Ok(e), Ok(o)) => {
                prop_assert!((e.eta_star - o.best_eta).abs() <= 1e-5 * o.best_eta.max(1.0),
                    "{model}: engine {} vs oracle {}", e.eta_star, o.best_eta);
                prop_assert!(is_feasible_attack(&net, &model, fp.as_ref(), &e.attack.lines));
                prop_assert!((e.certificate.exact_eta - e.eta_star).abs() < 1e-6);
                if matches!(model, AttackerModel::Topological { .. }) {
                    prop_assert!(lines_connected(&net, &e.attack.lines));
                }
                let hist = &e.state.history;
                prop_assert!(hist.windows(2).all(|w| w[1].eta_star >= w[0].eta_star));
            }
            (Err(_), Err(_)) => {}
            (e, o) => prop_assert!(false, "{model}: engine {:?} vs oracle {:?}", e.map(|x| x.eta_star), o.map(|x| x.best_eta)),
        }
    }

    #[test]
    fn heuristic_answer_is_feasible_and_below_optimum(net in arb_network(5, 3), k in 1usize..=3) {
        let be = HighsBackend::default();
        let model = AttackerModel::traditional(k.min(net.num_lines())).unwrap();
        let heur = solve_interdiction(&net, &model, &SolveConfig { cross_check_max_lines: 0, ..SolveConfig::default() }, &be).unwrap();
        let opt = solve_exhaustive(&net, &model, None, &be, 1 << 20).unwrap();
        prop_assert_eq!(heur.attack.len(), model.k());
        prop_assert!(heur.eta_star <= opt.best_eta + 1e-7);
    }
}
