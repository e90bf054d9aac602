//! Small built-in networks for tests, demos and the CLI, plus the two bundled
//! PGLib API cases.

use crate::netmodel::{parse_case, Bus, Line, Network};

const RTS96_API: &str = include_str!("../data/pglib_opf_case24_ieee_rts__api.m");
const WECC240_API: &str = include_str!("../data/pglib_opf_case240_pserc__api.m");

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "two_bus",
    "triangle",
    "square",
    "five_bus",
    "braess",
    "ladder",
    "eight_bus",
    "rts96_api",
    "wecc240_api",
];

/// Synthetic fixtures used by the exhaustive engine/oracle comparisons.
pub fn synthetic() -> Vec<(&'static str, Network)> {
    vec![
        ("two_bus", two_bus()),
        ("triangle", triangle()),
        ("square", square()),
        ("five_bus", five_bus()),
        ("braess", braess()),
        ("ladder", ladder()),
        ("eight_bus", eight_bus()),
    ]
}

pub fn builtin(name: &str) -> Option<Network> {
    Some(match name {
        "two_bus" => two_bus(),
        "triangle" => triangle(),
        "square" => square(),
        "five_bus" => five_bus(),
        "braess" => braess(),
        "ladder" => ladder(),
        "eight_bus" => eight_bus(),
        "rts96_api" => rts96_api(),
        "wecc240_api" => wecc240_api(),
        _ => return None,
    })
}

pub fn rts96_api() -> Network {
    parse_case(RTS96_API).expect("bundled RTS96 case parses")
}

pub fn wecc240_api() -> Network {
    parse_case(WECC240_API).expect("bundled WECC 240 case parses")
}

fn build(buses: Vec<Bus>, lines: &[(u32, u32, f64, f64)]) -> Network {
    let lines = lines
        .iter()
        .enumerate()
        .map(|(i, &(f, t, x, cap))| Line::new(i as u32 + 1, f, t, x, cap))
        .collect();
    Network::new(100.0, buses, lines).expect("fixture is valid")
}

/// Generator bus 1 feeding a unit load at bus 2 over one fully used line.
pub fn two_bus() -> Network {
    build(
        vec![
            Bus::new(1, 0.0, 1.0).with_geo(40.00, -111.90),
            Bus::new(2, 1.0, 0.0).with_geo(40.10, -111.80),
        ],
        &[(1, 2, 0.1, 1.0)],
    )
}

/// Lines in order (1,2), (1,3), (2,3).
pub fn triangle() -> Network {
    build(
        vec![
            Bus::new(1, 0.0, 2.0).with_geo(40.00, -111.90),
            Bus::new(2, 1.0, 0.0).with_geo(40.20, -111.70),
            Bus::new(3, 1.0, 0.0).with_geo(39.80, -111.70),
        ],
        &[(1, 2, 0.1, 1.0), (1, 3, 0.1, 1.0), (2, 3, 0.1, 0.5)],
    )
}

/// Four-bus ring, lines (1,2), (2,3), (3,4), (4,1).
pub fn square() -> Network {
    build(
        vec![
            Bus::new(1, 0.2, 1.5).with_geo(40.00, -112.00),
            Bus::new(2, 0.8, 0.0).with_geo(40.00, -111.60),
            Bus::new(3, 0.3, 0.6).with_geo(39.70, -111.60),
            Bus::new(4, 0.9, 0.0).with_geo(39.70, -112.00),
        ],
        &[(1, 2, 0.10, 0.9), (2, 3, 0.20, 0.5), (3, 4, 0.10, 0.6), (4, 1, 0.15, 0.8)],
    )
}

pub fn five_bus() -> Network {
    build(
        vec![
            Bus::new(1, 0.0, 1.6).with_geo(40.60, -112.00),
            Bus::new(2, 0.6, 0.0).with_geo(40.60, -111.60),
            Bus::new(3, 0.4, 0.5).with_geo(40.30, -111.80),
            Bus::new(4, 0.7, 0.0).with_geo(40.00, -112.00),
            Bus::new(5, 0.5, 0.3).with_geo(40.00, -111.60),
        ],
        &[
            (1, 2, 0.08, 0.8),
            (1, 3, 0.10, 0.9),
            (2, 3, 0.12, 0.4),
            (3, 4, 0.10, 0.6),
            (3, 5, 0.09, 0.5),
            (4, 5, 0.15, 0.4),
            (1, 4, 0.20, 0.5),
        ],
    )
}

/// Interdicting a line can reduce shedding here: lines (2,4) and (3,4) form a
/// tight path whose removal relieves a loop constraint.
pub fn braess() -> Network {
    build(
        vec![
            Bus::new(1, 0.0, 1.2).with_geo(39.40, -112.20),
            Bus::new(2, 0.3, 0.0).with_geo(39.60, -112.00),
            Bus::new(3, 0.2, 0.6).with_geo(39.20, -112.00),
            Bus::new(4, 0.8, 0.0).with_geo(39.40, -111.80),
            Bus::new(5, 0.4, 0.0).with_geo(39.60, -111.60),
            Bus::new(6, 0.0, 0.4).with_geo(39.20, -111.60),
        ],
        &[
            (1, 2, 0.05, 0.7),
            (1, 3, 0.05, 0.7),
            (2, 4, 0.10, 0.3),
            (3, 4, 0.10, 0.5),
            (2, 3, 0.02, 0.2),
            (4, 5, 0.10, 0.5),
            (5, 6, 0.10, 0.4),
            (4, 6, 0.10, 0.4),
        ],
    )
}

/// Two parallel rails with rungs, including a doubled circuit.
pub fn ladder() -> Network {
    build(
        vec![
            Bus::new(1, 0.1, 1.0).with_geo(41.00, -112.00),
            Bus::new(2, 0.5, 0.0).with_geo(41.00, -111.80),
            Bus::new(3, 0.4, 0.3).with_geo(41.00, -111.60),
            Bus::new(4, 0.3, 0.8).with_geo(40.80, -112.00),
            Bus::new(5, 0.6, 0.0).with_geo(40.80, -111.80),
            Bus::new(6, 0.2, 0.0).with_geo(40.80, -111.60),
        ],
        &[
            (1, 2, 0.10, 0.6),
            (2, 3, 0.10, 0.4),
            (4, 5, 0.10, 0.6),
            (5, 6, 0.10, 0.4),
            (1, 4, 0.05, 0.5),
            (2, 5, 0.05, 0.3),
            (3, 6, 0.05, 0.3),
            (2, 5, 0.05, 0.3),
        ],
    )
}

pub fn eight_bus() -> Network {
    build(
        vec![
            Bus::new(1, 0.0, 1.5).with_geo(39.00, -112.40),
            Bus::new(2, 0.4, 0.0).with_geo(39.15, -112.10),
            Bus::new(3, 0.3, 0.0).with_geo(38.85, -112.10),
            Bus::new(4, 0.5, 0.7).with_geo(39.00, -111.80),
            Bus::new(5, 0.3, 0.0).with_geo(39.25, -111.55),
            Bus::new(6, 0.4, 0.0).with_geo(38.75, -111.55),
            Bus::new(7, 0.2, 0.5).with_geo(39.00, -111.30),
            Bus::new(8, 0.6, 0.0).with_geo(39.30, -111.00),
        ],
        &[
            (1, 2, 0.06, 0.8),
            (1, 3, 0.06, 0.7),
            (2, 3, 0.10, 0.3),
            (2, 4, 0.08, 0.5),
            (3, 4, 0.08, 0.5),
            (4, 5, 0.10, 0.6),
            (4, 6, 0.10, 0.5),
            (5, 7, 0.12, 0.4),
            (6, 7, 0.12, 0.4),
            (5, 8, 0.10, 0.6),
            (7, 8, 0.10, 0.5),
            (4, 7, 0.20, 0.3),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_in_range() {
        let all = synthetic();
        assert!(all.len() >= 5);
        for (name, net) in &all {
            assert!((2..=8).contains(&net.num_buses()), "{name}");
            assert!((1..=12).contains(&net.num_lines()), "{name}");
            assert!(net.all_geolocated(), "{name}");
        }
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_some(), "{name}");
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn bundled_cases_load() {
        let rts = rts96_api();
        assert_eq!(rts.num_buses(), 24);
        assert!(rts.num_lines() >= 34);
        let wecc = wecc240_api();
        assert_eq!(wecc.num_buses(), 240);
    }
}
