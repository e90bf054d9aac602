use serde::Serialize;
use serde_json::{json, Value};

use gridnk::engine::{Certificate, SolveStatus};
use gridnk::{AttackerModel, Network, SolveConfig, SolveOutcome};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct BusShed {
    pub bus: u32,
    pub demand: f64,
    /// Shed fraction in `[0, 1]`.
    pub shed: f64,
    /// Share of the total shed load at this bus, in percent.
    pub shed_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub attack: Vec<u32>,
    pub center_bus: Option<u32>,
    pub eta: f64,
    pub eta_star: f64,
    pub eta_up: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub case: String,
    pub model: String,
    pub k: usize,
    #[serde(rename = "D_km")]
    pub d_km: Option<f64>,
    pub bounds: String,
    pub epsilon: f64,
    pub seed: u64,
    pub status: SolveStatus,
    pub eta_star: f64,
    pub eta_up: f64,
    pub wall_time_s: f64,
    pub iterations: usize,
    pub rel_gap_pct: f64,
    pub interdicted_lines: Vec<u32>,
    pub center_bus: Option<u32>,
    pub per_bus_shed: Vec<BusShed>,
    pub history: Vec<HistoryRow>,
    pub certificate: Certificate,
}

impl RunReport {
    pub fn new(
        case: &str,
        net: &Network,
        model: &AttackerModel,
        config: &SolveConfig,
        seed: u64,
        out: &SolveOutcome,
        reproducible: bool,
    ) -> Self {
        let bus_id = |pos: usize| net.buses[pos].id;
        let per_bus_shed = net
            .buses
            .iter()
            .zip(&out.solution.shed)
            .map(|(b, &s)| BusShed {
                bus: b.id,
                demand: b.demand,
                shed: s,
                shed_pct: if out.eta_star > 1e-12 { 100.0 * b.demand * s / out.eta_star } else { 0.0 },
            })
            .collect();
        let history = out
            .state
            .history
            .iter()
            .map(|h| HistoryRow {
                iteration: h.iteration,
                attack: h.attack.iter().map(|&l| net.lines[l].id).collect(),
                center_bus: h.center_bus.map(bus_id),
                eta: h.eta,
                eta_star: h.eta_star,
                eta_up: h.eta_up,
            })
            .collect();
        RunReport {
            schema: SCHEMA,
            case: case.to_string(),
            model: model.name().to_string(),
            k: model.k(),
            d_km: model.d_km(),
            bounds: config.bounds_mode.to_string(),
            epsilon: config.epsilon,
            seed,
            status: out.status,
            eta_star: out.eta_star,
            eta_up: out.state.eta_up,
            wall_time_s: if reproducible { 0.0 } else { out.wall_time_s },
            iterations: out.state.iterations,
            rel_gap_pct: 100.0 * out.gap(config),
            interdicted_lines: out.attack.line_ids(net),
            center_bus: out.attack.center_bus.map(bus_id),
            per_bus_shed,
            history,
            certificate: out.certificate.clone(),
        }
    }
}

/// Buses as points carrying `shed_pct`, lines as segments carrying
/// `interdicted`. Coordinates are `[lon, lat]`.
pub fn geojson(net: &Network, report: &RunReport) -> Value {
    let mut features = Vec::with_capacity(net.num_buses() + net.num_lines());
    for (bus, shed) in net.buses.iter().zip(&report.per_bus_shed) {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [bus.lon, bus.lat] },
            "properties": {
                "bus": bus.id,
                "demand": bus.demand,
                "shed_pct": shed.shed_pct,
            },
        }));
    }
    for (l, line) in net.lines.iter().enumerate() {
        let (a, b) = net.ends(l);
        let (a, b) = (&net.buses[a], &net.buses[b]);
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[a.lon, a.lat], [b.lon, b.lat]],
            },
            "properties": {
                "line": line.id,
                "from_bus": line.from_bus,
                "to_bus": line.to_bus,
                "interdicted": report.interdicted_lines.contains(&line.id),
            },
        }));
    }
    json!({ "type": "FeatureCollection", "features": features })
}

/// One row of the sweep table. Failed cells carry the error text and leave
/// the numeric columns empty.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub k: usize,
    #[serde(rename = "D_km")]
    pub d_km: Option<f64>,
    pub status: Option<SolveStatus>,
    pub eta_star: Option<f64>,
    pub iterations: Option<usize>,
    pub rel_gap_pct: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub interdicted_lines: String,
    pub center_bus: Option<u32>,
    pub error: String,
}

impl SweepRow {
    pub fn from_report(r: &RunReport) -> Self {
        SweepRow {
            model: r.model.clone(),
            k: r.k,
            d_km: r.d_km,
            status: Some(r.status),
            eta_star: Some(r.eta_star),
            iterations: Some(r.iterations),
            rel_gap_pct: Some(r.rel_gap_pct),
            wall_time_s: Some(r.wall_time_s),
            interdicted_lines: join_ids(&r.interdicted_lines),
            center_bus: r.center_bus,
            error: String::new(),
        }
    }

    pub fn failed(model: &str, k: usize, d_km: Option<f64>, error: String) -> Self {
        SweepRow {
            model: model.to_string(),
            k,
            d_km,
            status: None,
            eta_star: None,
            iterations: None,
            rel_gap_pct: None,
            wall_time_s: None,
            interdicted_lines: String::new(),
            center_bus: None,
            error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Same optimum.
    Agree,
    /// Engine optimum is lower but inside the requested tolerance.
    WithinGap,
    Violation,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyRow {
    pub model: String,
    pub k: usize,
    #[serde(rename = "D_km")]
    pub d_km: Option<f64>,
    pub verdict: Verdict,
    pub engine_eta: Option<f64>,
    pub oracle_eta: Option<f64>,
    pub engine_lines: Vec<u32>,
    pub oracle_lines: Vec<u32>,
    pub evaluated: usize,
    pub note: String,
}

pub fn join_ids(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}
