//! Attacker feasible sets: spatial footprints, the mixed-integer encodings
//! used by the master problem, and plain predicates used by the oracle.

use std::collections::BTreeSet;

use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Var};
use crate::netmodel::{AttackerModel, Network};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }
}

/// Great-circle distance in km.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection distance in km.
pub fn planar_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let mean_lat = ((a.lat + b.lat) / 2.0).to_radians();
    let x = (b.lon - a.lon).to_radians() * mean_lat.cos();
    let y = (b.lat - a.lat).to_radians();
    EARTH_RADIUS_KM * x.hypot(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    #[default]
    Haversine,
    Planar,
}

impl DistanceMode {
    pub fn distance_km(self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            DistanceMode::Haversine => haversine_km(a, b),
            DistanceMode::Planar => planar_km(a, b),
        }
    }
}

impl std::str::FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "haversine" => Ok(DistanceMode::Haversine),
            "planar" => Ok(DistanceMode::Planar),
            other => Err(format!("unknown distance mode `{other}` (expected haversine|planar)")),
        }
    }
}

/// For every line, the buses within `d_km / 2` of the line's midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFootprint {
    /// Sorted bus positions per line position.
    pub phi: Vec<Vec<usize>>,
    pub d_km: f64,
}

impl SpatialFootprint {
    /// Buses that could serve as the center of an attack on all `lines`.
    pub fn common_centers(&self, lines: &BTreeSet<usize>) -> Vec<usize> {
        let mut iter = lines.iter();
        let Some(&first) = iter.next() else {
            return Vec::new();
        };
        let mut common: Vec<usize> = self.phi[first].clone();
        for &l in iter {
            common.retain(|b| self.phi[l].binary_search(b).is_ok());
        }
        common
    }

    /// Whether no line can be interdicted from any center.
    pub fn is_empty(&self) -> bool {
        self.phi.iter().all(Vec::is_empty)
    }
}

fn bus_point(net: &Network, b: usize) -> GeoPoint {
    GeoPoint::new(net.buses[b].lat, net.buses[b].lon)
}

pub fn compute_phi(net: &Network, d_km: f64, mode: DistanceMode) -> Result<SpatialFootprint> {
    if let Some(b) = net.buses.iter().find(|b| !b.has_geo) {
        return Err(Error::MissingGeolocation(b.id));
    }
    if !(d_km > 0.0) {
        return Err(Error::InvalidModel(format!("distance limit must be positive, got {d_km}")));
    }
    let radius = d_km / 2.0;
    let phi = (0..net.num_lines())
        .map(|l| {
            let (f, t) = net.ends(l);
            let (a, b) = (bus_point(net, f), bus_point(net, t));
            let mid = GeoPoint::new((a.lat + b.lat) / 2.0, (a.lon + b.lon) / 2.0);
            (0..net.num_buses())
                .filter(|&n| mode.distance_km(bus_point(net, n), mid) <= radius)
                .collect()
        })
        .collect();
    Ok(SpatialFootprint { phi, d_km })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// `x_ij`: line interdicted.
    Line(usize),
    /// `x_i`: bus is the spatial center.
    Center(usize),
    /// `y_i`: bus touches an interdicted line.
    Touched(usize),
    /// `x_κi`: the super sink feeds this bus.
    Root(usize),
    /// `δ` on a line, in its from→to direction when `forward`.
    ArcFlow { line: usize, forward: bool },
    /// `δ_κi`.
    RootFlow(usize),
}

#[derive(Debug, Clone)]
pub struct EncVar {
    pub role: VarRole,
    pub binary: bool,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct EncRow {
    pub lower: f64,
    pub upper: f64,
    pub terms: Vec<(usize, f64)>,
}

/// The attacker's feasible set as linear rows over binaries and
/// continuous flow variables, in local indexing. Line variables come first,
/// so local index `l` is `x` of line `l`.
#[derive(Debug, Clone)]
pub struct MasterEncoding {
    pub model: AttackerModel,
    pub vars: Vec<EncVar>,
    pub rows: Vec<EncRow>,
    num_lines: usize,
    centers: Vec<usize>,
}

impl MasterEncoding {
    fn push_var(&mut self, role: VarRole, binary: bool, upper: f64) -> usize {
        self.vars.push(EncVar {
            role,
            binary,
            lower: 0.0,
            upper,
        });
        self.vars.len() - 1
    }

    fn push_row(&mut self, lower: f64, upper: f64, terms: Vec<(usize, f64)>) {
        self.rows.push(EncRow { lower, upper, terms });
    }

    pub fn line_var(&self, line: usize) -> usize {
        debug_assert!(line < self.num_lines);
        line
    }

    /// Local indices of the center binaries (spatial only), by bus position.
    pub fn center_vars(&self) -> &[usize] {
        &self.centers
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.vars.len() - self.num_binaries()
    }

    /// Fixes the spatial center to a known bus.
    pub fn pin_center(&mut self, bus: usize) -> Result<()> {
        let &var = self
            .centers
            .get(bus)
            .ok_or_else(|| Error::InvalidModel("center pinning needs a spatial model and a known bus".into()))?;
        self.vars[var].lower = 1.0;
        Ok(())
    }

    /// Adds the encoding's variables and rows to `lp`; returns the LP variable
    /// for each local index. With `relax`, binaries become `[0, 1]` columns.
    pub fn install(&self, lp: &mut LinearProgram, relax: bool) -> Vec<Var> {
        let vars: Vec<Var> = self
            .vars
            .iter()
            .map(|v| {
                if v.binary && !relax {
                    lp.add_integer_var(v.lower, v.upper, 0.0)
                } else {
                    lp.add_var(v.lower, v.upper, 0.0)
                }
            })
            .collect();
        for r in &self.rows {
            lp.add_row(r.lower, r.upper, r.terms.iter().map(|&(i, c)| (vars[i], c)));
        }
        vars
    }
}

/// Builds the feasible-set rows for an attacker model.
///
/// * traditional: `Σ x = k`
/// * spatial: `1 ≤ Σ x ≤ k`, one center, `x_ij ≤ Σ_{n ∈ φ_ij} x_n`
/// * topological: `Σ x = k` plus a single-commodity flow from a super sink
///   that reaches every bus touched by an interdicted line, so the
///   interdicted lines form one connected piece.
pub fn encode_feasible_set(
    net: &Network,
    model: &AttackerModel,
    footprint: Option<&SpatialFootprint>,
) -> Result<MasterEncoding> {
    let ne = net.num_lines();
    let nb = net.num_buses();
    let mut enc = MasterEncoding {
        model: *model,
        vars: Vec::new(),
        rows: Vec::new(),
        num_lines: ne,
        centers: Vec::new(),
    };
    for l in 0..ne {
        enc.push_var(VarRole::Line(l), true, 1.0);
    }
    let all_lines: Vec<(usize, f64)> = (0..ne).map(|l| (l, 1.0)).collect();

    match *model {
        AttackerModel::Traditional { k } => {
            let k = k as f64;
            enc.push_row(k, k, all_lines);
        }
        AttackerModel::Spatial { k, d_km } => {
            let fp = footprint.ok_or_else(|| Error::InvalidModel("spatial model needs a footprint".into()))?;
            if fp.phi.len() != ne {
                return Err(Error::InvalidModel("footprint does not match the network".into()));
            }
            if fp.is_empty() {
                return Err(Error::SpatiallyInfeasible { d_km });
            }
            enc.centers = (0..nb).map(|b| enc.push_var(VarRole::Center(b), true, 1.0)).collect();
            enc.push_row(1.0, k as f64, all_lines);
            let centers: Vec<(usize, f64)> = enc.centers.iter().map(|&c| (c, 1.0)).collect();
            enc.push_row(1.0, 1.0, centers);
            for l in 0..ne {
                let mut terms = vec![(l, 1.0)];
                terms.extend(fp.phi[l].iter().map(|&n| (enc.centers[n], -1.0)));
                enc.push_row(f64::NEG_INFINITY, 0.0, terms);
            }
        }
        AttackerModel::Topological { k } => {
            if k > ne {
                return Err(Error::NoFeasibleAttack(format!(
                    "topological attack of {k} lines on a network with {ne} lines"
                )));
            }
            let kf = k as f64;
            let touched: Vec<usize> = (0..nb).map(|b| enc.push_var(VarRole::Touched(b), true, 1.0)).collect();
            let root: Vec<usize> = (0..nb).map(|b| enc.push_var(VarRole::Root(b), true, 1.0)).collect();
            let root_flow: Vec<usize> = (0..nb)
                .map(|b| enc.push_var(VarRole::RootFlow(b), false, f64::INFINITY))
                .collect();
            let fwd: Vec<usize> = (0..ne)
                .map(|l| enc.push_var(VarRole::ArcFlow { line: l, forward: true }, false, f64::INFINITY))
                .collect();
            let bwd: Vec<usize> = (0..ne)
                .map(|l| enc.push_var(VarRole::ArcFlow { line: l, forward: false }, false, f64::INFINITY))
                .collect();

            enc.push_row(kf, kf, all_lines);
            enc.push_row(1.0, 1.0, root.iter().map(|&r| (r, 1.0)).collect());
            for l in 0..ne {
                let (f, t) = net.ends(l);
                enc.push_row(f64::NEG_INFINITY, 0.0, vec![(l, 1.0), (touched[f], -1.0)]);
                enc.push_row(f64::NEG_INFINITY, 0.0, vec![(l, 1.0), (touched[t], -1.0)]);
                enc.push_row(f64::NEG_INFINITY, 0.0, vec![(fwd[l], 1.0), (l, -kf)]);
                enc.push_row(f64::NEG_INFINITY, 0.0, vec![(bwd[l], 1.0), (l, -kf)]);
            }
            for b in 0..nb {
                enc.push_row(f64::NEG_INFINITY, 0.0, vec![(root_flow[b], 1.0), (root[b], -(kf + 1.0))]);
                // inflow - outflow over incident lines = y_b - δ_κb
                let mut terms = vec![(touched[b], -1.0), (root_flow[b], 1.0)];
                for &l in net.in_lines(b) {
                    terms.push((fwd[l], 1.0));
                    terms.push((bwd[l], -1.0));
                }
                for &l in net.out_lines(b) {
                    terms.push((bwd[l], 1.0));
                    terms.push((fwd[l], -1.0));
                }
                enc.push_row(0.0, 0.0, terms);
            }
        }
    }
    Ok(enc)
}

/// Whether the lines in `lines` form a connected edge-induced subgraph.
pub fn lines_connected(net: &Network, lines: &BTreeSet<usize>) -> bool {
    let mut dsu = DisjointSet::new(net.num_buses());
    let mut first = None;
    for &l in lines {
        let (f, t) = net.ends(l);
        dsu.union(f, t);
        first.get_or_insert(f);
    }
    match first {
        None => true,
        Some(root) => {
            let r = dsu.find(root);
            lines.iter().all(|&l| dsu.find(net.ends(l).0) == r)
        }
    }
}

/// Membership test for the attacker's feasible set.
pub fn is_feasible_attack(
    net: &Network,
    model: &AttackerModel,
    footprint: Option<&SpatialFootprint>,
    lines: &BTreeSet<usize>,
) -> bool {
    if lines.iter().any(|&l| l >= net.num_lines()) {
        return false;
    }
    match *model {
        AttackerModel::Traditional { k } => lines.len() == k,
        AttackerModel::Spatial { k, .. } => {
            let Some(fp) = footprint else {
                return false;
            };
            !lines.is_empty() && lines.len() <= k && !fp.common_centers(lines).is_empty()
        }
        AttackerModel::Topological { k } => lines.len() == k && lines_connected(net, lines),
    }
}
