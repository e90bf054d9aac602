//! Network data: buses, lines, attacker models, and ingestion of
//! MATPOWER-style case files plus a geolocation CSV.
//!
//! All power quantities are stored in per-unit on the case `baseMVA`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    /// Active power demand (p.u.).
    pub demand: f64,
    /// Upper bound on active generation at this bus (p.u.).
    pub gen_cap: f64,
    pub lat: f64,
    pub lon: f64,
    pub has_geo: bool,
}

impl Bus {
    pub fn new(id: u32, demand: f64, gen_cap: f64) -> Self {
        Bus {
            id,
            demand,
            gen_cap,
            lat: 0.0,
            lon: 0.0,
            has_geo: false,
        }
    }

    pub fn with_geo(mut self, lat: f64, lon: f64) -> Self {
        self.lat = lat;
        self.lon = lon;
        self.has_geo = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series reactance magnitude (p.u.).
    pub reactance: f64,
    /// `1 / reactance`.
    pub susceptance: f64,
    /// Thermal limit (p.u.).
    pub thermal: f64,
}

impl Line {
    pub fn new(id: u32, from_bus: u32, to_bus: u32, reactance: f64, thermal: f64) -> Self {
        Line {
            id,
            from_bus,
            to_bus,
            reactance,
            susceptance: 1.0 / reactance,
            thermal,
        }
    }
}

/// A validated transmission network. Immutable once built.
#[derive(Debug, Clone)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    big_m: f64,
    bus_pos: HashMap<u32, usize>,
    ends: Vec<(usize, usize)>,
    /// Lines oriented away from each bus (the from-side).
    out_lines: Vec<Vec<usize>>,
    /// Lines oriented into each bus (the to-side).
    in_lines: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network and checks its invariants. `big_M` defaults to the
    /// total demand.
    pub fn new(base_mva: f64, buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self> {
        if !(base_mva > 0.0) {
            return Err(Error::InvalidNetwork(format!("baseMVA must be positive, got {base_mva}")));
        }
        let mut bus_pos = HashMap::with_capacity(buses.len());
        for (pos, bus) in buses.iter().enumerate() {
            if bus_pos.insert(bus.id, pos).is_some() {
                return Err(Error::DuplicateBus(bus.id));
            }
            if !(bus.demand >= 0.0) {
                return Err(Error::InvalidNetwork(format!("bus {} has negative demand", bus.id)));
            }
            if !(bus.gen_cap >= 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "bus {} has negative generation capacity",
                    bus.id
                )));
            }
            if bus.has_geo {
                check_coordinates(0, bus.lat, bus.lon)?;
            }
        }

        let mut ends = Vec::with_capacity(lines.len());
        let mut out_lines = vec![Vec::new(); buses.len()];
        let mut in_lines = vec![Vec::new(); buses.len()];
        for (pos, line) in lines.iter().enumerate() {
            let lookup = |bus: u32| {
                bus_pos.get(&bus).copied().ok_or_else(|| Error::UnknownBus {
                    bus,
                    context: format!("line {}", line.id),
                })
            };
            let f = lookup(line.from_bus)?;
            let t = lookup(line.to_bus)?;
            if f == t {
                return Err(Error::InvalidNetwork(format!("line {} is a self-loop", line.id)));
            }
            if !(line.reactance > 0.0) {
                return Err(Error::NonPositiveReactance {
                    branch: line.id as usize,
                    line: 0,
                });
            }
            if !(line.thermal > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "line {} has non-positive thermal limit",
                    line.id
                )));
            }
            if ((line.susceptance * line.reactance) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidNetwork(format!(
                    "line {} susceptance is not 1/reactance",
                    line.id
                )));
            }
            ends.push((f, t));
            out_lines[f].push(pos);
            in_lines[t].push(pos);
        }

        let big_m = buses.iter().map(|b| b.demand).sum::<f64>();
        Ok(Network {
            base_mva,
            buses,
            lines,
            big_m,
            bus_pos,
            ends,
            out_lines,
            in_lines,
        })
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Returns a copy with a different big-M constant.
    pub fn with_big_m(&self, big_m: f64) -> Result<Self> {
        if !(big_m > 0.0) {
            return Err(Error::InvalidNetwork(format!("big-M must be positive, got {big_m}")));
        }
        let mut net = self.clone();
        net.big_m = big_m;
        Ok(net)
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    /// Position of a bus in `buses`.
    pub fn bus_pos(&self, id: u32) -> Option<usize> {
        self.bus_pos.get(&id).copied()
    }

    /// Position of a line in `lines` given its id.
    pub fn line_pos(&self, id: u32) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Bus positions of a line's (from, to) endpoints.
    pub fn ends(&self, line: usize) -> (usize, usize) {
        self.ends[line]
    }

    /// Lines whose from-side is `bus`.
    pub fn out_lines(&self, bus: usize) -> &[usize] {
        &self.out_lines[bus]
    }

    /// Lines whose to-side is `bus`.
    pub fn in_lines(&self, bus: usize) -> &[usize] {
        &self.in_lines[bus]
    }

    pub fn all_geolocated(&self) -> bool {
        self.buses.iter().all(|b| b.has_geo)
    }

    /// Writes the canonical case text understood by [`parse_case`].
    pub fn to_case_text(&self) -> String {
        let base = self.base_mva;
        let mut out = String::new();
        let _ = writeln!(out, "function mpc = canonical");
        let _ = writeln!(out, "mpc.version = '2';");
        let _ = writeln!(out, "mpc.baseMVA = {};", fmt_num(base));
        let _ = writeln!(out, "\n%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
        let _ = writeln!(out, "mpc.bus = [");
        for b in &self.buses {
            let kind = if b.gen_cap > 0.0 { 2 } else { 1 };
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}\t0.0\t0.0\t0.0\t1\t1.0\t0.0\t230.0\t1\t1.1\t0.9;",
                b.id,
                kind,
                fmt_num(b.demand * base)
            );
        }
        let _ = writeln!(out, "];\n\n%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin");
        let _ = writeln!(out, "mpc.gen = [");
        for b in self.buses.iter().filter(|b| b.gen_cap > 0.0) {
            let _ = writeln!(
                out,
                "\t{}\t0.0\t0.0\t0.0\t0.0\t1.0\t{}\t1\t{}\t0.0;",
                b.id,
                fmt_num(base),
                fmt_num(b.gen_cap * base)
            );
        }
        let _ = writeln!(out, "];\n\n%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax");
        let _ = writeln!(out, "mpc.branch = [");
        for l in &self.lines {
            let _ = writeln!(
                out,
                "\t{}\t{}\t0.0\t{}\t0.0\t{}\t0.0\t0.0\t0.0\t0.0\t1\t-30.0\t30.0;",
                l.from_bus,
                l.to_bus,
                fmt_num(l.reactance),
                fmt_num(l.thermal * base)
            );
        }
        let _ = writeln!(out, "];");
        out
    }
}

/// Shortest text that parses back to the same `f64`.
fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

/// Σ demand over all buses, the default big-M.
pub fn total_load(net: &Network) -> f64 {
    net.buses.iter().map(|b| b.demand).sum()
}

/// Which attacker the master problem models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackerModel {
    /// Any `k` lines.
    Traditional { k: usize },
    /// At most `k` lines, all within `d_km / 2` of a common center bus.
    Spatial { k: usize, d_km: f64 },
    /// Exactly `k` lines forming a connected subgraph.
    Topological { k: usize },
}

impl AttackerModel {
    pub fn traditional(k: usize) -> Result<Self> {
        Self::check_k(k)?;
        Ok(AttackerModel::Traditional { k })
    }

    pub fn spatial(k: usize, d_km: f64) -> Result<Self> {
        Self::check_k(k)?;
        if !(d_km > 0.0) || !d_km.is_finite() {
            return Err(Error::InvalidModel(format!("distance limit must be positive, got {d_km}")));
        }
        Ok(AttackerModel::Spatial { k, d_km })
    }

    pub fn topological(k: usize) -> Result<Self> {
        Self::check_k(k)?;
        Ok(AttackerModel::Topological { k })
    }

    fn check_k(k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidModel("k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        match *self {
            AttackerModel::Traditional { k }
            | AttackerModel::Spatial { k, .. }
            | AttackerModel::Topological { k } => k,
        }
    }

    pub fn d_km(&self) -> Option<f64> {
        match *self {
            AttackerModel::Spatial { d_km, .. } => Some(d_km),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackerModel::Traditional { .. } => "traditional",
            AttackerModel::Spatial { .. } => "spatial",
            AttackerModel::Topological { .. } => "topological",
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, AttackerModel::Spatial { .. })
    }
}

impl fmt::Display for AttackerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AttackerModel::Spatial { k, d_km } => write!(f, "spatial(k={k}, D={d_km} km)"),
            _ => write!(f, "{}(k={})", self.name(), self.k()),
        }
    }
}

// ---------------------------------------------------------------------------
// Case file parsing

const BUS_COLS: usize = 3;
const GEN_COLS: usize = 9;
const BRANCH_COLS: usize = 11;

struct Row {
    line: usize,
    fields: Vec<String>,
}

impl Row {
    fn num(&self, table: &'static str, idx: usize, field: &'static str) -> Result<f64> {
        let raw = self.fields.get(idx).ok_or_else(|| Error::MalformedRow {
            line: self.line,
            table,
            field,
            reason: format!("missing column {}", idx + 1),
        })?;
        let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
            line: self.line,
            table,
            field,
            reason: format!("`{raw}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::MalformedRow {
                line: self.line,
                table,
                field,
                reason: format!("`{raw}` is not finite"),
            });
        }
        Ok(v)
    }

    fn id(&self, table: &'static str, idx: usize, field: &'static str) -> Result<u32> {
        let v = self.num(table, idx, field)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::MalformedRow {
                line: self.line,
                table,
                field,
                reason: format!("`{v}` is not a non-negative integer id"),
            });
        }
        Ok(v as u32)
    }

    fn require(&self, table: &'static str, cols: usize) -> Result<()> {
        if self.fields.len() < cols {
            return Err(Error::MalformedRow {
                line: self.line,
                table,
                field: "row",
                reason: format!("expected at least {cols} columns, found {}", self.fields.len()),
            });
        }
        Ok(())
    }
}

#[derive(Default)]
struct RawCase {
    base_mva: Option<f64>,
    bus: Option<Vec<Row>>,
    gen: Option<Vec<Row>>,
    branch: Option<Vec<Row>>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_rows(text: &str, line: usize, rows: &mut Vec<Row>) {
    for segment in text.split(';') {
        let fields: Vec<String> = segment
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        if !fields.is_empty() {
            rows.push(Row { line, fields });
        }
    }
}

fn scan_case(text: &str) -> Result<RawCase> {
    let mut raw = RawCase::default();
    let mut open: Option<(&'static str, Vec<Row>)> = None;

    for (idx, full) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(full).trim();
        if line.is_empty() {
            continue;
        }

        if let Some((name, mut rows)) = open.take() {
            if let Some(end) = line.find(']') {
                split_rows(&line[..end], lineno, &mut rows);
                match name {
                    "bus" => raw.bus = Some(rows),
                    "gen" => raw.gen = Some(rows),
                    "branch" => raw.branch = Some(rows),
                    _ => {}
                }
            } else {
                split_rows(line, lineno, &mut rows);
                open = Some((name, rows));
            }
            continue;
        }

        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((name, value)) = rest.split_once('=') else {
            continue;
        };
        let name = name.trim();
        let value = value.trim();

        if name == "baseMVA" {
            let v = value.trim_end_matches(';').trim();
            let base: f64 = v.parse().map_err(|_| Error::MalformedRow {
                line: lineno,
                table: "baseMVA",
                field: "baseMVA",
                reason: format!("`{v}` is not a number"),
            })?;
            raw.base_mva = Some(base);
            continue;
        }

        let table: &'static str = match name {
            "bus" => "bus",
            "gen" => "gen",
            "branch" => "branch",
            _ => "other",
        };
        if let Some(body) = value.strip_prefix('[') {
            let mut rows = Vec::new();
            if let Some(end) = body.find(']') {
                split_rows(&body[..end], lineno, &mut rows);
                match table {
                    "bus" => raw.bus = Some(rows),
                    "gen" => raw.gen = Some(rows),
                    "branch" => raw.branch = Some(rows),
                    _ => {}
                }
            } else {
                split_rows(body, lineno, &mut rows);
                open = Some((table, rows));
            }
        }
    }
    Ok(raw)
}

/// Parses the MATPOWER subset: `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and
/// `mpc.branch`. Out-of-service branches are dropped; surviving branches are
/// numbered 1, 2, ... in file order.
pub fn parse_case(text: &str) -> Result<Network> {
    let raw = scan_case(text)?;
    let base = raw.base_mva.unwrap_or(100.0);
    if !(base > 0.0) {
        return Err(Error::InvalidNetwork(format!("baseMVA must be positive, got {base}")));
    }
    let bus_rows = raw.bus.ok_or(Error::MissingBlock("mpc.bus"))?;
    let gen_rows = raw.gen.ok_or(Error::MissingBlock("mpc.gen"))?;
    let branch_rows = raw.branch.ok_or(Error::MissingBlock("mpc.branch"))?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut pos: HashMap<u32, usize> = HashMap::new();
    for row in &bus_rows {
        row.require("bus", BUS_COLS)?;
        let id = row.id("bus", 0, "bus_i")?;
        let pd = row.num("bus", 2, "Pd")?;
        if pos.insert(id, buses.len()).is_some() {
            return Err(Error::DuplicateBus(id));
        }
        // A negative load is a fixed injection; it is modeled as curtailable
        // generation so that it never counts as shed demand.
        if pd < 0.0 {
            buses.push(Bus::new(id, 0.0, -pd / base));
        } else {
            buses.push(Bus::new(id, pd / base, 0.0));
        }
    }

    for row in &gen_rows {
        row.require("gen", GEN_COLS)?;
        let bus = row.id("gen", 0, "bus")?;
        let status = row.num("gen", 7, "status")?;
        let pmax = row.num("gen", 8, "Pmax")?;
        let p = *pos.get(&bus).ok_or_else(|| Error::UnknownBus {
            bus,
            context: format!("gen row at line {}", row.line),
        })?;
        if status > 0.0 {
            buses[p].gen_cap += pmax.max(0.0) / base;
        }
    }

    let total: f64 = buses.iter().map(|b| b.demand).sum();
    let mut lines = Vec::with_capacity(branch_rows.len());
    for (n, row) in branch_rows.iter().enumerate() {
        row.require("branch", BRANCH_COLS)?;
        let f = row.id("branch", 0, "fbus")?;
        let t = row.id("branch", 1, "tbus")?;
        let x = row.num("branch", 3, "x")?;
        let rate_a = row.num("branch", 5, "rateA")?;
        let status = row.num("branch", 10, "status")?;
        for bus in [f, t] {
            if !pos.contains_key(&bus) {
                return Err(Error::UnknownBus {
                    bus,
                    context: format!("branch row at line {}", row.line),
                });
            }
        }
        if status == 0.0 {
            continue;
        }
        let reactance = x.abs();
        if reactance == 0.0 {
            return Err(Error::NonPositiveReactance {
                branch: n + 1,
                line: row.line,
            });
        }
        let thermal = if rate_a > 0.0 { rate_a / base } else { total };
        if !(thermal > 0.0) {
            return Err(Error::MalformedRow {
                line: row.line,
                table: "branch",
                field: "rateA",
                reason: "unlimited rating on a network with zero total load".into(),
            });
        }
        let id = lines.len() as u32 + 1;
        lines.push(Line::new(id, f, t, reactance, thermal));
    }

    Network::new(base, buses, lines)
}

fn check_coordinates(row: usize, lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::LatitudeOutOfRange { row, value: lat });
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::LongitudeOutOfRange { row, value: lon });
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct GeoRecord {
    bus_id: u32,
    lat: f64,
    lon: f64,
}

/// Reads a `bus_id,lat,lon` CSV and attaches coordinates to the matching
/// buses. Buses absent from the file stay un-geolocated.
pub fn parse_geo(csv_text: &str, net: &Network) -> Result<Network> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(csv_text.as_bytes());

    // A header is required but a bare data file is a common mistake; accept
    // it when the first record parses as numbers.
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedGeo { row: 1, reason: e.to_string() })?
        .clone();
    let headerless = headers.iter().next().map(|h| h.parse::<f64>().is_ok()).unwrap_or(false);
    if !headerless {
        let expected = ["bus_id", "lat", "lon"];
        let found: Vec<&str> = headers.iter().collect();
        if found.len() < 3 || found[..3] != expected {
            return Err(Error::MalformedGeo {
                row: 1,
                reason: format!("expected header `bus_id,lat,lon`, found `{}`", found.join(",")),
            });
        }
    }

    let mut records: Vec<(usize, GeoRecord)> = Vec::new();
    if headerless {
        let rec = parse_geo_fields(&headers, 1)?;
        records.push((1, rec));
    }
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::MalformedGeo { row, reason: e.to_string() })?;
        records.push((row, parse_geo_fields(&rec, row)?));
    }

    let mut out = net.clone();
    let mut seen = std::collections::HashSet::new();
    for (row, rec) in records {
        if !seen.insert(rec.bus_id) {
            return Err(Error::DuplicateGeoRow { row, bus: rec.bus_id });
        }
        let pos = out.bus_pos(rec.bus_id).ok_or_else(|| Error::UnknownBus {
            bus: rec.bus_id,
            context: format!("geolocation row {row}"),
        })?;
        check_coordinates(row, rec.lat, rec.lon)?;
        let bus = &mut out.buses[pos];
        bus.lat = rec.lat;
        bus.lon = rec.lon;
        bus.has_geo = true;
    }
    Ok(out)
}

fn parse_geo_fields(rec: &csv::StringRecord, row: usize) -> Result<GeoRecord> {
    if rec.len() < 3 {
        return Err(Error::MalformedGeo {
            row,
            reason: format!("expected 3 fields, found {}", rec.len()),
        });
    }
    let field = |i: usize, name: &str| -> Result<f64> {
        rec[i].parse::<f64>().map_err(|_| Error::MalformedGeo {
            row,
            reason: format!("{name} `{}` is not a number", &rec[i]),
        })
    };
    let bus = field(0, "bus_id")?;
    if bus < 0.0 || bus.fract() != 0.0 {
        return Err(Error::MalformedGeo {
            row,
            reason: format!("bus_id `{}` is not an integer", &rec[0]),
        });
    }
    Ok(GeoRecord {
        bus_id: bus as u32,
        lat: field(1, "lat")?,
        lon: field(2, "lon")?,
    })
}

/// Serializes the geolocated buses as a `bus_id,lat,lon` CSV.
pub fn geo_to_csv(net: &Network) -> String {
    let mut out = String::from("bus_id,lat,lon\n");
    for b in net.buses.iter().filter(|b| b.has_geo) {
        let _ = writeln!(out, "{},{},{}", b.id, fmt_num(b.lat), fmt_num(b.lon));
    }
    out
}
