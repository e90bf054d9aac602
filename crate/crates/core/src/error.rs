use thiserror::Error;

/// Errors produced while loading networks or solving interdiction problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed {table} row, field `{field}`: {reason}")]
    MalformedRow {
        line: usize,
        table: &'static str,
        field: &'static str,
        reason: String,
    },

    #[error("case text is missing the `{0}` block")]
    MissingBlock(&'static str),

    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),

    #[error("unknown bus id {bus} referenced by {context}")]
    UnknownBus { bus: u32, context: String },

    #[error("non-positive reactance on branch {branch} (line {line})")]
    NonPositiveReactance { branch: usize, line: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("geolocation row {row}: latitude out of range ({value})")]
    LatitudeOutOfRange { row: usize, value: f64 },

    #[error("geolocation row {row}: longitude out of range ({value})")]
    LongitudeOutOfRange { row: usize, value: f64 },

    #[error("geolocation row {row}: duplicate bus id {bus}")]
    DuplicateGeoRow { row: usize, bus: u32 },

    #[error("geolocation row {row}: {reason}")]
    MalformedGeo { row: usize, reason: String },

    #[error("bus {0} has no geolocation")]
    MissingGeolocation(u32),

    #[error("invalid attacker model: {0}")]
    InvalidModel(String),

    #[error("spatially infeasible: no line lies within {d_km} km / 2 of any bus")]
    SpatiallyInfeasible { d_km: f64 },

    #[error("no feasible attack: {0}")]
    NoFeasibleAttack(String),

    #[error("attack references unknown line index {0}")]
    UnknownLine(usize),

    #[error("enumeration budget exceeded: {count} candidate subsets > budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("gap is undefined before the first master and inner solves")]
    GapUndefined,

    #[error("optimization backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;
