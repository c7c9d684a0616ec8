use alloc::string::String;

/// Errors raised by scenario construction, subproblem assembly and planning.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("mobility: final location is {distance_m} m from the start but at most {reach_m} m can be flown")]
    Unreachable { distance_m: f64, reach_m: f64 },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("expansion point violates the {family} constraints (worst margin {margin})")]
    InfeasibleExpansionPoint { family: &'static str, margin: f64 },

    #[error("covertness cannot be met with positive power at slot {slot}")]
    CovertnessInfeasible { slot: usize },

    #[error("solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = core::result::Result<T, Error>;
