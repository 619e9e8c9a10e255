//! Error type shared by the mapping, risk, and planning modules.

use thiserror::Error;

/// Errors surfaced by the navigation core.
#[derive(Debug, Error)]
pub enum Error {
    /// A world point fell outside the grid extent.
    #[error("point ({x:.3}, {y:.3}) is outside the grid")]
    OutOfGrid { x: f64, y: f64 },

    /// A cell index fell outside the grid extent.
    #[error("cell ({col}, {row}) is outside the grid")]
    CellOutOfGrid { col: i64, row: i64 },

    /// An elevation query hit a cell with no observations.
    #[error("cell ({col}, {row}) has no elevation observation")]
    UnobservedCell { col: usize, row: usize },

    /// Wheel radius must be strictly positive.
    #[error("wheel radius must be > 0, got {0}")]
    NonPositiveRadius(f64),

    /// Steering magnitude must stay below pi/2 for the Ackermann model.
    #[error("steering angle {0} rad is outside (-pi/2, pi/2)")]
    InvalidSteering(f64),

    /// The planner was handed an empty reference path.
    #[error("reference path is empty")]
    EmptyReference,

    /// A dumped map or field file failed to parse or re-validate.
    #[error("malformed dump: {0}")]
    Dump(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
