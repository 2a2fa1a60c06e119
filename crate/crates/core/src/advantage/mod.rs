//! Dataset parameter measurement, quantum and classical cost formulas,
//! crossover search and QRAM resource estimates.
//!
//! Every asymptotic formula is evaluated with constant 1 and explicit
//! base-2 logarithms floored at 1, so reported counts are meaningful only
//! to within an order of magnitude.

mod cost;
mod crossover;
mod params;
mod qram;

use thiserror::Error;

pub use cost::{
    classical_op_count, quantum_query_count, quantum_terms, ClassicalVariant, CostModel, CostTerms, CostVariant,
    QuantumErrorParams,
};
pub use crossover::{find_crossover, CrossoverCell, CrossoverReport, FrontierPoint, GrowthModel};
pub use params::{measure_params, mu_with_grid, spectral_norm, DatasetParams, MU_GRID_POINTS};
pub use qram::{address_width, kp_tree_nodes, qram_estimate, QramConfig, ResourceEstimate, ANCHOR_WIDTH};

#[derive(Debug, Error)]
pub enum AdvantageError {
    #[error("parameter `{0}` is required for this cost variant")]
    MissingParam(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("no published coefficients for hardware configuration `{0}`")]
    UnknownConfig(String),
    #[error("word size {0} is unsupported without new coefficients")]
    UnsupportedWordSize(u32),
    #[error("address width {width} is outside the coefficient table (only {anchor}); enable extrapolation")]
    OutOfTable { width: u32, anchor: u32 },
}
