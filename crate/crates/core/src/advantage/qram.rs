use serde::{Deserialize, Serialize};

use super::AdvantageError;

/// Address width at which the published operating points were obtained.
pub const ANCHOR_WIDTH: u32 = 34;

/// Hardware assumptions for the bucket-brigade QRAM on a surface code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QramConfig {
    pub label: String,
    #[serde(default = "one_bit")]
    pub word_size: u32,
    pub gate_error: f64,
    pub magic_state_failure: f64,
    /// Surface-code cycle, seconds.
    pub cycle_time: f64,
}

fn one_bit() -> u32 {
    1
}

impl QramConfig {
    pub fn optimistic() -> Self {
        QramConfig {
            label: "optimistic".into(),
            word_size: 1,
            gate_error: 1e-5,
            magic_state_failure: 1e-4,
            cycle_time: 200e-9,
        }
    }

    pub fn realistic() -> Self {
        QramConfig {
            label: "realistic".into(),
            word_size: 1,
            gate_error: 1e-3,
            magic_state_failure: 1e-2,
            cycle_time: 1e-6,
        }
    }

    pub fn preset(name: &str) -> Result<Self, AdvantageError> {
        match name {
            "optimistic" => Ok(Self::optimistic()),
            "realistic" => Ok(Self::realistic()),
            other => Err(AdvantageError::UnknownConfig(other.into())),
        }
    }

    pub fn validate(&self) -> Result<(), AdvantageError> {
        for (name, p) in [("gate_error", self.gate_error), ("magic_state_failure", self.magic_state_failure)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(AdvantageError::InvalidInput(format!("{name} = {p} outside (0, 1)")));
            }
        }
        if !(self.cycle_time > 0.0) {
            return Err(AdvantageError::InvalidInput("cycle time must be positive".into()));
        }
        Ok(())
    }

    fn same_hardware(&self, other: &QramConfig) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs();
        close(self.gate_error, other.gate_error)
            && close(self.magic_state_failure, other.magic_state_failure)
            && close(self.cycle_time, other.cycle_time)
    }
}

/// Published latency and physical-qubit count for one configuration.
struct Anchor {
    config: fn() -> QramConfig,
    latency: f64,
    physical_qubits: f64,
}

const ANCHORS: [Anchor; 2] = [
    Anchor {
        config: QramConfig::optimistic,
        latency: 1.07e-3,
        physical_qubits: 2.08e14,
    },
    Anchor {
        config: QramConfig::realistic,
        latency: 28.1e-3,
        physical_qubits: 7.31e16,
    },
];

/// Logical circuit figures at the anchor width, shared by both
/// configurations.
const LOGICAL_QUBITS: f64 = 1.37e11;
const DEPTH: f64 = 539.0;
const T_COUNT: f64 = 3.61e11;
const T_DEPTH: f64 = 67.0;
const CLIFFORD_COUNT: f64 = 9.28e11;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceEstimate {
    pub n: f64,
    pub d: f64,
    pub config: String,
    pub word_size: u32,
    pub address_width: u32,
    pub kp_tree_nodes: f64,
    /// Seconds per query.
    pub latency: f64,
    pub physical_qubits: f64,
    pub logical_qubits: f64,
    pub depth: f64,
    pub t_count: f64,
    pub t_depth: f64,
    pub clifford_count: f64,
    /// Figures were scaled away from the published width.
    pub extrapolated: bool,
}

/// `n·d·log₂(n·d)`.
pub fn kp_tree_nodes(n: f64, d: f64) -> f64 {
    let m = n * d;
    m * m.log2()
}

/// `⌈log₂(n·d·log₂(n·d))⌉`.
pub fn address_width(n: f64, d: f64) -> Result<u32, AdvantageError> {
    if !(n * d >= 2.0) {
        return Err(AdvantageError::InvalidInput(format!("n·d = {} must be at least 2", n * d)));
    }
    Ok(kp_tree_nodes(n, d).log2().ceil().max(1.0) as u32)
}

/// Resource estimate from the coefficient table. Away from the anchor
/// width, latency and depths scale linearly with the width while qubit and
/// gate counts scale with the address space `2^w`; such results are
/// flagged as extrapolated.
pub fn qram_estimate(
    n: f64,
    d: f64,
    config: &QramConfig,
    allow_extrapolation: bool,
) -> Result<ResourceEstimate, AdvantageError> {
    config.validate()?;
    if config.word_size != 1 {
        return Err(AdvantageError::UnsupportedWordSize(config.word_size));
    }
    let anchor = ANCHORS
        .iter()
        .find(|a| config.same_hardware(&(a.config)()))
        .ok_or_else(|| AdvantageError::UnknownConfig(config.label.clone()))?;
    let width = address_width(n, d)?;
    let extrapolated = width != ANCHOR_WIDTH;
    if extrapolated && !allow_extrapolation {
        return Err(AdvantageError::OutOfTable {
            width,
            anchor: ANCHOR_WIDTH,
        });
    }
    let linear = width as f64 / ANCHOR_WIDTH as f64;
    let space = 2f64.powi(width as i32 - ANCHOR_WIDTH as i32);
    Ok(ResourceEstimate {
        n,
        d,
        config: config.label.clone(),
        word_size: config.word_size,
        address_width: width,
        kp_tree_nodes: kp_tree_nodes(n, d),
        latency: anchor.latency * linear,
        physical_qubits: anchor.physical_qubits * space,
        logical_qubits: LOGICAL_QUBITS * space,
        depth: DEPTH * linear,
        t_count: T_COUNT * space,
        t_depth: T_DEPTH * linear,
        clifford_count: CLIFFORD_COUNT * space,
        extrapolated,
    })
}
