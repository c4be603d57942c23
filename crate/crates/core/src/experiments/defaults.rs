//! Default thresholds for campaign verdicts.
//!
//! Every pass/fail decision reads its threshold from [`Thresholds`], whose
//! defaults are the constants below.

use serde::{Deserialize, Serialize};

/// Slack below `1 + α/s` allowed for fitted flatness slopes. Nine dyadic
/// scales leave a small pre-asymptotic bias in the log-log fit.
pub const SLOPE_TOLERANCE: f64 = 0.15;

/// Largest `max/min` of operator norms across the ε grid that still reads
/// as uniformly bounded. Discrete norms settle from below as ε shrinks.
pub const UNIFORMITY_RATIO: f64 = 3.0;

/// Smallest total growth, last over first, for a growing verdict.
pub const MIN_GROWTH: f64 = 1.5;

/// Smallest norm increment between consecutive ε for the inv-dist control;
/// the continuum rate is `2 ln 2 ≈ 1.39` per halving.
pub const MIN_STEP_INCREMENT: f64 = 0.3;

/// Relative agreement between the area formula and the covering oracle.
/// The δ-chain undercounts length by `O(δ)` on curved pieces.
pub const AREA_AGREEMENT: f64 = 0.03;

/// Tolerance for closed-form values on horizontal segments.
pub const EXACT_TOLERANCE: f64 = 1e-6;

/// Covering-chain resolution for the Hausdorff oracle.
pub const COVERING_DELTA: f64 = 1e-3;

/// Largest spread of testing-condition ratios for a bounded verdict.
pub const TESTING_SPREAD: f64 = 5.0;

/// Bound on annular integrals of antisymmetric kernels (quadrature error).
pub const ANTISYMMETRIC_TOLERANCE: f64 = 1e-8;

/// Tolerance for `2 ln(R/r)` from the inv-dist annular integral.
pub const LOG_TOLERANCE: f64 = 1e-6;

/// Annular integrals with `|slope|` per dyadic doubling below this are bounded.
pub const ANNULAR_BOUNDED_SLOPE: f64 = 0.05;

/// Annular integrals with slope per dyadic doubling above this are growing.
pub const ANNULAR_GROWING_SLOPE: f64 = 0.5;

/// Relative drift allowed against a recorded baseline.
pub const BASELINE_TOLERANCE: f64 = 0.05;

/// Group-law identities on random samples.
pub const GROUP_TOLERANCE: f64 = 1e-9;

/// `Q(δ_t x, δ_t y) = δ_t Q(x, y)`.
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-10;

/// Heisenberg products against the closed-form law.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

/// Largest 1-regularity constant accepted for curve measures.
pub const REGULARITY_LIMIT: f64 = 32.0;

/// Truncation radii below this multiple of the mesh are dropped.
pub const EPSILON_MESH_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub slope_tolerance: f64,
    pub uniformity_ratio: f64,
    pub min_growth: f64,
    pub min_step_increment: f64,
    pub area_agreement: f64,
    pub exact_tolerance: f64,
    pub covering_delta: f64,
    pub testing_spread: f64,
    pub antisymmetric_tolerance: f64,
    pub log_tolerance: f64,
    pub annular_bounded_slope: f64,
    pub annular_growing_slope: f64,
    pub baseline_tolerance: f64,
    pub group_tolerance: f64,
    pub homogeneity_tolerance: f64,
    pub oracle_tolerance: f64,
    pub regularity_limit: f64,
    pub epsilon_mesh_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            slope_tolerance: SLOPE_TOLERANCE,
            uniformity_ratio: UNIFORMITY_RATIO,
            min_growth: MIN_GROWTH,
            min_step_increment: MIN_STEP_INCREMENT,
            area_agreement: AREA_AGREEMENT,
            exact_tolerance: EXACT_TOLERANCE,
            covering_delta: COVERING_DELTA,
            testing_spread: TESTING_SPREAD,
            antisymmetric_tolerance: ANTISYMMETRIC_TOLERANCE,
            log_tolerance: LOG_TOLERANCE,
            annular_bounded_slope: ANNULAR_BOUNDED_SLOPE,
            annular_growing_slope: ANNULAR_GROWING_SLOPE,
            baseline_tolerance: BASELINE_TOLERANCE,
            group_tolerance: GROUP_TOLERANCE,
            homogeneity_tolerance: HOMOGENEITY_TOLERANCE,
            oracle_tolerance: ORACLE_TOLERANCE,
            regularity_limit: REGULARITY_LIMIT,
            epsilon_mesh_factor: EPSILON_MESH_FACTOR,
        }
    }
}
