//! Truncated singular integral operators on discrete measures.
//!
//! `T_ε f(p_i) = Σ_{j : d(p_i,p_j) > ε} K(p_j^{-1} p_i) f_j w_j`, applied
//! matrix-free with rows in parallel.

mod annular;
mod power;
mod testing;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{numeric, usage, Result};
use crate::group::NormKind;
use crate::kernels::Kernel;
use crate::measure::DiscreteMeasure;

pub use annular::{annular_integral, AnnularIntegrals};
pub use power::{operator_norm, AssembledOperator, NormEstimate, PowerOptions};
pub use testing::{
    lemma_bridge, lowest_active_scale, partial_sum, testing_condition, LemmaBridge, ScaleMaximum, TestingRow,
    TestingTable,
};

/// `T_{μ,ε}` for a borrowed kernel and measure.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedOperator<'a> {
    kernel: &'a dyn Kernel,
    measure: &'a DiscreteMeasure,
    epsilon: Option<f64>,
    metric: NormKind,
}

impl<'a> TruncatedOperator<'a> {
    /// Truncation at `ε > 0` in the kernel's metric.
    pub fn new(kernel: &'a dyn Kernel, measure: &'a DiscreteMeasure, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(usage(format!("truncation radius must be positive and finite, got {epsilon}")));
        }
        Self::build(kernel, measure, Some(epsilon))
    }

    /// Every pair including the diagonal; only meaningful for kernels that
    /// are finite at the origin.
    pub fn untruncated(kernel: &'a dyn Kernel, measure: &'a DiscreteMeasure) -> Result<Self> {
        Self::build(kernel, measure, None)
    }

    fn build(kernel: &'a dyn Kernel, measure: &'a DiscreteMeasure, epsilon: Option<f64>) -> Result<Self> {
        if **kernel.group() != **measure.group() {
            return Err(usage("kernel and measure live in different groups"));
        }
        Ok(Self { kernel, measure, epsilon, metric: kernel.info().metric })
    }

    /// Uses `metric` for the cutoff instead of the kernel's own.
    pub fn with_metric(mut self, metric: NormKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn kernel(&self) -> &'a dyn Kernel {
        self.kernel
    }

    pub fn measure(&self) -> &'a DiscreteMeasure {
        self.measure
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn metric(&self) -> NormKind {
        self.metric
    }

    #[inline]
    fn admits(&self, d: f64) -> bool {
        self.epsilon.is_none_or(|e| d > e)
    }

    /// `T_ε f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.apply_impl(f, false)
    }

    /// `T̃_ε g`, the operator of the adjoint kernel `K(p^{-1})`.
    pub fn apply_adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.apply_impl(g, true)
    }

    fn apply_impl(&self, f: &[f64], adjoint: bool) -> Result<Vec<f64>> {
        let m = self.measure;
        let n = m.len();
        if f.len() != n {
            return Err(usage(format!("f has {} values for {n} points", f.len())));
        }
        let g = m.group();
        let dim = g.dim();
        let w = m.weights();
        (0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |q, i| {
                    let p = m.point(i);
                    let mut acc = 0.0;
                    for j in 0..n {
                        if f[j] == 0.0 {
                            continue;
                        }
                        let pj = m.point(j);
                        if adjoint {
                            g.inv_mul_into(p, pj, q);
                        } else {
                            g.inv_mul_into(pj, p, q);
                        }
                        if !self.admits(g.norm(q, self.metric)) {
                            continue;
                        }
                        let k = self.kernel.eval(q);
                        if !k.is_finite() {
                            return Err(numeric(format!(
                                "kernel {} is non-finite on the pair ({i}, {j})",
                                self.kernel.info().name
                            )));
                        }
                        acc += k * f[j] * w[j];
                    }
                    Ok(acc)
                },
            )
            .collect()
    }
}

/// Pointwise `sup_ε |T_ε f|` over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalValues {
    pub values: Vec<f64>,
    /// `false` when the grid misses some pairwise distance, so the values
    /// are lower bounds for the true maximal truncation.
    pub exact: bool,
}

/// `max_{ε ∈ grid} |T_ε f|` at every point.
pub fn maximal_apply(kernel: &dyn Kernel, measure: &DiscreteMeasure, f: &[f64], grid: &[f64]) -> Result<MaximalValues> {
    if grid.is_empty() {
        return Err(usage("ε grid is empty"));
    }
    if let Some(e) = grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(usage(format!("ε grid values must be positive, got {e}")));
    }
    let n = measure.len();
    if f.len() != n {
        return Err(usage(format!("f has {} values for {n} points", f.len())));
    }
    if **kernel.group() != **measure.group() {
        return Err(usage("kernel and measure live in different groups"));
    }
    let mut eps: Vec<f64> = grid.to_vec();
    eps.sort_by(|a, b| a.total_cmp(b));
    let g = measure.group();
    let metric = kernel.info().metric;
    let w = measure.weights();
    let rows: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = measure.point(i);
            let mut q = vec![0.0; g.dim()];
            // (distance, contribution) for every other point
            let mut terms: Vec<(f64, f64)> = Vec::with_capacity(n);
            for j in 0..n {
                if j == i {
                    continue;
                }
                g.inv_mul_into(measure.point(j), p, &mut q);
                let d = g.norm(&q, metric);
                if d <= eps[0] {
                    terms.push((d, 0.0));
                    continue;
                }
                let k = kernel.eval(&q);
                if !k.is_finite() {
                    return Err(numeric(format!("kernel {} is non-finite on the pair ({i}, {j})", kernel.info().name)));
                }
                terms.push((d, k * f[j] * w[j]));
            }
            terms.sort_by(|a, b| b.0.total_cmp(&a.0));
            // sweep ε from the largest value down, adding pairs as they enter
            let mut best = 0.0f64;
            let mut acc = 0.0;
            let mut t = 0;
            for e in eps.iter().rev() {
                while t < terms.len() && terms[t].0 > *e {
                    acc += terms[t].1;
                    t += 1;
                }
                best = best.max(acc.abs());
            }
            // T_ε is constant for ε in [d_{k+1}, d_k) and below the smallest
            // distance; the grid must hit each of these intervals. Distances
            // within a relative 1e-12 count as one, since rounding splits ties
            let hits = |lo: f64, hi: f64| {
                let at = eps.partition_point(|e| *e < lo);
                at < eps.len() && eps[at] < hi
            };
            let mut exact = terms.last().is_none_or(|last| eps[0] < last.0);
            for (a, b) in terms.iter().zip(terms.iter().skip(1)) {
                if a.0 - b.0 > 1e-12 * a.0 && !hits(b.0, a.0) {
                    exact = false;
                    break;
                }
            }
            Ok((best, exact))
        })
        .collect::<Result<_>>()?;
    Ok(MaximalValues { exact: rows.iter().all(|r| r.1), values: rows.into_iter().map(|r| r.0).collect() })
}

/// Direction-free summary of a sequence of measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    /// `max/min` within the allowed spread.
    Bounded,
    /// Strictly increasing with at least the required total growth.
    Growing,
    Indeterminate,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::Bounded => "bounded",
            Trend::Growing => "growing",
            Trend::Indeterminate => "indeterminate",
        })
    }
}

/// Classifies values listed in the order of the driving parameter.
///
/// Bounded wins over growing, so a slowly saturating sequence within the
/// spread is bounded. A sequence of zeros counts as bounded.
pub fn classify_trend(values: &[f64], max_spread: f64, min_growth: f64) -> Trend {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Trend::Indeterminate;
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    if hi == 0.0 || (lo > 0.0 && hi / lo <= max_spread) {
        Trend::Bounded
    } else if values.len() >= 2 && increasing && values[values.len() - 1] >= min_growth * values[0] {
        Trend::Growing
    } else {
        Trend::Indeterminate
    }
}

/// Dyadic `ε = 2^{-k}`, `k ∈ [lo, hi]`, keeping values at least `floor`.
pub fn dyadic_epsilons(lo: i32, hi: i32, floor: f64) -> Vec<f64> {
    (lo..=hi).map(|k| (-(k as f64)).exp2()).filter(|&e| e >= floor).collect()
}
