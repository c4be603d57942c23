//! Monte Carlo estimates of the CZ constants of a kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Kernel;
use crate::error::{usage, Result};
use crate::group::{CarnotGroup, NormKind};

/// Outermost log₂-shell for the scale sampling.
const MAX_LOG2_SCALE: f64 = 10.0;
/// Growth factor per budget doubling that counts as divergence.
const DIVERGENCE_FACTOR: f64 = 1.5;
/// Dyadic bins for `d(p1,p2)/d(p1,q)` in the Hölder fit.
const HOLDER_BINS: std::ops::RangeInclusive<i32> = 1..=12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzEstimate {
    /// `max |K(p)| d(p,0)` over the samples.
    pub b_hat: f64,
    /// Fitted Hölder exponent, clamped to `[0, 1]`.
    pub beta_hat: f64,
    /// Raw log-log slope behind `beta_hat`.
    pub holder_slope: f64,
    /// Smallest constant making the Hölder bound hold on the samples with `beta_hat`.
    pub holder_constant_hat: f64,
    /// Running maxima of `|K| d` after each budget doubling.
    pub running_max: Vec<f64>,
    /// Set when the running maximum kept growing across all doublings.
    pub diverged: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Point with `d(p, 0) = r` in the kernel's metric.
fn sample_at_scale(group: &CarnotGroup, metric: NormKind, r: f64, rng: &mut impl Rng, out: &mut [f64]) {
    loop {
        let x: Vec<f64> = (0..group.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let d = group.norm(&x, metric);
        if d > 1e-6 {
            group.dilate_into(r / d, &x, out);
            return;
        }
    }
}

/// Estimates `B`, `β` and the Hölder constant of `kernel` from `budget`
/// samples per quantity.
///
/// The growth estimate samples log-scale shells whose range widens as the
/// budget doubles (`±2.5, ±5, ±7.5, ±10` in `log₂ d(p,0)`); a kernel whose
/// running maximum grows by more than 1.5× at every doubling is flagged as
/// divergent. The Hölder estimate uses `q = 0` (the condition is left
/// invariant) and pairs with `d(p1,p2) = t d(p1,0)`, `t ≤ 1/2`.
pub fn estimate_cz_constants(kernel: &dyn Kernel, budget: usize, seed: u64) -> Result<CzEstimate> {
    if budget < 1000 {
        return Err(usage(format!("sample budget must be at least 1000, got {budget}")));
    }
    let group = kernel.group().clone();
    let metric = kernel.info().metric;
    let dim = group.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; dim];

    // growth
    let level_budgets = [budget / 8, budget / 8, budget / 4, budget - budget / 2];
    let mut running_max = Vec::with_capacity(4);
    let mut b_hat = 0.0f64;
    for (level, &count) in level_budgets.iter().enumerate() {
        let half_range = MAX_LOG2_SCALE * (level + 1) as f64 / 4.0;
        let shells = (2.0 * half_range).ceil() as usize;
        for s in 0..count {
            // stratify across unit-width shells
            let shell = (s % shells) as f64;
            let log_r = -half_range + (shell + rng.gen::<f64>()).min(2.0 * half_range);
            let r = log_r.exp2();
            sample_at_scale(&group, metric, r, &mut rng, &mut p);
            let v = kernel.eval(&p).abs() * group.norm(&p, metric);
            if v.is_finite() {
                b_hat = b_hat.max(v);
            } else {
                b_hat = f64::INFINITY;
            }
        }
        running_max.push(b_hat);
    }
    let diverged = !b_hat.is_finite() || running_max.windows(2).all(|w| w[1] > DIVERGENCE_FACTOR * w[0]);

    // Hölder regularity
    let bins: Vec<i32> = HOLDER_BINS.collect();
    let mut bin_max = vec![0.0f64; bins.len()];
    let mut records: Vec<(f64, f64)> = Vec::with_capacity(budget);
    let mut u = vec![0.0; dim];
    let mut p2 = vec![0.0; dim];
    let mut inv1 = vec![0.0; dim];
    let mut inv2 = vec![0.0; dim];
    for s in 0..budget {
        let r = rng.gen_range(-MAX_LOG2_SCALE..=MAX_LOG2_SCALE).exp2();
        sample_at_scale(&group, metric, r, &mut rng, &mut p);
        let b = s % bins.len();
        let t = (-(bins[b] as f64) - rng.gen::<f64>()).exp2();
        sample_at_scale(&group, metric, t * r, &mut rng, &mut u);
        group.mul_into(&p, &u, &mut p2);
        for (dst, v) in inv1.iter_mut().zip(&p) {
            *dst = -v;
        }
        for (dst, v) in inv2.iter_mut().zip(&p2) {
            *dst = -v;
        }
        let delta = (kernel.eval(&p) - kernel.eval(&p2)).abs() + (kernel.eval(&inv1) - kernel.eval(&inv2)).abs();
        if !delta.is_finite() {
            continue;
        }
        let scaled = delta * r;
        bin_max[b] = bin_max[b].max(scaled);
        records.push((t, scaled));
    }
    let fit_points: Vec<(f64, f64)> = bins
        .iter()
        .zip(&bin_max)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&k, &m)| (-(k as f64) - 0.5, m.log2()))
        .collect();
    let holder_slope = if fit_points.len() >= 2 { ols_slope(&fit_points) } else { 1.0 };
    let beta_hat = holder_slope.clamp(0.0, 1.0);
    let holder_constant_hat = records.iter().map(|&(t, v)| v / t.powf(beta_hat)).fold(0.0, f64::max);

    Ok(CzEstimate {
        b_hat,
        beta_hat,
        holder_slope,
        holder_constant_hat,
        running_max,
        diverged,
        samples: budget,
        seed,
    })
}

/// Least-squares slope of `y` on `x`.
pub(crate) fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::group::builtin;
    use crate::kernels::{InverseDistance, VerticalRiesz};

    #[test]
    fn inverse_distance_has_unit_growth() {
        let g = builtin("heisenberg:1").unwrap();
        let k = InverseDistance::new(g, 1, NormKind::Smooth);
        let est = estimate_cz_constants(&k, 4000, 3).unwrap();
        assert!((est.b_hat - 1.0).abs() < 0.02, "{est:?}");
        assert!(!est.diverged);
    }

    #[test]
    fn inverse_square_diverges() {
        let g = builtin("heisenberg:1").unwrap();
        let k = InverseDistance::new(g, 2, NormKind::Smooth);
        let est = estimate_cz_constants(&k, 4000, 3).unwrap();
        assert!(est.diverged, "{est:?}");
    }

    #[test]
    fn small_budget_is_rejected() {
        let g = builtin("heisenberg:1").unwrap();
        let k = VerticalRiesz::new(Arc::clone(&g), 2, NormKind::Smooth).unwrap();
        assert!(estimate_cz_constants(&k, 999, 0).is_err());
    }
}
