//! Littlewood–Paley partial sums and the T1 testing condition on Christ cubes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TruncatedOperator;
use crate::cubes::{maximal_function_all, ChristTree};
use crate::error::{numeric, usage, Result};
use crate::kernels::{lp_weight, BumpProfile, Kernel};
use crate::measure::DiscreteMeasure;

/// Largest `j` with `2^{-(j+2)} ≥ diam`; pieces of scale `j ≤ N_0` vanish
/// on a set of that diameter.
pub fn lowest_active_scale(diameter: f64) -> i32 {
    (-diameter.log2()).floor() as i32 - 2
}

/// `S_N f = Σ_{N_0 ≤ j ≤ N} T_{(j)} f`, where `T_{(j)}` has kernel `η_j K`
/// and no truncation. Returns the values and `N_0`.
pub fn partial_sum(
    kernel: &dyn Kernel,
    measure: &DiscreteMeasure,
    psi: &BumpProfile,
    n_upper: i32,
    f: &[f64],
) -> Result<(Vec<f64>, i32)> {
    let n = measure.len();
    if f.len() != n {
        return Err(usage(format!("f has {} values for {n} points", f.len())));
    }
    if **kernel.group() != **measure.group() {
        return Err(usage("kernel and measure live in different groups"));
    }
    let metric = kernel.info().metric;
    let n0 = lowest_active_scale(measure.diameter(metric));
    let g = measure.group();
    let w = measure.weights();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = measure.point(i);
            let mut q = vec![0.0; g.dim()];
            let mut acc = 0.0;
            for j in 0..n {
                if f[j] == 0.0 {
                    continue;
                }
                g.inv_mul_into(measure.point(j), p, &mut q);
                let d = g.norm(&q, metric);
                if d == 0.0 {
                    continue;
                }
                // η_k(d) ≠ 0 needs 2^k d ∈ (1/4, 2)
                let centre = -d.log2();
                let lo = n0.max(centre.floor() as i32 - 3);
                let hi = n_upper.min(centre.ceil() as i32 + 2);
                let eta: f64 = (lo..=hi).map(|k| lp_weight(psi, k, d)).sum();
                if eta == 0.0 {
                    continue;
                }
                let k = kernel.eval(&q);
                if !k.is_finite() {
                    return Err(numeric(format!("kernel {} is non-finite on the pair ({i}, {j})", kernel.info().name)));
                }
                acc += eta * k * f[j] * w[j];
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((values, n0))
}

/// Pointwise comparison of `S_N f` with `T_ε f` against `M_μ f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaBridge {
    pub epsilon: f64,
    /// `N` with `2^{-N} ≤ ε < 2^{-(N-1)}`.
    pub n_upper: i32,
    pub n0: i32,
    /// `max_p |S_N f(p) - T_ε f(p)| / M_μ f(p)`.
    pub c_est: f64,
    pub max_difference: f64,
}

pub fn lemma_bridge(
    kernel: &dyn Kernel,
    measure: &DiscreteMeasure,
    psi: &BumpProfile,
    epsilon: f64,
    f: &[f64],
) -> Result<LemmaBridge> {
    let op = TruncatedOperator::new(kernel, measure, epsilon)?;
    let n_upper = (-epsilon.log2()).ceil() as i32;
    let (s, n0) = partial_sum(kernel, measure, psi, n_upper, f)?;
    let t = op.apply(f)?;
    let m = maximal_function_all(measure, f, kernel.info().metric)?;
    let mut c_est = 0.0f64;
    let mut max_difference = 0.0f64;
    for ((a, b), mf) in s.iter().zip(&t).zip(&m) {
        let diff = (a - b).abs();
        max_difference = max_difference.max(diff);
        if *mf > 0.0 {
            c_est = c_est.max(diff / mf);
        } else if diff > 0.0 {
            c_est = f64::INFINITY;
        }
    }
    Ok(LemmaBridge { epsilon, n_upper, n0, c_est, max_difference })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestingRow {
    pub j: i32,
    pub cube: usize,
    pub epsilon: f64,
    /// `‖T_ε χ_Q‖²_{L²(μ|Q)} / μ(Q)`.
    pub ratio: f64,
    /// The same for the adjoint kernel.
    pub adjoint_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMaximum {
    pub j: i32,
    pub cubes: usize,
    pub max_ratio: f64,
    pub max_adjoint_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestingTable {
    pub rows: Vec<TestingRow>,
    pub per_scale: Vec<ScaleMaximum>,
    pub skipped_empty: usize,
}

/// Testing-condition ratios for every cube of `tree` and every `ε`.
pub fn testing_condition(kernel: &dyn Kernel, tree: &ChristTree, epsilons: &[f64]) -> Result<TestingTable> {
    if epsilons.is_empty() {
        return Err(usage("ε grid is empty"));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(usage(format!("ε grid values must be positive, got {e}")));
    }
    let measure = tree.measure();
    if **kernel.group() != **measure.group() {
        return Err(usage("kernel and tree live in different groups"));
    }
    let mut rows = Vec::new();
    let mut per_scale = Vec::new();
    let mut skipped_empty = 0;
    for j in tree.scales() {
        let ids: Vec<usize> = tree.level(j).to_vec();
        skipped_empty += ids.iter().filter(|&&id| tree.cube(id).members.is_empty()).count();
        let level_rows: Vec<Vec<TestingRow>> = ids
            .par_iter()
            .filter(|&&id| !tree.cube(id).members.is_empty())
            .map(|&id| cube_ratios(kernel, measure, &tree.cube(id).members, j, id, epsilons))
            .collect::<Result<_>>()?;
        let level_rows: Vec<TestingRow> = level_rows.into_iter().flatten().collect();
        per_scale.push(ScaleMaximum {
            j,
            cubes: ids.len(),
            max_ratio: level_rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
            max_adjoint_ratio: level_rows.iter().map(|r| r.adjoint_ratio).fold(0.0, f64::max),
        });
        rows.extend(level_rows);
    }
    Ok(TestingTable { rows, per_scale, skipped_empty })
}

fn cube_ratios(
    kernel: &dyn Kernel,
    measure: &DiscreteMeasure,
    members: &[usize],
    j: i32,
    cube: usize,
    epsilons: &[f64],
) -> Result<Vec<TestingRow>> {
    let g = measure.group();
    let metric = kernel.info().metric;
    let w = measure.weights();
    let m = members.len();
    let ne = epsilons.len();
    // forward[e * m + a] = (T_ε χ_Q)(p_a); backward is the adjoint
    let mut forward = vec![0.0; ne * m];
    let mut backward = vec![0.0; ne * m];
    let mut q = vec![0.0; g.dim()];
    let mut neg = vec![0.0; g.dim()];
    for a in 0..m {
        let (ia, pa) = (members[a], measure.point(members[a]));
        for b in (a + 1)..m {
            let (ib, pb) = (members[b], measure.point(members[b]));
            g.inv_mul_into(pb, pa, &mut q);
            let d = g.norm(&q, metric);
            if !epsilons.iter().any(|&e| d > e) {
                continue;
            }
            for (x, y) in neg.iter_mut().zip(&q) {
                *x = -y;
            }
            // k_ab = K(p_b^{-1} p_a), k_ba = K(p_a^{-1} p_b)
            let k_ab = kernel.eval(&q);
            let k_ba = kernel.eval(&neg);
            if !k_ab.is_finite() || !k_ba.is_finite() {
                return Err(numeric(format!("kernel {} is non-finite on the pair ({ia}, {ib})", kernel.info().name)));
            }
            for (e, &eps) in epsilons.iter().enumerate() {
                if d > eps {
                    forward[e * m + a] += k_ab * w[ib];
                    forward[e * m + b] += k_ba * w[ia];
                    backward[e * m + a] += k_ba * w[ib];
                    backward[e * m + b] += k_ab * w[ia];
                }
            }
        }
    }
    let mass: f64 = members.iter().map(|&i| w[i]).sum();
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| {
            let norm2 = |v: &[f64]| -> f64 { v.iter().zip(members).map(|(x, &i)| x * x * w[i]).sum() };
            TestingRow {
                j,
                cube,
                epsilon,
                ratio: norm2(&forward[e * m..(e + 1) * m]) / mass,
                adjoint_ratio: norm2(&backward[e * m..(e + 1) * m]) / mass,
            }
        })
        .collect())
}
