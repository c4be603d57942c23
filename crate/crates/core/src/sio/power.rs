//! `L²(μ)` operator norms by power iteration.
//!
//! With `‖f‖² = Σ |f_k|² w_k` the norm of `T_ε` equals the largest
//! singular value of `B = W^{1/2} K W^{1/2}`, where `K_ij = K(p_j^{-1} p_i)`
//! on admissible pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TruncatedOperator;
use crate::error::{numeric, usage, Result};
use crate::group::NormKind;
use crate::kernels::Kernel;
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Relative change of successive estimates that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 2000, seed: 0x5eed_0002 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The last two estimates, for judging an unconverged run.
    pub last_iterates: [f64; 2],
    pub seed: u64,
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Power iteration on `BᵀB` given `v ↦ BᵀB v`.
fn iterate<F>(n: usize, options: &PowerOptions, mut gram: F) -> Result<NormEstimate>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(options.tolerance > 0.0) || options.max_iterations == 0 {
        return Err(usage("power iteration needs a positive tolerance and iteration cap"));
    }
    let seed = options.seed;
    if n == 0 {
        return Ok(NormEstimate { norm: 0.0, iterations: 0, converged: true, last_iterates: [0.0; 2], seed });
    }
    let mut v = start_vector(n, seed);
    let mut prev = f64::NAN;
    for it in 1..=options.max_iterations {
        let mut u = gram(&v)?;
        let lambda = normalize(&mut u);
        let sigma = lambda.sqrt();
        if !sigma.is_finite() {
            return Err(numeric("power iteration produced a non-finite estimate"));
        }
        if sigma == 0.0 {
            return Ok(NormEstimate { norm: 0.0, iterations: it, converged: true, last_iterates: [prev, 0.0], seed });
        }
        if (sigma - prev).abs() <= options.tolerance * sigma {
            return Ok(NormEstimate { norm: sigma, iterations: it, converged: true, last_iterates: [prev, sigma], seed });
        }
        prev = sigma;
        v = u;
        if it == options.max_iterations {
            return Ok(NormEstimate {
                norm: sigma,
                iterations: it,
                converged: false,
                last_iterates: [f64::NAN, sigma],
                seed,
            });
        }
    }
    unreachable!()
}

/// `‖T_ε‖_{L²(μ)→L²(μ)}`, matrix-free.
pub fn operator_norm(op: &TruncatedOperator<'_>, options: &PowerOptions) -> Result<NormEstimate> {
    let w = op.measure().weights();
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    iterate(w.len(), options, |v| {
        // B v = W^{1/2} T (W^{-1/2} v);  Bᵀ u = W^{1/2} T̃ (W^{-1/2} u)
        let f: Vec<f64> = v.iter().zip(&sqrt_w).map(|(a, s)| a / s).collect();
        let tf = op.apply(&f)?;
        let out = op.apply_adjoint(&tf)?;
        Ok(out.iter().zip(&sqrt_w).map(|(a, s)| a * s).collect())
    })
}

/// Dense `B_ij = √w_i K(p_j^{-1} p_i) √w_j` and `D_ij = d(p_i, p_j)`, built
/// once so that many truncation radii can share the kernel evaluations.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    n: usize,
    scaled: Vec<f64>,
    dist: Vec<f64>,
    /// `(i, j, d)` for off-diagonal pairs with a non-finite kernel value.
    bad_pairs: Vec<(usize, usize, f64)>,
    sqrt_w: Vec<f64>,
    name: String,
}

impl AssembledOperator {
    pub fn new(kernel: &dyn Kernel, measure: &DiscreteMeasure) -> Result<Self> {
        Self::with_metric(kernel, measure, kernel.info().metric)
    }

    pub fn with_metric(kernel: &dyn Kernel, measure: &DiscreteMeasure, metric: NormKind) -> Result<Self> {
        if **kernel.group() != **measure.group() {
            return Err(usage("kernel and measure live in different groups"));
        }
        let n = measure.len();
        let g = measure.group();
        let sqrt_w: Vec<f64> = measure.weights().iter().map(|x| x.sqrt()).collect();
        let mut scaled = vec![0.0; n * n];
        let mut dist = vec![0.0; n * n];
        let bad_pairs: Vec<(usize, usize, f64)> = scaled
            .par_chunks_mut(n.max(1))
            .zip(dist.par_chunks_mut(n.max(1)))
            .enumerate()
            .flat_map_iter(|(i, (brow, drow))| {
                let mut q = vec![0.0; g.dim()];
                let p = measure.point(i);
                let mut bad = Vec::new();
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    g.inv_mul_into(measure.point(j), p, &mut q);
                    let d = g.norm(&q, metric);
                    drow[j] = d;
                    let k = kernel.eval(&q);
                    if k.is_finite() {
                        brow[j] = sqrt_w[i] * k * sqrt_w[j];
                    } else {
                        bad.push((i, j, d));
                    }
                }
                bad
            })
            .collect();
        Ok(Self { n, scaled, dist, bad_pairs, sqrt_w, name: kernel.info().name })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, epsilon: f64) -> Result<()> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(usage(format!("truncation radius must be positive and finite, got {epsilon}")));
        }
        if let Some((i, j, _)) = self.bad_pairs.iter().find(|b| b.2 > epsilon) {
            return Err(numeric(format!("kernel {} is non-finite on the pair ({i}, {j})", self.name)));
        }
        Ok(())
    }

    /// `u = B_ε v` and `BᵀB_ε v` in one pass over the rows.
    fn gram(&self, epsilon: f64, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &self.scaled[i * n..(i + 1) * n];
            let drow = &self.dist[i * n..(i + 1) * n];
            let mut u = 0.0;
            for j in 0..n {
                if drow[j] > epsilon {
                    u += row[j] * v[j];
                }
            }
            if u != 0.0 {
                for j in 0..n {
                    if drow[j] > epsilon {
                        out[j] += row[j] * u;
                    }
                }
            }
        }
        out
    }

    /// `T_ε f`.
    pub fn apply(&self, epsilon: f64, f: &[f64]) -> Result<Vec<f64>> {
        self.check(epsilon)?;
        if f.len() != self.n {
            return Err(usage("vector length does not match the operator"));
        }
        let n = self.n;
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.scaled[i * n..(i + 1) * n];
                let drow = &self.dist[i * n..(i + 1) * n];
                let s: f64 = (0..n).filter(|&j| drow[j] > epsilon).map(|j| row[j] * f[j] * self.sqrt_w[j]).sum();
                s / self.sqrt_w[i]
            })
            .collect())
    }

    /// `‖T_ε‖_{L²(μ)}`.
    pub fn norm(&self, epsilon: f64, options: &PowerOptions) -> Result<NormEstimate> {
        self.check(epsilon)?;
        iterate(self.n, options, |v| Ok(self.gram(epsilon, v)))
    }

    /// Norms over a grid of truncation radii.
    pub fn norm_sweep(&self, epsilons: &[f64], options: &PowerOptions) -> Result<Vec<NormEstimate>> {
        epsilons.par_iter().map(|&e| self.norm(e, options)).collect()
    }

    /// Dense `B_ε`, row-major.
    pub fn dense(&self, epsilon: f64) -> Result<Vec<f64>> {
        self.check(epsilon)?;
        Ok(self.scaled.iter().zip(&self.dist).map(|(b, d)| if *d > epsilon { *b } else { 0.0 }).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin;
    use crate::kernels::{ConstantKernel, InverseDistance};

    fn arc(n: usize) -> DiscreteMeasure {
        let g = builtin("heisenberg:1").unwrap();
        let mut coords = Vec::new();
        for k in 0..n {
            let t = (k as f64 + 0.5) / n as f64;
            coords.extend_from_slice(&[t.sin(), 1.0 - t.cos(), 0.5 * (t - t.sin())]);
        }
        DiscreteMeasure::new(g, coords, vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn zero_kernel_has_zero_norm() {
        let m = arc(32);
        let k = ConstantKernel::zero(m.group().clone());
        let op = TruncatedOperator::new(&k, &m, 0.01).unwrap();
        let est = operator_norm(&op, &PowerOptions::default()).unwrap();
        assert_eq!(est.norm, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn rank_one_constant_kernel() {
        let m = arc(40);
        let k = ConstantKernel::new(m.group().clone(), 1.0);
        let op = TruncatedOperator::untruncated(&k, &m).unwrap();
        let est = operator_norm(&op, &PowerOptions::default()).unwrap();
        assert!((est.norm - 1.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn assembled_matches_matrix_free() {
        let m = arc(64);
        let k = InverseDistance::new(m.group().clone(), 1, NormKind::Smooth);
        let asm = AssembledOperator::new(&k, &m).unwrap();
        let opts = PowerOptions::default();
        for eps in [0.05, 0.2] {
            let op = TruncatedOperator::new(&k, &m, eps).unwrap();
            let a = operator_norm(&op, &opts).unwrap();
            let b = asm.norm(eps, &opts).unwrap();
            assert!(a.converged && b.converged);
            assert!((a.norm - b.norm).abs() < 1e-9 * a.norm, "{a:?} {b:?}");
            let f: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).cos()).collect();
            let x = op.apply(&f).unwrap();
            let y = asm.apply(eps, &f).unwrap();
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn cap_reached_is_flagged() {
        let m = arc(64);
        let k = InverseDistance::new(m.group().clone(), 1, NormKind::Smooth);
        let asm = AssembledOperator::new(&k, &m).unwrap();
        let est = asm.norm(0.01, &PowerOptions { max_iterations: 1, ..Default::default() }).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 1);
    }
}
