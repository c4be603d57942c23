//! Homogeneous norms, weight certification and comparison constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CarnotGroup, NormKind};

/// Options for sampling-based certification of the norm weights `λ_j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Range of `log₂ t` for the dilation applied to the second factor.
    pub log2_scale_range: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { samples: 1_000_000, seed: 0x5eed_0001, log2_scale_range: 8.0 }
    }
}

impl CertifyOptions {
    /// A small sample for tests and ad hoc groups.
    pub fn quick() -> Self {
        Self { samples: 20_000, ..Self::default() }
    }
}

/// Outcome of weight certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCertificate {
    pub weights: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub restarts: usize,
}

/// Empirical constants `c_lo ≤ smooth/hom ≤ c_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormComparison {
    pub lower: f64,
    pub upper: f64,
    /// Upper bound implied by the formulas, `(n^{p/2} + N - n)^{1/p}` with `p = 2 s!`.
    pub theoretical_upper: f64,
}

/// Measured `D` with `D^{-1}|x-y| ≤ d(x,y) ≤ D |x-y|^{1/s}` on a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub d: f64,
    pub lower_ratio_max: f64,
    pub upper_ratio_max: f64,
    pub samples: usize,
}

/// `1 / d` for `d` in `1..=4`.
#[inline]
fn root(v: f64, d: u32) -> f64 {
    match d {
        1 => v,
        2 => v.sqrt(),
        3 => v.cbrt(),
        4 => v.sqrt().sqrt(),
        _ => v.powf(1.0 / d as f64),
    }
}

fn factorial(s: usize) -> u32 {
    (1..=s as u32).product::<u32>().max(1)
}

impl CarnotGroup {
    /// `max_j λ_j |x_j|^{1/d_j}`.
    #[inline]
    pub fn hom_norm(&self, x: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for ((v, &d), &l) in x.iter().zip(&self.degrees).zip(&self.norm_weights) {
            let r = l * root(v.abs(), d);
            if r > m {
                m = r;
            }
        }
        m
    }

    /// Exponent `p = 2 s!` of the smooth gauge.
    pub fn smooth_exponent(&self) -> i32 {
        2 * factorial(self.step()) as i32
    }

    /// The C¹ gauge `( |x^{(1)}|^p + Σ_{j>n} (λ_j |x_j|^{1/d_j})^p )^{1/p}`, `p = 2 s!`.
    ///
    /// Each summand is a polynomial in the coordinates, so the p-th power is
    /// smooth and the gauge is C¹ away from the origin. It coincides with the
    /// Euclidean norm on the first layer.
    #[inline]
    pub fn smooth_norm(&self, x: &[f64]) -> f64 {
        let n = self.first_layer_dim();
        let horizontal = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == x.len() {
            return horizontal;
        }
        let p = self.smooth_exponent();
        // scale by the largest component to keep the p-th powers in range
        let mut comps: smallvec::SmallVec<[f64; 16]> = smallvec::SmallVec::with_capacity(x.len() - n + 1);
        comps.push(horizontal);
        let mut m = horizontal;
        for ((v, &d), &l) in x[n..].iter().zip(&self.degrees[n..]).zip(&self.norm_weights[n..]) {
            let r = l * root(v.abs(), d);
            m = m.max(r);
            comps.push(r);
        }
        if m == 0.0 {
            return 0.0;
        }
        let s: f64 = comps.iter().map(|r| (r / m).powi(p)).sum();
        let root_s = match p {
            4 => s.sqrt().sqrt(),
            _ => s.powf(1.0 / p as f64),
        };
        m * root_s
    }

    /// Samples a point with `‖x‖_hom = 1`.
    fn sample_unit(&self, rng: &mut impl Rng) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let r = self.hom_norm(&x);
            if r > 1e-6 {
                let mut out = vec![0.0; self.dim()];
                self.dilate_into(1.0 / r, &x, &mut out);
                return out;
            }
        }
    }

    /// Halves offending weights until the triangle inequality for the
    /// hom norm holds on every sampled pair.
    ///
    /// Pairs are `(x, δ_t y)` with `x, y` on the unit sphere and
    /// `log₂ t` uniform in `±log2_scale_range`.
    pub(crate) fn certify_norm_weights(&self, opts: &CertifyOptions) -> NormCertificate {
        let n = self.first_layer_dim();
        let dim = self.dim();
        let mut weights = vec![1.0; dim];
        let mut restarts = 0;
        if n == dim {
            return NormCertificate { weights, samples: opts.samples, seed: opts.seed, restarts };
        }
        let mut trial = self.clone();
        'restart: loop {
            trial.norm_weights = weights.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut xy = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            for _ in 0..opts.samples {
                let x = trial.sample_unit(&mut rng);
                let y0 = trial.sample_unit(&mut rng);
                let t = (rng.gen_range(-opts.log2_scale_range..=opts.log2_scale_range)).exp2();
                trial.dilate_into(t, &y0, &mut y);
                trial.mul_into(&x, &y, &mut xy);
                let lhs = trial.hom_norm(&xy);
                let rhs = 1.0 + t;
                if lhs > rhs * (1.0 + 1e-12) {
                    let worst = (n..dim)
                        .max_by(|&a, &b| {
                            let ra = weights[a] * root(xy[a].abs(), self.degrees[a]);
                            let rb = weights[b] * root(xy[b].abs(), self.degrees[b]);
                            ra.total_cmp(&rb)
                        })
                        .expect("nonempty upper layers");
                    weights[worst] *= 0.5;
                    restarts += 1;
                    continue 'restart;
                }
            }
            break;
        }
        NormCertificate { weights, samples: opts.samples, seed: opts.seed, restarts }
    }

    /// Counts triangle-inequality violations `‖xy‖ > ‖x‖ + ‖y‖` on random pairs.
    pub fn triangle_violations(&self, kind: NormKind, samples: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.dim();
        let mut y = vec![0.0; dim];
        let mut xy = vec![0.0; dim];
        let mut count = 0;
        for _ in 0..samples {
            let x = self.sample_unit(&mut rng);
            let y0 = self.sample_unit(&mut rng);
            let t = rng.gen_range(-8.0f64..=8.0).exp2();
            self.dilate_into(t, &y0, &mut y);
            self.mul_into(&x, &y, &mut xy);
            if self.norm(&xy, kind) > (self.norm(&x, kind) + self.norm(&y, kind)) * (1.0 + 1e-12) {
                count += 1;
            }
        }
        count
    }

    /// Monte Carlo scan of `smooth_norm / hom_norm` over the unit hom sphere.
    pub fn norm_comparison(&self, samples: usize, seed: u64) -> NormComparison {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
        for _ in 0..samples {
            let x = self.sample_unit(&mut rng);
            let r = self.smooth_norm(&x) / self.hom_norm(&x);
            lower = lower.min(r);
            upper = upper.max(r);
        }
        let n = self.first_layer_dim() as f64;
        let p = self.smooth_exponent() as f64;
        let rest = (self.dim() - self.first_layer_dim()) as f64;
        let theoretical_upper = (n.powf(p / 2.0) + rest).powf(1.0 / p);
        NormComparison { lower, upper, theoretical_upper }
    }

    /// Samples pairs in `[-half_width, half_width]^N` and measures the
    /// comparison constant between `d` and the Euclidean distance.
    pub fn metric_comparison(&self, kind: NormKind, half_width: f64, samples: usize, seed: u64) -> MetricComparison {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.step() as f64;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(-half_width..=half_width)).collect();
            let y: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(-half_width..=half_width)).collect();
            let e = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if e == 0.0 {
                continue;
            }
            let d = self.dist(&x, &y, kind);
            lo = lo.max(e / d);
            hi = hi.max(d / e.powf(1.0 / s));
        }
        MetricComparison { d: lo.max(hi).max(1.0), lower_ratio_max: lo, upper_ratio_max: hi, samples }
    }
}
