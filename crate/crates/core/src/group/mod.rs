//! Carnot groups in exponential coordinates.
//!
//! A group is described by its layer dimensions and the structure constants
//! of an adapted basis. Points are plain coordinate vectors; the group law is
//! `xy = x + y + Q(x, y)` with `Q` evaluated from a precomputed BCH plan.
//!
//! The slice-based methods on [`CarnotGroup`] are the hot-path API used by
//! the operators. [`GroupPoint`] wraps a coordinate vector together with its
//! group and checks compatibility on every operation.

mod bch;
mod norm;
mod point;
mod spec;

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};
use bch::BchPlan;

pub use norm::{CertifyOptions, MetricComparison, NormCertificate, NormComparison};
pub use point::GroupPoint;
pub use spec::{builtin, parse_group_spec, BracketSpec, GroupDefinition, OutputSpec};

/// Largest supported nilpotency step.
pub const MAX_STEP: usize = 4;

/// Which homogeneous norm a metric is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// `max_j λ_j |x_j|^{1/d_j}`.
    Hom,
    /// The C¹ gauge, Euclidean on the first layer.
    #[default]
    Smooth,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Hom => f.write_str("hom"),
            NormKind::Smooth => f.write_str("smooth"),
        }
    }
}

/// One structure constant `c^k_{ij}` with `i < j` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstant {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// An immutable stratified group.
#[derive(Clone)]
pub struct CarnotGroup {
    name: String,
    layer_dims: Vec<usize>,
    degrees: Vec<u32>,
    constants: Vec<StructureConstant>,
    plan: BchPlan,
    norm_weights: Vec<f64>,
    certificate: Option<NormCertificate>,
}

impl fmt::Debug for CarnotGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CarnotGroup")
            .field("name", &self.name)
            .field("layer_dims", &self.layer_dims)
            .field("norm_weights", &self.norm_weights)
            .finish()
    }
}

impl PartialEq for CarnotGroup {
    fn eq(&self, other: &Self) -> bool {
        self.layer_dims == other.layer_dims
            && self.constants == other.constants
            && self.norm_weights == other.norm_weights
    }
}

const JACOBI_TOL: f64 = 1e-12;

impl CarnotGroup {
    /// Builds and validates a group. Missing norm weights are certified by
    /// sampling with `certify`.
    pub fn from_definition(def: &GroupDefinition, certify: &CertifyOptions) -> Result<Self> {
        let name = def.name.clone().unwrap_or_else(|| "custom".to_string());
        let layer_dims = def.layer_dims.clone();
        if layer_dims.is_empty() || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGroup("layer_dims must be nonempty and positive".into()));
        }
        let step = layer_dims.len();
        if step > MAX_STEP {
            return Err(Error::InvalidGroup(format!("step {step} exceeds the supported maximum {MAX_STEP}")));
        }
        let degrees: Vec<u32> = layer_dims
            .iter()
            .enumerate()
            .flat_map(|(layer, &d)| std::iter::repeat((layer + 1) as u32).take(d))
            .collect();
        let dim = degrees.len();

        let mut constants: Vec<StructureConstant> = Vec::new();
        for b in &def.brackets {
            if b.i == 0 || b.j == 0 || b.i > dim || b.j > dim {
                return Err(Error::InvalidGroup(format!("bracket indices ({}, {}) out of range 1..={dim}", b.i, b.j)));
            }
            if b.i == b.j {
                return Err(Error::InvalidGroup(format!("bracket [X_{0}, X_{0}] must vanish", b.i)));
            }
            let (i, j, sign) = if b.i < b.j { (b.i - 1, b.j - 1, 1.0) } else { (b.j - 1, b.i - 1, -1.0) };
            for out in &b.out {
                if out.k == 0 || out.k > dim {
                    return Err(Error::InvalidGroup(format!("output index {} out of range", out.k)));
                }
                let k = out.k - 1;
                let c = sign * out.c;
                if let Some(prev) = constants.iter().find(|e| e.i == i && e.j == j && e.k == k) {
                    if (prev.c - c).abs() > JACOBI_TOL {
                        return Err(Error::InvalidGroup(format!(
                            "structure constants for [X_{}, X_{}] along X_{} are not antisymmetric",
                            i + 1,
                            j + 1,
                            k + 1
                        )));
                    }
                    continue;
                }
                if c != 0.0 {
                    constants.push(StructureConstant { i, j, k, c });
                }
            }
        }
        constants.sort_by_key(|e| (e.k, e.i, e.j));

        let mut group = Self {
            name,
            layer_dims,
            degrees,
            constants,
            plan: BchPlan::for_step(step),
            norm_weights: vec![1.0; dim],
            certificate: None,
        };
        group.validate_grading()?;
        group.validate_jacobi()?;
        group.validate_generation()?;

        match &def.norm_weights {
            Some(w) => {
                if w.len() != dim {
                    return Err(Error::InvalidGroup(format!("expected {dim} norm weights, got {}", w.len())));
                }
                if w.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(Error::InvalidGroup("norm weights must be positive".into()));
                }
                if w[..group.first_layer_dim()].iter().any(|&l| l != 1.0) {
                    return Err(Error::InvalidGroup("first-layer norm weights must equal 1".into()));
                }
                group.norm_weights = w.clone();
            }
            None => {
                let cert = group.certify_norm_weights(certify);
                group.norm_weights = cert.weights.clone();
                group.certificate = Some(cert);
            }
        }
        Ok(group)
    }

    fn validate_grading(&self) -> Result<()> {
        let step = self.step() as u32;
        for e in &self.constants {
            let (di, dj, dk) = (self.degrees[e.i], self.degrees[e.j], self.degrees[e.k]);
            if di + dj > step {
                return Err(Error::InvalidGroup(format!(
                    "[X_{}, X_{}] must vanish in a step-{step} group",
                    e.i + 1,
                    e.j + 1
                )));
            }
            if dk != di + dj {
                return Err(Error::InvalidGroup(format!(
                    "[X_{}, X_{}] has a component along X_{} outside layer {}",
                    e.i + 1,
                    e.j + 1,
                    e.k + 1,
                    di + dj
                )));
            }
        }
        Ok(())
    }

    fn validate_jacobi(&self) -> Result<()> {
        let dim = self.dim();
        let basis = |i: usize| {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            v
        };
        let mut t = vec![0.0; dim];
        let mut acc = vec![0.0; dim];
        let mut inner = vec![0.0; dim];
        for a in 0..dim {
            for b in (a + 1)..dim {
                for c in (b + 1)..dim {
                    let (ea, eb, ec) = (basis(a), basis(b), basis(c));
                    acc.iter_mut().for_each(|v| *v = 0.0);
                    for (p, q, r) in [(&ea, &eb, &ec), (&eb, &ec, &ea), (&ec, &ea, &eb)] {
                        self.bracket_into(q, r, &mut inner);
                        self.bracket_into(p, &inner, &mut t);
                        acc.iter_mut().zip(&t).for_each(|(s, v)| *s += v);
                    }
                    if acc.iter().any(|v| v.abs() > JACOBI_TOL) {
                        return Err(Error::InvalidGroup(format!(
                            "Jacobi identity fails on (X_{}, X_{}, X_{})",
                            a + 1,
                            b + 1,
                            c + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks `[V_1, V_i] = V_{i+1}` by a rank computation.
    fn validate_generation(&self) -> Result<()> {
        let dim = self.dim();
        let n = self.first_layer_dim();
        for layer in 1..self.step() {
            let range = self.layer_range(layer);
            let target = self.layer_range(layer + 1);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut out = vec![0.0; dim];
            for a in 0..n {
                for b in range.clone() {
                    let mut ea = vec![0.0; dim];
                    let mut eb = vec![0.0; dim];
                    ea[a] = 1.0;
                    eb[b] = 1.0;
                    self.bracket_into(&ea, &eb, &mut out);
                    rows.push(out[target.clone()].to_vec());
                }
            }
            if rank(rows, 1e-10) != target.len() {
                return Err(Error::InvalidGroup(format!(
                    "first layer does not generate layer {}",
                    layer + 2
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Topological dimension `N`.
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    /// `n = dim V_1`.
    pub fn first_layer_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Degree `d_j` of each coordinate.
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    pub fn certificate(&self) -> Option<&NormCertificate> {
        self.certificate.as_ref()
    }

    pub fn structure_constants(&self) -> &[StructureConstant] {
        &self.constants
    }

    /// Number of nested-bracket nodes in the BCH plan.
    pub fn bch_terms(&self) -> usize {
        self.plan.len()
    }

    /// Zero-based coordinate range of layer `layer` (1-based).
    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start: usize = self.layer_dims[..layer - 1].iter().sum();
        start..start + self.layer_dims[layer - 1]
    }

    pub fn identity(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Homogeneous dimension `Σ_j d_j`.
    pub fn homogeneous_dim(&self) -> u32 {
        self.degrees.iter().sum()
    }

    /// Writes the Lie bracket `[a, b]` into `out`.
    #[inline]
    pub fn bracket_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.constants {
            out[e.k] += e.c * (a[e.i] * b[e.j] - a[e.j] * b[e.i]);
        }
    }

    /// Writes the BCH correction `Q(x, y)` into `out`.
    pub fn bch_q_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.plan.accumulate(x, y, false, out, |a, b, dst| self.bracket_into(a, b, dst));
    }

    /// Group product `xy` written into `out`.
    #[inline]
    pub fn mul_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = a + b;
        }
        if !self.plan.nodes.is_empty() {
            self.plan.accumulate(x, y, false, out, |a, b, dst| self.bracket_into(a, b, dst));
        }
    }

    pub fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_into(x, y, &mut out);
        out
    }

    /// `x^{-1} y` written into `out`.
    #[inline]
    pub fn inv_mul_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let neg: SmallVec<[f64; 16]> = x.iter().map(|v| -v).collect();
        self.mul_into(&neg, y, out);
    }

    /// Dilation `δ_t`; the caller guarantees `t > 0`.
    pub fn dilate_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut powers = [1.0; MAX_STEP + 1];
        for d in 1..=MAX_STEP {
            powers[d] = powers[d - 1] * t;
        }
        for ((o, v), &d) in out.iter_mut().zip(x).zip(&self.degrees) {
            *o = powers[d as usize] * v;
        }
    }

    pub fn dilate(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(domain(format!("dilation factor must be positive, got {t}")));
        }
        let mut out = vec![0.0; self.dim()];
        self.dilate_into(t, x, &mut out);
        Ok(out)
    }

    /// Zeros all coordinates of degree ≥ 2.
    pub fn horizontal_projection(&self, p: &[f64]) -> Vec<f64> {
        let n = self.first_layer_dim();
        let mut out = p.to_vec();
        out[n..].iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// `π̃(p)^{-1} p` written into `out`.
    #[inline]
    pub fn nonhorizontal_part_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.first_layer_dim();
        let mut neg: SmallVec<[f64; 16]> = SmallVec::from_elem(0.0, p.len());
        for (dst, v) in neg[..n].iter_mut().zip(&p[..n]) {
            *dst = -v;
        }
        self.mul_into(&neg, p, out);
        // first-layer coordinates cancel exactly
        out[..n].iter_mut().for_each(|v| *v = 0.0);
    }

    /// The `y`-linear part of `Q(x, y)` at `y = (h, 0)`, for every coordinate.
    ///
    /// Coordinates `1..=n` of the result are always zero.
    pub fn q_bar_into(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        let n = self.first_layer_dim();
        let mut y: SmallVec<[f64; 16]> = SmallVec::from_elem(0.0, x.len());
        y[..n].copy_from_slice(&h[..n]);
        out.iter_mut().for_each(|v| *v = 0.0);
        self.plan.accumulate(x, &y, true, out, |a, b, dst| self.bracket_into(a, b, dst));
    }

    /// `Q̄_i(x, h)` for a single coordinate `i` (one-based, `i > n`).
    pub fn q_bar(&self, x: &[f64], h: &[f64], i: usize) -> Result<f64> {
        let n = self.first_layer_dim();
        if i <= n || i > self.dim() {
            return Err(domain(format!("q_bar index must lie in ({n}, {}], got {i}", self.dim())));
        }
        if h.len() != n {
            return Err(crate::error::usage(format!("velocity must have {n} components, got {}", h.len())));
        }
        let mut out = vec![0.0; self.dim()];
        self.q_bar_into(x, h, &mut out);
        Ok(out[i - 1])
    }

    #[inline]
    pub fn norm(&self, x: &[f64], kind: NormKind) -> f64 {
        match kind {
            NormKind::Hom => self.hom_norm(x),
            NormKind::Smooth => self.smooth_norm(x),
        }
    }

    /// `d(x, y) = ‖y^{-1} x‖`.
    #[inline]
    pub fn dist(&self, x: &[f64], y: &[f64], kind: NormKind) -> f64 {
        let mut z: SmallVec<[f64; 16]> = SmallVec::from_elem(0.0, x.len());
        self.inv_mul_into(y, x, &mut z);
        self.norm(&z, kind)
    }
}

/// Row rank by Gaussian elimination with partial pivoting.
fn rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(pivot) = (r..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs())) else {
            break;
        };
        if rows[pivot][c].abs() <= tol {
            continue;
        }
        rows.swap(r, pivot);
        let pr = rows[r].clone();
        for row in rows.iter_mut().skip(r + 1) {
            let f = row[c] / pr[c];
            for (v, p) in row.iter_mut().zip(&pr) {
                *v -= f * p;
            }
        }
        r += 1;
    }
    r
}
