//! Kernel integrals over annuli of a horizontal line through the origin.

use serde::{Deserialize, Serialize};

use crate::error::{numeric, usage, Result};
use crate::kernels::{BumpProfile, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularIntegrals {
    /// `∫_{r < d(p,0) < R} K dH¹` over the line.
    pub sharp: f64,
    /// `∫ [ψ^R - ψ^r] K dH¹` with `ψ^ρ(p) = ψ(d(p,0)/ρ)`.
    pub mollified: f64,
}

/// Both annular integrals of `kernel` along `L = {(s v, 0)}`, using
/// composite Simpson with `panels` panels on each dyadic shell.
pub fn annular_integral(
    kernel: &dyn Kernel,
    direction: &[f64],
    r: f64,
    big_r: f64,
    panels: usize,
    psi: &BumpProfile,
) -> Result<AnnularIntegrals> {
    if panels < 8 {
        return Err(usage(format!("need at least 8 panels per shell, got {panels}")));
    }
    if !(r > 0.0 && big_r > r && big_r.is_finite()) {
        return Err(usage(format!("annulus needs 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let g = kernel.group();
    let n = g.first_layer_dim();
    if direction.len() != n {
        return Err(usage(format!("direction needs {n} components, got {}", direction.len())));
    }
    let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (len - 1.0).abs() > 1e-12 {
        return Err(usage(format!("direction must be a unit vector, |v| = {len}")));
    }
    let metric = kernel.info().metric;
    let mut v = vec![0.0; g.dim()];
    v[..n].copy_from_slice(direction);
    // d((s v, 0), 0) = c |s|
    let c = g.norm(&v, metric);

    let mut point = vec![0.0; g.dim()];
    let mut eval = |s: f64| -> Result<f64> {
        for (p, x) in point.iter_mut().zip(&v) {
            *p = s * x;
        }
        let k = kernel.eval(&point);
        if k.is_finite() {
            Ok(k)
        } else {
            Err(numeric(format!("kernel {} is non-finite at s = {s}", kernel.info().name)))
        }
    };

    // even part K(sv) + K(-sv) on s > 0 covers both half-lines
    let sharp = shells(r / c, big_r / c, panels, |s| Ok(eval(s)? + eval(-s)?))?;
    let mollified = shells(r / (2.0 * c), 2.0 * big_r / c, panels, |s| {
        let d = c * s;
        let weight = psi.eval(d / big_r) - psi.eval(d / r);
        if weight == 0.0 {
            Ok(0.0)
        } else {
            Ok(weight * (eval(s)? + eval(-s)?))
        }
    })?;
    Ok(AnnularIntegrals { sharp, mollified })
}

/// `∫_a^b h` split into `[a, 2a], [2a, 4a], …` with Simpson on each.
fn shells<F>(a: f64, b: f64, panels: usize, mut h: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        let step = (hi - lo) / panels as f64;
        let mut acc = h(lo)? + h(hi)?;
        for k in 1..panels {
            acc += 2.0 * h(lo + k as f64 * step)?;
        }
        for k in 0..panels {
            acc += 4.0 * h(lo + (k as f64 + 0.5) * step)?;
        }
        total += acc * step / 6.0;
        lo = hi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{builtin, NormKind};
    use crate::kernels::{quasi_riesz_component, InverseDistance, VerticalRiesz};

    #[test]
    fn vertical_riesz_vanishes_on_lines() {
        let g = builtin("heisenberg:1").unwrap();
        let k = VerticalRiesz::new(g, 2, NormKind::Smooth).unwrap();
        let v = [0.6, 0.8];
        let out = annular_integral(&k, &v, 1e-3, 1.0, 64, &BumpProfile::standard()).unwrap();
        assert_eq!(out.sharp, 0.0);
        assert_eq!(out.mollified, 0.0);
    }

    #[test]
    fn antisymmetric_component_cancels() {
        let g = builtin("heisenberg:1").unwrap();
        let k = quasi_riesz_component(&g, 1, NormKind::Smooth).unwrap();
        let out = annular_integral(k.as_ref(), &[1.0, 0.0], 2f64.powi(-10), 1.0, 64, &BumpProfile::standard()).unwrap();
        assert!(out.sharp.abs() < 1e-8 && out.mollified.abs() < 1e-8, "{out:?}");
    }

    #[test]
    fn inverse_distance_log_growth() {
        let g = builtin("heisenberg:1").unwrap();
        let k = InverseDistance::new(g, 1, NormKind::Smooth);
        for kk in 1..=10 {
            let r = 2f64.powi(-kk);
            let out = annular_integral(&k, &[1.0, 0.0], r, 1.0, 64, &BumpProfile::standard()).unwrap();
            let exact = 2.0 * (1.0 / r).ln();
            assert!((out.sharp - exact).abs() < 1e-6, "k = {kk}: {} vs {exact}", out.sharp);
            // ∫ (ψ(x/R) - ψ(x/r)) dx/x = ln(R/r) for any such ψ
            assert!((out.mollified - exact).abs() < 1e-6, "k = {kk}: {}", out.mollified);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = builtin("heisenberg:1").unwrap();
        let k = InverseDistance::new(g, 1, NormKind::Smooth);
        let psi = BumpProfile::standard();
        assert!(annular_integral(&k, &[1.0, 0.0], 0.1, 1.0, 7, &psi).is_err());
        assert!(annular_integral(&k, &[1.0, 0.0], 1.0, 0.1, 64, &psi).is_err());
        assert!(annular_integral(&k, &[1.0, 1.0], 0.1, 1.0, 64, &psi).is_err());
        assert!(annular_integral(&k, &[1.0], 0.1, 1.0, 64, &psi).is_err());
    }
}
