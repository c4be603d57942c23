//! Horizontal curves: lifting, arc-length quadrature, tangent lines and
//! flatness.
//!
//! A horizontal curve is determined by its first-layer velocity `h` and a
//! base point. Higher coordinates solve `γ_i' = Q̄_i(γ, h)`, the derivative of
//! the group law in its second argument, which is integrated with classical
//! RK4 on a uniform grid.

mod velocity;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{numeric, usage, Error, Result};
use crate::group::{CarnotGroup, GroupPoint, NormKind};
use crate::kernels::estimate::ols_slope;
use crate::measure::{self, DiscreteMeasure, RegularityEstimate};

pub use velocity::{HorizontalVelocity, VelocityCheck};
use velocity::euclid;

/// Sup-distances at or below this are treated as zero in slope fits.
pub const FLATNESS_FLOOR: f64 = 1e-13;

/// Sampled horizontal curve with trapezoid arc-length weights.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    group: Arc<CarnotGroup>,
    velocity: HorizontalVelocity,
    a: f64,
    b: f64,
    params: Vec<f64>,
    points: Vec<f64>,
    velocities: Vec<f64>,
    weights: Vec<f64>,
}

/// Lifts `hv` on `[a, b]` with `steps` RK4 steps, starting at the identity.
pub fn lift(group: &Arc<CarnotGroup>, hv: &HorizontalVelocity, interval: (f64, f64), steps: usize) -> Result<DiscreteCurve> {
    lift_from(group, hv, interval, steps, &group.identity())
}

/// As [`lift`], starting at `base`.
pub fn lift_from(
    group: &Arc<CarnotGroup>,
    hv: &HorizontalVelocity,
    (a, b): (f64, f64),
    steps: usize,
    base: &[f64],
) -> Result<DiscreteCurve> {
    let n = group.first_layer_dim();
    let dim = group.dim();
    if hv.first_layer_dim() != n {
        return Err(usage(format!("velocity has {} components, group first layer has {n}", hv.first_layer_dim())));
    }
    if base.len() != dim {
        return Err(usage(format!("base point needs {dim} coordinates")));
    }
    if steps < 16 {
        return Err(usage(format!("grid needs at least 16 steps, got {steps}")));
    }
    if !(b > a) {
        return Err(usage(format!("empty parameter interval [{a}, {b}]")));
    }
    let dt = (b - a) / steps as f64;
    let params: Vec<f64> = (0..=steps).map(|k| a + dt * k as f64).collect();

    let mut velocities = vec![0.0; (steps + 1) * n];
    for (k, &t) in params.iter().enumerate() {
        hv.eval_into(t, &mut velocities[k * n..(k + 1) * n]);
    }
    let floor = velocities.chunks(n).map(euclid).fold(f64::INFINITY, f64::min);
    if !(floor > 0.0) {
        return Err(Error::Domain(format!("velocity vanishes on the grid (speed floor {floor})")));
    }

    let mut points = vec![0.0; (steps + 1) * dim];
    points[..dim].copy_from_slice(base);
    let mut state = base.to_vec();
    let mut h_mid = vec![0.0; n];
    let mut stage = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut tmp = vec![0.0; dim];
    for k in 0..steps {
        let t = params[k];
        hv.eval_into(t + 0.5 * dt, &mut h_mid);
        let h0 = &velocities[k * n..(k + 1) * n];
        let h1 = &velocities[(k + 1) * n..(k + 2) * n];
        rhs(group, &state, h0, &mut stage[0]);
        axpy_into(&state, 0.5 * dt, &stage[0], &mut tmp);
        rhs(group, &tmp, &h_mid, &mut stage[1]);
        axpy_into(&state, 0.5 * dt, &stage[1], &mut tmp);
        rhs(group, &tmp, &h_mid, &mut stage[2]);
        axpy_into(&state, dt, &stage[2], &mut tmp);
        rhs(group, &tmp, h1, &mut stage[3]);
        for i in 0..dim {
            state[i] += dt / 6.0 * (stage[0][i] + 2.0 * stage[1][i] + 2.0 * stage[2][i] + stage[3][i]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(numeric(format!("lift became non-finite at t = {}", params[k + 1])));
        }
        points[(k + 1) * dim..(k + 2) * dim].copy_from_slice(&state);
    }

    let mut weights: Vec<f64> = velocities.chunks(n).map(|h| euclid(h) * dt).collect();
    weights[0] *= 0.5;
    weights[steps] *= 0.5;

    Ok(DiscreteCurve { group: group.clone(), velocity: hv.clone(), a, b, params, points, velocities, weights })
}

/// `γ' = (h, Q̄(γ, h))`.
#[inline]
fn rhs(group: &CarnotGroup, x: &[f64], h: &[f64], out: &mut [f64]) {
    let n = h.len();
    group.q_bar_into(x, h, out);
    out[..n].copy_from_slice(h);
}

#[inline]
fn axpy_into(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, xv), yv) in out.iter_mut().zip(x).zip(y) {
        *o = xv + a * yv;
    }
}

impl DiscreteCurve {
    pub fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }

    pub fn velocity_field(&self) -> &HorizontalVelocity {
        &self.velocity
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Number of grid points `M + 1`.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.params[1] - self.params[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        let d = self.group.dim();
        &self.points[k * d..(k + 1) * d]
    }

    pub fn group_point(&self, k: usize) -> GroupPoint {
        GroupPoint::new(self.group.clone(), self.point(k).to_vec()).expect("dimension matches")
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        let n = self.group.first_layer_dim();
        &self.velocities[k * n..(k + 1) * n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Hölder exponent of the velocity.
    pub fn alpha(&self) -> f64 {
        self.velocity.alpha()
    }

    /// `Σ w_k`, the trapezoid length.
    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The curve as a weighted point measure.
    pub fn measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.group.clone(), self.points.clone(), self.weights.clone())
            .expect("lifted points and weights are valid")
    }

    /// Largest metric distance between consecutive grid points.
    pub fn mesh(&self, metric: NormKind) -> f64 {
        (0..self.len() - 1)
            .map(|k| self.group.dist(self.point(k + 1), self.point(k), metric))
            .fold(0.0, f64::max)
    }

    /// Grid index of the parameter `t0`.
    pub fn index_of(&self, t0: f64) -> Result<usize> {
        if !(t0 >= self.a && t0 <= self.b) {
            return Err(Error::Domain(format!("t0 = {t0} lies outside [{}, {}]", self.a, self.b)));
        }
        let k = ((t0 - self.a) / self.step()).round() as usize;
        let k = k.min(self.len() - 1);
        if (self.params[k] - t0).abs() > 1e-9 * self.step().max(1.0) {
            return Err(usage(format!("t0 = {t0} is not a grid point")));
        }
        Ok(k)
    }

    /// CSV with columns `t, γ_1, …, γ_N, w`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.group.dim()).map(|i| format!("gamma_{i}")));
        header.push("w".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.params[k].to_string()];
            row.extend(self.point(k).iter().map(|v| v.to_string()));
            row.push(self.weights[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ_k η(γ(t_k)) w_k`.
pub fn integrate<F>(curve: &DiscreteCurve, eta: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut total = 0.0;
    for k in 0..curve.len() {
        let v = eta(curve.point(k));
        if !v.is_finite() {
            return Err(numeric(format!("integrand is non-finite at t = {}", curve.params[k])));
        }
        total += v * curve.weights[k];
    }
    Ok(total)
}

/// Arc-length integral of `η` computed from the metric alone.
///
/// Walks along the curve placing centres at metric distance exactly `delta`
/// from each other (linear interpolation between grid points), so the chain
/// of `δ`-balls covers the curve. Each link contributes
/// `δ · (η(start) + η(end)) / 2`; the final partial link uses its true length.
pub fn covering_integral<F>(curve: &DiscreteCurve, eta: F, delta: f64, metric: NormKind) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(delta > 0.0) {
        return Err(usage("covering resolution must be positive"));
    }
    let g = &curve.group;
    let dim = g.dim();
    let mut center = curve.point(0).to_vec();
    let mut eta_center = eta(&center);
    let mut total = 0.0;
    let mut k = 1;
    let mut prev_dist = 0.0;
    let mut next = vec![0.0; dim];
    while k < curve.len() {
        let d = g.dist(curve.point(k), &center, metric);
        if d < delta {
            prev_dist = d;
            k += 1;
            continue;
        }
        let f = if d > prev_dist { (delta - prev_dist) / (d - prev_dist) } else { 1.0 };
        let (p0, p1) = (curve.point(k - 1), curve.point(k));
        for i in 0..dim {
            next[i] = p0[i] + f.clamp(0.0, 1.0) * (p1[i] - p0[i]);
        }
        let eta_next = eta(&next);
        total += delta * 0.5 * (eta_center + eta_next);
        center.copy_from_slice(&next);
        eta_center = eta_next;
        prev_dist = 0.0;
        // stay on the same segment: the new centre lies between p0 and p1
    }
    let last = curve.point(curve.len() - 1);
    let tail = g.dist(last, &center, metric);
    total += tail * 0.5 * (eta_center + eta(last));
    if !total.is_finite() {
        return Err(numeric("covering integral is non-finite"));
    }
    Ok(total)
}

/// `L(t) = p · ((t - t0) v, 0)`.
#[derive(Debug, Clone)]
pub struct HorizontalLine {
    group: Arc<CarnotGroup>,
    base: Vec<f64>,
    direction: Vec<f64>,
    t0: f64,
}

impl HorizontalLine {
    pub fn new(group: Arc<CarnotGroup>, base: Vec<f64>, direction: Vec<f64>, t0: f64) -> Result<Self> {
        if base.len() != group.dim() || direction.len() != group.first_layer_dim() {
            return Err(usage("horizontal line needs a base point and a first-layer direction"));
        }
        Ok(Self { group, base, direction, t0 })
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        let mut step = vec![0.0; self.group.dim()];
        for (s, v) in step.iter_mut().zip(&self.direction) {
            *s = (t - self.t0) * v;
        }
        self.group.mul_into(&self.base, &step, out);
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.group.dim()];
        self.at_into(t, &mut out);
        out
    }
}

/// Horizontal tangent at the grid parameter `t0`.
pub fn tangent_line(curve: &DiscreteCurve, t0: f64) -> Result<HorizontalLine> {
    let k = curve.index_of(t0)?;
    HorizontalLine::new(curve.group.clone(), curve.point(k).to_vec(), curve.velocity(k).to_vec(), curve.params[k])
}

/// Log-log slope of a flatness profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Slope {
    Fitted(f64),
    /// Every sup-distance is below [`FLATNESS_FLOOR`]; the curve is its tangent.
    Flat,
}

impl Slope {
    /// The fitted slope, with `+∞` for [`Slope::Flat`].
    pub fn value(&self) -> f64 {
        match self {
            Slope::Fitted(s) => *s,
            Slope::Flat => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessRow {
    pub scale: f64,
    pub sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessProfile {
    pub t0: f64,
    pub rows: Vec<FlatnessRow>,
    pub slope: Slope,
}

/// `sup_{|t - t0| ≤ Δ} d(γ(t), L(t))` for each `Δ`, over grid points.
pub fn flatness_profile(curve: &DiscreteCurve, t0: f64, scales: &[f64], metric: NormKind) -> Result<FlatnessProfile> {
    if scales.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 scales, got {}", scales.len())));
    }
    let k0 = curve.index_of(t0)?;
    let dt = curve.step();
    let smallest = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    if dt > smallest / 8.0 {
        return Err(usage(format!("grid step {dt} exceeds Δ_min/8 = {}", smallest / 8.0)));
    }
    let reach = (t0 - curve.a).max(curve.b - t0);
    if let Some(s) = scales.iter().find(|&&s| !(s > 0.0) || s > reach * (1.0 + 1e-12)) {
        return Err(usage(format!("scale {s} is outside the reach {reach} of t0")));
    }
    let line = tangent_line(curve, t0)?;
    let g = &curve.group;
    let mut lt = vec![0.0; g.dim()];
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let span = (scale / dt + 1e-9).floor() as usize;
        let lo = k0.saturating_sub(span);
        let hi = (k0 + span).min(curve.len() - 1);
        let mut sup = 0.0f64;
        for k in lo..=hi {
            line.at_into(curve.params[k], &mut lt);
            sup = sup.max(g.dist(curve.point(k), &lt, metric));
        }
        rows.push(FlatnessRow { scale, sup_distance: sup });
    }
    let valid: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup_distance > FLATNESS_FLOOR)
        .map(|r| (r.scale.log2(), r.sup_distance.log2()))
        .collect();
    let slope = if valid.is_empty() {
        Slope::Flat
    } else if valid.len() < 4 {
        return Err(Error::InsufficientData(format!("only {} scales above the floating-point floor", valid.len())));
    } else {
        Slope::Fitted(ols_slope(&valid))
    };
    Ok(FlatnessProfile { t0, rows, slope })
}

/// Dyadic scales `2^{-hi}, …, 2^{-lo}` in increasing order.
pub fn dyadic_scales(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).rev().map(|k| (-(k as f64)).exp2()).collect()
}

/// 1-regularity constant of the curve measure, over radii down to four
/// times the mesh.
pub fn estimate_regularity(curve: &DiscreteCurve, metric: NormKind) -> Result<RegularityEstimate> {
    if curve.len() < 64 {
        return Err(Error::InsufficientData(format!("regularity needs ≥ 64 points, got {}", curve.len())));
    }
    measure::estimate_regularity(&curve.measure(), metric, 64, 4.0 * curve.mesh(metric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin;

    #[test]
    fn horizontal_line_lift_is_exact() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::line(2), (0.0, 1.0), 64).unwrap();
        for k in 0..c.len() {
            let p = c.point(k);
            assert!((p[0] - c.params()[k]).abs() < 1e-14);
            assert_eq!(p[1], 0.0);
            assert_eq!(p[2], 0.0);
        }
        assert!((integrate(&c, |_| 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate(&c, |p| p[0]).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lift_validates_inputs() {
        let g = builtin("heisenberg:1").unwrap();
        let hv = HorizontalVelocity::line(2);
        assert!(lift(&g, &hv, (0.0, 1.0), 15).is_err());
        assert!(lift(&g, &hv, (1.0, 1.0), 64).is_err());
        let stalled = HorizontalVelocity::new("stall", 2, 1.0, 1.0, |t, out| {
            out[0] = t;
            out[1] = 0.0;
        })
        .unwrap();
        assert!(matches!(lift(&g, &stalled, (0.0, 1.0), 64), Err(Error::Domain(_))));
        let wrong = HorizontalVelocity::line(3);
        assert!(lift(&g, &wrong, (0.0, 1.0), 64).is_err());
    }

    #[test]
    fn non_finite_lift_names_the_parameter() {
        let g = builtin("heisenberg:1").unwrap();
        let blowup = HorizontalVelocity::new("blowup", 2, 1.0, 1.0, |t, out| {
            out[0] = 1.0;
            out[1] = if t > 0.5 { f64::INFINITY } else { 0.0 };
        })
        .unwrap();
        let err = lift(&g, &blowup, (0.0, 1.0), 64).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }

    #[test]
    fn integrate_rejects_non_finite_integrand() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::line(2), (0.0, 1.0), 64).unwrap();
        assert!(matches!(integrate(&c, |p| 1.0 / p[0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn tangent_of_a_line_is_the_line() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::line(2), (0.0, 1.0), 64).unwrap();
        let t0 = c.params()[10];
        let l = tangent_line(&c, t0).unwrap();
        for k in 0..c.len() {
            let lp = l.at(c.params()[k]);
            assert!(g.dist(c.point(k), &lp, NormKind::Smooth) < 1e-14);
        }
        assert_eq!(l.direction(), c.velocity(10));
        assert!(tangent_line(&c, 1.5).is_err());
        assert!(tangent_line(&c, 0.001).is_err());
    }

    #[test]
    fn flatness_of_a_line_reports_flat() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::line(2), (0.0, 1.0), 1024).unwrap();
        let prof = flatness_profile(&c, 0.5, &dyadic_scales(2, 6), NormKind::Smooth).unwrap();
        assert_eq!(prof.slope, Slope::Flat);
        assert!(prof.rows.iter().all(|r| r.sup_distance == 0.0));
        assert!(prof.slope.value().is_infinite());
    }

    #[test]
    fn flatness_preconditions() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::circle(2).unwrap(), (0.0, 1.0), 256).unwrap();
        assert!(matches!(
            flatness_profile(&c, 0.5, &dyadic_scales(2, 4), NormKind::Smooth),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            flatness_profile(&c, 0.5, &dyadic_scales(2, 8), NormKind::Smooth),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn segment_regularity_ratio() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::line(2), (0.0, 1.0), 1024).unwrap();
        let est = estimate_regularity(&c, NormKind::Smooth).unwrap();
        // closed balls of radius 4h hold 9 grid cells
        assert!(est.constant >= 2.0 && est.constant <= 2.25 + 1e-9, "{est:?}");
        let m = c.measure();
        // endpoint ball holds half the mass of an interior ball
        let r = 0.125;
        assert!((m.ball_mass(0, r, NormKind::Smooth) - r).abs() < 2.0 / 1024.0);
        assert!((m.ball_mass(512, r, NormKind::Smooth) - 2.0 * r).abs() < 2.0 / 1024.0);
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let g = builtin("heisenberg:1").unwrap();
        let c = lift(&g, &HorizontalVelocity::line(2), (0.0, 1.0), 16).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,gamma_1,gamma_2,gamma_3,w\n"));
        assert_eq!(text.lines().count(), 18);
    }
}
