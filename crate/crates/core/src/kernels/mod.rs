//! 1-dimensional Calderón–Zygmund kernels.
//!
//! A kernel is a function on `G ∖ {0}` with a declared growth constant `B`
//! (`|K(p)| ≤ B / d(p,0)`), a Hölder exponent `β`, and a flag recording
//! whether it is `-1`-homogeneous. Kernels are shared as [`SharedKernel`]
//! and combined with [`adjoint`], [`lp_piece`] and [`sum`].

mod bump;
pub(crate) mod estimate;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{domain, usage, Result};
use crate::group::{CarnotGroup, GroupPoint, NormKind};

pub use bump::BumpProfile;
pub use estimate::{estimate_cz_constants, CzEstimate};

/// Declared constants of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub name: String,
    /// `B` in `|K(p)| ≤ B / d(p,0)`; infinite when no such bound exists.
    pub growth_constant: f64,
    pub holder_exponent: f64,
    /// `K(δ_r p) = r^{-1} K(p)`.
    pub homogeneous: bool,
    pub metric: NormKind,
}

pub trait Kernel: Send + Sync + fmt::Debug {
    /// Evaluates the kernel at `p ≠ 0` given in coordinates.
    ///
    /// The value at the origin is unspecified (typically non-finite).
    fn eval(&self, p: &[f64]) -> f64;

    fn info(&self) -> KernelInfo;

    fn group(&self) -> &Arc<CarnotGroup>;
}

pub type SharedKernel = Arc<dyn Kernel>;

/// Checked evaluation at a group point.
pub fn evaluate(kernel: &dyn Kernel, p: &GroupPoint) -> Result<f64> {
    if **kernel.group() != **p.group() {
        return Err(usage("point and kernel live in different groups"));
    }
    if p.is_identity() {
        return Err(domain(format!("kernel {} is undefined at the origin", kernel.info().name)));
    }
    Ok(kernel.eval(p.coords()))
}

/// `V_n(p) = d(NH(p), 0)^n / d(p, 0)^{n+1}`.
#[derive(Debug, Clone)]
pub struct VerticalRiesz {
    group: Arc<CarnotGroup>,
    n: u32,
    metric: NormKind,
    growth: f64,
}

impl VerticalRiesz {
    pub fn new(group: Arc<CarnotGroup>, n: u32, metric: NormKind) -> Result<Self> {
        if n == 0 {
            return Err(domain("vertical Riesz kernels need n ≥ 1"));
        }
        let c = nonhorizontal_ratio(&group, metric, 20_000, 0x7a11);
        Ok(Self { group, n, metric, growth: c.powi(n as i32) })
    }
}

/// Sampled `sup d(NH(p),0) / d(p,0)` over the unit sphere.
fn nonhorizontal_ratio(group: &CarnotGroup, metric: NormKind, samples: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nh = vec![0.0; group.dim()];
    let mut best = 0.0f64;
    for _ in 0..samples {
        let p: Vec<f64> = (0..group.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let d = group.norm(&p, metric);
        if d == 0.0 {
            continue;
        }
        group.nonhorizontal_part_into(&p, &mut nh);
        best = best.max(group.norm(&nh, metric) / d);
    }
    // slack for points the sample missed
    best * 1.05
}

impl Kernel for VerticalRiesz {
    #[inline]
    fn eval(&self, p: &[f64]) -> f64 {
        let mut nh: SmallVec<[f64; 16]> = SmallVec::from_elem(0.0, p.len());
        self.group.nonhorizontal_part_into(p, &mut nh);
        let dn = self.group.norm(&nh, self.metric);
        let d = self.group.norm(p, self.metric);
        dn.powi(self.n as i32) / d.powi(self.n as i32 + 1)
    }

    fn info(&self) -> KernelInfo {
        KernelInfo {
            name: format!("vriesz:{}", self.n),
            growth_constant: self.growth,
            holder_exponent: 1.0,
            homogeneous: true,
            metric: self.metric,
        }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }
}

/// One coordinate of `Ω(p) = (p_1/d², p_2/d³, …, p_s/d^{s+1})`.
#[derive(Debug, Clone)]
pub struct QuasiRieszComponent {
    group: Arc<CarnotGroup>,
    /// Zero-based coordinate.
    index: usize,
    metric: NormKind,
}

impl Kernel for QuasiRieszComponent {
    #[inline]
    fn eval(&self, p: &[f64]) -> f64 {
        let d = self.group.norm(p, self.metric);
        let deg = self.group.degrees()[self.index] as i32;
        p[self.index] / d.powi(deg + 1)
    }

    fn info(&self) -> KernelInfo {
        let deg = self.group.degrees()[self.index] as i32;
        let growth = if deg == 1 { 1.0 } else { self.group.norm_weights()[self.index].powi(-deg) };
        KernelInfo {
            name: format!("quasi:{}", self.index + 1),
            growth_constant: growth,
            holder_exponent: 1.0,
            homogeneous: true,
            metric: self.metric,
        }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }
}

/// The components of the quasi-Riesz kernel as `N` scalar kernels.
pub fn quasi_riesz(group: &Arc<CarnotGroup>, metric: NormKind) -> Vec<SharedKernel> {
    (0..group.dim())
        .map(|index| Arc::new(QuasiRieszComponent { group: group.clone(), index, metric }) as SharedKernel)
        .collect()
}

pub fn quasi_riesz_component(group: &Arc<CarnotGroup>, component: usize, metric: NormKind) -> Result<SharedKernel> {
    if component == 0 || component > group.dim() {
        return Err(usage(format!("quasi-Riesz component must lie in 1..={}", group.dim())));
    }
    Ok(Arc::new(QuasiRieszComponent { group: group.clone(), index: component - 1, metric }))
}

/// `d(p,0)^{-power}` for `power ∈ {1, 2}`: the positive control kernels.
#[derive(Debug, Clone)]
pub struct InverseDistance {
    group: Arc<CarnotGroup>,
    power: i32,
    metric: NormKind,
}

impl InverseDistance {
    pub fn new(group: Arc<CarnotGroup>, power: i32, metric: NormKind) -> Self {
        Self { group, power, metric }
    }
}

impl Kernel for InverseDistance {
    #[inline]
    fn eval(&self, p: &[f64]) -> f64 {
        self.group.norm(p, self.metric).powi(-self.power)
    }

    fn info(&self) -> KernelInfo {
        let name = match self.power {
            1 => "inv-dist".to_string(),
            2 => "inv-dist-sq".to_string(),
            p => format!("inv-dist-pow{p}"),
        };
        KernelInfo {
            name,
            growth_constant: if self.power == 1 { 1.0 } else { f64::INFINITY },
            holder_exponent: 1.0,
            homogeneous: self.power == 1,
            metric: self.metric,
        }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }
}

/// `K ≡ c`; not a CZ kernel unless `c = 0`.
#[derive(Debug, Clone)]
pub struct ConstantKernel {
    group: Arc<CarnotGroup>,
    value: f64,
}

impl ConstantKernel {
    pub fn new(group: Arc<CarnotGroup>, value: f64) -> Self {
        Self { group, value }
    }

    pub fn zero(group: Arc<CarnotGroup>) -> Self {
        Self::new(group, 0.0)
    }
}

impl Kernel for ConstantKernel {
    fn eval(&self, _p: &[f64]) -> f64 {
        self.value
    }

    fn info(&self) -> KernelInfo {
        let zero = self.value == 0.0;
        KernelInfo {
            name: if zero { "zero".into() } else { format!("const:{}", self.value) },
            growth_constant: if zero { 0.0 } else { f64::INFINITY },
            holder_exponent: 1.0,
            homogeneous: zero,
            metric: NormKind::Smooth,
        }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }
}

/// Kernel backed by a closure.
pub struct FnKernel<F> {
    group: Arc<CarnotGroup>,
    info: KernelInfo,
    f: F,
}

impl<F> fmt::Debug for FnKernel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnKernel").field("name", &self.info.name).finish()
    }
}

impl<F> FnKernel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(group: Arc<CarnotGroup>, info: KernelInfo, f: F) -> Self {
        Self { group, info, f }
    }
}

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, p: &[f64]) -> f64 {
        (self.f)(p)
    }

    fn info(&self) -> KernelInfo {
        self.info.clone()
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }
}

/// `K̃(p) = K(p^{-1})`.
#[derive(Debug, Clone)]
pub struct Adjoint {
    inner: SharedKernel,
}

impl Kernel for Adjoint {
    #[inline]
    fn eval(&self, p: &[f64]) -> f64 {
        let inv: SmallVec<[f64; 16]> = p.iter().map(|v| -v).collect();
        self.inner.eval(&inv)
    }

    fn info(&self) -> KernelInfo {
        let inner = self.inner.info();
        KernelInfo { name: format!("adjoint({})", inner.name), ..inner }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        self.inner.group()
    }
}

pub fn adjoint(kernel: SharedKernel) -> SharedKernel {
    Arc::new(Adjoint { inner: kernel })
}

/// `K_{(j)} = η_j K` with `η_j(p) = ψ(2^j d(p,0)) - ψ(2^{j+1} d(p,0))`.
#[derive(Debug, Clone)]
pub struct LpPiece {
    inner: SharedKernel,
    scale: i32,
    psi: BumpProfile,
    metric: NormKind,
}

impl LpPiece {
    pub fn scale(&self) -> i32 {
        self.scale
    }
}

/// `η_j` as a function of `d(p,0)`.
#[inline]
pub fn lp_weight(psi: &BumpProfile, scale: i32, d: f64) -> f64 {
    let a = (scale as f64).exp2() * d;
    psi.eval(a) - psi.eval(2.0 * a)
}

impl Kernel for LpPiece {
    #[inline]
    fn eval(&self, p: &[f64]) -> f64 {
        let d = self.inner.group().norm(p, self.metric);
        let eta = lp_weight(&self.psi, self.scale, d);
        if eta == 0.0 {
            0.0
        } else {
            eta * self.inner.eval(p)
        }
    }

    fn info(&self) -> KernelInfo {
        let inner = self.inner.info();
        KernelInfo { name: format!("lp({}, {})", inner.name, self.scale), homogeneous: false, ..inner }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        self.inner.group()
    }
}

pub fn lp_piece(kernel: SharedKernel, scale: i32, psi: BumpProfile) -> SharedKernel {
    let metric = kernel.info().metric;
    Arc::new(LpPiece { inner: kernel, scale, psi, metric })
}

/// Pointwise sum of two kernels on the same group.
#[derive(Debug, Clone)]
pub struct Sum {
    a: SharedKernel,
    b: SharedKernel,
}

impl Kernel for Sum {
    fn eval(&self, p: &[f64]) -> f64 {
        self.a.eval(p) + self.b.eval(p)
    }

    fn info(&self) -> KernelInfo {
        let (a, b) = (self.a.info(), self.b.info());
        KernelInfo {
            name: format!("{}+{}", a.name, b.name),
            growth_constant: a.growth_constant + b.growth_constant,
            holder_exponent: a.holder_exponent.min(b.holder_exponent),
            homogeneous: a.homogeneous && b.homogeneous,
            metric: a.metric,
        }
    }

    fn group(&self) -> &Arc<CarnotGroup> {
        self.a.group()
    }
}

pub fn sum(a: SharedKernel, b: SharedKernel) -> Result<SharedKernel> {
    if **a.group() != **b.group() {
        return Err(usage("cannot add kernels on different groups"));
    }
    Ok(Arc::new(Sum { a, b }))
}

/// Parses `vriesz:<n>`, `quasi:<component>`, `inv-dist`, `inv-dist-sq` or
/// `zero`, optionally suffixed with `@hom` or `@smooth` to pick the metric.
pub fn parse_kernel(group: &Arc<CarnotGroup>, spec: &str) -> Result<SharedKernel> {
    let (body, metric) = match spec.split_once('@') {
        Some((b, "hom")) => (b, NormKind::Hom),
        Some((b, "smooth")) => (b, NormKind::Smooth),
        Some((_, m)) => return Err(usage(format!("unknown metric `{m}` in kernel spec `{spec}`"))),
        None => (spec, NormKind::Smooth),
    };
    let (kind, arg) = match body.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (body, None),
    };
    let int_arg = || -> Result<usize> {
        arg.and_then(|a| a.parse::<usize>().ok())
            .ok_or_else(|| usage(format!("kernel spec `{spec}` needs a positive integer")))
    };
    match (kind, arg) {
        ("vriesz", Some(_)) => Ok(Arc::new(VerticalRiesz::new(group.clone(), int_arg()? as u32, metric)?)),
        ("quasi", Some(_)) => quasi_riesz_component(group, int_arg()?, metric),
        ("inv-dist", None) => Ok(Arc::new(InverseDistance::new(group.clone(), 1, metric))),
        ("inv-dist-sq", None) => Ok(Arc::new(InverseDistance::new(group.clone(), 2, metric))),
        ("zero", None) => Ok(Arc::new(ConstantKernel::zero(group.clone()))),
        _ => Err(usage(format!("unknown kernel spec `{spec}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin;

    fn h1() -> Arc<CarnotGroup> {
        builtin("heisenberg:1").unwrap()
    }

    #[test]
    fn vertical_riesz_vanishes_on_horizontal_points() {
        let k = VerticalRiesz::new(h1(), 2, NormKind::Smooth).unwrap();
        assert_eq!(k.eval(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(k.eval(&[0.3, -2.0, 0.0]), 0.0);
    }

    #[test]
    fn vertical_riesz_on_vertical_point() {
        let g = h1();
        let k = VerticalRiesz::new(g.clone(), 2, NormKind::Smooth).unwrap();
        let p = [0.0, 0.0, 1.0];
        let d = g.smooth_norm(&p);
        assert!((k.eval(&p) - 1.0 / d).abs() < 1e-15);
    }

    #[test]
    fn vertical_riesz_halves_under_dilation() {
        let g = h1();
        let k = VerticalRiesz::new(g.clone(), 2, NormKind::Smooth).unwrap();
        let p = [0.4, -0.3, 0.9];
        let q = g.dilate(2.0, &p).unwrap();
        assert!((k.eval(&q) - 0.5 * k.eval(&p)).abs() < 1e-14);
    }

    #[test]
    fn evaluation_at_origin_is_a_domain_error() {
        let g = h1();
        let k: SharedKernel = Arc::new(VerticalRiesz::new(g.clone(), 1, NormKind::Smooth).unwrap());
        let e = GroupPoint::identity(g);
        assert!(matches!(evaluate(k.as_ref(), &e), Err(crate::Error::Domain(_))));
        assert!(VerticalRiesz::new(h1(), 0, NormKind::Smooth).is_err());
    }

    #[test]
    fn quasi_first_component_on_horizontal_line() {
        let g = h1();
        let omega = quasi_riesz(&g, NormKind::Smooth);
        let s = 0.25;
        let v = [0.6, 0.8];
        let p = [s * v[0], s * v[1], 0.0];
        assert!((omega[0].eval(&p) - v[0] / s).abs() < 1e-13);
    }

    #[test]
    fn lp_piece_support() {
        let g = h1();
        let k: SharedKernel = Arc::new(InverseDistance::new(g.clone(), 1, NormKind::Smooth));
        let psi = BumpProfile::standard();
        for j in [-3, 0, 4] {
            let piece = lp_piece(k.clone(), j, psi);
            let outer = 2f64.powi(-(j - 1));
            let inner = 2f64.powi(-(j + 2));
            for r in [outer, outer * 1.5, inner, inner * 0.5] {
                let p = g.dilate(r, &[1.0, 0.0, 0.0]).unwrap();
                assert_eq!(piece.eval(&p), 0.0, "j={j} r={r}");
            }
        }
    }

    #[test]
    fn parse_specs() {
        let g = h1();
        assert_eq!(parse_kernel(&g, "vriesz:2").unwrap().info().name, "vriesz:2");
        assert_eq!(parse_kernel(&g, "quasi:3").unwrap().info().name, "quasi:3");
        assert_eq!(parse_kernel(&g, "inv-dist@hom").unwrap().info().metric, NormKind::Hom);
        assert!(parse_kernel(&g, "quasi:4").is_err());
        assert!(parse_kernel(&g, "vriesz").is_err());
        assert!(parse_kernel(&g, "riesz:2").is_err());
    }
}
