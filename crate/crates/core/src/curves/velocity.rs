use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};

type VelocityFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// First-layer velocity `h: [a, b] → R^n` of a `C^{1,α}` horizontal curve.
#[derive(Clone)]
pub struct HorizontalVelocity {
    name: String,
    n: usize,
    alpha: f64,
    holder_constant: f64,
    f: Arc<VelocityFn>,
}

impl fmt::Debug for HorizontalVelocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HorizontalVelocity")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("alpha", &self.alpha)
            .field("holder_constant", &self.holder_constant)
            .finish()
    }
}

impl HorizontalVelocity {
    /// Wraps `f(t, out)`, which writes `h(t)` into the first `n` slots of `out`.
    pub fn new<F>(name: impl Into<String>, n: usize, alpha: f64, holder_constant: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(domain(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
        }
        if !(holder_constant >= 0.0) {
            return Err(domain(format!("Hölder constant must be nonnegative, got {holder_constant}")));
        }
        Ok(Self { name: name.into(), n, alpha, holder_constant, f: Arc::new(f) })
    }

    /// `h ≡ e_1`.
    pub fn line(n: usize) -> Self {
        Self::new("hline", n, 1.0, 1.0, |_, out| {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[0] = 1.0;
        })
        .expect("valid constants")
    }

    /// `h(t) = (cos t, sin t)`: lifts the unit circle.
    pub fn circle(n: usize) -> Result<Self> {
        require_plane(n, "circle-lift")?;
        Self::new("circle-lift", n, 1.0, 1.0, |t, out| {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[0] = t.cos();
            out[1] = t.sin();
        })
    }

    /// `h(t) = (1, C |t|^α)`, non-smooth at `t = 0`.
    pub fn holder(n: usize, alpha: f64, constant: f64) -> Result<Self> {
        require_plane(n, "holder")?;
        Self::new(format!("holder:{alpha}:{constant}"), n, alpha, constant.max(1.0), move |t, out| {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[0] = 1.0;
            out[1] = constant * t.abs().powf(alpha);
        })
    }

    /// `h(t) = (1, A sin(ω t))`.
    pub fn perturbed_line(n: usize, amplitude: f64, frequency: f64) -> Result<Self> {
        require_plane(n, "perturbed-line")?;
        Self::new(
            format!("perturbed-line:{amplitude}:{frequency}"),
            n,
            1.0,
            (amplitude * frequency).abs().max(1.0),
            move |t, out| {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = 1.0;
                out[1] = amplitude * (frequency * t).sin();
            },
        )
    }

    /// Parses `hline`, `circle-lift`, `holder:<α>:<C>` or `perturbed-line:<A>:<ω>`.
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| usage(format!("bad number `{s}` in curve spec `{spec}`")))
        };
        match parts.as_slice() {
            ["hline"] => Ok(Self::line(n)),
            ["circle-lift"] => Self::circle(n),
            ["holder", a, c] => Self::holder(n, num(a)?, num(c)?),
            ["holder", a] => Self::holder(n, num(a)?, 1.0),
            ["perturbed-line", a, w] => Self::perturbed_line(n, num(a)?, num(w)?),
            _ => Err(usage(format!("unknown curve generator `{spec}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn first_layer_dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    #[inline]
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, &mut out[..self.n]);
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.eval_into(t, &mut out);
        out
    }

    /// `min |h|` and the largest `|h(x) - h(y)| / |x - y|^α` over a grid of `[a, b]`.
    pub fn check_on_grid(&self, a: f64, b: f64, points: usize) -> VelocityCheck {
        let ts: Vec<f64> = (0..=points).map(|k| a + (b - a) * k as f64 / points as f64).collect();
        let hs: Vec<Vec<f64>> = ts.iter().map(|&t| self.eval(t)).collect();
        let speed_floor = hs.iter().map(|h| euclid(h)).fold(f64::INFINITY, f64::min);
        let mut holder = 0.0f64;
        // pairs at dyadic separations keep this O(points log points)
        let mut gap = 1;
        while gap <= points {
            for i in 0..=(points - gap) {
                let dh = euclid_diff(&hs[i], &hs[i + gap]);
                holder = holder.max(dh / (ts[i + gap] - ts[i]).powf(self.alpha));
            }
            gap *= 2;
        }
        VelocityCheck { speed_floor, measured_holder_constant: holder }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCheck {
    pub speed_floor: f64,
    pub measured_holder_constant: f64,
}

fn require_plane(n: usize, name: &str) -> Result<()> {
    if n < 2 {
        Err(usage(format!("`{name}` needs a first layer of dimension ≥ 2, got {n}")))
    } else {
        Ok(())
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn euclid_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_report_declared_holder_data() {
        let h = HorizontalVelocity::holder(2, 0.5, 1.0).unwrap();
        let check = h.check_on_grid(-1.0, 1.0, 4096);
        assert!(check.speed_floor >= 1.0);
        assert!(check.measured_holder_constant <= h.holder_constant() + 1e-12, "{check:?}");

        let c = HorizontalVelocity::circle(2).unwrap();
        let check = c.check_on_grid(0.0, 6.0, 4096);
        assert!((check.speed_floor - 1.0).abs() < 1e-12);
        assert!(check.measured_holder_constant <= 1.0 + 1e-12);
    }

    #[test]
    fn parse_rejects_unknown_and_low_dimension() {
        assert!(HorizontalVelocity::parse("spiral", 2).is_err());
        assert!(HorizontalVelocity::parse("circle-lift", 1).is_err());
        assert!(HorizontalVelocity::parse("holder:1.5:1", 2).is_err());
        assert_eq!(HorizontalVelocity::parse("perturbed-line:0.1:3", 2).unwrap().alpha(), 1.0);
    }
}
