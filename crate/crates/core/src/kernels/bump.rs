use std::fmt;

use crate::error::{domain, Result};

/// Radial cut-off `ψ` with `χ_{[0,1/2]} ≤ ψ ≤ χ_{[0,2]}`.
#[derive(Clone, Copy)]
pub struct BumpProfile {
    profile: fn(f64) -> f64,
    name: &'static str,
}

impl fmt::Debug for BumpProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("BumpProfile").field(&self.name).finish()
    }
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self::standard()
    }
}

fn smooth_step_weight(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// `g(2-r) / (g(2-r) + g(r-1/2))` with `g(u) = e^{-1/u}` on the transition band.
fn standard_profile(r: f64) -> f64 {
    if r <= 0.5 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let a = smooth_step_weight(2.0 - r);
    let b = smooth_step_weight(r - 0.5);
    a / (a + b)
}

impl BumpProfile {
    /// The C^∞ profile built from `e^{-1/u}`.
    pub fn standard() -> Self {
        Self { profile: standard_profile, name: "standard" }
    }

    /// A caller-supplied profile; run [`BumpProfile::validate`] before use.
    pub fn custom(name: &'static str, profile: fn(f64) -> f64) -> Self {
        Self { profile, name }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.profile)(r)
    }

    /// Checks the sandwich bounds, monotonicity on `[1/2, 2]`, and continuity
    /// of `ψ` and `ψ'` on a uniform grid of `[0, 3]`.
    pub fn validate(&self, grid: usize) -> Result<()> {
        let h = 3.0 / grid as f64;
        let mut prev = self.eval(0.0);
        let mut prev_slope = 0.0;
        for k in 1..=grid {
            let r = k as f64 * h;
            let v = self.eval(r);
            if !(0.0..=1.0).contains(&v) {
                return Err(domain(format!("ψ({r}) = {v} outside [0, 1]")));
            }
            if r <= 0.5 && v != 1.0 {
                return Err(domain(format!("ψ must equal 1 on [0, 1/2], ψ({r}) = {v}")));
            }
            if r >= 2.0 && v != 0.0 {
                return Err(domain(format!("ψ must vanish on [2, ∞), ψ({r}) = {v}")));
            }
            if v > prev {
                return Err(domain(format!("ψ is not monotone near r = {r}")));
            }
            // jumps in ψ or ψ' show up as O(1) changes in value or slope per step
            let slope = (v - prev) / h;
            if (v - prev).abs() > 50.0 * h || (slope - prev_slope).abs() > 50.0 * h.sqrt() {
                return Err(domain(format!("ψ or ψ' is discontinuous near r = {r}")));
            }
            prev = v;
            prev_slope = slope;
        }
        Ok(())
    }
}
