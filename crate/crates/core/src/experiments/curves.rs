//! `lift`, `flatness` and `area-formula`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{build_curve, ExperimentConfig, Outcome, Output, Verdict};
use crate::curves::{covering_integral, dyadic_scales, estimate_regularity, flatness_profile, integrate, Slope};
use crate::error::Result;

pub(crate) fn run_lift(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome> {
    let g = config.group()?;
    let c = &config.curve;
    let curve = build_curve(&g, &c.spec, c.points, c.interval)?;
    let mut w = out.writer("", "csv")?;
    curve.write_csv(&mut w)?;
    drop(w);
    let check = curve.velocity_field().check_on_grid(c.interval[0], c.interval[1], c.points.max(2) - 1);
    let regularity = estimate_regularity(&curve, config.metric)?;
    let finite = (0..curve.len()).all(|k| curve.point(k).iter().all(|v| v.is_finite()));
    let limit = config.thresholds.regularity_limit;
    let verdicts = vec![
        Verdict::new("finite", finite, "all lifted coordinates finite"),
        Verdict::new("speed-floor", check.speed_floor > 0.0, format!("min |h| = {}", check.speed_floor)),
        Verdict::new(
            "regularity",
            regularity.constant <= limit,
            format!("1-regularity constant {} (limit {limit})", regularity.constant),
        ),
    ];
    let mesh = curve.mesh(config.metric);
    let metrics = BTreeMap::from([
        ("length".to_string(), curve.length()),
        ("regularity".to_string(), regularity.constant),
    ]);
    let summary = serde_json::json!({
        "curve": c.spec,
        "points": curve.len(),
        "interval": c.interval,
        "alpha": curve.alpha(),
        "length": curve.length(),
        "mesh": mesh,
        "velocity_check": check,
        "regularity": regularity,
    });
    Ok(Outcome { verdicts, summary, metrics })
}

#[derive(Debug, Serialize)]
struct FlatnessCsvRow<'a> {
    curve: &'a str,
    t0: f64,
    scale: f64,
    sup_distance: f64,
}

pub(crate) fn run_flatness(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome> {
    let g = config.group()?;
    let fc = &config.flatness;
    let scales = dyadic_scales(fc.scale_exponents[0], fc.scale_exponents[1]);
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut metrics = BTreeMap::new();
    let mut fits = Vec::new();
    for spec in &fc.curves {
        let curve = build_curve(&g, spec, fc.points, fc.interval)?;
        let profile = flatness_profile(&curve, fc.t0, &scales, config.metric)?;
        let expected = 1.0 + curve.alpha() / g.step() as f64;
        let required = expected - config.thresholds.slope_tolerance;
        let (pass, detail) = match profile.slope {
            Slope::Flat => (true, "curve coincides with its tangent line (flat sentinel)".to_string()),
            Slope::Fitted(s) => {
                metrics.insert(format!("{spec}.slope"), s);
                (s >= required, format!("fitted slope {s:.4}, expected {expected:.4}, required ≥ {required:.4}"))
            }
        };
        verdicts.push(Verdict::new(format!("{spec}:slope"), pass, detail));
        fits.push(serde_json::json!({
            "curve": spec,
            "alpha": curve.alpha(),
            "step": g.step(),
            "fitted_slope": profile.slope,
            "expected": expected,
            "required": required,
            "pass": pass,
        }));
        for r in &profile.rows {
            rows.push(FlatnessCsvRow { curve: spec, t0: fc.t0, scale: r.scale, sup_distance: r.sup_distance });
        }
    }
    out.csv("", &rows)?;
    Ok(Outcome { verdicts, summary: serde_json::json!({ "fits": fits }), metrics })
}

#[derive(Debug, Serialize)]
struct AreaRow<'a> {
    support: &'a str,
    eta: &'static str,
    area_formula: f64,
    covering: f64,
    relative_gap: f64,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub(crate) fn run_area_formula(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome> {
    let g = config.group()?;
    let c = &config.curve;
    let th = &config.thresholds;
    let etas: [(&'static str, fn(&[f64]) -> f64); 3] =
        [("one", |_| 1.0), ("x1", |p| p[0]), ("x2", |p| p[1])];
    let mut supports = vec![("hline".to_string(), build_curve(&g, "hline", c.points, c.interval)?)];
    if c.spec != "hline" {
        supports.push((c.spec.clone(), build_curve(&g, &c.spec, c.points, c.interval)?));
    }
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut metrics = BTreeMap::new();
    for (name, curve) in &supports {
        for (eta_name, eta) in etas {
            let a = integrate(curve, eta)?;
            let b = covering_integral(curve, eta, th.covering_delta, config.metric)?;
            let gap = relative_gap(a, b);
            verdicts.push(Verdict::new(
                format!("{name}:{eta_name}:covering"),
                gap <= th.area_agreement,
                format!("area formula {a}, covering {b}, gap {gap:.3e} (limit {})", th.area_agreement),
            ));
            metrics.insert(format!("{name}.{eta_name}"), a);
            rows.push(AreaRow { support: name, eta: eta_name, area_formula: a, covering: b, relative_gap: gap });
        }
    }
    let (a, b) = (c.interval[0], c.interval[1]);
    let line = &supports[0].1;
    let length = integrate(line, |_| 1.0)?;
    let first = integrate(line, |p| p[0])?;
    verdicts.push(Verdict::new(
        "hline:one:exact",
        (length - (b - a)).abs() <= th.exact_tolerance,
        format!("{length} vs {}", b - a),
    ));
    let expected = 0.5 * (b - a) * (b - a);
    verdicts.push(Verdict::new(
        "hline:x1:exact",
        (first - expected).abs() <= th.exact_tolerance,
        format!("{first} vs {expected}"),
    ));
    out.csv("", &rows)?;
    Ok(Outcome { verdicts, summary: serde_json::json!({ "rows": rows.len(), "delta": th.covering_delta }), metrics })
}
