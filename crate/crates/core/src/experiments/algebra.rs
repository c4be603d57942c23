//! `group-info`: structure summary and sampled group-law identities.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ExperimentConfig, Outcome, Output, Verdict};
use crate::error::Result;
use crate::group::{parse_group_spec, CarnotGroup, NormKind};

#[derive(Debug, Serialize)]
struct CheckRow {
    group: String,
    check: &'static str,
    samples: usize,
    max_error: f64,
    tolerance: f64,
    violations: usize,
}

#[derive(Debug, Default)]
struct Tally {
    max_error: f64,
    violations: usize,
}

impl Tally {
    fn record(&mut self, err: f64, tol: f64) {
        self.max_error = self.max_error.max(err);
        if !(err <= tol) {
            self.violations += 1;
        }
    }
}

/// `max_i |a_i - b_i| / (1 + max_i |a_i|)`.
fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// The closed-form `H^n` law with `[X_i, X_{n+i}] = X_{2n+1}`.
fn heisenberg_product(n: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let omega: f64 = (0..n).map(|i| x[i] * y[n + i] - x[n + i] * y[i]).sum();
    out[2 * n] += 0.5 * omega;
    out
}

fn check_group(g: &CarnotGroup, spec: &str, samples: usize, seed: u64, config: &ExperimentConfig) -> Vec<CheckRow> {
    let th = &config.thresholds;
    let dim = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let heisenberg_n = spec.strip_prefix("heisenberg:").and_then(|n| n.parse::<usize>().ok());
    let names = ["associativity", "inverse", "identity", "dilation-automorphism", "dilation-composition", "q-homogeneity"];
    let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    let mut oracle = Tally::default();
    let zero = g.identity();
    let mut q1 = vec![0.0; dim];
    let mut q2 = vec![0.0; dim];
    for _ in 0..samples {
        let (x, y, z) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let t: f64 = rng.gen_range(0.25..4.0);
        let u: f64 = rng.gen_range(0.25..4.0);
        let xy = g.mul(&x, &y);
        let lhs = g.mul(&xy, &z);
        let rhs = g.mul(&x, &g.mul(&y, &z));
        tallies[0].record(rel_gap(&lhs, &rhs), th.group_tolerance);

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let e = rel_gap(&g.mul(&x, &neg), &zero).max(rel_gap(&g.mul(&neg, &x), &zero));
        tallies[1].record(e, th.group_tolerance);

        let e = rel_gap(&g.mul(&x, &zero), &x).max(rel_gap(&g.mul(&zero, &x), &x));
        tallies[2].record(e, th.group_tolerance);

        let dt = |p: &[f64], s: f64| {
            let mut o = vec![0.0; dim];
            g.dilate_into(s, p, &mut o);
            o
        };
        let e = rel_gap(&dt(&xy, t), &g.mul(&dt(&x, t), &dt(&y, t)));
        tallies[3].record(e, th.group_tolerance);
        let e = rel_gap(&dt(&dt(&x, t), u), &dt(&x, u * t));
        tallies[4].record(e, th.group_tolerance);

        g.bch_q_into(&dt(&x, t), &dt(&y, t), &mut q1);
        g.bch_q_into(&x, &y, &mut q2);
        let e = rel_gap(&q1, &dt(&q2, t));
        tallies[5].record(e, th.homogeneity_tolerance);

        if let Some(n) = heisenberg_n {
            oracle.record(rel_gap(&xy, &heisenberg_product(n, &x, &y)), th.oracle_tolerance);
        }
    }
    let tolerances = [
        th.group_tolerance,
        th.group_tolerance,
        th.group_tolerance,
        th.group_tolerance,
        th.group_tolerance,
        th.homogeneity_tolerance,
    ];
    let mut rows: Vec<CheckRow> = names
        .iter()
        .zip(tallies)
        .zip(tolerances)
        .map(|((&check, t), tolerance)| CheckRow {
            group: spec.to_string(),
            check,
            samples,
            max_error: t.max_error,
            tolerance,
            violations: t.violations,
        })
        .collect();
    if heisenberg_n.is_some() {
        rows.push(CheckRow {
            group: spec.to_string(),
            check: "closed-form-oracle",
            samples,
            max_error: oracle.max_error,
            tolerance: th.oracle_tolerance,
            violations: oracle.violations,
        });
    }
    rows
}

pub(crate) fn run_group_info(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut groups = Vec::new();
    let mut metrics = BTreeMap::new();
    for spec in &config.group_info.groups {
        let g = parse_group_spec(spec)?;
        let checks = check_group(&g, spec, config.group_info.samples, config.seed, config);
        for c in &checks {
            verdicts.push(Verdict::new(
                format!("{spec}:{}", c.check),
                c.violations == 0,
                format!("max error {:.3e} over {} samples (tolerance {:.0e})", c.max_error, c.samples, c.tolerance),
            ));
        }
        let triangle = [NormKind::Hom, NormKind::Smooth].map(|k| g.triangle_violations(k, 10_000, config.seed));
        verdicts.push(Verdict::new(
            format!("{spec}:triangle-inequality"),
            triangle == [0, 0],
            format!("violations: hom {}, smooth {}", triangle[0], triangle[1]),
        ));
        let comparison = g.norm_comparison(10_000, config.seed);
        metrics.insert(format!("{spec}.smooth_over_hom_upper"), comparison.upper);
        metrics.insert(format!("{spec}.smooth_over_hom_lower"), comparison.lower);
        groups.push(serde_json::json!({
            "spec": spec,
            "name": g.name(),
            "dim": g.dim(),
            "step": g.step(),
            "layer_dims": g.layer_dims(),
            "degrees": g.degrees(),
            "homogeneous_dim": g.homogeneous_dim(),
            "norm_weights": g.norm_weights(),
            "bch_terms": g.bch_terms(),
            "certificate": g.certificate(),
            "norm_comparison": comparison,
        }));
        rows.extend(checks);
    }
    out.csv("", &rows)?;
    Ok(Outcome { verdicts, summary: serde_json::json!({ "groups": groups }), metrics })
}
