//! `christ`: dyadic cubes on the curve measure.

use std::collections::BTreeMap;

use serde::Serialize;

use super::operators::christ_tree;
use super::{build_curve, ExperimentConfig, Outcome, Output, Verdict};
use crate::error::Result;

#[derive(Debug, Serialize)]
struct ScaleRow {
    j: i32,
    cubes: usize,
    min_points: usize,
    max_points: usize,
    min_mass: f64,
    max_mass: f64,
}

pub(crate) fn run_christ(config: &ExperimentConfig, out: &mut Output) -> Result<Outcome> {
    let g = config.group()?;
    let c = &config.curve;
    let curve = build_curve(&g, &c.spec, c.points, c.interval)?;
    let measure = curve.measure();
    let tree = christ_tree(config, &measure)?;
    let report = tree.check_structure(None);
    let stats = tree.small_boundary_stats(&config.christ.rhos)?;

    let mut scales = Vec::new();
    for j in tree.scales() {
        let level = tree.level(j);
        let pts = level.iter().map(|&id| tree.cube(id).members.len());
        let mass = level.iter().map(|&id| tree.cube(id).mass);
        scales.push(ScaleRow {
            j,
            cubes: level.len(),
            min_points: pts.clone().min().unwrap_or(0),
            max_points: pts.max().unwrap_or(0),
            min_mass: mass.clone().fold(f64::INFINITY, f64::min),
            max_mass: mass.fold(0.0, f64::max),
        });
    }
    let mut rows = stats.rows.clone();
    rows.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let monotone = rows.windows(2).all(|w| w[0].max_ratio <= w[1].max_ratio);

    let w = out.writer("tree", "json")?;
    tree.write_json(w)?;
    out.csv("boundary", &rows)?;
    out.csv("scales", &scales)?;

    let verdicts = vec![
        Verdict::new(
            "structure",
            report.total_violations() == 0,
            format!(
                "partition {}, nesting {}, diameter {}, containment {}",
                report.partition_violations,
                report.nesting_violations,
                report.diameter_violations,
                report.containment_violations
            ),
        ),
        Verdict::new("c_o", tree.c_o() > 0.0, format!("inner-ball constant {:.4}", tree.c_o())),
        Verdict::new("boundary-monotone", monotone, "boundary ratio nondecreasing in ρ"),
        Verdict::new(
            "boundary-constant",
            stats.c_boundary.is_finite(),
            format!("C_∂ = {:.4}", stats.c_boundary),
        ),
    ];
    let metrics = BTreeMap::from([
        ("c_o".to_string(), tree.c_o()),
        ("c_boundary".to_string(), stats.c_boundary),
    ]);
    Ok(Outcome {
        verdicts,
        summary: serde_json::json!({
            "scales": [tree.j_min(), tree.j_max()],
            "requested_j_max": tree.requested_j_max(),
            "mesh": tree.mesh(),
            "regularity": tree.regularity(),
            "structure": report,
            "boundary": stats,
            "levels": scales,
        }),
        metrics,
    })
}
