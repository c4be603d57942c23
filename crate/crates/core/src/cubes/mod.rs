//! Christ dyadic cubes on a weighted point set and the discrete
//! Hardy–Littlewood maximal function.
//!
//! Cubes come from nested greedy nets: `Z_j` is a maximal
//! `2^{-j}/4`-separated subset containing `Z_{j-1}`. Every point joins the
//! cube of its nearest finest-scale centre, and every centre of `Z_{j+1}`
//! joins the cube of its nearest centre in `Z_j`. Ties go to the centre
//! listed first in its net, so centres inherited from coarser nets win.
//! For parents a tie is anything within [`PARENT_TIE_BAND`]`·2^{-j}` of the
//! nearest distance.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::group::NormKind;
use crate::measure::{self, DiscreteMeasure, RegularityEstimate, SortedIndex, TIE_TOLERANCE};

/// Net separation as a fraction of `2^{-j}`.
pub const NET_SEPARATION: f64 = 0.25;

/// Slack, as a fraction of `2^{-j}`, within which coarse centres tie.
pub const PARENT_TIE_BAND: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChristOptions {
    pub metric: NormKind,
    /// Reject measures whose regularity constant exceeds this; `None` skips the gate.
    pub regularity_limit: Option<f64>,
    /// Known mesh spacing; computed from nearest neighbours when absent.
    pub mesh: Option<f64>,
    /// Finest scale is lowered until every cube has at least this many points.
    pub min_cube_points: usize,
    /// Constant for the centre-ball containment check; the measured `c_o` when absent.
    pub containment_constant: Option<f64>,
}

impl Default for ChristOptions {
    fn default() -> Self {
        Self {
            metric: NormKind::Smooth,
            regularity_limit: Some(32.0),
            mesh: None,
            min_cube_points: 4,
            containment_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub id: usize,
    pub j: i32,
    /// Point index of `z_Q`.
    pub center: usize,
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub mass: f64,
}

/// Violation counts from the exhaustive structural check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub partition_violations: usize,
    pub nesting_violations: usize,
    pub diameter_violations: usize,
    pub containment_violations: usize,
    /// `max diam(Q) 2^j`.
    pub max_scaled_diameter: f64,
    pub containment_constant: f64,
}

impl StructureReport {
    pub fn total_violations(&self) -> usize {
        self.partition_violations + self.nesting_violations + self.diameter_violations + self.containment_violations
    }
}

#[derive(Debug, Clone)]
pub struct ChristTree {
    measure: DiscreteMeasure,
    metric: NormKind,
    j_min: i32,
    j_max: i32,
    requested_j_max: i32,
    cubes: Vec<Cube>,
    levels: Vec<Vec<usize>>,
    c_o: f64,
    mesh: f64,
    regularity: Option<RegularityEstimate>,
}

/// Builds cubes for scales `j_min..=j_max`.
pub fn build_christ(measure: &DiscreteMeasure, j_min: i32, j_max: i32, options: &ChristOptions) -> Result<ChristTree> {
    if j_max < j_min {
        return Err(usage(format!("empty scale range [{j_min}, {j_max}]")));
    }
    if measure.len() < options.min_cube_points.max(1) {
        return Err(usage(format!("{} points cannot form cubes", measure.len())));
    }
    let metric = options.metric;
    let mesh = options.mesh.unwrap_or_else(|| measure::mesh(measure, metric));
    let mut top = j_max;
    if mesh > 0.0 {
        top = top.min((-(4.0 * mesh).log2()).floor() as i32);
    }
    if top < j_min {
        return Err(usage(format!(
            "scale range [{j_min}, {j_max}] is finer than four mesh spacings ({mesh})"
        )));
    }

    let regularity = match options.regularity_limit {
        Some(limit) => {
            let est = measure::estimate_regularity(measure, metric, 64, (-(top as f64)).exp2())?;
            if est.constant > limit {
                return Err(Error::Domain(format!(
                    "point set is not 1-regular at these scales: constant {} exceeds {limit}",
                    est.constant
                )));
            }
            Some(est)
        }
        None => None,
    };

    let nets = build_nets(measure, j_min, top, metric);
    loop {
        let (cubes, levels) = assemble(measure, &nets, j_min, top, metric);
        let smallest = levels.last().unwrap().iter().map(|&c| cubes[c].members.len()).min().unwrap_or(0);
        if smallest >= options.min_cube_points || top == j_min {
            if smallest < options.min_cube_points {
                return Err(usage(format!(
                    "no scale in [{j_min}, {j_max}] gives cubes of at least {} points",
                    options.min_cube_points
                )));
            }
            let mut tree = ChristTree {
                measure: measure.clone(),
                metric,
                j_min,
                j_max: top,
                requested_j_max: j_max,
                cubes,
                levels,
                c_o: 0.0,
                mesh,
                regularity,
            };
            tree.c_o = tree.measure_c_o();
            return Ok(tree);
        }
        top -= 1;
    }
}

/// Nested greedy nets, coarsest first. Each net lists point indices in
/// insertion order.
fn build_nets(measure: &DiscreteMeasure, j_min: i32, j_max: i32, metric: NormKind) -> Vec<Vec<usize>> {
    let g = measure.group();
    let mut nets: Vec<Vec<usize>> = Vec::new();
    let mut index = SortedIndex::default();
    let mut is_center = vec![false; measure.len()];
    let mut current: Vec<usize> = Vec::new();
    for j in j_min..=j_max {
        let sep = NET_SEPARATION * (-(j as f64)).exp2();
        for i in 0..measure.len() {
            if is_center[i] {
                continue;
            }
            let p = measure.point(i);
            let close = index.window(p[0], sep).iter().any(|&c| g.dist(p, measure.point(c), metric) < sep * (1.0 - TIE_TOLERANCE));
            if !close {
                is_center[i] = true;
                index.insert(p[0], i);
                current.push(i);
            }
        }
        nets.push(current.clone());
    }
    nets
}

fn nearest(
    measure: &DiscreteMeasure,
    index: &SortedIndex,
    p: &[f64],
    metric: NormKind,
    slack: f64,
) -> usize {
    index.nearest_within(measure, p, None, metric, slack).expect("nets are nonempty").0
}

fn assemble(
    measure: &DiscreteMeasure,
    nets: &[Vec<usize>],
    j_min: i32,
    j_max: i32,
    metric: NormKind,
) -> (Vec<Cube>, Vec<Vec<usize>>) {
    let levels_n = (j_max - j_min + 1) as usize;
    // owner[l][point] = centre of the level-l cube containing the point
    let mut owner: Vec<Vec<usize>> = vec![Vec::new(); levels_n];
    let finest = SortedIndex::new(measure, nets[levels_n - 1].iter().copied());
    owner[levels_n - 1] = (0..measure.len()).map(|i| nearest(measure, &finest, measure.point(i), metric, 0.0)).collect();
    for l in (0..levels_n - 1).rev() {
        let coarse = SortedIndex::new(measure, nets[l].iter().copied());
        let mut parent_of = vec![usize::MAX; measure.len()];
        let slack = PARENT_TIE_BAND * (-((j_min + l as i32) as f64)).exp2();
        for &z in &nets[l + 1] {
            parent_of[z] = nearest(measure, &coarse, measure.point(z), metric, slack);
        }
        owner[l] = owner[l + 1].iter().map(|&z| parent_of[z]).collect();
    }

    let mut cubes: Vec<Cube> = Vec::new();
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(levels_n);
    let mut cube_of_center: Vec<Vec<usize>> = vec![vec![usize::MAX; measure.len()]; levels_n];
    for l in 0..levels_n {
        let j = j_min + l as i32;
        let mut centers: Vec<usize> = nets[l].clone();
        centers.sort_unstable();
        let mut ids = Vec::with_capacity(centers.len());
        for &z in &centers {
            let id = cubes.len();
            cube_of_center[l][z] = id;
            cubes.push(Cube { id, j, center: z, members: Vec::new(), parent: None, children: Vec::new(), mass: 0.0 });
            ids.push(id);
        }
        for (i, &z) in owner[l].iter().enumerate() {
            let c = &mut cubes[cube_of_center[l][z]];
            c.members.push(i);
            c.mass += measure.weights()[i];
        }
        levels.push(ids);
    }
    for l in 1..levels_n {
        for &id in &levels[l] {
            let some_member = cubes[id].members.first().copied();
            if let Some(m) = some_member {
                let parent = cube_of_center[l - 1][owner[l - 1][m]];
                cubes[id].parent = Some(parent);
                cubes[parent].children.push(id);
            }
        }
    }
    (cubes, levels)
}

/// One row of the small-boundary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub rho: f64,
    /// `max_Q μ({q ∈ Q : d(q, G∖Q) ≤ ρ 2^{-j}}) / μ(Q)`.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStats {
    pub rows: Vec<BoundaryRow>,
    /// Smallest `C` with `ratio ≤ C ρ^{1/C}` on every row.
    pub c_boundary: f64,
}

impl ChristTree {
    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn metric(&self) -> NormKind {
        self.metric
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    /// Finest scale actually built.
    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn requested_j_max(&self) -> i32 {
        self.requested_j_max
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn cube(&self, id: usize) -> &Cube {
        &self.cubes[id]
    }

    /// Cube ids at scale `j`.
    pub fn level(&self, j: i32) -> &[usize] {
        &self.levels[(j - self.j_min) as usize]
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    /// Measured generation constant `min_Q d(z_Q, G∖Q) 2^j`.
    pub fn c_o(&self) -> f64 {
        self.c_o
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn regularity(&self) -> Option<&RegularityEstimate> {
        self.regularity.as_ref()
    }

    fn membership(&self, j: i32) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.measure.len()];
        for &id in self.level(j) {
            for &m in &self.cubes[id].members {
                owner[m] = id;
            }
        }
        owner
    }

    fn measure_c_o(&self) -> f64 {
        let index = SortedIndex::all(&self.measure);
        let mut c = f64::INFINITY;
        for j in self.scales() {
            let owner = self.membership(j);
            let scale = (j as f64).exp2();
            let level_min = self
                .level(j)
                .par_iter()
                .map(|&id| {
                    let z = self.measure.point(self.cubes[id].center);
                    index
                        .nearest_where(&self.measure, z, self.metric, f64::INFINITY, |i| owner[i] != id)
                        .map_or(f64::INFINITY, |(_, d)| d)
                })
                .reduce(|| f64::INFINITY, f64::min);
            c = c.min(level_min * scale);
        }
        c
    }

    /// Exhaustive check of partition, nesting, diameter and centre-ball
    /// containment at every scale.
    pub fn check_structure(&self, containment_constant: Option<f64>) -> StructureReport {
        let c_o = containment_constant.unwrap_or(self.c_o);
        let g = self.measure.group();
        let n = self.measure.len();
        let index = SortedIndex::all(&self.measure);
        let mut report = StructureReport { containment_constant: c_o, ..Default::default() };
        for j in self.scales() {
            let mut count = vec![0usize; n];
            for &id in self.level(j) {
                for &m in &self.cubes[id].members {
                    count[m] += 1;
                }
            }
            report.partition_violations += count.iter().filter(|&&c| c != 1).count();

            let owner = self.membership(j);
            if j > self.j_min {
                let parent_owner = self.membership(j - 1);
                for &id in self.level(j) {
                    let cube = &self.cubes[id];
                    let ok = match cube.parent {
                        Some(p) => cube.members.iter().all(|&m| parent_owner[m] == p),
                        None => false,
                    };
                    if !ok {
                        report.nesting_violations += 1;
                    }
                }
            }

            let limit = (-(j as f64)).exp2();
            let diam: Vec<f64> = self
                .level(j)
                .par_iter()
                .map(|&id| {
                    let members = &self.cubes[id].members;
                    let mut d = 0.0f64;
                    for (a, &p) in members.iter().enumerate() {
                        for &q in &members[a + 1..] {
                            d = d.max(g.dist(self.measure.point(p), self.measure.point(q), self.metric));
                        }
                    }
                    d
                })
                .collect();
            for d in diam {
                if d > limit {
                    report.diameter_violations += 1;
                }
                report.max_scaled_diameter = report.max_scaled_diameter.max(d / limit);
            }

            let radius = c_o * limit;
            for &id in self.level(j) {
                let z = self.measure.point(self.cubes[id].center);
                let breach = index
                    .nearest_where(&self.measure, z, self.metric, radius, |i| owner[i] != id)
                    .is_some_and(|(_, d)| d < radius);
                if breach {
                    report.containment_violations += 1;
                }
            }
        }
        report
    }

    /// Small-boundary ratios for each `ρ` in `rhos`, over every scale with
    /// more than one cube.
    pub fn small_boundary_stats(&self, rhos: &[f64]) -> Result<BoundaryStats> {
        if let Some(r) = rhos.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(usage(format!("ρ must lie in (0, 1], got {r}")));
        }
        let index = SortedIndex::all(&self.measure);
        let rho_max = rhos.iter().cloned().fold(0.0, f64::max);
        let mut max_ratio = vec![0.0f64; rhos.len()];
        for j in self.scales() {
            if self.level(j).len() < 2 {
                continue;
            }
            let owner = self.membership(j);
            let reach = rho_max * (-(j as f64)).exp2();
            // distance to the complement, capped at `reach`
            let boundary: Vec<f64> = (0..self.measure.len())
                .into_par_iter()
                .map(|i| {
                    let p = self.measure.point(i);
                    index
                        .nearest_where(&self.measure, p, self.metric, reach, |k| owner[k] != owner[i])
                        .map_or(f64::INFINITY, |(_, d)| d)
                })
                .collect();
            for &id in self.level(j) {
                let cube = &self.cubes[id];
                for (r, rho) in rhos.iter().enumerate() {
                    let cut = rho * (-(j as f64)).exp2();
                    let mass: f64 =
                        cube.members.iter().filter(|&&m| boundary[m] <= cut).map(|&m| self.measure.weights()[m]).sum();
                    max_ratio[r] = max_ratio[r].max(mass / cube.mass);
                }
            }
        }
        let rows: Vec<BoundaryRow> =
            rhos.iter().zip(&max_ratio).map(|(&rho, &max_ratio)| BoundaryRow { rho, max_ratio }).collect();
        let c_boundary = fit_boundary_constant(&rows);
        Ok(BoundaryStats { rows, c_boundary })
    }

    /// JSON array of `{j, center_index, member_count, parent_id}`.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            id: usize,
            j: i32,
            center_index: usize,
            member_count: usize,
            parent_id: Option<usize>,
        }
        let rows: Vec<Row> = self
            .cubes
            .iter()
            .map(|c| Row { id: c.id, j: c.j, center_index: c.center, member_count: c.members.len(), parent_id: c.parent })
            .collect();
        serde_json::to_writer_pretty(out, &rows)?;
        Ok(())
    }
}

/// `C ρ^{1/C}` increases with `C` for `ρ < 1`, so bisection finds the least
/// admissible `C ≥ 1`.
pub fn fit_boundary_constant(rows: &[BoundaryRow]) -> f64 {
    let fits = |c: f64| rows.iter().all(|r| r.max_ratio <= c * r.rho.powf(1.0 / c) * (1.0 + 1e-12));
    let mut hi = 1.0;
    while !fits(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    if hi == 1.0 {
        return 1.0;
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `M_μ f(p_i)`: the largest weighted average of `|f|` over closed balls
/// centred at `p_i`, one per distinct distance.
pub fn maximal_function(measure: &DiscreteMeasure, f: &[f64], i: usize, metric: NormKind) -> Result<f64> {
    if f.len() != measure.len() {
        return Err(usage(format!("f has {} values for {} points", f.len(), measure.len())));
    }
    let mut by_dist: Vec<(f64, usize)> = (0..measure.len()).map(|k| (measure.dist(k, i, metric), k)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let w = measure.weights();
    let (mut mass, mut integral, mut best) = (0.0, 0.0, 0.0f64);
    for (pos, &(d, k)) in by_dist.iter().enumerate() {
        mass += w[k];
        integral += f[k].abs() * w[k];
        let last_at_radius = by_dist.get(pos + 1).is_none_or(|next| next.0 > d);
        if last_at_radius {
            best = best.max(integral / mass);
        }
    }
    Ok(best)
}

/// [`maximal_function`] at every point.
pub fn maximal_function_all(measure: &DiscreteMeasure, f: &[f64], metric: NormKind) -> Result<Vec<f64>> {
    if f.len() != measure.len() {
        return Err(usage(format!("f has {} values for {} points", f.len(), measure.len())));
    }
    (0..measure.len()).into_par_iter().map(|i| maximal_function(measure, f, i, metric)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin;

    fn segment(n: usize) -> DiscreteMeasure {
        let g = builtin("heisenberg:1").unwrap();
        let mut coords = Vec::new();
        for k in 0..n {
            coords.extend_from_slice(&[(k as f64 + 0.5) / n as f64, 0.0, 0.0]);
        }
        DiscreteMeasure::new(g, coords, vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn segment_tree_is_valid() {
        let m = segment(1024);
        let tree = build_christ(&m, 0, 5, &ChristOptions::default()).unwrap();
        assert_eq!(tree.j_max(), 5);
        let report = tree.check_structure(None);
        assert_eq!(report.total_violations(), 0, "{report:?}");
        // ties resolved toward older centres put boundaries a third of a
        // net spacing from the centre, so c_o tends to 1/12
        assert!(tree.c_o() >= 0.06, "c_o = {}", tree.c_o());
        let finer = build_christ(&segment(2048), 0, 6, &ChristOptions::default()).unwrap();
        assert!(finer.c_o() >= 0.5 * tree.c_o() && finer.c_o() <= 2.0 * tree.c_o());
        for j in tree.scales() {
            let scaled: Vec<f64> =
                tree.level(j).iter().map(|&id| tree.cube(id).members.len() as f64 / (1024.0 * (-(j as f64)).exp2())).collect();
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scaled.iter().cloned().fold(0.0, f64::max);
            assert!(lo >= 0.1 && hi <= 1.0, "j = {j}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn finest_scale_is_capped_by_mesh() {
        let m = segment(256);
        let tree = build_christ(&m, 0, 12, &ChristOptions::default()).unwrap();
        assert!(tree.j_max() <= 6);
        assert_eq!(tree.requested_j_max(), 12);
        assert!(build_christ(&m, 3, 2, &ChristOptions::default()).is_err());
        assert!(build_christ(&m, 9, 12, &ChristOptions::default()).is_err());
    }

    fn two_clusters() -> DiscreteMeasure {
        let g = builtin("heisenberg:1").unwrap();
        let mut coords = Vec::new();
        for c in [0.0, 10.0] {
            for k in 0..8 {
                coords.extend_from_slice(&[c + k as f64 * 1e-3, 0.0, 0.0]);
            }
        }
        DiscreteMeasure::new(g, coords, vec![10.0; 16]).unwrap()
    }

    #[test]
    fn two_clusters_fail_the_gate_and_split_without_it() {
        let m = two_clusters();
        assert!(matches!(build_christ(&m, 0, 0, &ChristOptions::default()), Err(Error::Domain(_))));
        let opts = ChristOptions { regularity_limit: None, ..Default::default() };
        let tree = build_christ(&m, 0, 0, &opts).unwrap();
        assert_eq!(tree.level(0).len(), 2);
        let mut sizes: Vec<Vec<usize>> = tree.level(0).iter().map(|&id| tree.cube(id).members.clone()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![(0..8).collect::<Vec<_>>(), (8..16).collect::<Vec<_>>()]);
        assert_eq!(tree.check_structure(None).total_violations(), 0);
    }

    #[test]
    fn boundary_table_is_monotone_and_linear_on_segment() {
        let m = segment(1024);
        let tree = build_christ(&m, 1, 6, &ChristOptions::default()).unwrap();
        let rhos = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0];
        let stats = tree.small_boundary_stats(&rhos).unwrap();
        assert!(stats.rows.windows(2).all(|w| w[0].max_ratio <= w[1].max_ratio));
        assert!(stats.rows.last().unwrap().max_ratio <= 1.0);
        for r in &stats.rows {
            assert!(r.max_ratio <= stats.c_boundary * r.rho.powf(1.0 / stats.c_boundary) * (1.0 + 1e-9));
        }
        // cubes are at least 2^{-j}/8 long and lose ≈ 2ρ2^{-j} at the ends
        for r in stats.rows.iter().filter(|r| r.rho <= 0.0625) {
            assert!(r.max_ratio <= 20.0 * r.rho, "{stats:?}");
        }
        assert!(tree.small_boundary_stats(&[0.0]).is_err());
    }

    #[test]
    fn maximal_function_basics() {
        let m = segment(64);
        let ones = vec![-2.0; 64];
        for i in [0, 17, 63] {
            assert!((maximal_function(&m, &ones, i, NormKind::Smooth).unwrap() - 2.0).abs() < 1e-12);
        }
        let mut spike = vec![0.0; 64];
        spike[10] = 1.0;
        let v = maximal_function(&m, &spike, 12, NormKind::Smooth).unwrap();
        // ball of radius 2/64 around point 12 holds 5 points
        assert!(v >= 1.0 / 5.0 - 1e-12);
        assert!(maximal_function(&m, &spike[..3], 0, NormKind::Smooth).is_err());
    }

    #[test]
    fn json_export_lists_every_cube() {
        let m = segment(256);
        let tree = build_christ(&m, 0, 4, &ChristOptions::default()).unwrap();
        let mut buf = Vec::new();
        tree.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v.as_array().unwrap().len(), tree.cubes().len());
        assert!(v[0].get("member_count").is_some());
    }
}
