//! Weighted point sets standing in for `H¹` restricted to a curve.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::group::{CarnotGroup, GroupPoint, NormKind};

/// Finite measure `Σ w_k δ_{p_k}` on a group.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    group: Arc<CarnotGroup>,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// `coords` holds the points back to back, `dim` values each.
    pub fn new(group: Arc<CarnotGroup>, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let dim = group.dim();
        if coords.len() != dim * weights.len() {
            return Err(usage(format!(
                "{} coordinates do not describe {} points of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(usage(format!("weights must be positive and finite, found {w}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(usage("point coordinates must be finite"));
        }
        Ok(Self { group, coords, weights })
    }

    pub fn from_points(points: &[GroupPoint], weights: Vec<f64>) -> Result<Self> {
        let group = points.first().map(|p| p.group().clone()).ok_or_else(|| usage("empty point set"))?;
        let mut coords = Vec::with_capacity(points.len() * group.dim());
        for p in points {
            if **p.group() != *group {
                return Err(usage("points belong to different groups"));
            }
            coords.extend_from_slice(p.coords());
        }
        Self::new(group, coords, weights)
    }

    pub fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.group.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Restriction to the listed indices, in order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.group.dim());
        let mut weights = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i]);
        }
        Self::new(self.group.clone(), coords, weights)
    }

    /// Left translation of every point by `x`.
    pub fn translate(&self, x: &[f64]) -> Self {
        let d = self.group.dim();
        let mut coords = vec![0.0; self.coords.len()];
        for i in 0..self.len() {
            self.group.mul_into(x, self.point(i), &mut coords[i * d..(i + 1) * d]);
        }
        Self { group: self.group.clone(), coords, weights: self.weights.clone() }
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize, metric: NormKind) -> f64 {
        self.group.dist(self.point(i), self.point(j), metric)
    }

    /// Exact diameter, `O(n²)`.
    pub fn diameter(&self, metric: NormKind) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.max(self.dist(i, j, metric));
            }
        }
        best
    }

    /// `μ(B(p_i, r))` for the closed ball.
    pub fn ball_mass(&self, i: usize, r: f64, metric: NormKind) -> f64 {
        (0..self.len()).filter(|&j| self.dist(i, j, metric) <= r).map(|j| self.weights[j]).sum()
    }
}

/// Result of a 1-regularity scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    /// `max(μ(B)/r, r/μ(B))` over the sampled centres and radii.
    pub constant: f64,
    pub centers: usize,
    pub radii: usize,
    pub min_radius: f64,
    pub max_radius: f64,
}

/// Scans `μ(B(p, r))/r` over up to `max_centers` evenly spaced centres and
/// dyadic radii `diam·2^{-k} ≥ min_radius`.
pub fn estimate_regularity(
    measure: &DiscreteMeasure,
    metric: NormKind,
    max_centers: usize,
    min_radius: f64,
) -> Result<RegularityEstimate> {
    if measure.len() < 2 {
        return Err(usage("regularity needs at least two points"));
    }
    estimate_regularity_below(measure, metric, max_centers, min_radius, measure.diameter(metric))
}

/// As [`estimate_regularity`] with dyadic radii starting at `max_radius`.
pub fn estimate_regularity_below(
    measure: &DiscreteMeasure,
    metric: NormKind,
    max_centers: usize,
    min_radius: f64,
    max_radius: f64,
) -> Result<RegularityEstimate> {
    if measure.len() < 2 {
        return Err(usage("regularity needs at least two points"));
    }
    let diam = max_radius;
    let mut radii = Vec::new();
    let mut r = diam;
    while r >= min_radius && radii.len() < 60 {
        radii.push(r);
        r *= 0.5;
    }
    if radii.is_empty() {
        return Err(usage(format!("minimum radius {min_radius} exceeds the diameter {diam}")));
    }
    let stride = (measure.len() / max_centers.max(1)).max(1);
    let centers: Vec<usize> = (0..measure.len()).step_by(stride).collect();
    let mut constant = 1.0f64;
    let mut dists = vec![0.0; measure.len()];
    for &c in &centers {
        for (j, d) in dists.iter_mut().enumerate() {
            *d = measure.dist(j, c, metric);
        }
        for &r in &radii {
            let mass: f64 =
                dists.iter().zip(measure.weights()).filter(|(d, _)| **d <= r).map(|(_, w)| w).sum();
            constant = constant.max(mass / r).max(r / mass);
        }
    }
    Ok(RegularityEstimate {
        constant,
        centers: centers.len(),
        radii: radii.len(),
        min_radius: *radii.last().unwrap(),
        max_radius: radii[0],
    })
}

/// Relative gap below which two distances count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Points sorted by their first coordinate.
///
/// Both norms dominate `|x_1 - y_1|`, so a window in the first coordinate
/// contains every point of a metric ball.
#[derive(Debug, Clone, Default)]
pub struct SortedIndex {
    keys: Vec<f64>,
    ids: Vec<usize>,
    /// Insertion rank, used to break distance ties.
    ranks: Vec<usize>,
}

impl SortedIndex {
    /// Ties in [`SortedIndex::nearest`], up to [`TIE_TOLERANCE`], go to whichever
    /// point `subset` lists first.
    pub fn new(measure: &DiscreteMeasure, subset: impl IntoIterator<Item = usize>) -> Self {
        let mut rows: Vec<(f64, usize, usize)> =
            subset.into_iter().enumerate().map(|(r, i)| (measure.point(i)[0], i, r)).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        Self {
            keys: rows.iter().map(|p| p.0).collect(),
            ids: rows.iter().map(|p| p.1).collect(),
            ranks: rows.iter().map(|p| p.2).collect(),
        }
    }

    /// Every point of `measure`.
    pub fn all(measure: &DiscreteMeasure) -> Self {
        Self::new(measure, 0..measure.len())
    }

    pub fn insert(&mut self, key: f64, id: usize) {
        let at = self.keys.partition_point(|&k| k <= key);
        let rank = self.ids.len();
        self.keys.insert(at, key);
        self.ids.insert(at, id);
        self.ranks.insert(at, rank);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Indices whose key lies in `[key - r, key + r]`.
    pub fn window(&self, key: f64, r: f64) -> &[usize] {
        let lo = self.keys.partition_point(|&k| k < key - r);
        let hi = self.keys.partition_point(|&k| k <= key + r);
        &self.ids[lo..hi]
    }

    /// Nearest indexed point to `p` with ties going to the lowest rank,
    /// skipping `exclude`.
    pub fn nearest(
        &self,
        measure: &DiscreteMeasure,
        p: &[f64],
        exclude: Option<usize>,
        metric: NormKind,
    ) -> Option<(usize, f64)> {
        self.nearest_within(measure, p, exclude, metric, 0.0)
    }

    /// Nearest indexed point accepted by `keep`, provided it lies within
    /// `cap` of `p`. Ties are not ranked.
    pub fn nearest_where(
        &self,
        measure: &DiscreteMeasure,
        p: &[f64],
        metric: NormKind,
        cap: f64,
        keep: impl Fn(usize) -> bool,
    ) -> Option<(usize, f64)> {
        let g = measure.group();
        let key = p[0];
        let start = self.keys.partition_point(|&k| k < key);
        let mut best: Option<(usize, f64)> = None;
        let (mut lo, mut hi) = (start, start);
        loop {
            let bound = best.map_or(cap, |b| b.1.min(cap));
            let left = lo.checked_sub(1).filter(|&l| key - self.keys[l] <= bound);
            let right = (hi < self.keys.len() && self.keys[hi] - key <= bound).then_some(hi);
            let pick = match (left, right) {
                (None, None) => break,
                (Some(l), None) => {
                    lo = l;
                    l
                }
                (None, Some(r)) => {
                    hi = r + 1;
                    r
                }
                (Some(l), Some(r)) => {
                    if key - self.keys[l] <= self.keys[r] - key {
                        lo = l;
                        l
                    } else {
                        hi = r + 1;
                        r
                    }
                }
            };
            let id = self.ids[pick];
            if !keep(id) {
                continue;
            }
            let d = g.dist(p, measure.point(id), metric);
            if d <= cap && best.is_none_or(|b| d < b.1) {
                best = Some((id, d));
            }
        }
        best
    }

    /// As [`SortedIndex::nearest`], but any point within `slack` of the
    /// closest distance also counts as tied.
    pub fn nearest_within(
        &self,
        measure: &DiscreteMeasure,
        p: &[f64],
        exclude: Option<usize>,
        metric: NormKind,
        slack: f64,
    ) -> Option<(usize, f64)> {
        let g = measure.group();
        let key = p[0];
        let start = self.keys.partition_point(|&k| k < key);
        // (distance, rank, id) of every point examined
        let mut seen: Vec<(f64, usize, usize)> = Vec::new();
        let mut closest = f64::INFINITY;
        let (mut lo, mut hi) = (start, start);
        loop {
            let bound = closest * (1.0 + TIE_TOLERANCE) + slack;
            let left = lo.checked_sub(1).filter(|&l| key - self.keys[l] <= bound);
            let right = (hi < self.keys.len() && self.keys[hi] - key <= bound).then_some(hi);
            let pick = match (left, right) {
                (None, None) => break,
                (Some(l), None) => {
                    lo = l;
                    l
                }
                (None, Some(r)) => {
                    hi = r + 1;
                    r
                }
                (Some(l), Some(r)) => {
                    if key - self.keys[l] <= self.keys[r] - key {
                        lo = l;
                        l
                    } else {
                        hi = r + 1;
                        r
                    }
                }
            };
            let id = self.ids[pick];
            if Some(id) == exclude {
                continue;
            }
            let d = g.dist(p, measure.point(id), metric);
            closest = closest.min(d);
            seen.push((d, self.ranks[pick], id));
        }
        let bound = closest * (1.0 + TIE_TOLERANCE) + slack;
        seen.into_iter()
            .filter(|s| s.0 <= bound)
            .min_by_key(|s| s.1)
            .map(|(d, _, id)| (id, d))
    }
}

/// Largest nearest-neighbour distance.
pub fn mesh(measure: &DiscreteMeasure, metric: NormKind) -> f64 {
    let index = SortedIndex::all(measure);
    (0..measure.len())
        .filter_map(|i| index.nearest(measure, measure.point(i), Some(i), metric))
        .map(|(_, d)| d)
        .fold(0.0, f64::max)
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
    fn rejects_bad_weights() {
        let g = builtin("heisenberg:1").unwrap();
        assert!(DiscreteMeasure::new(g.clone(), vec![0.0; 3], vec![0.0]).is_err());
        assert!(DiscreteMeasure::new(g.clone(), vec![0.0; 4], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(g, vec![f64::NAN, 0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn sorted_index_matches_brute_force() {
        let g = builtin("heisenberg:1").unwrap();
        let mut coords = Vec::new();
        for k in 0..200 {
            let t = k as f64 * 0.173;
            coords.extend_from_slice(&[t.sin(), (2.0 * t).cos(), 0.3 * t.cos()]);
        }
        let m = DiscreteMeasure::new(g, coords, vec![1.0; 200]).unwrap();
        let idx = SortedIndex::all(&m);
        for i in 0..200 {
            let brute = (0..200)
                .filter(|&j| j != i)
                .map(|j| (j, m.dist(i, j, NormKind::Smooth)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            let got = idx.nearest(&m, m.point(i), Some(i), NormKind::Smooth).unwrap();
            assert_eq!(got.0, brute.0);
            let r = 0.3;
            let mut inside: Vec<usize> = (0..200).filter(|&j| m.dist(j, i, NormKind::Smooth) <= r).collect();
            let mut win: Vec<usize> =
                idx.window(m.point(i)[0], r).iter().copied().filter(|&j| m.dist(j, i, NormKind::Smooth) <= r).collect();
            inside.sort();
            win.sort();
            assert_eq!(inside, win);
        }
    }

    #[test]
    fn segment_mesh() {
        assert!((mesh(&segment(64), NormKind::Smooth) - 1.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn segment_is_regular() {
        let m = segment(512);
        assert!((m.diameter(NormKind::Smooth) - 511.0 / 512.0).abs() < 1e-12);
        let est = estimate_regularity(&m, NormKind::Smooth, 64, 8.0 / 512.0).unwrap();
        assert!(est.constant <= 2.2, "{est:?}");
    }
}
