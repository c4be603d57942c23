//! Evaluation plan for the Baker–Campbell–Hausdorff correction `Q(x, y)`.
//!
//! For a nilpotent algebra of step `s`, every bracket of length `> s`
//! vanishes, so `log(exp X exp Y)` is a finite Dynkin sum. Up to length 4:
//!
//! ```text
//! Q = [X,Y]/2 + ([X,[X,Y]] - [Y,[X,Y]])/12 - [Y,[X,[X,Y]]]/24
//! ```
//!
//! The plan stores each nested bracket once as a node that refers to earlier
//! nodes, together with its degree in `Y`. Dropping nodes of `Y`-degree
//! other than one yields the derivative of `Q(x, ·)` at the origin.

use smallvec::SmallVec;

/// Operand of a bracket node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Operand {
    X,
    Y,
    Node(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct BracketNode {
    pub left: Operand,
    pub right: Operand,
    /// Degree of the node as a polynomial in `y`.
    pub y_degree: u32,
}

/// Nested-bracket DAG with output coefficients.
#[derive(Debug, Clone)]
pub(crate) struct BchPlan {
    pub nodes: Vec<BracketNode>,
    /// `(node, coefficient)` pairs summed into `Q`.
    pub terms: Vec<(usize, f64)>,
}

impl BchPlan {
    pub fn for_step(step: usize) -> Self {
        let mut nodes = Vec::new();
        let mut terms = Vec::new();
        if step >= 2 {
            // b0 = [X, Y]
            nodes.push(BracketNode { left: Operand::X, right: Operand::Y, y_degree: 1 });
            terms.push((0, 0.5));
        }
        if step >= 3 {
            // b1 = [X, b0], b2 = [Y, b0]
            nodes.push(BracketNode { left: Operand::X, right: Operand::Node(0), y_degree: 1 });
            nodes.push(BracketNode { left: Operand::Y, right: Operand::Node(0), y_degree: 2 });
            terms.push((1, 1.0 / 12.0));
            terms.push((2, -1.0 / 12.0));
        }
        if step >= 4 {
            // b3 = [Y, b1]
            nodes.push(BracketNode { left: Operand::Y, right: Operand::Node(1), y_degree: 2 });
            terms.push((3, -1.0 / 24.0));
        }
        Self { nodes, terms }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Evaluates the plan, adding `Q(x, y)` (or only its `y`-linear part) into `out`.
    ///
    /// `bracket(a, b, dst)` must write `[a, b]` into `dst`.
    pub fn accumulate<F>(&self, x: &[f64], y: &[f64], linear_only: bool, out: &mut [f64], bracket: F)
    where
        F: Fn(&[f64], &[f64], &mut [f64]),
    {
        let dim = x.len();
        let mut buf: SmallVec<[f64; 64]> = SmallVec::from_elem(0.0, dim * self.nodes.len());
        for (idx, node) in self.nodes.iter().enumerate() {
            if linear_only && node.y_degree > 1 {
                continue;
            }
            let (done, rest) = buf.split_at_mut(idx * dim);
            let dst = &mut rest[..dim];
            let left = resolve(node.left, x, y, done, dim);
            let right = resolve(node.right, x, y, done, dim);
            bracket(left, right, dst);
        }
        for &(node, coeff) in &self.terms {
            if linear_only && self.nodes[node].y_degree != 1 {
                continue;
            }
            let src = &buf[node * dim..(node + 1) * dim];
            for (o, s) in out.iter_mut().zip(src) {
                *o += coeff * s;
            }
        }
    }
}

fn resolve<'a>(op: Operand, x: &'a [f64], y: &'a [f64], done: &'a [f64], dim: usize) -> &'a [f64] {
    match op {
        Operand::X => x,
        Operand::Y => y,
        Operand::Node(k) => &done[k * dim..(k + 1) * dim],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_sizes_follow_step() {
        assert_eq!(BchPlan::for_step(1).len(), 0);
        assert_eq!(BchPlan::for_step(2).len(), 1);
        assert_eq!(BchPlan::for_step(3).len(), 3);
        assert_eq!(BchPlan::for_step(4).len(), 4);
    }

    #[test]
    fn nodes_only_reference_earlier_nodes() {
        let plan = BchPlan::for_step(4);
        for (idx, node) in plan.nodes.iter().enumerate() {
            for op in [node.left, node.right] {
                if let Operand::Node(k) = op {
                    assert!(k < idx);
                }
            }
        }
    }
}
