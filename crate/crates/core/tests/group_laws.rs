use std::sync::Arc;

use carnot_sio::group::builtin;
use carnot_sio::{CarnotGroup, NormKind};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GROUPS: [&str; 4] = ["abelian:3", "heisenberg:1", "heisenberg:2", "engel"];

fn group(i: usize) -> Arc<CarnotGroup> {
    builtin(GROUPS[i]).unwrap()
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
}

/// Unipotent `(n+2)×(n+2)` matrix of a point of `H^n` in exponential coordinates.
fn to_matrix(n: usize, p: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n + 2, n + 2);
    let mut ab = 0.0;
    for i in 0..n {
        m[(0, 1 + i)] = p[i];
        m[(1 + i, n + 1)] = p[n + i];
        ab += p[i] * p[n + i];
    }
    m[(0, n + 1)] = p[2 * n] + 0.5 * ab;
    m
}

fn from_matrix(n: usize, m: &DMatrix<f64>) -> Vec<f64> {
    let mut p = vec![0.0; 2 * n + 1];
    let mut ab = 0.0;
    for i in 0..n {
        p[i] = m[(0, 1 + i)];
        p[n + i] = m[(1 + i, n + 1)];
        ab += p[i] * p[n + i];
    }
    p[2 * n] = m[(0, n + 1)] - 0.5 * ab;
    p
}

#[test]
fn heisenberg_matches_matrix_representation() {
    for n in [1usize, 2] {
        let g = builtin(&format!("heisenberg:{n}")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draw = || -> Vec<f64> { (0..2 * n + 1).map(|_| rng.gen_range(-4.0..4.0)).collect() };
        for _ in 0..10_000 {
            let (x, y) = (draw(), draw());
            let oracle = from_matrix(n, &(to_matrix(n, &x) * to_matrix(n, &y)));
            let got = g.mul(&x, &y);
            assert!(sup_gap(&got, &oracle) < 1e-12, "H^{n}: {x:?} * {y:?} = {got:?}, matrix {oracle:?}");
        }
    }
}

#[test]
fn heisenberg_generators_commute_to_the_centre() {
    let g = builtin("heisenberg:1").unwrap();
    let x = [1.0, 0.0, 0.0];
    let y = [0.0, 1.0, 0.0];
    let xy = g.mul(&x, &y);
    let yx = g.mul(&y, &x);
    assert_eq!(xy[2] - yx[2], 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn associativity(gi in 0usize..4, x in coords(8), y in coords(8), z in coords(8)) {
        let g = group(gi);
        let d = g.dim();
        let (x, y, z) = (&x[..d], &y[..d], &z[..d]);
        let lhs = g.mul(&g.mul(x, y), z);
        let rhs = g.mul(x, &g.mul(y, z));
        prop_assert!(sup_gap(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn q_is_graded_homogeneous(gi in 0usize..4, t in 0.1f64..5.0, x in coords(8), y in coords(8)) {
        let g = group(gi);
        let d = g.dim();
        let (x, y) = (&x[..d], &y[..d]);
        let mut q = vec![0.0; d];
        let mut qt = vec![0.0; d];
        let mut xt = vec![0.0; d];
        let mut yt = vec![0.0; d];
        g.dilate_into(t, x, &mut xt);
        g.dilate_into(t, y, &mut yt);
        g.bch_q_into(x, y, &mut q);
        g.bch_q_into(&xt, &yt, &mut qt);
        for i in 0..d {
            let expected = t.powi(g.degrees()[i] as i32) * q[i];
            prop_assert!((qt[i] - expected).abs() <= 1e-10 * (1.0 + expected.abs()), "i = {i}: {} vs {expected}", qt[i]);
        }
    }

    #[test]
    fn q_first_layer_vanishes(gi in 0usize..4, x in coords(8), y in coords(8)) {
        let g = group(gi);
        let d = g.dim();
        let mut q = vec![0.0; d];
        g.bch_q_into(&x[..d], &y[..d], &mut q);
        prop_assert!(q[..g.first_layer_dim()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn q_ignores_coordinates_of_equal_or_higher_degree(
        gi in 0usize..4, x in coords(8), y in coords(8), dx in coords(8), dy in coords(8)
    ) {
        let g = group(gi);
        let d = g.dim();
        let deg = g.degrees();
        let mut q = vec![0.0; d];
        g.bch_q_into(&x[..d], &y[..d], &mut q);
        for i in 0..d {
            let mut xp = x[..d].to_vec();
            let mut yp = y[..d].to_vec();
            for k in 0..d {
                if deg[k] >= deg[i] {
                    xp[k] += dx[k];
                    yp[k] += dy[k];
                }
            }
            let mut qp = vec![0.0; d];
            g.bch_q_into(&xp, &yp, &mut qp);
            prop_assert!((qp[i] - q[i]).abs() < 1e-12, "Q_{i} moved from {} to {}", q[i], qp[i]);
        }
    }

    #[test]
    fn distance_is_left_invariant_and_homogeneous(
        gi in 0usize..4, smooth in any::<bool>(), t in 0.1f64..5.0, x in coords(8), y in coords(8), z in coords(8)
    ) {
        let g = group(gi);
        let d = g.dim();
        let kind = if smooth { NormKind::Smooth } else { NormKind::Hom };
        let (x, y, z) = (&x[..d], &y[..d], &z[..d]);
        let base = g.dist(x, y, kind);
        let moved = g.dist(&g.mul(z, x), &g.mul(z, y), kind);
        prop_assert!((moved - base).abs() <= 1e-12 * (1.0 + base), "{moved} vs {base}");
        let mut xt = vec![0.0; d];
        let mut yt = vec![0.0; d];
        g.dilate_into(t, x, &mut xt);
        g.dilate_into(t, y, &mut yt);
        let scaled = g.dist(&xt, &yt, kind);
        prop_assert!((scaled - t * base).abs() <= 1e-12 * (1.0 + t * base), "{scaled} vs {}", t * base);
    }

    #[test]
    fn q_bar_is_linear_in_h(gi in 0usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0, x in coords(8), h in coords(4), k in coords(4)) {
        let g = group(gi);
        let d = g.dim();
        let n = g.first_layer_dim();
        let (h, k) = (&h[..n], &k[..n]);
        let mix: Vec<f64> = h.iter().zip(k).map(|(u, v)| a * u + b * v).collect();
        let mut qh = vec![0.0; d];
        let mut qk = vec![0.0; d];
        let mut qm = vec![0.0; d];
        g.q_bar_into(&x[..d], h, &mut qh);
        g.q_bar_into(&x[..d], k, &mut qk);
        g.q_bar_into(&x[..d], &mix, &mut qm);
        for i in n..d {
            prop_assert!((qm[i] - (a * qh[i] + b * qk[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn nonhorizontal_part_has_no_first_layer(gi in 0usize..4, p in coords(8)) {
        let g = group(gi);
        let d = g.dim();
        let mut out = vec![0.0; d];
        g.nonhorizontal_part_into(&p[..d], &mut out);
        prop_assert!(out[..g.first_layer_dim()].iter().all(|v| v.abs() < 1e-12));
    }
}
