use std::sync::Arc;

use carnot_sio::curves::{lift, HorizontalVelocity};
use carnot_sio::group::builtin;
use carnot_sio::kernels::{parse_kernel, sum, SharedKernel};
use carnot_sio::measure::DiscreteMeasure;
use carnot_sio::sio::{operator_norm, AssembledOperator, PowerOptions, TruncatedOperator};
use carnot_sio::CarnotGroup;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn curve_measure(spec: &str, points: usize) -> (Arc<CarnotGroup>, DiscreteMeasure) {
    let g = builtin("heisenberg:1").unwrap();
    let hv = HorizontalVelocity::parse(spec, 2).unwrap();
    let m = lift(&g, &hv, (0.0, 1.0), points - 1).unwrap().measure();
    (g, m)
}

/// `‖W^{1/2} K W^{1/2}‖₂` from a dense SVD.
fn dense_norm(kernel: &SharedKernel, m: &DiscreteMeasure, epsilon: f64) -> f64 {
    let g = m.group();
    let n = m.len();
    let w = m.weights();
    let metric = kernel.info().metric;
    let mut q = vec![0.0; g.dim()];
    let b = DMatrix::from_fn(n, n, |i, j| {
        g.inv_mul_into(m.point(j), m.point(i), &mut q);
        if g.norm(&q, metric) > epsilon {
            (w[i] * w[j]).sqrt() * kernel.eval(&q)
        } else {
            0.0
        }
    });
    b.singular_values().max()
}

#[test]
fn power_iteration_matches_dense_svd() {
    let options = PowerOptions::default();
    for spec in ["circle-lift", "holder:0.5:1"] {
        let (g, m) = curve_measure(spec, 384);
        for ks in ["vriesz:2", "quasi:1", "inv-dist"] {
            let k = parse_kernel(&g, ks).unwrap();
            for eps in [0.125, 0.03125] {
                let op = TruncatedOperator::new(k.as_ref(), &m, eps).unwrap();
                let est = operator_norm(&op, &options).unwrap();
                let exact = dense_norm(&k, &m, eps);
                assert!(est.converged, "{spec} {ks} ε={eps}");
                assert!((est.norm - exact).abs() <= 1e-5 * exact, "{spec} {ks} ε={eps}: {} vs {exact}", est.norm);
                let asm = AssembledOperator::new(k.as_ref(), &m).unwrap();
                let sweep = asm.norm_sweep(&[eps], &options).unwrap();
                assert!((sweep[0].norm - exact).abs() <= 1e-5 * exact);
            }
        }
    }
}

#[test]
fn restriction_does_not_increase_the_norm_of_a_positive_kernel() {
    let (g, m) = curve_measure("circle-lift", 512);
    let k = parse_kernel(&g, "vriesz:2").unwrap();
    let options = PowerOptions::default();
    let full = operator_norm(&TruncatedOperator::new(k.as_ref(), &m, 0.05).unwrap(), &options).unwrap().norm;
    for idx in [(0..256).collect::<Vec<_>>(), (0..512).step_by(3).collect(), (100..400).collect()] {
        let sub = m.restrict(&idx).unwrap();
        let part = operator_norm(&TruncatedOperator::new(k.as_ref(), &sub, 0.05).unwrap(), &options).unwrap().norm;
        assert!(part <= full * (1.0 + 1e-5), "{part} > {full}");
    }
}

#[test]
fn inverse_distance_grows_with_each_halving() {
    let (g, m) = curve_measure("hline", 2048);
    let k = parse_kernel(&g, "inv-dist").unwrap();
    let asm = AssembledOperator::new(k.as_ref(), &m).unwrap();
    let eps: Vec<f64> = (3..=8).map(|e| (-(e as f64)).exp2()).collect();
    let norms: Vec<f64> = asm.norm_sweep(&eps, &PowerOptions::default()).unwrap().iter().map(|e| e.norm).collect();
    for w in norms.windows(2) {
        assert!(w[1] - w[0] >= 0.5, "{norms:?}");
    }
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

const N: usize = 96;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adjointness(ki in 0usize..3, eps in 0.01f64..0.5, f in values(N), h in values(N)) {
        let (g, m) = curve_measure("perturbed-line:0.3:7", N);
        let k = parse_kernel(&g, ["vriesz:2", "quasi:1", "inv-dist"][ki]).unwrap();
        let op = TruncatedOperator::new(k.as_ref(), &m, eps).unwrap();
        let w = m.weights();
        let tf = op.apply(&f).unwrap();
        let th = op.apply_adjoint(&h).unwrap();
        let lhs: f64 = (0..N).map(|i| tf[i] * h[i] * w[i]).sum();
        let rhs: f64 = (0..N).map(|i| th[i] * f[i] * w[i]).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn linearity_and_kernel_sums(a in -2.0f64..2.0, b in -2.0f64..2.0, eps in 0.01f64..0.5, f in values(N), h in values(N)) {
        let (g, m) = curve_measure("circle-lift", N);
        let k1 = parse_kernel(&g, "vriesz:2").unwrap();
        let k2 = parse_kernel(&g, "quasi:1").unwrap();
        let both = sum(k1.clone(), k2.clone()).unwrap();
        let op1 = TruncatedOperator::new(k1.as_ref(), &m, eps).unwrap();
        let op2 = TruncatedOperator::new(k2.as_ref(), &m, eps).unwrap();
        let op12 = TruncatedOperator::new(both.as_ref(), &m, eps).unwrap();
        let mix: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
        let (tm, tf, th) = (op1.apply(&mix).unwrap(), op1.apply(&f).unwrap(), op1.apply(&h).unwrap());
        for i in 0..N {
            prop_assert!((tm[i] - (a * tf[i] + b * th[i])).abs() <= 1e-10 * (1.0 + tm[i].abs()));
        }
        let (s, s1, s2) = (op12.apply(&f).unwrap(), op1.apply(&f).unwrap(), op2.apply(&f).unwrap());
        for i in 0..N {
            prop_assert!((s[i] - (s1[i] + s2[i])).abs() <= 1e-12 * (1.0 + s[i].abs()));
        }
    }

    #[test]
    fn left_translation_leaves_outputs_unchanged(
        ki in 0usize..3, eps in 0.01f64..0.5, x in values(3), f in values(N)
    ) {
        let (g, m) = curve_measure("holder:0.5:1", N);
        let k = parse_kernel(&g, ["vriesz:2", "quasi:2", "inv-dist"][ki]).unwrap();
        let moved = m.translate(&x);
        let a = TruncatedOperator::new(k.as_ref(), &m, eps).unwrap().apply(&f).unwrap();
        let b = TruncatedOperator::new(k.as_ref(), &moved, eps).unwrap().apply(&f).unwrap();
        for i in 0..N {
            prop_assert!((a[i] - b[i]).abs() <= 1e-10 * (1.0 + a[i].abs()), "{} vs {}", a[i], b[i]);
        }
    }
}
