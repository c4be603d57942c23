use carnot_sio::curves::{integrate, lift, lift_from, HorizontalVelocity};
use carnot_sio::group::builtin;
use carnot_sio::NormKind;
use proptest::prelude::*;

fn circle_exact(t: f64) -> [f64; 3] {
    [t.sin(), 1.0 - t.cos(), 0.5 * (t - t.sin())]
}

fn circle_error(steps: usize, b: f64) -> f64 {
    let g = builtin("heisenberg:1").unwrap();
    let hv = HorizontalVelocity::circle(2).unwrap();
    let c = lift(&g, &hv, (0.0, b), steps).unwrap();
    (0..c.len())
        .map(|k| {
            let e = circle_exact(c.params()[k]);
            c.point(k).iter().zip(e).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn circle_lift_matches_closed_form() {
    assert!(circle_error(1024, 1.0) < 1e-10);
    assert!(circle_error(4096, 2.0 * std::f64::consts::PI) < 1e-10);
}

#[test]
fn circle_lift_error_is_fourth_order() {
    let coarse = circle_error(32, 3.0);
    let fine = circle_error(64, 3.0);
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "halving the step divided the error by {ratio}");
}

#[test]
fn relifting_from_an_interior_point_reproduces_the_tail() {
    let g = builtin("heisenberg:1").unwrap();
    for spec in ["circle-lift", "holder:0.5:1", "perturbed-line:0.3:7"] {
        let hv = HorizontalVelocity::parse(spec, 2).unwrap();
        let steps = 1024;
        let full = lift(&g, &hv, (-0.5, 0.5), steps).unwrap();
        for k in [100usize, 512, 700] {
            let t = full.params()[k];
            let tail = lift_from(&g, &hv, (t, 0.5), steps - k, full.point(k)).unwrap();
            let from_id = lift(&g, &hv, (t, 0.5), steps - k).unwrap();
            for m in 0..tail.len() {
                let want = full.point(k + m);
                let translated = g.mul(full.point(k), from_id.point(m));
                for i in 0..3 {
                    assert!((tail.point(m)[i] - want[i]).abs() < 1e-9, "{spec} k={k} m={m}");
                    assert!((translated[i] - want[i]).abs() < 1e-9, "{spec} k={k} m={m}");
                }
            }
        }
    }
}

#[test]
fn blow_ups_converge_to_the_tangent() {
    let g = builtin("heisenberg:1").unwrap();
    let hv = HorizontalVelocity::circle(2).unwrap();
    let steps = 4096;
    let c = lift(&g, &hv, (0.0, 1.0), steps).unwrap();
    for k in [0usize, 1000, 2048, 3000] {
        let h = c.velocity(k).to_vec();
        let mut last = f64::INFINITY;
        for e in 5..=10 {
            let off = steps >> e;
            let delta = c.params()[k + off] - c.params()[k];
            let mut rel = vec![0.0; 3];
            g.inv_mul_into(c.point(k), c.point(k + off), &mut rel);
            let mut blown = vec![0.0; 3];
            g.dilate_into(1.0 / delta, &rel, &mut blown);
            let err = ((blown[0] - h[0]).powi(2) + (blown[1] - h[1]).powi(2) + blown[2].powi(2)).sqrt();
            assert!(err < last, "k={k} Δ=2^-{e}: {err} after {last}");
            last = err;
            let speed = g.dist(c.point(k + off), c.point(k), NormKind::Smooth) / delta;
            assert!((speed - 1.0).abs() < 4.0 * delta, "metric speed {speed} at Δ = {delta}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrate_is_linear_and_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, c0 in 0.0f64..2.0) {
        let g = builtin("heisenberg:1").unwrap();
        let hv = HorizontalVelocity::parse("perturbed-line:0.3:7", 2).unwrap();
        let curve = lift(&g, &hv, (0.0, 1.0), 256).unwrap();
        let f = |p: &[f64]| p[0] * p[0];
        let h = |p: &[f64]| p[1].sin() + p[2];
        let mix = integrate(&curve, |p| a * f(p) + b * h(p)).unwrap();
        let sep = a * integrate(&curve, f).unwrap() + b * integrate(&curve, h).unwrap();
        prop_assert!((mix - sep).abs() < 1e-12 * (1.0 + sep.abs()));
        let lo = integrate(&curve, f).unwrap();
        let hi = integrate(&curve, |p| f(p) + c0).unwrap();
        prop_assert!(hi >= lo);
        prop_assert!(integrate(&curve, |_| c0).unwrap() >= 0.0);
    }
}
