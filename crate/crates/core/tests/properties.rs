mod common;

use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use stationary::catalog::*;
use stationary::checks::riemann_symmetry_residual;
use stationary::estimates::curvature_norm;
use stationary::oracle::{frame_transform, frame_transform_inverse};
use stationary::reduction4d::twist_identities;
use stationary::{ChartPoint, FDPolicy, ScalarField};

fn kerr_point() -> impl Strategy<Value = ChartPoint> {
    (3.0..20.0f64, 0.2..2.9f64, -3.0..3.0f64).prop_map(|(r, th, ph)| ChartPoint::new(vec![r, th, ph]))
}

fn generic_point() -> impl Strategy<Value = ChartPoint> {
    let e = make_generic(3).unwrap();
    let b = e.sample_box.clone();
    (b[0].0..b[0].1, b[1].0..b[1].1, b[2].0..b[2].1).prop_map(|(x, y, z)| ChartPoint::new(vec![x, y, z]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frame_transform_round_trips(p in kerr_point(), vals in proptest::collection::vec(-5.0..5.0f64, 64), rank in 1usize..4) {
        let e = make_kerr(1.0, 0.7).unwrap();
        let shape = vec![4; rank];
        let t = ArrayD::from_shape_vec(IxDyn(&shape), vals[..4usize.pow(rank as u32)].to_vec()).unwrap();
        let f = frame_transform(&t, &e.spacetime, &p).unwrap();
        let back = frame_transform_inverse(&f, &e.spacetime, &p).unwrap();
        let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!((&back - &t).iter().all(|v| v.abs() < 1e-9 * scale));
    }

    #[test]
    fn riemann_symmetries_at_random_points(p in generic_point()) {
        let e = make_generic(3).unwrap();
        for s in [e.spacetime.clone(), e.spacetime.hat_metric()] {
            let b = s.curvature_blocks(&p).unwrap();
            let scale = b.full().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(riemann_symmetry_residual(&b) < 1e-8 * scale);
        }
    }

    #[test]
    fn hat_twice_is_identity(p in kerr_point()) {
        let e = make_kerr(1.0, 0.7).unwrap();
        let s = &e.spacetime;
        let twice = s.hat_metric().hat_metric();
        prop_assert_eq!(s.ricci_blocks(&p).unwrap().full(), twice.ricci_blocks(&p).unwrap().full());
    }

    #[test]
    fn jets_agree_with_finite_differences(x in -1.0..1.0f64, y in 0.5..2.0f64, z in -1.0..1.0f64) {
        let f = ScalarField::from_expr("mix", 3, |v| (v[0] * v[1]).sin() + v[2].exp() * v[1].ln() + v[0].powi(3) / v[1]);
        let fd = f.fd_only(FDPolicy::default());
        let p = [x, y, z];
        let (g1, g2) = (f.gradient(&p), fd.gradient(&p));
        let (h1, h2) = (f.hessian(&p), fd.hessian(&p));
        prop_assert!((g1 - g2).amax() < 1e-8);
        prop_assert!((h1 - h2).amax() < 1e-6);
    }

    #[test]
    fn curvature_norm_scales_inversely_with_area(p in kerr_point(), k in 0.2..5.0f64) {
        let e = make_kerr(1.0, 0.7).unwrap();
        let base = curvature_norm(&e.spacetime, &p).unwrap();
        let pk = ChartPoint::new(p.iter().map(|v| v * k).collect::<Vec<_>>());
        let scaled = curvature_norm(&e.spacetime.rescaled(k), &pk).unwrap();
        prop_assert!((scaled * k * k - base).abs() < 1e-8 * base.max(1e-12) + 1e-14);
    }

    #[test]
    fn twist_norm_identity_at_random_points(p in kerr_point()) {
        let e = make_kerr(1.0, 0.7).unwrap();
        prop_assert!(twist_identities(&e.spacetime, &p).unwrap().norm < 1e-8);
    }

    #[test]
    fn hat_and_lorentzian_agree_on_static_horizontal_curvature(r in 3.0..30.0f64, th in 0.1..3.0f64) {
        // for theta = 0 the horizontal block of Riemann does not see the sign of w
        let e = make_schwarzschild(1.0).unwrap();
        let p = ChartPoint::new(vec![r, th, 0.4]);
        let a = e.spacetime.curvature_blocks(&p).unwrap().full();
        let b = e.spacetime.hat_metric().curvature_blocks(&p).unwrap().full();
        for i in 1..4 { for j in 1..4 { for k in 1..4 { for l in 1..4 {
            prop_assert!((a[[i, j, k, l]] - b[[i, j, k, l]]).abs() < 1e-12);
        }}}}
    }
}
