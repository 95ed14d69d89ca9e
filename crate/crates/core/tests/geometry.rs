mod common;

use common::*;
use stationary::catalog::*;
use stationary::geometry::{Branch, FrameConnection};
use stationary::{ChartPoint, Error, ScalarField, StationarySpacetime};

fn log_u(s: &StationarySpacetime) -> ScalarField {
    let u = s.u().clone();
    ScalarField::new("log u", s.n(), move |p| u.jet(p).ln())
}

#[test]
fn hat_laplacian_of_log_u() {
    // hat Delta log u = Delta u / u = -lambda for static Einstein metrics
    for (e, want) in [(make_schwarzschild(1.0).unwrap(), 0.0), (make_ads(-3.0).unwrap(), 3.0)] {
        let hat = e.spacetime.hat_metric();
        let f = log_u(&e.spacetime);
        for p in e.anchors.iter().chain(e.sample_points(10, SEED).iter()) {
            let lap = hat.hessian_laplacian(&f, p).unwrap().laplacian;
            assert!((lap - want).abs() < 1e-8, "{} at {p:?}: {lap}", e.name);
        }
    }
}

#[test]
fn static_blocks_degenerate() {
    for e in [make_schwarzschild(1.0).unwrap(), make_ads(-3.0).unwrap(), make_kerr(1.0, 0.0).unwrap()] {
        for p in e.sample_points(10, SEED) {
            let l = e.spacetime.local(&p).unwrap();
            let ric = e.spacetime.ricci_blocks(&p).unwrap();
            assert!(ric.r0j.amax() < 1e-10);
            // R_00 = u Delta u with e_0 = d_t
            let want = l.u.value() * l.hm.laplacian(&l.u);
            assert!((ric.r00 - want).abs() < 1e-8 * want.abs().max(1.0), "{} vs {want}", ric.r00);
            let (a, b) = e.spacetime.static_system_residual(&p).unwrap();
            assert!(a < 1e-6 && b < 1e-6, "{a} {b}");
            assert!(e.spacetime.is_static_at(&p).unwrap());
        }
    }
}

#[test]
fn static_system_rejects_rotating_data() {
    let e = make_kerr(1.0, 0.5).unwrap();
    assert!(!e.spacetime.is_static_at(&e.anchors[0]).unwrap());
    assert!(matches!(e.spacetime.static_system_residual(&e.anchors[0]), Err(Error::NotStatic(_))));
}

#[test]
fn hat_is_an_involution() {
    let e = make_kerr(1.0, 0.5).unwrap();
    let s = &e.spacetime;
    let twice = s.hat_metric().hat_metric();
    assert_eq!(s.branch(), Branch::Lorentzian);
    assert_eq!(s.hat_metric().branch(), Branch::Riemannian);
    assert_eq!(twice.branch(), Branch::Lorentzian);
    for p in e.sample_points(5, SEED) {
        assert_eq!(s.metric_components(&p).unwrap(), twice.metric_components(&p).unwrap());
        assert_eq!(s.curvature_blocks(&p).unwrap().full(), twice.curvature_blocks(&p).unwrap().full());
        let h = s.hat_metric().metric_components(&p).unwrap();
        let g = s.metric_components(&p).unwrap();
        assert!((h[(0, 0)] + g[(0, 0)]).abs() < 1e-14);
    }
}

#[test]
fn frame_connection_is_compatible_everywhere() {
    for name in ENTRY_NAMES {
        let e = by_name(name, &EntryParams::default()).unwrap();
        for s in [e.spacetime.clone(), e.spacetime.hat_metric()] {
            for p in e.sample_points(10, SEED) {
                let l = s.local(&p).unwrap();
                assert!(FrameConnection::from_local(&l).compatibility_residual(&l) < 1e-8, "{name}");
            }
        }
    }
}

#[test]
fn laplacian_is_trace_of_hessian() {
    let e = make_kerr(1.0, 0.5).unwrap();
    let fields = stationary::checks::test_fields(3);
    for s in [e.spacetime.clone(), e.spacetime.hat_metric()] {
        for p in e.sample_points(5, SEED) {
            let inv = s.local(&p).unwrap().frame_inverse();
            for f in &fields {
                let h = s.hessian_laplacian(f, &p).unwrap();
                let tr = inv.component_mul(&h.hess).sum();
                assert!((tr - h.laplacian).abs() < 1e-8 * h.laplacian.abs().max(1.0));
                assert!((&h.hess - h.hess.transpose()).amax() < 1e-10);
            }
        }
    }
}

#[test]
fn inverse_metric_components_invert() {
    for name in ENTRY_NAMES {
        let e = by_name(name, &EntryParams::default()).unwrap();
        for p in e.sample_points(5, SEED) {
            let g = e.spacetime.metric_components(&p).unwrap();
            let gi = e.spacetime.inverse_metric_components(&p).unwrap();
            let id = &g * &gi;
            let err = (id - nalgebra::DMatrix::identity(g.nrows(), g.nrows())).amax();
            assert!(err < 1e-10, "{name}: {err}");
        }
    }
}

#[test]
fn rotating_minkowski_is_flat_with_twist() {
    let e = make_minkowski_rotating(0.5).unwrap();
    let p = point(&[0.5, 0.3, -0.2]);
    let l = e.spacetime.local(&p).unwrap();
    assert!(l.lambda_norm_sq() > 0.0);
    assert!(e.spacetime.curvature_blocks(&p).unwrap().full().iter().all(|v| v.abs() < 1e-8));
}

#[test]
fn conformal_ricci_formulas_agree() {
    for e in [make_kerr(1.0, 0.5).unwrap(), make_generic(3).unwrap(), make_generic(4).unwrap()] {
        for p in e.sample_points(5, SEED) {
            let cd = e.spacetime.conformal_reduction(&p).unwrap();
            assert!((&cd.ric_til - &cd.ric_til_direct).amax() < 1e-8 * cd.ric_til.amax().max(1.0), "{}", e.name);
        }
    }
}

#[test]
fn singular_and_foreign_points_are_rejected() {
    let s = make_schwarzschild(1.0).unwrap();
    assert!(matches!(s.spacetime.local(&[1.0, 1.0]), Err(Error::Dimension(_))));
    assert!(matches!(s.spacetime.local(&[1.5, 1.0, 0.0]), Err(Error::Domain { .. })));
    assert!(s.spacetime.metric_components(&ChartPoint::new(vec![1.5, 1.0, 0.0])).is_err());
}
