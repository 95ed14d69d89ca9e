mod common;

use approx::assert_relative_eq;
use common::*;
use nalgebra::{DMatrix, Matrix3};
use stationary::catalog::*;
use stationary::checks::einstein_residual;
use stationary::oracle::{kretschmann, spacetime_point, CoordinateMetric};
use stationary::Error;

fn kerr_bl(m: f64, a: f64, r: f64, th: f64) -> DMatrix<f64> {
    let sigma = r * r + (a * th.cos()).powi(2);
    let delta = r * r - 2.0 * m * r + a * a;
    let s2 = th.sin().powi(2);
    let mut g = DMatrix::zeros(4, 4);
    g[(0, 0)] = -(1.0 - 2.0 * m * r / sigma);
    g[(0, 3)] = -2.0 * m * a * r * s2 / sigma;
    g[(3, 0)] = g[(0, 3)];
    g[(1, 1)] = sigma / delta;
    g[(2, 2)] = sigma;
    g[(3, 3)] = (r * r + a * a + 2.0 * m * a * a * r * s2 / sigma) * s2;
    g
}

fn assert_matrix_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
    let scale = b.amax().max(1.0);
    assert!((a - b).amax() <= tol * scale, "{a} vs {b}");
}

#[test]
fn kerr_matches_boyer_lindquist() {
    let e = make_kerr(1.0, 0.5).unwrap();
    for p in e.anchors.iter().chain(e.sample_points(20, SEED).iter()) {
        let g = e.spacetime.metric_components(p).unwrap();
        assert_matrix_close(&g, &kerr_bl(1.0, 0.5, p[0], p[1]), 1e-12);
    }
}

#[test]
fn kerr_without_spin_is_schwarzschild() {
    let k = make_kerr(1.0, 0.0).unwrap();
    let s = make_schwarzschild(1.0).unwrap();
    assert!(k.flags.is_static);
    for p in s.sample_points(20, SEED) {
        let a = k.spacetime.metric_components(&p).unwrap();
        let b = s.spacetime.metric_components(&p).unwrap();
        assert_matrix_close(&a, &b, 1e-12);
    }
}

#[test]
fn schwarzschild_matches_textbook() {
    let e = make_schwarzschild(2.0).unwrap();
    let p = point(&[7.0, 1.0, 0.3]);
    let f = 1.0 - 4.0 / 7.0;
    let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-f, 1.0 / f, 49.0, 49.0 * 1f64.sin().powi(2)]));
    assert_matrix_close(&e.spacetime.metric_components(&p).unwrap(), &want, 1e-12);
}

#[test]
fn rotating_chart_is_minkowski_in_rotating_coordinates() {
    let om = 0.5;
    let e = make_minkowski_rotating(om).unwrap();
    for p in e.anchors.iter() {
        let rho = p[0];
        let s = &e.spacetime;
        assert_relative_eq!(s.lapse(p).powi(2), 1.0 - (om * rho).powi(2), max_relative = 1e-12);
        assert_relative_eq!(s.theta_values(p)[1], om * rho * rho / (1.0 - (om * rho).powi(2)), max_relative = 1e-12);
        assert_relative_eq!(s.g().values(p)[(1, 1)], rho * rho / (1.0 - (om * rho).powi(2)), max_relative = 1e-12);
        let mut want = DMatrix::zeros(4, 4);
        want[(0, 0)] = -(1.0 - (om * rho).powi(2));
        want[(0, 2)] = -om * rho * rho;
        want[(2, 0)] = -om * rho * rho;
        want[(1, 1)] = 1.0;
        want[(2, 2)] = rho * rho;
        want[(3, 3)] = 1.0;
        assert_matrix_close(&s.metric_components(p).unwrap(), &want, 1e-12);
    }
}

#[test]
fn ads_cartesian_chart_pulls_back_to_the_spherical_form() {
    let e = make_ads(-3.0).unwrap();
    for (r, th, ph) in [(0.3, 1.0, 0.2), (1.5, 2.0, -1.0), (2.5, 0.4, 3.0)] {
        let (st, ct, sp, cp) = (f64::sin(th), f64::cos(th), f64::sin(ph), f64::cos(ph));
        let x = point(&[r * st * cp, r * st * sp, r * ct]);
        let jac = Matrix3::new(st * cp, r * ct * cp, -r * st * sp, st * sp, r * ct * sp, r * st * cp, ct, -r * st, 0.0);
        let g = e.spacetime.g().values(&x);
        let g3 = Matrix3::from_iterator(g.iter().copied());
        let sph = jac.transpose() * g3 * jac;
        let want = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0 / (1.0 + r * r), r * r, (r * st).powi(2)));
        assert!((sph - want).amax() < 1e-12, "{sph}");
        assert_relative_eq!(e.spacetime.lapse(&x).powi(2), 1.0 + r * r, max_relative = 1e-14);
    }
}

#[test]
fn kretschmann_of_schwarzschild_at_r4() {
    for e in [make_schwarzschild(1.0).unwrap(), make_kerr(1.0, 0.0).unwrap()] {
        let m = CoordinateMetric::from_spacetime(&e.spacetime);
        let k = kretschmann(&m, &spacetime_point(0.0, &point(&[4.0, 1.1, 0.3]))).unwrap();
        assert!((k - 0.01171875).abs() < 1e-6, "{k}");
    }
}

#[test]
fn kretschmann_of_ads_is_constant() {
    let e = make_ads(-3.0).unwrap();
    let m = CoordinateMetric::from_spacetime(&e.spacetime);
    for p in &e.anchors {
        let k = kretschmann(&m, &spacetime_point(0.0, p)).unwrap();
        assert!((k - 24.0).abs() < 1e-5, "{k}");
    }
}

#[test]
fn flags_hold_at_anchors() {
    for name in ENTRY_NAMES {
        let e = by_name(name, &EntryParams::default()).unwrap();
        let s = &e.spacetime;
        for p in &e.anchors {
            if e.flags.vacuum {
                assert!(s.ricci_blocks(p).unwrap().full().amax() < 1e-6, "{name} vacuum at {p:?}");
            }
            if e.flags.einstein {
                assert!(einstein_residual(s, e.lambda().unwrap(), p).unwrap() < 1e-6, "{name} einstein");
            }
            if e.flags.is_static {
                assert!(s.local(p).unwrap().lambda.amax() < 1e-10, "{name} static");
            }
            if e.flags.flat {
                assert!(s.curvature_blocks(p).unwrap().full().iter().all(|v| v.abs() < 1e-8), "{name} flat");
            }
        }
    }
}

#[test]
fn non_static_entries_have_twist() {
    for e in [make_minkowski_rotating(0.5).unwrap(), make_kerr(1.0, 0.5).unwrap()] {
        assert!(!e.flags.is_static);
        assert!(e.anchors.iter().all(|p| e.spacetime.local(p).unwrap().lambda.amax() > 1e-3));
    }
}

#[test]
fn domains_exclude_horizons_and_ergospheres() {
    let s = make_schwarzschild(1.0).unwrap();
    assert!(s.spacetime.check_point(&point(&[2.0005, 1.0, 0.0])).is_err());
    assert!(s.spacetime.check_point(&point(&[2.01, 1.0, 0.0])).is_ok());
    let k = make_kerr(1.0, 0.5).unwrap();
    // ergosphere on the equator sits at r = 2M
    assert!(k.spacetime.check_point(&equator(1.99)).is_err());
    assert!(k.spacetime.check_point(&point(&[1.95, 0.3, 0.0])).is_ok());
    assert!(k.spacetime.check_point(&point(&[5.0, 0.0, 0.0])).is_err());
    let r = make_minkowski_rotating(0.5).unwrap();
    assert!(r.spacetime.check_point(&point(&[2.0, 0.0, 0.0])).is_err());
    assert!(r.spacetime.check_point(&point(&[1.99, 0.0, 0.0])).is_ok());
}

#[test]
fn parameter_errors() {
    assert!(matches!(make_kerr(1.0, 2.0), Err(Error::Parameter(_))));
    assert!(matches!(make_kerr(1.0, 1.0), Err(Error::Parameter(_))));
    assert!(matches!(make_ads(0.0), Err(Error::Parameter(_))));
    assert!(matches!(make_minkowski_rotating(-1.0), Err(Error::Parameter(_))));
    assert!(matches!(make_schwarzschild(f64::NAN), Err(Error::Parameter(_))));
    assert!(matches!(by_name("de-sitter", &EntryParams::default()), Err(Error::Parameter(_))));
}

#[test]
fn by_name_passes_parameters() {
    let p = EntryParams { mass: Some(2.0), spin: Some(1.0), ..EntryParams::default() };
    let e = by_name("kerr", &p).unwrap();
    assert_eq!(e.params["M"], 2.0);
    assert_eq!(e.params["a"], 1.0);
    let e = by_name("ads", &EntryParams { lambda: Some(-0.75), ..EntryParams::default() }).unwrap();
    assert_eq!(e.lambda(), Some(-0.75));
    let e = by_name("generic", &EntryParams { dim: Some(5), ..EntryParams::default() }).unwrap();
    assert_eq!(e.spacetime.n(), 5);
}
