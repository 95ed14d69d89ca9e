mod common;

use common::*;
use stationary::catalog::*;
use stationary::estimates::*;
use stationary::Error;

fn spec() -> SampleSpec {
    SampleSpec { rays: 24, per_ray: 8, seed: SEED }
}

#[test]
fn flat_ball_distances_are_euclidean() {
    let e = make_minkowski_static();
    let c = point(&[1.0, -2.0, 0.5]);
    let b = sample_ball(&e.spacetime, &c, 1.0, &spec()).unwrap();
    assert_eq!(b.points.len(), 1 + 24 * 8);
    for (p, d) in &b.points {
        let euclid = p.iter().zip(c.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(euclid <= d + 1e-8 && *d <= 1.0 + 1e-12);
    }
    assert_eq!(b.within(0.5).count(), 1 + 24 * 4);
}

#[test]
fn schwarzschild_ball_stays_outside_the_horizon() {
    let e = make_schwarzschild(1.0).unwrap();
    let b = sample_ball(&e.spacetime, &equator(6.0), 2.0, &spec()).unwrap();
    assert!(b.points.iter().all(|(p, _)| p[0] > 2.0 && p[0] < 9.0));
}

#[test]
fn ball_leaving_the_chart_is_an_error() {
    // the Kerr chart stops short of the axis
    let e = make_kerr(1.0, 0.5).unwrap();
    let err = sample_ball(&e.spacetime, &point(&[10.0, 0.05, 0.0]), 1.0, &spec()).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }), "{err:?}");
}

#[test]
fn gradient_report() {
    let e = make_schwarzschild(1.0).unwrap();
    let r = gradient_estimate_ratio(&e.spacetime, &equator(6.0), 2.0, &spec()).unwrap();
    assert_eq!(r.monitor, Monitor::Gradient);
    assert!(r.sup > 0.0 && r.implied_constant.is_finite() && r.implied_constant > 0.0);
    // bound sqrt(3)/a for lambda = 0
    assert!((r.implied_constant * 3f64.sqrt() / 2.0 - r.sup).abs() < 1e-12);
    // 2 |d log u| = 2 M / (r^2 f^{1/2}) at the center
    let f: f64 = 1.0 - 2.0 / 6.0;
    assert!(r.sup >= 2.0 / (36.0 * f.sqrt()) - 1e-12);
    assert_eq!(r.metadata.rays, 24);
    let json = serde_json::to_value(&r).unwrap();
    assert!(json["implied_constant"].is_number());
}

#[test]
fn ads_monitors_use_the_lambda_bounds() {
    let e = make_ads(-3.0).unwrap();
    let c = point(&[0.5, 0.0, 0.0]);
    let r = curvature_estimate_ratio(&e.spacetime, &c, 0.5, &spec()).unwrap();
    // constant curvature -1: |Rm| = sqrt(24) everywhere
    assert!((r.sup - 24f64.sqrt()).abs() < 1e-6, "{}", r.sup);
    assert!((r.implied_constant - r.sup / (4.0 + 3.0)).abs() < 1e-12);
    assert!(r.companion.as_ref().map(|h| h.monitor) == Some(Monitor::H));
    let g = gradient_estimate_ratio(&e.spacetime, &c, 0.5, &spec()).unwrap();
    assert!((g.implied_constant - g.sup / (3f64.sqrt() / 0.5 + 3f64.sqrt())).abs() < 1e-12);
}

#[test]
fn curvature_norm_of_flat_entries_vanishes() {
    let e = make_minkowski_rotating(0.5).unwrap();
    for p in e.sample_points(10, SEED) {
        assert!(curvature_norm(&e.spacetime, &p).unwrap() < 1e-8);
    }
}

#[test]
fn reports_are_scale_covariant() {
    let e = make_schwarzschild(1.0).unwrap();
    let c = equator(6.0);
    let base = curvature_estimate_ratio(&e.spacetime, &c, 1.0, &spec()).unwrap();
    let baseg = gradient_estimate_ratio(&e.spacetime, &c, 1.0, &spec()).unwrap();
    for k in [0.5, 3.0] {
        let s = e.spacetime.rescaled(k);
        let ck = stationary::ChartPoint::new(c.iter().map(|v| v * k).collect::<Vec<_>>());
        let r = curvature_estimate_ratio(&s, &ck, k, &spec()).unwrap();
        assert!((r.implied_constant - base.implied_constant).abs() < 1e-6 * base.implied_constant);
        assert!((r.sup * k * k - base.sup).abs() < 1e-6 * base.sup);
        let g = gradient_estimate_ratio(&s, &ck, k, &spec()).unwrap();
        assert!((g.implied_constant - baseg.implied_constant).abs() < 1e-6 * baseg.implied_constant);
    }
}

#[test]
fn two_scale_diagnostic_is_consistent() {
    let e = make_schwarzschild(1.0).unwrap();
    let t = two_scale_diagnostic(&e.spacetime, &equator(6.0), 2.0, &spec()).unwrap();
    assert!(t.sup_a2 > t.sup_a2_half && t.ratio > 1.0);
    assert!((t.ratio - t.sup_a2 / t.sup_a2_half).abs() < 1e-15);
}

#[test]
fn reports_are_deterministic() {
    let e = make_kerr(1.0, 0.5).unwrap();
    let a = curvature_estimate_ratio(&e.spacetime, &equator(6.0), 1.0, &spec()).unwrap();
    let b = curvature_estimate_ratio(&e.spacetime, &equator(6.0), 1.0, &spec()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let other = SampleSpec { seed: SEED + 1, ..spec() };
    let c = curvature_estimate_ratio(&e.spacetime, &equator(6.0), 1.0, &other).unwrap();
    assert_ne!(a.argmax, c.argmax);
}

#[test]
fn static_bochner_identity() {
    for e in [make_schwarzschild(1.0).unwrap(), make_ads(-3.0).unwrap()] {
        for p in e.sample_points(10, SEED) {
            let b = static_bochner_terms(&e.spacetime, &p).unwrap();
            assert!(b.residual() < 1e-6, "{}: {b:?}", e.name);
        }
    }
}

#[test]
fn monitor_preconditions() {
    let k = make_kerr(1.0, 0.5).unwrap();
    assert!(matches!(gradient_estimate_ratio(&k.spacetime, &equator(6.0), 1.0, &spec()), Err(Error::NotStatic(_))));
    let g = make_generic(3).unwrap();
    assert!(matches!(curvature_estimate_ratio(&g.spacetime, &g.anchors[0], 0.1, &spec()), Err(Error::Parameter(_))));
    let m = make_minkowski_static();
    let c = point(&[0.0, 0.0, 0.0]);
    assert!(matches!(sample_ball(&m.spacetime, &c, -1.0, &spec()), Err(Error::Parameter(_))));
    assert!(matches!(sample_ball(&m.spacetime, &c, 1.0, &SampleSpec { rays: 0, ..spec() }), Err(Error::Parameter(_))));
}
