#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DVector;
use stationary::catalog::{make_ads, make_kerr, make_minkowski_rotating, make_schwarzschild, CatalogEntry};
use stationary::geodesics::{
    horizontal_projection, integrate_geodesic, projected_geodesic_integrate, GeodesicOptions, GeodesicState, MetricKind,
};
use stationary::ode::Exit;
use stationary::ChartPoint;

pub const SEED: u64 = 20260101;

/// The four entries of the oracle-equivalence suite.
pub fn oracle_entries() -> Vec<CatalogEntry> {
    vec![
        make_minkowski_rotating(0.5).unwrap(),
        make_schwarzschild(1.0).unwrap(),
        make_kerr(1.0, 0.5).unwrap(),
        make_ads(-3.0).unwrap(),
    ]
}

pub fn point(v: &[f64]) -> ChartPoint {
    ChartPoint::new(v.to_vec())
}

pub fn state(x: &[f64], t: &[f64]) -> GeodesicState {
    GeodesicState { t: 0.0, x: point(x), frame_t: DVector::from_column_slice(t) }
}

/// Initial data that stays inside each chart for `s` in `[0, 10]`.
pub fn projection_scenarios() -> Vec<(CatalogEntry, GeodesicState)> {
    vec![
        (make_schwarzschild(1.0).unwrap(), state(&[8.0, 1.2, 0.0], &[1.2, -0.1, 0.0, 0.0])),
        // co-rotating with the inertial frame, so the orbit stays inside the light cylinder
        (make_minkowski_rotating(0.5).unwrap(), state(&[0.8, 0.1, 0.0], &[1.2, 0.03, 0.5, 0.05])),
        (make_kerr(1.0, 0.5).unwrap(), state(&[7.0, 1.3, 0.0], &[1.2, 0.05, 0.02, 0.03])),
    ]
}

pub struct ProjectionOutcome {
    pub name: String,
    pub max_deviation: f64,
    pub max_vertical: f64,
    pub inequality_holds: bool,
    pub full_exit: Exit,
    pub projected_exit: Exit,
    pub shared_points: usize,
}

/// Projection of the full geodesic against the projected equation on a common output grid.
pub fn projection_agreement(entry: &CatalogEntry, init: &GeodesicState, s_max: f64) -> ProjectionOutcome {
    let s = &entry.spacetime;
    let opts = GeodesicOptions::new(1e-11).with_output_step(0.5);
    let traj = integrate_geodesic(s, MetricKind::Lorentzian, init, s_max, &opts).unwrap();
    let proj = horizontal_projection(s, &traj).unwrap();
    let c = init.frame_t[0] * s.w(&init.x);
    let n = s.n();
    let v0 = DVector::from_iterator(n, init.frame_t.iter().skip(1).copied());
    let orbit = projected_geodesic_integrate(s, &init.x, &v0, c, s_max, &opts).unwrap();
    let mut dev: f64 = 0.0;
    let mut shared = 0;
    for a in &traj.samples {
        if let Some(b) = orbit.samples.iter().find(|b| b.0 == a.s) {
            shared += 1;
            for i in 0..n {
                dev = dev.max((a.state.x[i] - b.1[i]).abs());
            }
        }
    }
    ProjectionOutcome {
        name: entry.name.clone(),
        max_deviation: dev,
        max_vertical: proj.iter().map(|p| p.vertical_component.abs()).fold(0.0, f64::max),
        inequality_holds: proj.iter().all(|p| p.hat_speed_sigma <= p.hat_speed_gamma * (1.0 + 1e-12)),
        full_exit: traj.exit,
        projected_exit: orbit.exit,
        shared_points: shared,
    }
}

pub fn equator(r: f64) -> ChartPoint {
    point(&[r, PI / 2.0, 0.0])
}
