//! Geodesics of the spacetime metric and of the associated Riemannian metric,
//! their horizontal projection, and the projected geodesic equation on the orbit space.
//!
//! Full geodesics use the exact Christoffels of the assembled coordinate metric.
//! The projected equation uses the adapted-frame data instead, so comparing
//! the two checks one against the other.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, FDPolicy};
use crate::geometry::StationarySpacetime;
use crate::ode::{integrate, Exit, OdeOptions};
use crate::oracle::{vector_from_frame, vector_to_frame, CoordinateMetric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Lorentzian,
    Hat,
}

impl MetricKind {
    fn spacetime(self, s: &StationarySpacetime) -> StationarySpacetime {
        let lorentz = match s.branch() {
            crate::geometry::Branch::Lorentzian => s.clone(),
            crate::geometry::Branch::Riemannian => s.hat_metric(),
        };
        match self {
            MetricKind::Lorentzian => lorentz,
            MetricKind::Hat => lorentz.hat_metric(),
        }
    }
}

/// Position and frame components `T^0..T^n` of the tangent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicState {
    pub t: f64,
    pub x: ChartPoint,
    pub frame_t: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub s: f64,
    pub state: GeodesicState,
    /// Coordinate velocity `dx^a/ds`.
    pub velocity: DVector<f64>,
    /// `y(s) = -int T^i theta_i ds`, the time shift of the horizontal projection.
    pub projection_shift: f64,
    pub c_drift: f64,
    pub norm_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicTrajectory {
    pub kind: MetricKind,
    pub samples: Vec<GeodesicSample>,
    /// `<T, X> = T^0 w` at `s = 0`.
    pub c: f64,
    /// `g(T, T)` at `s = 0`.
    pub norm: f64,
    pub exit: Exit,
    pub s_exit: f64,
    pub steps: usize,
}

impl GeodesicTrajectory {
    pub fn max_c_drift(&self) -> f64 {
        self.samples.iter().map(|s| s.c_drift).fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_drift).fold(0.0, f64::max)
    }

    /// CSV with columns `s, t, x1..xn, T0..Tn, c_drift, gTT_drift`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let n = self.samples.first().map(|s| s.state.x.dim()).unwrap_or(0);
        let mut header = vec!["s".to_string(), "t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((0..=n).map(|i| format!("T{i}")));
        header.push("c_drift".into());
        header.push("gTT_drift".into());
        writeln!(out, "{}", header.join(","))?;
        for smp in &self.samples {
            let mut row = vec![smp.s, smp.state.t];
            row.extend(smp.state.x.iter());
            row.extend(smp.state.frame_t.iter());
            row.push(smp.c_drift);
            row.push(smp.norm_drift);
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Integration settings shared by every geodesic routine.
#[derive(Clone, Copy, Debug)]
pub struct GeodesicOptions {
    pub tol: f64,
    pub output_step: Option<f64>,
    pub max_steps: usize,
}

impl GeodesicOptions {
    pub fn new(tol: f64) -> Self {
        GeodesicOptions { tol, output_step: None, max_steps: 1_000_000 }
    }

    pub fn with_output_step(mut self, d: f64) -> Self {
        self.output_step = Some(d);
        self
    }

    fn ode(&self) -> OdeOptions {
        let mut o = OdeOptions::with_tol(self.tol);
        o.output_step = self.output_step;
        o.max_steps = self.max_steps;
        o
    }
}

/// Margin the chart must keep around a point so oracle stencils stay inside.
fn stencil_margin(x: &[f64]) -> f64 {
    2.0 * FDPolicy::default().step_at(x.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
}

/// Integrates the geodesic equation of the chosen metric with coordinate state
/// `(t, x, V, y)`, where `y` accumulates the projection shift.
pub fn integrate_geodesic(
    s: &StationarySpacetime,
    kind: MetricKind,
    init: &GeodesicState,
    s_max: f64,
    opts: &GeodesicOptions,
) -> Result<GeodesicTrajectory> {
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let st = kind.spacetime(s);
    let n = st.n();
    if init.x.dim() != n || init.frame_t.len() != n + 1 {
        return Err(Error::Dimension(format!("initial state must have n = {n} coordinates and n + 1 tangent components")));
    }
    if !st.domain().contains(&init.x, stencil_margin(&init.x)) {
        return Err(Error::domain(&init.x));
    }
    let metric = CoordinateMetric::from_spacetime(&st);
    let v0 = vector_from_frame(&init.frame_t, &st.theta_values(&init.x));
    let mut y0 = vec![init.t];
    y0.extend(init.x.iter());
    y0.extend(v0.iter());
    y0.push(0.0);
    let dim = n + 1;

    let rhs = |_s: f64, y: &[f64]| -> Result<Vec<f64>> {
        let gamma = st.coordinate_christoffels(&y[1..dim])?;
        let v = &y[dim..2 * dim];
        let mut out = vec![0.0; 2 * dim + 1];
        out[..dim].copy_from_slice(v);
        for a in 0..dim {
            let mut acc = 0.0;
            for b in 0..dim {
                for c in 0..dim {
                    acc += gamma[[a, b, c]] * v[b] * v[c];
                }
            }
            out[dim + a] = -acc;
        }
        let x = &y[1..dim];
        out[2 * dim] = -st.theta_values(x).iter().zip(&v[1..]).map(|(th, vi)| th * vi).sum::<f64>();
        Ok(out)
    };
    let inside = |y: &[f64]| {
        let x = &y[1..dim];
        y.iter().all(|v| v.is_finite()) && st.domain().contains(x, stencil_margin(x))
    };
    let sol = integrate(&rhs, &y0, s_max, &inside, &opts.ode())?;

    let invariants = |y: &[f64]| -> Result<(f64, f64, DVector<f64>)> {
        let g = metric.components(&y[..dim])?;
        let v = DVector::from_column_slice(&y[dim..2 * dim]);
        let c = (g.row(0) * &v)[0];
        let norm = (v.transpose() * &g * &v)[0];
        Ok((c, norm, v))
    };
    let (c0, norm0, _) = invariants(&y0)?;
    let scale_c = c0.abs().max(1.0);
    let scale_n = norm0.abs().max(1.0);
    let mut samples = Vec::with_capacity(sol.samples.len());
    for (sv, y) in &sol.samples {
        let (c, norm, v) = invariants(y)?;
        let x = ChartPoint::new(y[1..dim].to_vec());
        let frame_t = vector_to_frame(&v, &st.theta_values(&x));
        samples.push(GeodesicSample {
            s: *sv,
            state: GeodesicState { t: y[0], x, frame_t },
            velocity: v,
            projection_shift: y[2 * dim],
            c_drift: (c - c0).abs() / scale_c,
            norm_drift: (norm - norm0).abs() / scale_n,
        });
    }
    Ok(GeodesicTrajectory { kind, samples, c: c0, norm: norm0, exit: sol.exit, s_exit: sol.s_end, steps: sol.steps })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectedSample {
    pub s: f64,
    pub x: ChartPoint,
    /// `t`-coordinate of the horizontal curve.
    pub t: f64,
    /// Killing-flow parameter carrying the geodesic onto the horizontal curve.
    pub tau: f64,
    /// `<sigma', X>` evaluated with the coordinate metric.
    pub vertical_component: f64,
    pub hat_speed_sigma: f64,
    pub hat_speed_gamma: f64,
}

/// The horizontal curve through the geodesic's initial point (`tau_0 = 0`).
pub fn horizontal_projection(s: &StationarySpacetime, traj: &GeodesicTrajectory) -> Result<Vec<ProjectedSample>> {
    let lorentz = MetricKind::Lorentzian.spacetime(s);
    let hat = MetricKind::Hat.spacetime(s);
    let gbar = CoordinateMetric::from_spacetime(&lorentz);
    let ghat = CoordinateMetric::from_spacetime(&hat);
    let t0 = traj.samples.first().map(|s| s.state.t).unwrap_or(0.0);
    traj.samples
        .iter()
        .map(|smp| {
            let x = &smp.state.x;
            let n = x.dim();
            let t_sigma = t0 + smp.projection_shift;
            let theta = lorentz.theta_values(x);
            let vx = smp.velocity.rows(1, n);
            let mut sigma_dot = smp.velocity.clone();
            sigma_dot[0] = -theta.dot(&vx);
            let pt: Vec<f64> = std::iter::once(t_sigma).chain(x.iter().copied()).collect();
            let gb = gbar.components(&pt)?;
            let gh = ghat.components(&pt)?;
            let vertical = (gb.row(0) * &sigma_dot)[0];
            let speed = |v: &DVector<f64>| (v.transpose() * &gh * v)[0].max(0.0).sqrt();
            Ok(ProjectedSample {
                s: smp.s,
                x: x.clone(),
                t: t_sigma,
                tau: t_sigma - smp.state.t,
                vertical_component: vertical,
                hat_speed_sigma: speed(&sigma_dot),
                hat_speed_gamma: speed(&smp.velocity),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitCurve {
    pub samples: Vec<(f64, ChartPoint, DVector<f64>)>,
    pub exit: Exit,
    pub s_exit: f64,
}

/// Integrates `x'' + Gamma x' x' = -(c^2/2) grad(1/w) - c (i_x' d theta)^#` on `(N, g)`,
/// with `w` taken from the branch of `s`.
pub fn projected_geodesic_integrate(
    s: &StationarySpacetime,
    x0: &ChartPoint,
    v0: &DVector<f64>,
    c: f64,
    s_max: f64,
    opts: &GeodesicOptions,
) -> Result<OrbitCurve> {
    let n = s.n();
    if x0.dim() != n || v0.len() != n {
        return Err(Error::Dimension(format!("projected geodesic needs an {n}-point and an {n}-vector")));
    }
    let mut y0: Vec<f64> = x0.to_vec();
    y0.extend(v0.iter());
    let rhs = |_s: f64, y: &[f64]| -> Result<Vec<f64>> {
        let l = s.local(&y[..n])?;
        let v = DVector::from_column_slice(&y[n..]);
        // grad(1/w) = -grad(w) / w^2
        let force_w = l.hm.ginv.clone() * (&l.dw / (l.w * l.w)) * (0.5 * c * c);
        let force_twist = &l.hm.ginv * (l.lambda.transpose() * &v) * (-c);
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            out[k] = v[k];
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += l.hm.gamma[[k, i, j]] * v[i] * v[j];
                }
            }
            out[n + k] = -acc + force_w[k] + force_twist[k];
        }
        Ok(out)
    };
    let inside = |y: &[f64]| y.iter().all(|v| v.is_finite()) && s.domain().contains(&y[..n], stencil_margin(&y[..n]));
    let sol = integrate(&rhs, &y0, s_max, &inside, &opts.ode())?;
    Ok(OrbitCurve {
        samples: sol
            .samples
            .into_iter()
            .map(|(sv, y)| (sv, ChartPoint::new(y[..n].to_vec()), DVector::from_column_slice(&y[n..])))
            .collect(),
        exit: sol.exit,
        s_exit: sol.s_end,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RayOutcome {
    pub exit: Exit,
    pub s_exit: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessReport {
    pub kind: MetricKind,
    pub s_max: f64,
    pub rays: Vec<RayOutcome>,
    /// Always true: a chart exit says nothing about completeness of the metric.
    pub diagnostic_only: bool,
}

impl CompletenessReport {
    pub fn all_reached(&self) -> bool {
        self.rays.iter().all(|r| r.exit == Exit::ReachedSmax)
    }
}

/// Integrates a fan of geodesics and reports where each one stops.
pub fn completeness_probe(
    s: &StationarySpacetime,
    kind: MetricKind,
    fan: &[GeodesicState],
    s_max: f64,
    tol: f64,
) -> Result<CompletenessReport> {
    if fan.is_empty() {
        return Err(Error::Parameter("completeness probe needs at least one ray".into()));
    }
    let mut opts = GeodesicOptions::new(tol);
    opts.output_step = Some(s_max);
    let rays = fan
        .par_iter()
        .map(|init| integrate_geodesic(s, kind, init, s_max, &opts).map(|t| RayOutcome { exit: t.exit, s_exit: t.s_exit }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompletenessReport { kind, s_max, rays, diagnostic_only: true })
}

/// Initial frame tangent of the circular equatorial Schwarzschild orbit of radius `r`,
/// in the chart `(r, vartheta, phi)`.
pub fn schwarzschild_circular_tangent(mass: f64, r: f64) -> Result<DVector<f64>> {
    if r <= 3.0 * mass {
        return Err(Error::Parameter(format!("no timelike circular orbit at r = {r} for M = {mass}")));
    }
    let t_dot = (1.0 / (1.0 - 3.0 * mass / r)).sqrt();
    let phi_dot = t_dot * (mass / r.powi(3)).sqrt();
    Ok(DVector::from_vec(vec![t_dot, 0.0, 0.0, phi_dot]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_minkowski_static, make_schwarzschild};

    #[test]
    fn static_worldline_is_straight() {
        let e = make_minkowski_static();
        let init = GeodesicState { t: 0.0, x: ChartPoint::new(vec![0.5, 0.0, 0.0]), frame_t: DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]) };
        let traj = integrate_geodesic(&e.spacetime, MetricKind::Lorentzian, &init, 5.0, &GeodesicOptions::new(1e-10)).unwrap();
        assert_eq!(traj.c, -1.0);
        let last = traj.samples.last().unwrap();
        assert!((last.state.t - 5.0).abs() < 1e-12);
        assert!((last.state.x[0] - 0.5).abs() < 1e-14);
        let proj = horizontal_projection(&e.spacetime, &traj).unwrap();
        assert!(proj.iter().all(|p| (p.x[0] - 0.5).abs() < 1e-14 && p.t == 0.0));
    }

    #[test]
    fn circular_orbit_data_at_r6() {
        let t = schwarzschild_circular_tangent(1.0, 6.0).unwrap();
        assert!((t[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((t[3] - 2f64.sqrt() / 216f64.sqrt()).abs() < 1e-15);
        assert!(schwarzschild_circular_tangent(1.0, 2.5).is_err());
    }

    #[test]
    fn csv_has_documented_columns() {
        let e = make_schwarzschild(1.0).unwrap();
        let init = GeodesicState { t: 0.0, x: ChartPoint::new(vec![10.0, 1.2, 0.0]), frame_t: DVector::from_vec(vec![1.2, 0.0, 0.0, 0.0]) };
        let traj = integrate_geodesic(&e.spacetime, MetricKind::Lorentzian, &init, 1.0, &GeodesicOptions::new(1e-9)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,t,x1,x2,x3,T0,T1,T2,T3,c_drift,gTT_drift\n"));
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
    }
}
