//! Monitors for the local gradient and curvature estimates on balls of the
//! associated Riemannian metric.
//!
//! Balls are sampled by shooting radial geodesics of the associated metric, so
//! the recorded distances are curve lengths (upper bounds on the true distance)
//! and every reported sup is a sup over a finite subset.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, FDPolicy, ScalarField};
use crate::geodesics::{integrate_geodesic, GeodesicOptions, GeodesicState, MetricKind};
use crate::geometry::{CurvatureBlocks, StationarySpacetime};
use crate::ode::Exit;
use crate::oracle::full_contraction;
use crate::reduction4d::h_monitor;

pub const DEFAULT_RAYS: usize = 64;
pub const DEFAULT_PER_RAY: usize = 16;
/// Integration tolerance for the radial geodesics.
pub const SAMPLING_TOL: f64 = 1e-11;

const SAMPLING_NOTE: &str =
    "distances are radial geodesic lengths (upper bounds on the true distance); sup is taken over sampled points only";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub rays: usize,
    pub per_ray: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { rays: DEFAULT_RAYS, per_ray: DEFAULT_PER_RAY, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallSample {
    pub center: ChartPoint,
    pub a: f64,
    /// Horizontal positions with their radial distance from the center.
    pub points: Vec<(ChartPoint, f64)>,
}

impl BallSample {
    /// Points at distance at most `r`.
    pub fn within(&self, r: f64) -> impl Iterator<Item = &ChartPoint> {
        self.points.iter().filter(move |(_, d)| *d <= r * (1.0 + 1e-12)).map(|(p, _)| p)
    }
}

/// Unit tangents of the associated metric at `center`, as frame components.
fn unit_directions(s: &StationarySpacetime, center: &ChartPoint, spec: &SampleSpec) -> Result<Vec<nalgebra::DVector<f64>>> {
    let l = s.local(center)?;
    let n = l.n;
    let chol = l.hm.g.clone().cholesky().ok_or_else(|| Error::SingularMetric("horizontal metric not positive".into()))?;
    // columns of L^-T are g-orthonormal
    let basis = chol.l().transpose().try_inverse().ok_or_else(|| Error::SingularMetric("Cholesky factor".into()))?;
    let u = l.u.value();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.rays);
    while out.len() < spec.rays {
        let xi: Vec<f64> = (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        let spatial = &basis * nalgebra::DVector::from_iterator(n, xi[1..].iter().map(|v| v / norm));
        let mut t = nalgebra::DVector::zeros(n + 1);
        t[0] = xi[0] / norm / u;
        t.rows_mut(1, n).copy_from(&spatial);
        out.push(t);
    }
    Ok(out)
}

/// Samples the ball of radius `a` by `rays` radial geodesics, `per_ray` points each.
pub fn sample_ball(s: &StationarySpacetime, center: &ChartPoint, a: f64, spec: &SampleSpec) -> Result<BallSample> {
    s.check_point(center)?;
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::Parameter(format!("ball radius must be finite and non-negative, got {a}")));
    }
    let mut points = vec![(center.clone(), 0.0)];
    if a == 0.0 {
        return Ok(BallSample { center: center.clone(), a, points });
    }
    if spec.rays == 0 || spec.per_ray == 0 {
        return Err(Error::Parameter("ray_count and per_ray must be positive".into()));
    }
    let hat = s.lorentzian().hat_metric();
    let dirs = unit_directions(&hat, center, spec)?;
    let opts = GeodesicOptions::new(SAMPLING_TOL).with_output_step(a / spec.per_ray as f64);
    let rays: Vec<Result<Vec<(ChartPoint, f64)>>> = dirs
        .into_par_iter()
        .map(|t| {
            let init = GeodesicState { t: 0.0, x: center.clone(), frame_t: t };
            let traj = integrate_geodesic(&hat, MetricKind::Hat, &init, a, &opts)?;
            if traj.exit != Exit::ReachedSmax {
                let last = traj.samples.last().map(|s| s.state.x.to_vec()).unwrap_or_default();
                return Err(Error::Domain { point: last });
            }
            Ok(traj.samples.into_iter().skip(1).map(|smp| (smp.state.x, smp.s)).collect())
        })
        .collect();
    for r in rays {
        points.extend(r?);
    }
    Ok(BallSample { center: center.clone(), a, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// `|hat nabla log u^2|`, bound `sqrt(n)/a + sqrt(max(-lambda, 0))`.
    Gradient,
    /// `|Rm|` measured with the associated metric, bound `a^-2 + max(-lambda, 0)`.
    Curvature,
    /// `2 |nabla log u|^2 + u^-4 |omega|^2 / 2`, bound `a^-2`.
    H,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorValue {
    pub monitor: Monitor,
    pub sup: f64,
    pub bound_form: f64,
    pub implied_constant: f64,
    pub argmax: ChartPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub n: usize,
    pub lambda: f64,
    pub rays: usize,
    pub per_ray: usize,
    pub seed: u64,
    pub note: String,
}

/// One estimate monitor over the half-radius ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub entry: String,
    pub center: ChartPoint,
    pub a: f64,
    pub monitor: Monitor,
    pub sup: f64,
    pub bound_form: f64,
    pub implied_constant: f64,
    /// Number of points the sup was taken over.
    pub samples: usize,
    pub argmax: ChartPoint,
    /// The `h` monitor reported next to the curvature monitor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion: Option<MonitorValue>,
    pub metadata: ReportMetadata,
}

impl EstimateReport {
    pub fn with_entry(mut self, name: impl Into<String>) -> Self {
        self.entry = name.into();
        self
    }
}

fn einstein_constant(s: &StationarySpacetime) -> Result<f64> {
    s.lambda().ok_or_else(|| Error::Parameter("estimate monitors need an Einstein constant".into()))
}

fn check_radius(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("ball radius must be positive, got {a}")))
    }
}

/// `(sup, argmax, count)` of `f` over the half-radius points.
fn sup_over(ball: &BallSample, f: impl Fn(&ChartPoint) -> Result<f64> + Sync) -> Result<(f64, ChartPoint, usize)> {
    let pts: Vec<&ChartPoint> = ball.within(0.5 * ball.a).collect();
    let vals: Vec<f64> = pts.par_iter().map(|p| f(p)).collect::<Result<_>>()?;
    let mut best = (f64::NEG_INFINITY, ball.center.clone());
    for (v, p) in vals.iter().zip(&pts) {
        if !v.is_finite() {
            return Err(Error::SingularMetric(format!("monitor not finite at {:?}", p.coords())));
        }
        if *v > best.0 {
            best = (*v, (*p).clone());
        }
    }
    Ok((best.0, best.1, pts.len()))
}

fn metadata(s: &StationarySpacetime, lambda: f64, spec: &SampleSpec) -> ReportMetadata {
    ReportMetadata {
        n: s.n(),
        lambda,
        rays: spec.rays,
        per_ray: spec.per_ray,
        seed: spec.seed,
        note: SAMPLING_NOTE.into(),
    }
}

/// Gradient monitor for static Einstein metrics:
/// `sup 2 |nabla log u|_g` against `sqrt(n)/a + sqrt(max(-lambda, 0))`.
pub fn gradient_estimate_ratio(s: &StationarySpacetime, center: &ChartPoint, a: f64, spec: &SampleSpec) -> Result<EstimateReport> {
    check_radius(a)?;
    let lambda = einstein_constant(s)?;
    s.local(center)?.require_static()?;
    let ball = sample_ball(s, center, a, spec)?;
    let (sup, argmax, count) = sup_over(&ball, |p| {
        let l = s.local(p)?;
        l.require_static()?;
        Ok(2.0 * l.hm.norm_sq(&l.grad_log_u()).sqrt())
    })?;
    let bound_form = (s.n() as f64).sqrt() / a + (-lambda).max(0.0).sqrt();
    Ok(EstimateReport {
        entry: String::new(),
        center: center.clone(),
        a,
        monitor: Monitor::Gradient,
        sup,
        bound_form,
        implied_constant: sup / bound_form,
        samples: count,
        argmax,
        companion: None,
        metadata: metadata(s, lambda, spec),
    })
}

/// `|Rm|` of the spacetime metric with every slot contracted by the associated metric.
pub fn curvature_norm(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    let l = s.lorentzian().local(p)?;
    let rm = CurvatureBlocks::from_local(&l).full();
    let n = l.n;
    let mut hinv = DMatrix::zeros(n + 1, n + 1);
    hinv[(0, 0)] = 1.0 / (l.u.value() * l.u.value());
    hinv.view_mut((1, 1), (n, n)).copy_from(&l.hm.ginv);
    Ok(full_contraction(&rm, &rm, &hinv).max(0.0).sqrt())
}

/// Curvature monitor in dimension four, with the `h` monitor as companion.
pub fn curvature_estimate_ratio(s: &StationarySpacetime, center: &ChartPoint, a: f64, spec: &SampleSpec) -> Result<EstimateReport> {
    if s.n() != 3 {
        return Err(Error::Dimension(format!("curvature monitor needs n = 3, got {}", s.n())));
    }
    check_radius(a)?;
    let lambda = einstein_constant(s)?;
    let ball = sample_ball(s, center, a, spec)?;
    let (sup, argmax, count) = sup_over(&ball, |p| curvature_norm(s, p))?;
    let (h_sup, h_arg, _) = sup_over(&ball, |p| Ok(h_monitor(s, p)?.value))?;
    let bound_form = a.powi(-2) + (-lambda).max(0.0);
    let h_bound = a.powi(-2);
    Ok(EstimateReport {
        entry: String::new(),
        center: center.clone(),
        a,
        monitor: Monitor::Curvature,
        sup,
        bound_form,
        implied_constant: sup / bound_form,
        samples: count,
        argmax,
        companion: Some(MonitorValue {
            monitor: Monitor::H,
            sup: h_sup,
            bound_form: h_bound,
            implied_constant: h_sup / h_bound,
            argmax: h_arg,
        }),
        metadata: metadata(s, lambda, spec),
    })
}

/// `sup |Rm| a^2` at radius `a` and at `a/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoScale {
    pub a: f64,
    pub sup_a2: f64,
    pub sup_a2_half: f64,
    pub ratio: f64,
}

pub fn two_scale_diagnostic(s: &StationarySpacetime, center: &ChartPoint, a: f64, spec: &SampleSpec) -> Result<TwoScale> {
    let full = curvature_estimate_ratio(s, center, a, spec)?;
    let half = curvature_estimate_ratio(s, center, 0.5 * a, spec)?;
    let sup_a2 = full.sup * a * a;
    let sup_a2_half = half.sup * 0.25 * a * a;
    Ok(TwoScale { a, sup_a2, sup_a2_half, ratio: sup_a2 / sup_a2_half })
}

/// Both sides of the static identity
/// `hat Delta |nabla log u|^2 = 2 |nabla^2 log u|^2 + 2 |nabla log u|^4 + 2 lambda |nabla log u|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StaticBochner {
    pub lhs: f64,
    pub rhs: f64,
}

impl StaticBochner {
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`, or the plain difference when both are below `1e-12`.
    pub fn residual(&self) -> f64 {
        let diff = (self.lhs - self.rhs).abs();
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale < 1e-12 {
            diff
        } else {
            diff / scale
        }
    }
}

pub fn static_bochner_terms(s: &StationarySpacetime, p: &ChartPoint) -> Result<StaticBochner> {
    let lambda = einstein_constant(s)?;
    let st = s.lorentzian();
    let l = st.local(p)?;
    l.require_static()?;
    let dlu = l.grad_log_u();
    let q = l.hm.norm_sq(&dlu);
    let hess = l.hm.covariant_hessian(&l.u.ln());
    let rhs = 2.0 * l.hm.contract2(&hess, &hess) + 2.0 * q * q + 2.0 * lambda * q;

    let policy = FDPolicy::default();
    let margin = policy.steps(p).into_iter().fold(0.0, f64::max);
    if !st.domain().contains(p, margin) {
        return Err(Error::domain(p));
    }
    let inner = st.clone();
    let grad_sq = ScalarField::from_values(
        "grad_log_u_sq",
        st.n(),
        move |x| inner.local(x).map(|l| l.hm.norm_sq(&l.grad_log_u())).unwrap_or(f64::NAN),
        policy,
    );
    let lhs = st.hat_metric().hessian_laplacian(&grad_sq, p)?.laplacian;
    if !lhs.is_finite() {
        return Err(Error::domain(p));
    }
    Ok(StaticBochner { lhs, rhs })
}

pub fn static_bochner_residual(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    Ok(static_bochner_terms(s, p)?.residual())
}
