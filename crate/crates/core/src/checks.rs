//! Residual suites: adapted-frame formulas against the coordinate oracle and the
//! identities each catalog flag promises.

use nalgebra::DMatrix;
use ndarray::{ArrayD, IxDyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEntry;
use crate::error::Result;
use crate::estimates::static_bochner_residual;
use crate::fields::{ChartPoint, FDPolicy, ScalarField};
use crate::geometry::{CurvatureBlocks, FrameConnection, StationarySpacetime};
use crate::oracle::{coordinate_ricci, coordinate_riemann, frame_matrix, frame_transform, spacetime_point, CoordinateMetric};
use crate::reduction4d::{bochner_terms, tension_field, twist_exterior_derivative_fd, twist_identities};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Analytic partials of the metric data.
    #[default]
    Analytic,
    /// Every partial by finite differences.
    Fd,
}

impl Tier {
    pub fn spacetime(self, s: &StationarySpacetime) -> StationarySpacetime {
        match self {
            Tier::Analytic => s.clone(),
            Tier::Fd => s.fd_only(FDPolicy::default()),
        }
    }

    /// Tolerance for quantities built from metric derivatives.
    pub fn derivative_tol(self, analytic: f64) -> f64 {
        match self {
            Tier::Analytic => analytic,
            Tier::Fd => analytic.max(1e-3),
        }
    }
}

fn matrix_to_dyn(m: &DMatrix<f64>) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(&[m.nrows(), m.ncols()]), |i| m[(i[0], i[1])])
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

/// Frame Riemann and Ricci against the oracle, each as `max |diff| / max(1, max |oracle|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleComparison {
    pub riemann: f64,
    pub ricci: f64,
}

pub fn oracle_comparison(s: &StationarySpacetime, oracle: &CoordinateMetric, p: &ChartPoint) -> Result<OracleComparison> {
    let x = spacetime_point(0.0, p);
    let r = frame_transform(&coordinate_riemann(oracle, &x)?.into_dyn(), s, p)?;
    let blocks = s.curvature_blocks(p)?.full().into_dyn();
    let r_scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r_diff = (&r - &blocks).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ric = frame_transform(&matrix_to_dyn(&coordinate_ricci(oracle, &x)?), s, p)?;
    let ric_blocks = matrix_to_dyn(&s.ricci_blocks(p)?.full());
    let c_scale = ric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c_diff = (&ric - &ric_blocks).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(OracleComparison { riemann: rel(r_diff, r_scale), ricci: rel(c_diff, c_scale) })
}

/// Ricci of the associated metric against the oracle, relative as above.
pub fn hat_ricci_comparison(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    let hat = s.lorentzian().hat_metric();
    let oracle = CoordinateMetric::from_spacetime(&hat);
    let ric = coordinate_ricci(&oracle, &spacetime_point(0.0, p))?;
    let f = frame_matrix(&s.theta_values(p));
    let ric_f = &f * ric * f.transpose();
    Ok(rel((s.hat_ricci_blocks(p)?.full() - &ric_f).amax(), ric_f.amax()))
}

/// Ricci of the conformal horizontal metric against the oracle, relative as above.
pub fn conformal_ricci_comparison(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    let oracle = CoordinateMetric::conformal(s)?;
    let ric = coordinate_ricci(&oracle, p)?;
    let cd = s.conformal_reduction(p)?;
    Ok(rel((&cd.ric_til - &ric).amax(), ric.amax()))
}

/// Pair antisymmetry, pair symmetry and first Bianchi identity of the frame Riemann tensor.
pub fn riemann_symmetry_residual(blocks: &CurvatureBlocks) -> f64 {
    let r = blocks.full();
    let d = r.shape()[0];
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let v = r[[a, b, c, e]];
                    worst = worst
                        .max((v + r[[b, a, c, e]]).abs())
                        .max((v + r[[a, b, e, c]]).abs())
                        .max((v - r[[c, e, a, b]]).abs())
                        .max((v + r[[a, c, e, b]] + r[[a, e, b, c]]).abs());
                }
            }
        }
    }
    worst
}

/// `max |Ric - lambda gbar|` in the adapted frame.
pub fn einstein_residual(s: &StationarySpacetime, lambda: f64, p: &ChartPoint) -> Result<f64> {
    let l = s.lorentzian().local(p)?;
    let ric = s.lorentzian().ricci_blocks(p)?.full();
    Ok((ric - l.frame_metric() * lambda).amax())
}

/// Polynomial test fields for the Laplacian relation.
pub fn test_fields(n: usize) -> Vec<ScalarField> {
    let last = n - 1;
    vec![
        ScalarField::coordinate(n, 0),
        ScalarField::from_expr("x1^2", n, |x| x[0].square()),
        ScalarField::from_expr("x1 xn", n, move |x| x[0] * x[last]),
        ScalarField::from_expr("x2^2 - x3", n, move |x| x[1].square() - x[2 % n]),
        ScalarField::from_expr("cubic", n, move |x| x[0].powi(3) * 0.2 + x[1] * x[last] - x[0] * 0.5),
    ]
}

/// `max |u^{2/(n-2)} tilde Delta L - hat Delta L|` over [`test_fields`].
pub fn laplacian_relation_residual(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    let hat = s.lorentzian().hat_metric();
    let mut worst: f64 = 0.0;
    for f in test_fields(s.n()) {
        let a = s.conformal_laplacian(&f, p)?;
        let b = hat.hessian_laplacian(&f, p)?.laplacian;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub max: f64,
    pub tol: f64,
    pub pass: bool,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub entry: String,
    pub tier: Tier,
    pub samples: usize,
    pub seed: u64,
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

struct Suite<'a> {
    points: &'a [ChartPoint],
    items: Vec<CheckItem>,
}

impl Suite<'_> {
    fn add(&mut self, name: &str, tol: f64, f: impl Fn(&ChartPoint) -> Result<f64> + Sync) -> Result<()> {
        let vals: Vec<f64> = self.points.par_iter().map(|p| f(p)).collect::<Result<_>>()?;
        let max = if vals.iter().any(|v| v.is_nan()) { f64::NAN } else { vals.iter().fold(0.0f64, |m, v| m.max(*v)) };
        self.items.push(CheckItem { name: name.into(), max, tol, pass: max <= tol, points: vals.len() });
        Ok(())
    }
}

/// Runs every suite that applies to `entry` at its anchors plus `samples` random interior points.
pub fn run_checks(entry: &CatalogEntry, tier: Tier, samples: usize, seed: u64) -> Result<CheckReport> {
    let s = tier.spacetime(&entry.spacetime);
    let n = s.n();
    let mut points = entry.anchors.clone();
    points.extend(entry.sample_points(samples, seed));
    let anchors = entry.anchors.clone();
    let oracle = CoordinateMetric::from_spacetime(&s);
    let dt = |t: f64| tier.derivative_tol(t);
    let mut suite = Suite { points: &points, items: Vec::new() };

    suite.add("oracle_riemann", dt(1e-5), |p| Ok(oracle_comparison(&s, &oracle, p)?.riemann))?;
    suite.add("oracle_ricci", dt(1e-5), |p| Ok(oracle_comparison(&s, &oracle, p)?.ricci))?;
    suite.add("hat_ricci_oracle", dt(1e-5), |p| hat_ricci_comparison(&s, p))?;
    suite.add("trace_consistency", 1e-8, |p| {
        let l = s.local(p)?;
        let b = CurvatureBlocks::from_local(&l);
        Ok((b.ricci_trace(&l.frame_inverse()) - s.ricci_blocks(p)?.full()).amax())
    })?;
    suite.add("riemann_symmetries", 1e-8, |p| Ok(riemann_symmetry_residual(&s.curvature_blocks(p)?)))?;
    suite.add("frame_compatibility", 1e-8, |p| {
        let l = s.local(p)?;
        Ok(FrameConnection::from_local(&l).compatibility_residual(&l))
    })?;
    if n >= 3 {
        suite.add("conformal_ricci_oracle", dt(1e-5), |p| conformal_ricci_comparison(&s, p))?;
        suite.add("laplacian_relation", 1e-7, |p| laplacian_relation_residual(&s, p))?;
    }
    if let (Some(lambda), true) = (s.lambda(), entry.flags.einstein) {
        let mut at_anchors = Suite { points: &anchors, items: Vec::new() };
        at_anchors.add("einstein_residual", dt(1e-6), |p| einstein_residual(&s, lambda, p))?;
        suite.items.extend(at_anchors.items);
        suite.add("einstein_residual_sampled", dt(1e-6), |p| einstein_residual(&s, lambda, p))?;
    }
    if entry.flags.flat {
        suite.add("flat_curvature", dt(1e-8), |p| Ok(s.curvature_blocks(p)?.full().iter().fold(0.0f64, |m, v| m.max(v.abs()))))?;
    }
    if entry.flags.is_static {
        suite.add("static_lambda", dt(1e-10), |p| Ok(s.local(p)?.lambda.amax()))?;
        if entry.flags.einstein {
            suite.add("static_system", dt(1e-6), |p| {
                let (a, b) = s.static_system_residual(p)?;
                Ok(a.max(b))
            })?;
            suite.add("static_bochner", 1e-3, |p| static_bochner_residual(&s, p))?;
        }
    }
    if n == 3 {
        suite.add("twist_norm", dt(1e-8), |p| Ok(twist_identities(&s, p)?.norm))?;
        suite.add("twist_divergence", dt(1e-6), |p| Ok(twist_identities(&s, p)?.divergence))?;
        suite.add("twist_curl", dt(1e-6), |p| Ok(twist_identities(&s, p)?.curl))?;
        if entry.flags.einstein {
            let policy = FDPolicy::default();
            suite.add("twist_closed", dt(1e-5), |p| Ok(twist_exterior_derivative_fd(&s, p, &policy)?.amax()))?;
        }
        if let (Some(lambda), true) = (s.lambda(), entry.flags.einstein) {
            // tension = 2 Ric(X, X) d/dy = -2 lambda u^2 d/dy
            suite.add("tension_field", dt(1e-4), |p| {
                let t = tension_field(&s, p)?;
                let u2 = s.lapse(p).powi(2);
                Ok(t[0].abs().max((t[1] + 2.0 * lambda * u2).abs()))
            })?;
            suite.add("bochner", 1e-3, |p| Ok(bochner_terms(&s, p)?.residual()))?;
        }
    }
    let pass = suite.items.iter().all(|i| i.pass);
    Ok(CheckReport { entry: entry.name.clone(), tier, samples: points.len(), seed, items: suite.items, pass })
}
