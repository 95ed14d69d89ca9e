//! Brute-force curvature from coordinate metric components.
//!
//! Nothing here looks at `u`, `theta` or `g` separately: the metric is
//! assembled into a matrix function first and only that is differentiated.
//! Christoffels use Richardson central differences of `g_ab`, Riemann uses a
//! second layer of differences of the Christoffels.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array3, Array4, ArrayD, Dimension, IxDyn};

use crate::error::{Error, Result};
use crate::fields::{central_diff, ChartPoint, FDPolicy};
use crate::geometry::{assemble_metric, StationarySpacetime};

type ComponentFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A metric given only by its coordinate components.
#[derive(Clone)]
pub struct CoordinateMetric {
    dim: usize,
    components: Arc<ComponentFn>,
    /// Number of negative eigenvalues expected.
    negative: usize,
    policy: FDPolicy,
}

impl fmt::Debug for CoordinateMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordinateMetric").field("dim", &self.dim).field("negative", &self.negative).finish()
    }
}

impl CoordinateMetric {
    pub fn new(
        dim: usize,
        negative: usize,
        components: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        CoordinateMetric { dim, components: Arc::new(components), negative, policy: FDPolicy::default() }
    }

    /// The spacetime metric (either branch) in coordinates `(t, x^1..x^n)`.
    pub fn from_spacetime(s: &StationarySpacetime) -> Self {
        let s = s.clone();
        let negative = if s.branch().sign() < 0.0 { 1 } else { 0 };
        CoordinateMetric::new(s.n() + 1, negative, move |p| {
            let x = &p[1..];
            if !s.domain().contains(x, 0.0) {
                return Err(Error::domain(x));
            }
            Ok(assemble_metric(s.w(x), &s.theta_values(x), &s.g().values(x)))
        })
    }

    /// The horizontal metric `g` alone.
    pub fn horizontal(s: &StationarySpacetime) -> Self {
        let s = s.clone();
        CoordinateMetric::new(s.n(), 0, move |x| {
            if !s.domain().contains(x, 0.0) {
                return Err(Error::domain(x));
            }
            Ok(s.g().values(x))
        })
    }

    /// The conformal metric `u^{2/(n-2)} g`.
    pub fn conformal(s: &StationarySpacetime) -> Result<Self> {
        let n = s.n();
        if n < 3 {
            return Err(Error::Dimension(format!("conformal metric needs n >= 3, got {n}")));
        }
        let s = s.clone();
        let c = 1.0 / (n as f64 - 2.0);
        Ok(CoordinateMetric::new(n, 0, move |x| {
            if !s.domain().contains(x, 0.0) {
                return Err(Error::domain(x));
            }
            Ok(s.g().values(x) * s.lapse(x).powf(2.0 * c))
        }))
    }

    pub fn with_policy(mut self, policy: FDPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        if p.len() != self.dim {
            return Err(Error::Dimension(format!("expected a {}-point, got {}", self.dim, p.len())));
        }
        (self.components)(p)
    }

    /// Checks symmetry, nondegeneracy and the expected signature at `p`.
    pub fn check_signature(&self, p: &[f64]) -> Result<()> {
        let g = self.components(p)?;
        if (&g - g.transpose()).amax() > 1e-12 * (1.0 + g.amax()) {
            return Err(Error::SingularMetric("metric components not symmetric".into()));
        }
        let eig = g.symmetric_eigenvalues();
        if eig.iter().any(|v| v.abs() < 1e-14) {
            return Err(Error::SingularMetric("degenerate metric".into()));
        }
        let neg = eig.iter().filter(|v| **v < 0.0).count();
        if neg != self.negative {
            return Err(Error::SingularMetric(format!("expected {} negative directions, found {neg}", self.negative)));
        }
        Ok(())
    }

    fn inverse(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.components(p)?
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric(format!("coordinate metric not invertible at {p:?}")))
    }

    /// `dg[c][(a, b)] = d_c g_ab`
    fn metric_derivatives(&self, p: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim;
        let failure = std::cell::Cell::new(None);
        let flat = |q: &[f64]| match self.components(q) {
            Ok(m) => m.as_slice().to_vec(),
            Err(e) => {
                failure.set(Some(e));
                vec![0.0; n * n]
            }
        };
        let out: Vec<DMatrix<f64>> = (0..n)
            .map(|c| {
                let d = central_diff(&flat, p, c, self.policy.step_at(p[c]), self.policy.levels());
                DMatrix::from_column_slice(n, n, &d)
            })
            .collect();
        match failure.take() {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn christoffels_flat(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(coordinate_christoffels(self, p)?.into_raw_vec_and_offset().0)
    }
}

/// `Gamma^a_bc`, indexed `[[a, b, c]]`.
pub fn coordinate_christoffels(m: &CoordinateMetric, p: &[f64]) -> Result<Array3<f64>> {
    let n = m.dim;
    let ginv = m.inverse(p)?;
    let dg = m.metric_derivatives(p)?;
    let mut gamma = Array3::zeros((n, n, n));
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                }
                gamma[[a, b, c]] = 0.5 * s;
                gamma[[a, c, b]] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// Largest `|d_a g_bc - Gamma^d_ab g_dc - Gamma^d_ac g_bd|`.
pub fn compatibility_residual(m: &CoordinateMetric, p: &[f64]) -> Result<f64> {
    let n = m.dim;
    let g = m.components(p)?;
    let dg = m.metric_derivatives(p)?;
    let gamma = coordinate_christoffels(m, p)?;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = dg[a][(b, c)];
                for d in 0..n {
                    s -= gamma[[d, a, b]] * g[(d, c)] + gamma[[d, a, c]] * g[(b, d)];
                }
                worst = worst.max(s.abs());
            }
        }
    }
    Ok(worst)
}

/// Fully covariant `R_abcd`, with `R_1212 > 0` on round spheres.
pub fn coordinate_riemann(m: &CoordinateMetric, p: &[f64]) -> Result<Array4<f64>> {
    let n = m.dim;
    let g = m.components(p)?;
    let gamma = coordinate_christoffels(m, p)?;
    let failure = std::cell::Cell::new(None);
    let flat = |q: &[f64]| match m.christoffels_flat(q) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            vec![0.0; n * n * n]
        }
    };
    // dgamma[e][[a, b, c]] = d_e Gamma^a_bc
    let dgamma: Vec<Array3<f64>> = (0..n)
        .map(|e| {
            let d = central_diff(&flat, p, e, m.policy.step_at(p[e]), m.policy.levels());
            Array3::from_shape_vec((n, n, n), d).expect("shape")
        })
        .collect();
    if let Some(e) = failure.take() {
        return Err(e);
    }
    // R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
    let mut up = Array4::zeros((n, n, n, n));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = dgamma[c][[a, d, b]] - dgamma[d][[a, c, b]];
                    for e in 0..n {
                        s += gamma[[a, c, e]] * gamma[[e, d, b]] - gamma[[a, d, e]] * gamma[[e, c, b]];
                    }
                    up[[a, b, c, d]] = s;
                }
            }
        }
    }
    let mut r = Array4::zeros((n, n, n, n));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    r[[a, b, c, d]] = (0..n).map(|e| g[(a, e)] * up[[e, b, c, d]]).sum();
                }
            }
        }
    }
    Ok(r)
}

/// `Ric_bd = g^ac R_abcd`
pub fn coordinate_ricci(m: &CoordinateMetric, p: &[f64]) -> Result<DMatrix<f64>> {
    let ginv = m.inverse(p)?;
    let r = coordinate_riemann(m, p)?;
    Ok(trace_riemann(&r, &ginv))
}

pub fn trace_riemann(r: &Array4<f64>, ginv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ginv.nrows();
    DMatrix::from_fn(n, n, |b, d| {
        let mut s = 0.0;
        for a in 0..n {
            for c in 0..n {
                s += ginv[(a, c)] * r[[a, b, c, d]];
            }
        }
        s
    })
}

pub fn coordinate_scalar(m: &CoordinateMetric, p: &[f64]) -> Result<f64> {
    let ginv = m.inverse(p)?;
    Ok(ginv.component_mul(&coordinate_ricci(m, p)?).sum())
}

/// `R_abcd R^abcd`
pub fn kretschmann(m: &CoordinateMetric, p: &[f64]) -> Result<f64> {
    let ginv = m.inverse(p)?;
    let r = coordinate_riemann(m, p)?;
    Ok(full_contraction(&r, &r, &ginv))
}

/// `A_abcd B_efgh h^ae h^bf h^cg h^dh` for any symmetric `h`.
pub fn full_contraction(a: &Array4<f64>, b: &Array4<f64>, h: &DMatrix<f64>) -> f64 {
    let raised = raise_all(b, h);
    a.iter().zip(raised.iter()).map(|(x, y)| x * y).sum()
}

fn raise_all(t: &Array4<f64>, h: &DMatrix<f64>) -> Array4<f64> {
    let dynamic = t.clone().into_dyn();
    transform_axes(&dynamic, h).into_dimensionality().expect("valence 4")
}

/// Divergence of the Einstein tensor, `max_b |g^ac nabla_a G_cb|`, by a third
/// layer of differences. Only meaningful with a coarse outer step.
pub fn einstein_divergence(m: &CoordinateMetric, p: &[f64], outer_step: f64) -> Result<f64> {
    let n = m.dim;
    let failure = std::cell::Cell::new(None);
    let einstein = |q: &[f64]| -> Result<DMatrix<f64>> {
        let ginv = m.inverse(q)?;
        let ric = coordinate_ricci(m, q)?;
        let scalar = ginv.component_mul(&ric).sum();
        Ok(ric - m.components(q)? * (0.5 * scalar))
    };
    let flat = |q: &[f64]| match einstein(q) {
        Ok(e) => e.as_slice().to_vec(),
        Err(e) => {
            failure.set(Some(e));
            vec![0.0; n * n]
        }
    };
    let dg_tensor: Vec<DMatrix<f64>> = (0..n)
        .map(|a| DMatrix::from_column_slice(n, n, &central_diff(&flat, p, a, outer_step * p[a].abs().max(1.0), 2)))
        .collect();
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let ginv = m.inverse(p)?;
    let gamma = coordinate_christoffels(m, p)?;
    let g_here = einstein(p)?;
    let mut worst: f64 = 0.0;
    for b in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            for c in 0..n {
                let mut cov = dg_tensor[a][(c, b)];
                for d in 0..n {
                    cov -= gamma[[d, a, c]] * g_here[(d, b)] + gamma[[d, a, b]] * g_here[(c, d)];
                }
                s += ginv[(a, c)] * cov;
            }
        }
        worst = worst.max(s.abs());
    }
    Ok(worst)
}

/// Rows are the adapted frame `e_0 = d_t`, `e_i = d_i - theta_i d_t` in coordinate components.
pub fn frame_matrix(theta: &DVector<f64>) -> DMatrix<f64> {
    let n = theta.len();
    let mut e = DMatrix::identity(n + 1, n + 1);
    for i in 0..n {
        e[(i + 1, 0)] = -theta[i];
    }
    e
}

/// Inverse of [`frame_matrix`]: `d_t = e_0`, `d_i = e_i + theta_i e_0`.
pub fn coframe_matrix(theta: &DVector<f64>) -> DMatrix<f64> {
    let n = theta.len();
    let mut f = DMatrix::identity(n + 1, n + 1);
    for i in 0..n {
        f[(i + 1, 0)] = theta[i];
    }
    f
}

/// `out[A, B, ..] = m[A, a] m[B, b] .. t[a, b, ..]`
pub fn transform_axes(t: &ArrayD<f64>, m: &DMatrix<f64>) -> ArrayD<f64> {
    let mut cur = t.clone();
    for axis in 0..t.ndim() {
        let mut next = ArrayD::zeros(cur.raw_dim());
        for (idx, v) in next.indexed_iter_mut() {
            let mut src: Vec<usize> = idx.as_array_view().to_vec();
            let target = src[axis];
            let mut s = 0.0;
            for a in 0..m.ncols() {
                src[axis] = a;
                s += m[(target, a)] * cur[IxDyn(&src)];
            }
            *v = s;
        }
        cur = next;
    }
    cur
}

fn check_tensor(t: &ArrayD<f64>, n: usize) -> Result<()> {
    if t.ndim() > 4 {
        return Err(Error::Valence(t.ndim()));
    }
    if t.shape().iter().any(|&d| d != n + 1) {
        return Err(Error::Dimension(format!("tensor axes must have length {}", n + 1)));
    }
    Ok(())
}

/// Covariant coordinate components to adapted-frame components at `p`.
pub fn frame_transform(t: &ArrayD<f64>, s: &StationarySpacetime, p: &ChartPoint) -> Result<ArrayD<f64>> {
    s.check_point(p)?;
    check_tensor(t, s.n())?;
    Ok(transform_axes(t, &frame_matrix(&s.theta_values(p))))
}

/// Adapted-frame components back to covariant coordinate components.
pub fn frame_transform_inverse(t: &ArrayD<f64>, s: &StationarySpacetime, p: &ChartPoint) -> Result<ArrayD<f64>> {
    s.check_point(p)?;
    check_tensor(t, s.n())?;
    Ok(transform_axes(t, &coframe_matrix(&s.theta_values(p))))
}

/// Coordinate components `V^a` of a vector to frame components `T^A`.
pub fn vector_to_frame(v: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let mut t = v.clone();
    t[0] = v[0] + theta.dot(&v.rows(1, theta.len()));
    t
}

/// Frame components `T^A` of a vector to coordinate components `V^a`.
pub fn vector_from_frame(t: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let mut v = t.clone();
    v[0] = t[0] - theta.dot(&t.rows(1, theta.len()));
    v
}

/// Point in full coordinates `(t, x)` for a chart point.
pub fn spacetime_point(t: f64, x: &[f64]) -> Vec<f64> {
    std::iter::once(t).chain(x.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere() -> CoordinateMetric {
        CoordinateMetric::new(2, 0, |p| Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, p[0].sin().powi(2)]))))
    }

    #[test]
    fn euclidean_christoffels_vanish() {
        let m = CoordinateMetric::new(3, 0, |_| Ok(DMatrix::identity(3, 3)));
        assert!(coordinate_christoffels(&m, &[0.3, 1.0, 2.0]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_christoffel_and_curvature_sign() {
        let m = sphere();
        let p = [PI / 4.0, 0.2];
        let gamma = coordinate_christoffels(&m, &p).unwrap();
        assert!((gamma[[0, 1, 1]] + 0.5).abs() < 1e-10);
        let r = coordinate_riemann(&m, &p).unwrap();
        assert!((r[[0, 1, 0, 1]] - 0.5).abs() < 1e-8);
        assert!(compatibility_residual(&m, &p).unwrap() < 1e-10);
        assert!((coordinate_scalar(&m, &p).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn transform_round_trip() {
        let theta = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let t = ArrayD::from_shape_fn(IxDyn(&[4, 4, 4]), |i| (i[0] + 2 * i[1]) as f64 - 0.5 * i[2] as f64);
        let back = transform_axes(&transform_axes(&t, &frame_matrix(&theta)), &coframe_matrix(&theta));
        assert!(back.iter().zip(t.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        assert!((vector_from_frame(&vector_to_frame(&v, &theta), &theta) - &v).amax() < 1e-15);
    }

    #[test]
    fn signature_is_checked() {
        let m = CoordinateMetric::new(2, 1, |_| Ok(DMatrix::identity(2, 2)));
        assert!(m.check_signature(&[0.0, 0.0]).is_err());
    }
}
