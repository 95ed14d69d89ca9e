//! Chart-based fields and the differentiation engine.
//!
//! Fields carry exact partials through second order (via [`Jet`]); third and
//! fourth order partials come from Richardson-extrapolated central differences
//! of the analytic Hessian.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Determinant floor below which a horizontal metric is treated as singular.
pub const DET_MIN: f64 = 1e-12;

/// Spatial chart coordinates `x^1..x^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartPoint(Vec<f64>);

impl ChartPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        ChartPoint(coords.into())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn shifted(&self, axis: usize, h: f64) -> ChartPoint {
        let mut c = self.0.clone();
        c[axis] += h;
        ChartPoint(c)
    }
}

impl Deref for ChartPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(v: Vec<f64>) -> Self {
        ChartPoint(v)
    }
}

impl From<&[f64]> for ChartPoint {
    fn from(v: &[f64]) -> Self {
        ChartPoint(v.to_vec())
    }
}

type DomainFn = dyn Fn(&[f64], f64) -> bool + Send + Sync;

/// Chart-domain predicate. `contains(p, margin)` holds when `p` lies inside the
/// chart with at least `margin` coordinate distance to its boundary.
#[derive(Clone)]
pub struct ChartDomain {
    test: Arc<DomainFn>,
}

impl ChartDomain {
    pub fn new(test: impl Fn(&[f64], f64) -> bool + Send + Sync + 'static) -> Self {
        ChartDomain { test: Arc::new(test) }
    }

    /// The whole of `R^n`.
    pub fn everywhere() -> Self {
        ChartDomain::new(|p, _| p.iter().all(|x| x.is_finite()))
    }

    pub fn contains(&self, p: &[f64], margin: f64) -> bool {
        (self.test)(p, margin)
    }

    /// Domain in coordinates scaled by `k` (a point `x` maps to `k x`).
    pub fn rescaled(&self, k: f64) -> Self {
        let inner = self.test.clone();
        ChartDomain::new(move |p, m| {
            let q: Vec<f64> = p.iter().map(|x| x / k).collect();
            inner(&q, m / k)
        })
    }

    /// Checks every point of a central stencil of half-width `h` along each axis.
    pub fn check_stencil(&self, p: &[f64], h: &[f64]) -> Result<()> {
        if !self.contains(p, 0.0) {
            return Err(Error::domain(p));
        }
        let mut q = p.to_vec();
        for (axis, &step) in h.iter().enumerate() {
            for sign in [-1.0, 1.0] {
                q[axis] = p[axis] + sign * step;
                if !self.contains(&q, 0.0) {
                    return Err(Error::domain(&q));
                }
            }
            q[axis] = p[axis];
        }
        Ok(())
    }
}

impl fmt::Debug for ChartDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ChartDomain")
    }
}

/// Finite-difference settings for partials of order three and four.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FDPolicy {
    base_step: f64,
    levels: usize,
    max_order: usize,
}

impl Default for FDPolicy {
    fn default() -> Self {
        FDPolicy { base_step: 1e-3, levels: 2, max_order: 4 }
    }
}

impl FDPolicy {
    pub fn new(base_step: f64, levels: usize, max_order: usize) -> Result<Self> {
        if !(base_step > 0.0) || !base_step.is_finite() {
            return Err(Error::Parameter(format!("FD base step must be positive, got {base_step}")));
        }
        if levels == 0 || levels > 6 {
            return Err(Error::Parameter(format!("Richardson levels must be in 1..=6, got {levels}")));
        }
        if max_order > 4 {
            return Err(Error::Parameter(format!("max derivative order is 4, got {max_order}")));
        }
        Ok(FDPolicy { base_step, levels, max_order })
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Step along one axis: `base * max(1, |x|)`.
    pub fn step_at(&self, x: f64) -> f64 {
        self.base_step * x.abs().max(1.0)
    }

    pub fn steps(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|&x| self.step_at(x)).collect()
    }
}

/// Richardson-extrapolated central first difference of a vector-valued function.
pub fn central_diff(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    p: &[f64],
    axis: usize,
    h: f64,
    levels: usize,
) -> Vec<f64> {
    let mut q = p.to_vec();
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for level in 0..levels {
        let hk = h / f64::powi(2.0, level as i32);
        q[axis] = p[axis] + hk;
        let plus = f(&q);
        q[axis] = p[axis] - hk;
        let minus = f(&q);
        table.push(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * hk)).collect());
    }
    richardson(table)
}

/// Richardson-extrapolated second difference `d^2 f / dx_a dx_b` of a scalar function.
pub fn second_diff(f: &dyn Fn(&[f64]) -> f64, p: &[f64], a: usize, b: usize, ha: f64, hb: f64, levels: usize) -> f64 {
    let mut table = Vec::with_capacity(levels);
    for level in 0..levels {
        let scale = f64::powi(2.0, level as i32);
        let (sa, sb) = (ha / scale, hb / scale);
        let at = |da: f64, db: f64| {
            let mut q = p.to_vec();
            q[a] += da;
            q[b] += db;
            f(&q)
        };
        let d = if a == b {
            (at(sa, 0.0) - 2.0 * f(p) + at(-sa, 0.0)) / (sa * sa)
        } else {
            (at(sa, sb) - at(sa, -sb) - at(-sa, sb) + at(-sa, -sb)) / (4.0 * sa * sb)
        };
        table.push(vec![d]);
    }
    richardson(table)[0]
}

/// Extrapolates a table of central differences taken at steps `h, h/2, h/4, ...`.
fn richardson(mut table: Vec<Vec<f64>>) -> Vec<f64> {
    let mut factor = 4.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(fine, coarse)| (factor * fine - coarse) / (factor - 1.0)).collect())
            .collect();
        factor *= 4.0;
    }
    table.pop().unwrap_or_default()
}

type JetFn = dyn Fn(&[f64]) -> Jet + Send + Sync;

/// A time-independent real function on a spatial chart with exact value,
/// gradient and Hessian.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    dim: usize,
    eval: Arc<JetFn>,
    domain: Option<ChartDomain>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, dim: usize, eval: impl Fn(&[f64]) -> Jet + Send + Sync + 'static) -> Self {
        ScalarField { name: name.into(), dim, eval: Arc::new(eval), domain: None }
    }

    /// Field defined by a jet expression in the coordinate functions.
    pub fn from_expr(name: impl Into<String>, dim: usize, expr: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> Self {
        ScalarField::new(name, dim, move |p| expr(&Jet::variables(p)))
    }

    pub fn constant(name: impl Into<String>, dim: usize, c: f64) -> Self {
        ScalarField::new(name, dim, move |_| Jet::constant(dim, c))
    }

    pub fn coordinate(dim: usize, axis: usize) -> Self {
        ScalarField::new(format!("x{}", axis + 1), dim, move |p| Jet::variable(dim, axis, p[axis]))
    }

    /// Field known only through its values; gradient and Hessian come from
    /// Richardson finite differences.
    pub fn from_values(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        policy: FDPolicy,
    ) -> Self {
        let value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(value);
        ScalarField::new(name, dim, move |p| fd_jet(value.as_ref(), p, &policy))
    }

    /// The same field with analytic partials replaced by finite differences of its values.
    pub fn fd_only(&self, policy: FDPolicy) -> Self {
        let inner = self.eval.clone();
        let mut out = ScalarField::from_values(self.name.clone(), self.dim, move |p| inner(p).value(), policy);
        out.domain = self.domain.clone();
        out
    }

    /// Pulls the field back along `x -> x / k`, i.e. expresses it in coordinates scaled by `k`.
    pub fn rescaled(&self, k: f64) -> Self {
        let inner = self.eval.clone();
        let dim = self.dim;
        let mut out = ScalarField::new(self.name.clone(), dim, move |p| {
            let q: Vec<f64> = p.iter().map(|x| x / k).collect();
            let j = inner(&q);
            let grad: Vec<f64> = (0..dim).map(|i| j.grad(i) / k).collect();
            let hess: Vec<f64> = (0..dim * dim).map(|ik| j.hess(ik / dim, ik % dim) / (k * k)).collect();
            Jet::from_parts(j.value(), &grad, &hess)
        });
        out.domain = self.domain.as_ref().map(|d| d.rescaled(k));
        out
    }

    pub fn with_domain(mut self, domain: ChartDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<&ChartDomain> {
        self.domain.as_ref()
    }

    pub fn jet(&self, p: &[f64]) -> Jet {
        (self.eval)(p)
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.jet(p).value()
    }

    pub fn gradient(&self, p: &[f64]) -> DVector<f64> {
        let j = self.jet(p);
        DVector::from_fn(self.dim, |i, _| j.grad(i))
    }

    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let j = self.jet(p);
        DMatrix::from_fn(self.dim, self.dim, |i, k| j.hess(i, k))
    }
}

fn fd_jet(value: &(dyn Fn(&[f64]) -> f64 + Send + Sync), p: &[f64], policy: &FDPolicy) -> Jet {
    let n = p.len();
    let steps = policy.steps(p);
    let scalar = |q: &[f64]| vec![value(q)];
    let grad: Vec<f64> = (0..n).map(|a| central_diff(&scalar, p, a, steps[a], policy.levels())[0]).collect();
    let mut hess = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let d = second_diff(&|q| value(q), p, a, b, steps[a], steps[b], policy.levels());
            hess[a * n + b] = d;
            hess[b * n + a] = d;
        }
    }
    Jet::from_parts(value(p), &grad, &hess)
}

/// Partial derivative `d^k f / dx^{i1} ... dx^{ik}` of a field.
///
/// Orders up to two use the field's exact partials. Orders three and four
/// difference the exact Hessian along the leading indices.
pub fn partial(field: &ScalarField, p: &ChartPoint, multi_index: &[usize], policy: &FDPolicy) -> Result<f64> {
    let order = multi_index.len();
    if order > policy.max_order() {
        return Err(Error::Order { order, max: policy.max_order() });
    }
    if p.dim() != field.dim() || multi_index.iter().any(|&i| i >= field.dim()) {
        return Err(Error::Dimension(format!(
            "field {} has dimension {}, point {}, indices {:?}",
            field.name(),
            field.dim(),
            p.dim(),
            multi_index
        )));
    }
    let jet = field.jet(p);
    match order {
        0 => Ok(jet.value()),
        1 => Ok(jet.grad(multi_index[0])),
        2 => Ok(jet.hess(multi_index[0], multi_index[1])),
        _ => {
            let steps = policy.steps(p);
            if let Some(domain) = field.domain() {
                let reach: Vec<f64> = steps.iter().map(|h| 2.0 * h).collect();
                domain.check_stencil(p, &reach)?;
            }
            let (lead, tail) = multi_index.split_at(order - 2);
            let (b, c) = (tail[0], tail[1]);
            let hess_entry = move |q: &[f64]| vec![field.jet(q).hess(b, c)];
            if lead.len() == 1 {
                let a = lead[0];
                Ok(central_diff(&hess_entry, p, a, steps[a], policy.levels())[0])
            } else {
                let (a0, a1) = (lead[0], lead[1]);
                let inner = |q: &[f64]| central_diff(&hess_entry, q, a1, steps[a1], policy.levels());
                Ok(central_diff(&inner, p, a0, steps[a0], policy.levels())[0])
            }
        }
    }
}

/// Symmetric `n x n` matrix of scalar fields: the horizontal metric `g_ij`.
#[derive(Clone, Debug)]
pub struct MetricField {
    n: usize,
    upper: Vec<ScalarField>,
}

impl MetricField {
    /// Builds the metric from a component constructor called for `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> ScalarField) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        MetricField { n, upper }
    }

    /// Constant metric with the given symmetric components.
    pub fn constant(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        MetricField::from_fn(n, |i, j| ScalarField::constant(format!("g{}{}", i + 1, j + 1), n, m[(i, j)]))
    }

    pub fn identity(n: usize) -> Self {
        MetricField::constant(&DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarField {
        &self.upper[self.slot(i, j)]
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        MetricField { n: self.n, upper: self.upper.iter().map(f).collect() }
    }

    pub fn values(&self, p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.component(i, j).value(p))
    }

    /// Evaluates the metric with exact first and second partials.
    pub fn eval(&self, p: &[f64]) -> Result<HorizontalMetric> {
        let n = self.n;
        let jets: Vec<Jet> = self.upper.iter().map(|f| f.jet(p)).collect();
        let at = |i: usize, j: usize| &jets[self.slot(i, j)];
        let g = DMatrix::from_fn(n, n, |i, j| at(i, j).value());
        let dg = (0..n).map(|k| DMatrix::from_fn(n, n, |i, j| at(i, j).grad(k))).collect();
        let ddg = (0..n)
            .map(|k| (0..n).map(|l| DMatrix::from_fn(n, n, |i, j| at(i, j).hess(k, l))).collect())
            .collect();
        HorizontalMetric::from_parts(g, dg, ddg)
    }
}

/// A Riemannian metric and its partials at one point, with derived Christoffel
/// symbols and curvature.
#[derive(Clone, Debug)]
pub struct HorizontalMetric {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub det: f64,
    /// `dg[k][(i, j)] = d_k g_ij`
    pub dg: Vec<DMatrix<f64>>,
    /// `ddg[k][l][(i, j)] = d_k d_l g_ij`
    pub ddg: Vec<Vec<DMatrix<f64>>>,
    /// `gamma[[k, i, j]] = Gamma^k_ij`
    pub gamma: Array3<f64>,
}

impl HorizontalMetric {
    pub fn from_parts(g: DMatrix<f64>, dg: Vec<DMatrix<f64>>, ddg: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        let n = g.nrows();
        let det = g.determinant();
        if !(det > DET_MIN) || g.clone().cholesky().is_none() {
            return Err(Error::SingularMetric(format!("horizontal metric det = {det:e}")));
        }
        let ginv = g.clone().try_inverse().ok_or_else(|| Error::SingularMetric("non-invertible g".into()))?;
        let mut gamma = Array3::zeros((n, n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                    }
                    gamma[[k, i, j]] = 0.5 * s;
                }
            }
        }
        Ok(HorizontalMetric { g, ginv, det, dg, ddg, gamma })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `R_ijkl` with `R_1212 > 0` on round spheres.
    pub fn riemann(&self) -> Array4<f64> {
        let n = self.dim();
        let mut r = Array4::zeros((n, n, n, n));
        // Gamma with lowered first index: [m, i, j] = g_mp Gamma^p_ij
        let mut low = Array3::zeros((n, n, n));
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    low[[m, i, j]] = (0..n).map(|p| self.g[(m, p)] * self.gamma[[p, i, j]]).sum::<f64>();
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let second = 0.5
                            * (self.ddg[j][k][(i, l)] + self.ddg[i][l][(j, k)]
                                - self.ddg[j][l][(i, k)]
                                - self.ddg[i][k][(j, l)]);
                        let quad: f64 = (0..n)
                            .map(|m| low[[m, j, k]] * self.gamma[[m, i, l]] - low[[m, j, l]] * self.gamma[[m, i, k]])
                            .sum();
                        r[[i, j, k, l]] = second + quad;
                    }
                }
            }
        }
        r
    }

    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.dim();
        let rm = self.riemann();
        DMatrix::from_fn(n, n, |j, l| {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += self.ginv[(i, k)] * rm[[i, j, k, l]];
                }
            }
            s
        })
    }

    /// Inner product of two covectors.
    pub fn dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.ginv * b)[(0, 0)]
    }

    pub fn norm_sq(&self, a: &DVector<f64>) -> f64 {
        self.dot(a, a)
    }

    /// Full contraction `g^ik g^jl A_ij B_kl` of two covariant 2-tensors.
    pub fn contract2(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (&self.ginv * a * &self.ginv).component_mul(b).sum()
    }

    pub fn raise(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.ginv * a
    }

    /// Covariant Hessian `d_ij f - Gamma^k_ij d_k f` from a jet.
    pub fn covariant_hessian(&self, f: &Jet) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            f.hess(i, j) - (0..n).map(|k| self.gamma[[k, i, j]] * f.grad(k)).sum::<f64>()
        })
    }

    /// Laplacian of a function given by its jet.
    pub fn laplacian(&self, f: &Jet) -> f64 {
        self.covariant_hessian(f).component_mul(&self.ginv).sum()
    }
}

/// `nabla_i theta_j = d_i theta_j - Gamma^k_ij theta_k` with respect to `g`.
pub fn covariant_derivative_1form(theta: &[ScalarField], g: &MetricField, p: &ChartPoint) -> Result<DMatrix<f64>> {
    let n = g.dim();
    if theta.len() != n || p.dim() != n {
        return Err(Error::Dimension(format!("expected {n} components and an {n}-point")));
    }
    let h = g.eval(p)?;
    let jets: Vec<Jet> = theta.iter().map(|t| t.jet(p)).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        jets[j].grad(i) - (0..n).map(|k| h.gamma[[k, i, j]] * jets[k].value()).sum::<f64>()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field3(f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> ScalarField {
        ScalarField::from_expr("f", 3, f)
    }

    #[test]
    fn partial_of_product() {
        let f = field3(|x| x[0] * x[1]);
        let p = ChartPoint::new(vec![1.0, 2.0, 3.0]);
        let v = partial(&f, &p, &[0, 1], &FDPolicy::default()).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn partial_of_sine() {
        let f = field3(|x| x[0].sin());
        let p = ChartPoint::new(vec![0.0, 0.0, 0.0]);
        assert_eq!(partial(&f, &p, &[0], &FDPolicy::default()).unwrap(), 1.0);
    }

    #[test]
    fn third_partial_of_cubic() {
        let f = field3(|x| x[0].powi(3));
        let p = ChartPoint::new(vec![2.0, 0.0, 0.0]);
        let v = partial(&f, &p, &[0, 0, 0], &FDPolicy::default()).unwrap();
        assert_abs_diff_eq!(v, 6.0, epsilon = 1e-9);
    }

    #[test]
    fn fourth_partial_of_quartic() {
        let f = field3(|x| x[0].powi(2) * x[1].powi(2) + x[2].powi(4));
        let p = ChartPoint::new(vec![0.7, -1.2, 0.4]);
        let pol = FDPolicy::default();
        assert_abs_diff_eq!(partial(&f, &p, &[0, 1, 0, 1], &pol).unwrap(), 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(partial(&f, &p, &[2, 2, 2, 2], &pol).unwrap(), 24.0, epsilon = 1e-6);
    }

    #[test]
    fn order_above_policy_is_rejected() {
        let f = field3(|x| x[0]);
        let p = ChartPoint::new(vec![0.0, 0.0, 0.0]);
        let pol = FDPolicy::new(1e-3, 2, 2).unwrap();
        assert_eq!(partial(&f, &p, &[0, 0, 0], &pol), Err(Error::Order { order: 3, max: 2 }));
    }

    #[test]
    fn stencil_outside_domain_is_rejected() {
        let dom = ChartDomain::new(|p, m| p[0] > 1.0 + m);
        let f = field3(|x| x[0].powi(3)).with_domain(dom);
        let p = ChartPoint::new(vec![1.0005, 0.0, 0.0]);
        assert!(matches!(partial(&f, &p, &[0, 0, 0], &FDPolicy::default()), Err(Error::Domain { .. })));
    }

    #[test]
    fn bad_policy_is_rejected() {
        assert!(FDPolicy::new(0.0, 2, 4).is_err());
        assert!(FDPolicy::new(1e-3, 0, 4).is_err());
        assert!(FDPolicy::new(1e-3, 2, 5).is_err());
    }

    #[test]
    fn fd_fields_track_analytic_fields() {
        let f = field3(|x| (x[0] * x[1]).sin() + x[2].exp() * x[0]);
        let g = f.fd_only(FDPolicy::default());
        let p = [0.3, -0.8, 0.5];
        let (a, b) = (f.jet(&p), g.jet(&p));
        for i in 0..3 {
            assert_abs_diff_eq!(a.grad(i), b.grad(i), epsilon = 1e-9);
            for k in 0..3 {
                assert_abs_diff_eq!(a.hess(i, k), b.hess(i, k), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn zero_one_form_has_zero_derivative() {
        let theta: Vec<ScalarField> = (0..3).map(|_| ScalarField::constant("0", 3, 0.0)).collect();
        let g = MetricField::from_fn(3, |i, j| {
            ScalarField::from_expr("g", 3, move |x| if i == j { 1.0 + x[0] * x[0] } else { x[1] * 0.1 })
        });
        let d = covariant_derivative_1form(&theta, &g, &ChartPoint::new(vec![0.4, 0.2, -0.3])).unwrap();
        assert_eq!(d.amax(), 0.0);
    }

    #[test]
    fn flat_one_form_derivative() {
        let theta = vec![
            ScalarField::constant("t1", 3, 0.0),
            ScalarField::coordinate(3, 0),
            ScalarField::constant("t3", 3, 0.0),
        ];
        let d = covariant_derivative_1form(&theta, &MetricField::identity(3), &ChartPoint::new(vec![0.5, 1.0, 2.0]))
            .unwrap();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], 0.0);
    }

    #[test]
    fn singular_metric_is_rejected() {
        let g = MetricField::constant(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(matches!(g.eval(&[0.0, 0.0]), Err(Error::SingularMetric(_))));
    }

    #[test]
    fn round_sphere_has_positive_sectional_curvature() {
        // unit 2-sphere in (theta, phi)
        let g = MetricField::from_fn(2, |i, j| {
            ScalarField::from_expr("g", 2, move |x| match (i, j) {
                (0, 0) => Jet::constant(2, 1.0),
                (1, 1) => x[0].sin().square(),
                _ => Jet::constant(2, 0.0),
            })
        });
        let th = std::f64::consts::FRAC_PI_4;
        let h = g.eval(&[th, 0.3]).unwrap();
        let r = h.riemann();
        assert_abs_diff_eq!(r[[0, 1, 0, 1]], th.sin().powi(2), epsilon = 1e-14);
        assert_abs_diff_eq!(h.gamma[[0, 1, 1]], -0.5, epsilon = 1e-14);
    }
}
