//! Adapted-frame geometry of `w (dt + theta)^2 + g` with `t`-independent data.
//!
//! Frame: `e_0 = d_t`, `e_i = d_i - theta_i d_t`. Frame index `0` is `e_0`,
//! indices `1..=n` are the horizontal `e_i`. Curvature sign: `R_1212 > 0` on
//! round spheres, `Ric_bd = eta^ac R_abcd`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ChartDomain, ChartPoint, FDPolicy, HorizontalMetric, MetricField, ScalarField};
use crate::jet::{Jet, MAX_DIM};

/// Lapse floor: `u <= U_MIN` is a singular point of the canonical form.
pub const U_MIN: f64 = 1e-8;

/// Threshold on `max |Lambda_ij|` below which a point counts as static.
pub const STATIC_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `w = -u^2`
    Lorentzian,
    /// `w = +u^2`
    Riemannian,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Lorentzian => -1.0,
            Branch::Riemannian => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::Lorentzian => Branch::Riemannian,
            Branch::Riemannian => Branch::Lorentzian,
        }
    }
}

/// A stationary metric `w (dt + theta)^2 + g` in canonical form.
#[derive(Clone, Debug)]
pub struct StationarySpacetime {
    n: usize,
    u: ScalarField,
    theta: Vec<ScalarField>,
    g: MetricField,
    lambda: Option<f64>,
    domain: ChartDomain,
    branch: Branch,
}

impl StationarySpacetime {
    pub fn new(
        u: ScalarField,
        theta: Vec<ScalarField>,
        g: MetricField,
        lambda: Option<f64>,
        domain: ChartDomain,
    ) -> Result<Self> {
        let n = g.dim();
        if n < 2 || n > MAX_DIM {
            return Err(Error::Dimension(format!("spatial dimension must be in 2..={MAX_DIM}, got {n}")));
        }
        if theta.len() != n || u.dim() != n || theta.iter().any(|t| t.dim() != n) {
            return Err(Error::Dimension(format!("u, theta and g must all live on an {n}-dimensional chart")));
        }
        Ok(StationarySpacetime { n, u, theta, g, lambda, domain, branch: Branch::Lorentzian })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn theta(&self) -> &[ScalarField] {
        &self.theta
    }

    pub fn g(&self) -> &MetricField {
        &self.g
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// The associated Riemannian metric `u^2 (dt + theta)^2 + g` (or back again).
    pub fn hat_metric(&self) -> Self {
        let mut out = self.clone();
        out.branch = self.branch.flipped();
        out
    }

    /// Same spacetime with every analytic partial replaced by finite differences.
    pub fn fd_only(&self, policy: FDPolicy) -> Self {
        let mut out = self.clone();
        out.u = self.u.fd_only(policy);
        out.theta = self.theta.iter().map(|t| t.fd_only(policy)).collect();
        out.g = self.g.map(|c| c.fd_only(policy));
        out
    }

    /// The metric `k^2 gbar` written in coordinates `(k t, k x)`; `lambda` scales by `k^-2`.
    pub fn rescaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.u = self.u.rescaled(k);
        out.theta = self.theta.iter().map(|t| t.rescaled(k)).collect();
        out.g = self.g.map(|c| c.rescaled(k));
        out.lambda = self.lambda.map(|l| l / (k * k));
        out.domain = self.domain.rescaled(k);
        out
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::Dimension(format!("expected an {}-point, got {}", self.n, p.len())));
        }
        if !self.domain.contains(p, 0.0) {
            return Err(Error::domain(p));
        }
        Ok(())
    }

    pub fn lapse(&self, p: &[f64]) -> f64 {
        self.u.value(p)
    }

    /// `w = -u^2` or `+u^2` depending on the branch.
    pub fn w(&self, p: &[f64]) -> f64 {
        self.branch.sign() * self.u.value(p).powi(2)
    }

    pub fn theta_values(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n, self.theta.iter().map(|t| t.value(p)))
    }

    /// All first and second partials of the metric data at `p`.
    pub fn local(&self, p: &[f64]) -> Result<LocalData> {
        self.check_point(p)?;
        LocalData::new(self, p)
    }

    /// Coordinate components of the metric in `(t, x^1..x^n)`.
    pub fn metric_components(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let u = self.u.value(p);
        if u <= U_MIN {
            return Err(Error::SingularMetric(format!("lapse u = {u:e}")));
        }
        Ok(assemble_metric(self.w(p), &self.theta_values(p), &self.g.values(p)))
    }

    /// `[[a, b, c]] = Gamma^a_bc` of the assembled metric in `(t, x^1..x^n)`, from the
    /// exact first partials of `u`, `theta` and `g`.
    pub fn coordinate_christoffels(&self, p: &[f64]) -> Result<Array3<f64>> {
        let l = self.local(p)?;
        let n = self.n;
        let d = n + 1;
        let ginv = self.inverse_from_local(&l);
        // dg[[k, a, b]] = d_k g_ab, with d_0 = 0
        let mut dg = Array3::<f64>::zeros((d, d, d));
        for k in 0..n {
            let dth = |i: usize| l.theta_jets[i].grad(k);
            dg[[k + 1, 0, 0]] = l.dw[k];
            for i in 0..n {
                let v = l.dw[k] * l.theta[i] + l.w * dth(i);
                dg[[k + 1, 0, i + 1]] = v;
                dg[[k + 1, i + 1, 0]] = v;
                for j in 0..n {
                    dg[[k + 1, i + 1, j + 1]] = l.hm.dg[k][(i, j)]
                        + l.dw[k] * l.theta[i] * l.theta[j]
                        + l.w * (dth(i) * l.theta[j] + l.theta[i] * dth(j));
                }
            }
        }
        let mut gamma = Array3::zeros((d, d, d));
        for a in 0..d {
            for b in 0..d {
                for c in b..d {
                    let mut s = 0.0;
                    for e in 0..d {
                        s += ginv[(a, e)] * (dg[[b, e, c]] + dg[[c, e, b]] - dg[[e, b, c]]);
                    }
                    gamma[[a, b, c]] = 0.5 * s;
                    gamma[[a, c, b]] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    fn inverse_from_local(&self, l: &LocalData) -> DMatrix<f64> {
        let n = self.n;
        let theta_up = l.hm.raise(&l.theta);
        let mut inv = DMatrix::zeros(n + 1, n + 1);
        inv[(0, 0)] = 1.0 / l.w + l.hm.norm_sq(&l.theta);
        for i in 0..n {
            inv[(0, i + 1)] = -theta_up[i];
            inv[(i + 1, 0)] = -theta_up[i];
            for j in 0..n {
                inv[(i + 1, j + 1)] = l.hm.ginv[(i, j)];
            }
        }
        inv
    }

    pub fn inverse_metric_components(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        Ok(self.inverse_from_local(&self.local(p)?))
    }

    pub fn frame_connection(&self, p: &ChartPoint) -> Result<FrameConnection> {
        Ok(FrameConnection::from_local(&self.local(p)?))
    }

    pub fn curvature_blocks(&self, p: &ChartPoint) -> Result<CurvatureBlocks> {
        Ok(CurvatureBlocks::from_local(&self.local(p)?))
    }

    pub fn ricci_blocks(&self, p: &ChartPoint) -> Result<RicciBlocks> {
        Ok(RicciBlocks::from_local(&self.local(p)?))
    }

    /// Frame geometry package at `p`.
    pub fn frame_geometry(&self, p: &ChartPoint) -> Result<FrameGeometry> {
        let l = self.local(p)?;
        Ok(FrameGeometry {
            lambda: l.lambda.clone(),
            conn: FrameConnection::from_local(&l),
            curvature: CurvatureBlocks::from_local(&l),
            ricci: RicciBlocks::from_local(&l),
        })
    }

    /// Ricci blocks of the associated Riemannian metric, from the Lorentzian Ricci blocks.
    pub fn hat_ricci_blocks(&self, p: &ChartPoint) -> Result<RicciBlocks> {
        let lorentz = match self.branch {
            Branch::Lorentzian => self.clone(),
            Branch::Riemannian => self.hat_metric(),
        };
        let l = lorentz.local(p)?;
        let bar = RicciBlocks::from_local(&l);
        let u2 = l.u.value().powi(2);
        let n = self.n;
        let lam_sq = l.lambda_norm_sq();
        let quad = &l.lambda * &l.hm.ginv * l.lambda.transpose();
        Ok(RicciBlocks {
            r00: 0.5 * u2 * u2 * lam_sq - bar.r00,
            r0j: -bar.r0j,
            rij: DMatrix::from_fn(n, n, |i, j| -u2 * quad[(i, j)] + bar.rij[(i, j)]),
        })
    }

    /// Frame Hessian and Laplacian of a `t`-independent function, for this branch's metric.
    pub fn hessian_laplacian(&self, f: &ScalarField, p: &ChartPoint) -> Result<FrameHessian> {
        let l = self.local(p)?;
        Ok(l.frame_hessian(&f.jet(p)))
    }

    /// Conformal metric `u^{2/(n-2)} g` and its curvature.
    pub fn conformal_reduction(&self, p: &ChartPoint) -> Result<ConformalData> {
        if self.n < 3 {
            return Err(Error::Dimension(format!("conformal reduction needs n >= 3, got {}", self.n)));
        }
        let l = self.lorentzian().local(p)?;
        Ok(ConformalData::from_local(&l))
    }

    /// `u^{2/(n-2)}` times the Laplacian of `f` in the conformal metric.
    pub fn conformal_laplacian(&self, f: &ScalarField, p: &ChartPoint) -> Result<f64> {
        let cd = self.conformal_reduction(p)?;
        let l = self.local(p)?;
        let jet = f.jet(p);
        let n = self.n;
        let c = 1.0 / (n as f64 - 2.0);
        let scale = l.u.value().powf(2.0 * c);
        let mut lap = 0.0;
        for i in 0..n {
            for j in 0..n {
                let hij = jet.hess(i, j) - (0..n).map(|k| cd.gamma_tilde[[k, i, j]] * jet.grad(k)).sum::<f64>();
                lap += l.hm.ginv[(i, j)] / scale * hij;
            }
        }
        Ok(scale * lap)
    }

    /// Residuals of the static system `R_ij = u^-1 nabla_ij u + lambda g_ij`, `Delta u = -lambda u`.
    pub fn static_system_residual(&self, p: &ChartPoint) -> Result<(f64, f64)> {
        let lambda = self
            .lambda
            .ok_or_else(|| Error::Parameter("static system residual needs an Einstein constant".into()))?;
        let l = self.local(p)?;
        l.require_static()?;
        let u = l.u.value();
        let hess_u = l.hm.covariant_hessian(&l.u);
        let ric = l.hm.ricci();
        let first = (&ric - hess_u / u - &l.hm.g * lambda).amax();
        let second = (l.hm.laplacian(&l.u) + lambda * u).abs();
        Ok((first, second))
    }

    pub fn is_static_at(&self, p: &ChartPoint) -> Result<bool> {
        Ok(self.local(p)?.lambda.amax() < STATIC_THRESHOLD)
    }

    /// This spacetime on the Lorentzian branch.
    pub fn lorentzian(&self) -> Self {
        match self.branch {
            Branch::Lorentzian => self.clone(),
            Branch::Riemannian => self.hat_metric(),
        }
    }
}

/// `(n+1) x (n+1)` coordinate metric from `w`, `theta` and `g`.
pub fn assemble_metric(w: f64, theta: &DVector<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = w;
    for i in 0..n {
        m[(0, i + 1)] = w * theta[i];
        m[(i + 1, 0)] = w * theta[i];
        for j in 0..n {
            m[(i + 1, j + 1)] = g[(i, j)] + w * theta[i] * theta[j];
        }
    }
    m
}

/// Metric data and partials at one point.
#[derive(Clone, Debug)]
pub struct LocalData {
    pub n: usize,
    pub point: Vec<f64>,
    pub branch: Branch,
    pub u: Jet,
    pub w: f64,
    /// `d_i w`
    pub dw: DVector<f64>,
    /// `nabla_i nabla_j w`
    pub hess_w: DMatrix<f64>,
    pub hm: HorizontalMetric,
    pub theta: DVector<f64>,
    pub theta_jets: Vec<Jet>,
    /// `Lambda_ij = d_i theta_j - d_j theta_i`
    pub lambda: DMatrix<f64>,
    /// `[[k, i, j]] = nabla_k Lambda_ij`
    pub grad_lambda: Array3<f64>,
}

impl LocalData {
    fn new(s: &StationarySpacetime, p: &[f64]) -> Result<Self> {
        let n = s.n;
        let u = s.u.jet(p);
        if u.value() <= U_MIN {
            return Err(Error::SingularMetric(format!("lapse u = {:e}", u.value())));
        }
        let sign = s.branch.sign();
        let wj = u * u * sign;
        let hm = s.g.eval(p)?;
        let theta_jets: Vec<Jet> = s.theta.iter().map(|t| t.jet(p)).collect();
        let theta = DVector::from_iterator(n, theta_jets.iter().map(|t| t.value()));
        let lambda = DMatrix::from_fn(n, n, |i, j| theta_jets[j].grad(i) - theta_jets[i].grad(j));
        let mut d_lambda = Array3::zeros((n, n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d_lambda[[k, i, j]] = theta_jets[j].hess(k, i) - theta_jets[i].hess(k, j);
                }
            }
        }
        let mut grad_lambda = Array3::zeros((n, n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = d_lambda[[k, i, j]];
                    for m in 0..n {
                        s -= hm.gamma[[m, k, i]] * lambda[(m, j)] + hm.gamma[[m, k, j]] * lambda[(i, m)];
                    }
                    grad_lambda[[k, i, j]] = s;
                }
            }
        }
        let dw = DVector::from_fn(n, |i, _| wj.grad(i));
        let hess_w = hm.covariant_hessian(&wj);
        Ok(LocalData {
            n,
            point: p.to_vec(),
            branch: s.branch,
            u,
            w: wj.value(),
            dw,
            hess_w,
            hm,
            theta,
            theta_jets,
            lambda,
            grad_lambda,
        })
    }

    /// `|Lambda|^2 = g^ik g^jl Lambda_ij Lambda_kl`
    pub fn lambda_norm_sq(&self) -> f64 {
        self.hm.contract2(&self.lambda, &self.lambda)
    }

    pub fn grad_log_u(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.u.grad(i) / self.u.value())
    }

    /// Frame inverse metric `diag(1/w, g^ij)`.
    pub fn frame_inverse(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = 1.0 / self.w;
        m.view_mut((1, 1), (n, n)).copy_from(&self.hm.ginv);
        m
    }

    /// Frame metric `diag(w, g_ij)`.
    pub fn frame_metric(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = self.w;
        m.view_mut((1, 1), (n, n)).copy_from(&self.hm.g);
        m
    }

    pub fn require_static(&self) -> Result<()> {
        let m = self.lambda.amax();
        if m >= STATIC_THRESHOLD {
            return Err(Error::NotStatic(m));
        }
        Ok(())
    }

    pub fn frame_hessian(&self, f: &Jet) -> FrameHessian {
        let n = self.n;
        let df = DVector::from_fn(n, |i, _| f.grad(i));
        let hh = self.hm.covariant_hessian(f);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        hess[(0, 0)] = 0.5 * self.hm.dot(&self.dw, &df);
        let lam_df = &self.lambda * self.hm.raise(&df);
        for j in 0..n {
            let v = -0.5 * self.w * lam_df[j];
            hess[(0, j + 1)] = v;
            hess[(j + 1, 0)] = v;
            for i in 0..n {
                hess[(i + 1, j + 1)] = hh[(i, j)];
            }
        }
        let grad_log_w = &self.dw / self.w;
        let laplacian = self.hm.laplacian(f) + 0.5 * self.hm.dot(&grad_log_w, &df);
        FrameHessian { hess, laplacian }
    }
}

/// Connection coefficients in the adapted frame: `coeffs[[a, b, c]]` is the
/// `e_c` component of `D_{e_a} e_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameConnection {
    pub coeffs: Array3<f64>,
}

impl FrameConnection {
    pub fn from_local(l: &LocalData) -> Self {
        let n = l.n;
        let mut c = Array3::zeros((n + 1, n + 1, n + 1));
        let lam_up = &l.lambda * &l.hm.ginv; // Lambda_ik g^kl
        let grad_w_up = l.hm.raise(&l.dw);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[[i + 1, j + 1, k + 1]] = l.hm.gamma[[k, i, j]];
                }
                c[[i + 1, j + 1, 0]] = -0.5 * l.lambda[(i, j)];
            }
            for m in 0..n {
                let v = 0.5 * l.w * lam_up[(i, m)];
                c[[0, i + 1, m + 1]] = v;
                c[[i + 1, 0, m + 1]] = v;
            }
            let v0 = 0.5 * l.dw[i] / l.w;
            c[[0, i + 1, 0]] = v0;
            c[[i + 1, 0, 0]] = v0;
            c[[0, 0, i + 1]] = -0.5 * grad_w_up[i];
        }
        FrameConnection { coeffs: c }
    }

    /// Largest violation of `e_a <e_b, e_c> = <D_a e_b, e_c> + <e_b, D_a e_c>`.
    pub fn compatibility_residual(&self, l: &LocalData) -> f64 {
        let n = l.n;
        let eta = l.frame_metric();
        let derivative = |a: usize, b: usize, c: usize| -> f64 {
            if a == 0 {
                return 0.0;
            }
            let k = a - 1;
            match (b, c) {
                (0, 0) => l.dw[k],
                (0, _) | (_, 0) => 0.0,
                (b, c) => l.hm.dg[k][(b - 1, c - 1)],
            }
        };
        let mut worst: f64 = 0.0;
        for a in 0..=n {
            for b in 0..=n {
                for c in 0..=n {
                    let mut rhs = 0.0;
                    for d in 0..=n {
                        rhs += self.coeffs[[a, b, d]] * eta[(d, c)] + self.coeffs[[a, c, d]] * eta[(b, d)];
                    }
                    worst = worst.max((derivative(a, b, c) - rhs).abs());
                }
            }
        }
        worst
    }
}

/// Curvature of the spacetime metric in the adapted frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureBlocks {
    /// `R(e_i, e_j, e_k, e_l)`
    pub ijkl: Array4<f64>,
    /// `R(e_i, e_j, e_k, e_0)`
    pub ijk0: Array3<f64>,
    /// `R(e_i, e_0, e_j, e_0)`
    pub i0j0: DMatrix<f64>,
}

impl CurvatureBlocks {
    pub fn from_local(l: &LocalData) -> Self {
        let n = l.n;
        let w = l.w;
        let lam = &l.lambda;
        let rm = l.hm.riemann();
        let mut ijkl = Array4::zeros((n, n, n, n));
        let mut ijk0 = Array3::zeros((n, n, n));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        ijkl[[i, j, k, m]] = rm[[i, j, k, m]]
                            + 0.25 * w * (lam[(i, m)] * lam[(j, k)] - lam[(i, k)] * lam[(j, m)])
                            - 0.5 * w * lam[(i, j)] * lam[(k, m)];
                    }
                    ijk0[[i, j, k]] = -0.5 * (w * l.grad_lambda[[k, i, j]] + l.dw[k] * lam[(i, j)])
                        + 0.25 * (l.dw[i] * lam[(j, k)] - l.dw[j] * lam[(i, k)]);
                }
            }
        }
        let quad = lam * &l.hm.ginv * lam.transpose();
        let i0j0 = DMatrix::from_fn(n, n, |i, j| {
            -0.5 * l.hess_w[(i, j)] + 0.25 / w * l.dw[i] * l.dw[j] + 0.25 * w * w * quad[(i, j)]
        });
        CurvatureBlocks { ijkl, ijk0, i0j0 }
    }

    pub fn n(&self) -> usize {
        self.i0j0.nrows()
    }

    /// Full `(n+1)^4` frame tensor assembled from the blocks by the Riemann symmetries.
    pub fn full(&self) -> Array4<f64> {
        let n = self.n();
        let mut r = Array4::zeros((n + 1, n + 1, n + 1, n + 1));
        for a in 0..=n {
            for b in 0..=n {
                for c in 0..=n {
                    for d in 0..=n {
                        r[[a, b, c, d]] = self.component(a, b, c, d);
                    }
                }
            }
        }
        r
    }

    /// One frame component (index 0 is `e_0`).
    pub fn component(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        if a == b || c == d {
            return 0.0;
        }
        match (a, b, c, d) {
            (0, 0, _, _) | (_, _, 0, 0) => 0.0,
            (0, j, 0, l) => self.i0j0[(j - 1, l - 1)],
            (i, 0, k, 0) => self.i0j0[(i - 1, k - 1)],
            (0, j, k, 0) => -self.i0j0[(j - 1, k - 1)],
            (i, 0, 0, l) => -self.i0j0[(i - 1, l - 1)],
            (0, j, k, l) => -self.ijk0[[k - 1, l - 1, j - 1]],
            (i, 0, k, l) => self.ijk0[[k - 1, l - 1, i - 1]],
            (i, j, 0, l) => -self.ijk0[[i - 1, j - 1, l - 1]],
            (i, j, k, 0) => self.ijk0[[i - 1, j - 1, k - 1]],
            (i, j, k, l) => self.ijkl[[i - 1, j - 1, k - 1, l - 1]],
        }
    }

    /// Ricci contraction `eta^ac R_abcd`.
    pub fn ricci_trace(&self, frame_inverse: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let full = self.full();
        DMatrix::from_fn(n + 1, n + 1, |b, d| {
            let mut s = 0.0;
            for a in 0..=n {
                for c in 0..=n {
                    s += frame_inverse[(a, c)] * full[[a, b, c, d]];
                }
            }
            s
        })
    }
}

/// Ricci tensor in the adapted frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RicciBlocks {
    pub r00: f64,
    pub r0j: DVector<f64>,
    pub rij: DMatrix<f64>,
}

impl RicciBlocks {
    pub fn from_local(l: &LocalData) -> Self {
        let n = l.n;
        let w = l.w;
        let ginv = &l.hm.ginv;
        let lam_sq = l.lambda_norm_sq();
        let r00 = -0.5 * l.hm.laplacian(&(l.u * l.u * l.branch.sign())) + l.hm.norm_sq(&l.dw) / (4.0 * w)
            + 0.25 * w * w * lam_sq;
        let grad_log_w = &l.dw / w;
        let r0j = DVector::from_fn(n, |j, _| {
            let mut s = 0.0;
            for k in 0..n {
                for m in 0..n {
                    s += ginv[(k, m)] * (l.grad_lambda[[k, j, m]] + 1.5 * l.lambda[(j, k)] * grad_log_w[m]);
                }
            }
            0.5 * w * s
        });
        let ric = l.hm.ricci();
        let quad = &l.lambda * ginv * l.lambda.transpose();
        let rij = DMatrix::from_fn(n, n, |i, j| {
            ric[(i, j)] - l.hess_w[(i, j)] / (2.0 * w) + l.dw[i] * l.dw[j] / (4.0 * w * w) - 0.5 * w * quad[(i, j)]
        });
        RicciBlocks { r00, r0j, rij }
    }

    pub fn n(&self) -> usize {
        self.rij.nrows()
    }

    /// Full `(n+1) x (n+1)` frame matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = self.r00;
        for j in 0..n {
            m[(0, j + 1)] = self.r0j[j];
            m[(j + 1, 0)] = self.r0j[j];
        }
        m.view_mut((1, 1), (n, n)).copy_from(&self.rij);
        m
    }
}

#[derive(Clone, Debug)]
pub struct FrameGeometry {
    pub lambda: DMatrix<f64>,
    pub conn: FrameConnection,
    pub curvature: CurvatureBlocks,
    pub ricci: RicciBlocks,
}

/// Frame components of a Hessian together with the Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameHessian {
    pub hess: DMatrix<f64>,
    pub laplacian: f64,
}

impl FrameHessian {
    /// Trace against a frame inverse metric; equals `laplacian` up to rounding.
    pub fn trace(&self, frame_inverse: &DMatrix<f64>) -> f64 {
        self.hess.component_mul(frame_inverse).sum()
    }
}

/// The conformal horizontal metric `u^{2/(n-2)} g` at a point.
#[derive(Clone, Debug)]
pub struct ConformalData {
    pub gtil: DMatrix<f64>,
    /// `Gamma~ - Gamma`, indexed `[[k, i, j]]`
    pub gamma_correction: Array3<f64>,
    pub gamma_tilde: Array3<f64>,
    /// Ricci of `g~` from the Ricci blocks of the spacetime.
    pub ric_til: DMatrix<f64>,
    /// Ricci of `g~` from the conformal change formula in terms of `R_ij` and `u`.
    pub ric_til_direct: DMatrix<f64>,
    /// Scalar curvature of `g~`.
    pub scalar_til: f64,
    /// `u^{2/(n-2)} Laplacian~ log u + u^2 |Lambda|^2 / 4 - u^-2 Ric(X, X)`
    pub log_u_residual: f64,
    /// Largest entry of `g^kl (nabla~_k Lambda_jl + c_n Lambda_jk d_l log u) + 2 u^-2 Ric(e_0, e_j)`
    pub divergence_residual: f64,
}

impl ConformalData {
    fn from_local(l: &LocalData) -> Self {
        let n = l.n;
        let c = 1.0 / (n as f64 - 2.0);
        let u = l.u.value();
        let u2 = u * u;
        let phi = l.grad_log_u();
        let phi_up = l.hm.raise(&phi);
        let ginv = &l.hm.ginv;
        let g = &l.hm.g;
        let gtil = g * u.powf(2.0 * c);

        let mut corr = Array3::zeros((n, n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let dij = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    corr[[k, i, j]] = c * (phi[i] * dij(j, k) + phi[j] * dij(i, k) - phi_up[k] * g[(i, j)]);
                }
            }
        }
        let gamma_tilde = &l.hm.gamma + &corr;

        let bar = RicciBlocks::from_local(l);
        let ric_xx = bar.r00;
        let lam_sq = l.lambda_norm_sq();
        let quad = &l.lambda * ginv * l.lambda.transpose();
        let ric_til = DMatrix::from_fn(n, n, |i, j| {
            u2 / (4.0 * (n as f64 - 2.0)) * lam_sq * g[(i, j)] - 0.5 * u2 * quad[(i, j)]
                + (n as f64 - 1.0) * c * phi[i] * phi[j]
                + bar.rij[(i, j)]
                - c * ric_xx / u2 * g[(i, j)]
        });

        let log_u = l.u.ln();
        let hess_log_u = l.hm.covariant_hessian(&log_u);
        let lap_u = l.hm.laplacian(&l.u);
        let ric = l.hm.ricci();
        let ric_til_direct =
            DMatrix::from_fn(n, n, |i, j| ric[(i, j)] - hess_log_u[(i, j)] + c * phi[i] * phi[j] - c * lap_u / u * g[(i, j)]);
        let scalar_til = ginv.component_mul(&ric_til).sum() / u.powf(2.0 * c);

        // u^{2c} Laplacian~ log u with the corrected Christoffels
        let mut lap_til = 0.0;
        for i in 0..n {
            for j in 0..n {
                let hij = log_u.hess(i, j) - (0..n).map(|k| gamma_tilde[[k, i, j]] * log_u.grad(k)).sum::<f64>();
                lap_til += ginv[(i, j)] * hij;
            }
        }
        let log_u_residual = lap_til + 0.25 * u2 * lam_sq - ric_xx / u2;

        let coeff = 3.0 + (4.0 - n as f64) / (n as f64 - 2.0);
        let mut divergence_residual: f64 = 0.0;
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for m in 0..n {
                    // nabla~_k Lambda_jm from nabla_k Lambda_jm and the Christoffel correction
                    let mut dl = l.grad_lambda[[k, j, m]];
                    for q in 0..n {
                        dl -= corr[[q, k, j]] * l.lambda[(q, m)] + corr[[q, k, m]] * l.lambda[(j, q)];
                    }
                    s += ginv[(k, m)] * (dl + coeff * l.lambda[(j, k)] * phi[m]);
                }
            }
            divergence_residual = divergence_residual.max((s + 2.0 / u2 * bar.r0j[j]).abs());
        }

        ConformalData {
            gtil,
            gamma_correction: corr,
            gamma_tilde,
            ric_til,
            ric_til_direct,
            scalar_til,
            log_u_residual,
            divergence_residual,
        }
    }
}
