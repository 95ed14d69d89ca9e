//! The `n = 3` twist reduction: `omega = u^3 * d theta`, the twist potential,
//! the map `Phi = (psi, u^2)` into the hyperbolic half plane and its Bochner identity.
//!
//! Orientation: `epsilon_123 = +sqrt(det g)` in chart order.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, FDPolicy, ScalarField};
use crate::geometry::{LocalData, RicciBlocks, StationarySpacetime};
use crate::jet::Jet;

/// Sign in `(* d omega)_j = CURL_SIGN * 2 u Ric(X, e_j)` for the orientation above.
pub const CURL_SIGN: f64 = -1.0;

/// Largest `|d omega|` entry for which a twist potential is still accepted.
pub const CLOSED_TOL: f64 = 1e-4;

/// Per-segment absolute tolerance of the twist potential quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn require_3(rows: usize) -> Result<()> {
    if rows != 3 {
        return Err(Error::Dimension(format!("twist reduction needs n = 3, got {rows}")));
    }
    Ok(())
}

/// `(*beta)_i = 1/2 epsilon_i^jk beta_jk`
pub fn hodge_star2(g: &DMatrix<f64>, beta: &DMatrix<f64>) -> Result<DVector<f64>> {
    require_3(g.nrows())?;
    require_3(beta.nrows())?;
    let root = g.determinant().sqrt();
    let v = DVector::from_fn(3, |a, _| {
        let mut s = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                s += levi_civita(a, j, k) * beta[(j, k)];
            }
        }
        s / (2.0 * root)
    });
    Ok(g * v)
}

/// `(*alpha)_jk = epsilon_ijk alpha^i`
pub fn hodge_star1(g: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<DMatrix<f64>> {
    require_3(g.nrows())?;
    let root = g.determinant().sqrt();
    let ginv = g.clone().try_inverse().ok_or_else(|| Error::SingularMetric("g not invertible".into()))?;
    let up = ginv * alpha;
    Ok(DMatrix::from_fn(3, 3, |j, k| root * (0..3).map(|i| levi_civita(i, j, k) * up[i]).sum::<f64>()))
}

/// `omega`, its first partials and covariant derivative at a point.
#[derive(Clone, Debug)]
pub struct TwistJet {
    pub local: LocalData,
    pub omega: DVector<f64>,
    /// `(k, i) = d_k omega_i`
    pub d_omega: DMatrix<f64>,
    /// `(k, i) = nabla_k omega_i`
    pub nabla_omega: DMatrix<f64>,
}

impl TwistJet {
    pub fn new(s: &StationarySpacetime, p: &[f64]) -> Result<Self> {
        require_3(s.n())?;
        let l = s.local(p)?;
        let hm = &l.hm;
        let u = l.u.value();
        let root = hm.det.sqrt();
        let th = &l.theta_jets;
        // d_k Lambda_jm
        let d_lambda = |k: usize, j: usize, m: usize| th[m].hess(k, j) - th[j].hess(k, m);
        let v = DVector::from_fn(3, |a, _| {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    s += levi_civita(a, j, k) * l.lambda[(j, k)];
                }
            }
            s / (2.0 * root)
        });
        let omega = &hm.g * &v * u.powi(3);
        let mut d_omega = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let dlog_det = hm.ginv.component_mul(&hm.dg[k]).sum();
            let dv = DVector::from_fn(3, |a, _| {
                let mut s = 0.0;
                for j in 0..3 {
                    for m in 0..3 {
                        s += levi_civita(a, j, m) * d_lambda(k, j, m);
                    }
                }
                s / (2.0 * root) - 0.5 * dlog_det * v[a]
            });
            let row = (&hm.g * &v) * (3.0 * u * u * l.u.grad(k)) + (&hm.dg[k] * &v + &hm.g * dv) * u.powi(3);
            for i in 0..3 {
                d_omega[(k, i)] = row[i];
            }
        }
        let nabla_omega =
            DMatrix::from_fn(3, 3, |k, i| d_omega[(k, i)] - (0..3).map(|m| hm.gamma[[m, k, i]] * omega[m]).sum::<f64>());
        Ok(TwistJet { local: l, omega, d_omega, nabla_omega })
    }

    /// `(d omega)_ki = d_k omega_i - d_i omega_k`
    pub fn d_omega_form(&self) -> DMatrix<f64> {
        &self.d_omega - self.d_omega.transpose()
    }

    pub fn omega_norm_sq(&self) -> f64 {
        self.local.hm.norm_sq(&self.omega)
    }

    /// `e(Phi) = u^-4 |omega|^2 + 4 |nabla log u|^2`
    pub fn energy(&self) -> f64 {
        let u = self.local.u.value();
        self.omega_norm_sq() / u.powi(4) + 4.0 * self.local.hm.norm_sq(&self.local.grad_log_u())
    }
}

pub fn twist_one_form(s: &StationarySpacetime, p: &ChartPoint) -> Result<DVector<f64>> {
    Ok(TwistJet::new(s, p)?.omega)
}

/// Residuals of the twist identities at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwistResiduals {
    /// `| |omega|^2 - u^6 |Lambda|^2 / 2 |`
    pub norm: f64,
    /// `| g^kl nabla_k omega_l - 3 <omega, d log u> |`
    pub divergence: f64,
    /// `max_j |(* d omega)_j - CURL_SIGN 2 u Ric(X, e_j)|`
    pub curl: f64,
}

pub fn twist_identities(s: &StationarySpacetime, p: &ChartPoint) -> Result<TwistResiduals> {
    let tj = TwistJet::new(s, p)?;
    let l = &tj.local;
    let u = l.u.value();
    let norm = (tj.omega_norm_sq() - 0.5 * u.powi(6) * l.lambda_norm_sq()).abs();
    let div = l.hm.ginv.component_mul(&tj.nabla_omega).sum();
    let divergence = (div - 3.0 * l.hm.dot(&tj.omega, &l.grad_log_u())).abs();
    let star = hodge_star2(&l.hm.g, &tj.d_omega_form())?;
    let ric = RicciBlocks::from_local(l);
    let curl = (star - ric.r0j * (CURL_SIGN * 2.0 * u)).amax();
    Ok(TwistResiduals { norm, divergence, curl })
}

/// `d omega` by central differences of `omega` itself, independent of the jet path.
pub fn twist_exterior_derivative_fd(s: &StationarySpacetime, p: &ChartPoint, policy: &FDPolicy) -> Result<DMatrix<f64>> {
    require_3(s.n())?;
    let h: Vec<f64> = policy.steps(p);
    s.domain().check_stencil(p, &h)?;
    let omega_at = |q: &[f64]| twist_one_form(s, &ChartPoint::from(q)).map(|w| w.as_slice().to_vec()).unwrap_or(vec![f64::NAN; 3]);
    let mut d = DMatrix::zeros(3, 3);
    for k in 0..3 {
        let col = crate::fields::central_diff(&omega_at, p, k, h[k], policy.levels());
        for i in 0..3 {
            d[(k, i)] = col[i];
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(p));
    }
    Ok(&d - d.transpose())
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, &x) in GK_NODES.iter().enumerate() {
        let vals = if x == 0.0 { vec![f(mid)?] } else { vec![f(mid - half * x)?, f(mid + half * x)?] };
        let sum: f64 = vals.iter().sum();
        kronrod += K15_WEIGHTS[i] * sum;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * sum;
        }
    }
    Ok((kronrod * half, (kronrod - gauss).abs() * half))
}

/// Adaptive Gauss-Kronrod quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate_adaptive(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
        let (val, err) = gauss_kronrod(f, a, b)?;
        if err <= tol || depth >= 40 {
            return Ok(val);
        }
        let m = 0.5 * (a + b);
        Ok(recurse(f, a, m, 0.5 * tol, depth + 1)? + recurse(f, m, b, 0.5 * tol, depth + 1)?)
    }
    recurse(f, a, b, tol, 0)
}

/// `psi(target) - psi(base)` by integrating `omega` along the polyline `base -> path.. -> target`.
pub fn twist_potential(s: &StationarySpacetime, base: &ChartPoint, target: &ChartPoint, path: &[ChartPoint]) -> Result<f64> {
    require_3(s.n())?;
    let mut vertices = vec![base.clone()];
    vertices.extend(path.iter().cloned());
    vertices.push(target.clone());
    for w in vertices.windows(2) {
        for t in [0.0, 0.5, 1.0] {
            let q = lerp(&w[0], &w[1], t);
            let curl = TwistJet::new(s, &q)?.d_omega_form().amax();
            if curl > CLOSED_TOL {
                return Err(Error::NotClosed(curl));
            }
        }
    }
    let mut total = 0.0;
    for w in vertices.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dir = DVector::from_iterator(3, b.iter().zip(a.iter()).map(|(x, y)| x - y));
        if dir.norm() == 0.0 {
            continue;
        }
        let mut f = |t: f64| -> Result<f64> { Ok(twist_one_form(s, &lerp(a, b, t))?.dot(&dir)) };
        total += integrate_adaptive(&mut f, 0.0, 1.0, QUADRATURE_TOL)?;
    }
    Ok(total)
}

fn lerp(a: &ChartPoint, b: &ChartPoint, t: f64) -> ChartPoint {
    ChartPoint::new(a.iter().zip(b.iter()).map(|(x, y)| x + t * (y - x)).collect::<Vec<_>>())
}

/// The upper half plane with `y^-2 (dx^2 + dy^2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HyperbolicTarget;

impl HyperbolicTarget {
    pub fn metric(&self, y: f64) -> DMatrix<f64> {
        DMatrix::identity(2, 2) / (y * y)
    }

    /// `Gamma^a_bc` at height `y`; index 0 is `x`, 1 is `y`.
    pub fn christoffel(&self, a: usize, b: usize, c: usize, y: f64) -> f64 {
        match (a, b, c) {
            (0, 0, 1) | (0, 1, 0) => -1.0 / y,
            (1, 0, 0) => 1.0 / y,
            (1, 1, 1) => -1.0 / y,
            _ => 0.0,
        }
    }

    /// Coordinate form for the curvature oracle.
    pub fn coordinate_metric(&self) -> crate::oracle::CoordinateMetric {
        crate::oracle::CoordinateMetric::new(2, 0, |p| {
            if p[1] <= 0.0 {
                return Err(Error::domain(p));
            }
            Ok(DMatrix::identity(2, 2) / (p[1] * p[1]))
        })
    }
}

/// `Phi^* g_-1` in the adapted frame; the `e_0` row and column vanish.
pub fn pullback_hyperbolic(s: &StationarySpacetime, p: &ChartPoint) -> Result<DMatrix<f64>> {
    let tj = TwistJet::new(s, p)?;
    let u = tj.local.u.value();
    let dlu = tj.local.grad_log_u();
    let mut m = DMatrix::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            m[(i + 1, j + 1)] = tj.omega[i] * tj.omega[j] / u.powi(4) + 4.0 * dlu[i] * dlu[j];
        }
    }
    Ok(m)
}

/// `e(Phi) = u^-4 |omega|^2 + 4 |nabla log u|^2`
pub fn energy_density(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    Ok(TwistJet::new(s, p)?.energy())
}

/// Three independent evaluations of the energy density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyForms {
    pub closed: f64,
    /// Trace of the pullback against the associated Riemannian metric.
    pub trace: f64,
    /// `2 u^2 R~ - 2 (R - 2 u^-2 Ric(X, X))`, from the conformal curvature.
    pub conformal: f64,
}

pub fn energy_forms(s: &StationarySpacetime, p: &ChartPoint) -> Result<EnergyForms> {
    let closed = energy_density(s, p)?;
    let pull = pullback_hyperbolic(s, p)?;
    let l = s.local(p)?;
    let u2 = l.u.value().powi(2);
    let mut hat_inv = l.frame_inverse();
    hat_inv[(0, 0)] = 1.0 / u2;
    let trace = hat_inv.component_mul(&pull).sum();
    let cd = s.conformal_reduction(p)?;
    let ric = s.ricci_blocks(p)?;
    let scalar_bar = -ric.r00 / u2 + l.hm.ginv.component_mul(&ric.rij).sum();
    let conformal = 2.0 * u2 * cd.scalar_til - 2.0 * (scalar_bar - 2.0 * ric.r00 / u2);
    Ok(EnergyForms { closed, trace, conformal })
}

/// Components `(x, y)` of the harmonic-map Laplacian of `Phi` for the associated Riemannian metric.
pub fn tension_field(s: &StationarySpacetime, p: &ChartPoint) -> Result<[f64; 2]> {
    let tj = TwistJet::new(s, p)?;
    let curl = tj.d_omega_form().amax();
    if curl > CLOSED_TOL {
        return Err(Error::NotClosed(curl));
    }
    let l = &tj.local;
    let dlu = l.grad_log_u();
    let lap_hat = |f: &Jet| l.hm.laplacian(f) + l.hm.dot(&dlu, &DVector::from_fn(3, |i, _| f.grad(i)));
    let lap_psi = l.hm.ginv.component_mul(&tj.nabla_omega).sum() + l.hm.dot(&dlu, &tj.omega);
    let x = lap_psi - 4.0 * l.hm.dot(&tj.omega, &dlu);
    let y2 = l.u * l.u;
    let du = DVector::from_fn(3, |i, _| l.u.grad(i));
    let y = lap_hat(&y2) + tj.omega_norm_sq() / y2.value() - 4.0 * l.hm.norm_sq(&du);
    Ok([x, y])
}

/// Both sides of the Bochner identity for `e(Phi) / 2`, with the curvature terms split out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BochnerTerms {
    pub lhs: f64,
    pub rhs: f64,
    /// Sum of the square terms.
    pub squares: f64,
    pub i2: f64,
    pub i3: f64,
}

impl BochnerTerms {
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

fn fd_margin(policy: &FDPolicy, p: &[f64]) -> f64 {
    policy.steps(p).into_iter().fold(0.0, f64::max)
}

/// Laplacian of the associated Riemannian metric applied to a scalar known only by values.
fn hat_laplacian_of_values(
    s: &StationarySpacetime,
    p: &ChartPoint,
    name: &str,
    value: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    policy: FDPolicy,
) -> Result<f64> {
    if !s.domain().contains(p, fd_margin(&policy, p)) {
        return Err(Error::domain(p));
    }
    let field = ScalarField::from_values(name, s.n(), move |q| value(q).unwrap_or(f64::NAN), policy);
    let lap = s.local(p)?.frame_hessian(&field.jet(p)).laplacian;
    if !lap.is_finite() {
        return Err(Error::domain(p));
    }
    Ok(lap)
}

pub fn bochner_terms(s: &StationarySpacetime, p: &ChartPoint) -> Result<BochnerTerms> {
    let tj = TwistJet::new(s, p)?;
    let l = &tj.local;
    let hm = &l.hm;
    let u = l.u.value();
    let u2 = u * u;
    let dlu = l.grad_log_u();
    let omega = &tj.omega;
    let lu2 = hm.norm_sq(&dlu);
    let om2 = hm.norm_sq(omega);
    let om_dlu = hm.dot(omega, &dlu);

    let hess_log_u = hm.covariant_hessian(&l.u.ln());
    let a = hess_log_u * 2.0 + omega * omega.transpose() / u.powi(4);
    let b = DMatrix::from_fn(3, 3, |i, j| {
        tj.nabla_omega[(i, j)] - 2.0 * omega[i] * dlu[j] - 2.0 * omega[j] * dlu[i]
    });
    let wedge = (om2 * lu2 - om_dlu * om_dlu) / u.powi(4);
    let squares = 4.0 * lu2 * lu2
        + (om_dlu / u2).powi(2)
        + hm.contract2(&a, &a)
        + hm.contract2(&b, &b) / u.powi(4)
        + 6.0 * wedge;

    let ric = RicciBlocks::from_local(l);
    let pull = DMatrix::from_fn(3, 3, |i, j| omega[i] * omega[j] / u.powi(4) + 4.0 * dlu[i] * dlu[j]);
    let i2 = hm.contract2(&(&ric.rij - &hm.g * (2.0 * ric.r00 / u2)), &pull);
    let grad_ric_xx = match s.lambda() {
        // Ric(X, X) = lambda gbar(X, X) = -lambda u^2
        Some(lambda) => DVector::from_fn(3, |i, _| -2.0 * lambda * u * l.u.grad(i)),
        None => {
            let policy = FDPolicy::default();
            if !s.domain().contains(p, fd_margin(&policy, p)) {
                return Err(Error::domain(p));
            }
            let st = s.clone();
            let f = ScalarField::from_values(
                "ric_xx",
                3,
                move |q| st.ricci_blocks(&ChartPoint::from(q)).map(|r| r.r00).unwrap_or(f64::NAN),
                policy,
            );
            f.gradient(p)
        }
    };
    let i3 = 4.0 / u2 * hm.dot(&grad_ric_xx, &dlu);

    let st = s.clone();
    let lhs = hat_laplacian_of_values(
        s,
        p,
        "half_energy",
        move |q| Ok(0.5 * TwistJet::new(&st, q)?.energy()),
        FDPolicy::default(),
    )?;
    Ok(BochnerTerms { lhs, rhs: squares + i2 + i3, squares, i2, i3 })
}

/// Relative residual of the Bochner identity for `e(Phi) / 2`.
pub fn bochner_residual(s: &StationarySpacetime, p: &ChartPoint) -> Result<f64> {
    Ok(bochner_terms(s, p)?.residual())
}

/// `h = 2 |nabla log u|^2 + u^-4 |omega|^2 / 2` with its two summands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HMonitor {
    pub value: f64,
    pub gradient_part: f64,
    pub twist_part: f64,
}

pub fn h_monitor(s: &StationarySpacetime, p: &ChartPoint) -> Result<HMonitor> {
    let tj = TwistJet::new(s, p)?;
    let gradient_part = 2.0 * tj.local.hm.norm_sq(&tj.local.grad_log_u());
    let twist_part = 0.5 * tj.omega_norm_sq() / tj.local.u.value().powi(4);
    Ok(HMonitor { value: gradient_part + twist_part, gradient_part, twist_part })
}

/// Everything the reduction knows at one point.
#[derive(Clone, Debug, Serialize)]
pub struct TwistData {
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub psi: f64,
    /// `(x, y) = (psi, u^2)`
    pub phi: [f64; 2],
    pub e_phi: f64,
    pub tension: [f64; 2],
    pub bochner_residual: f64,
}

/// Twist data at `p`, with `psi` integrated along the straight segment from `base`.
pub fn twist_data(s: &StationarySpacetime, base: &ChartPoint, p: &ChartPoint) -> Result<TwistData> {
    let tj = TwistJet::new(s, p)?;
    let psi = twist_potential(s, base, p, &[])?;
    Ok(TwistData {
        lambda: tj.local.lambda.as_slice().to_vec(),
        omega: tj.omega.as_slice().to_vec(),
        psi,
        phi: [psi, tj.local.u.value().powi(2)],
        e_phi: tj.energy(),
        tension: tension_field(s, p)?,
        bochner_residual: bochner_residual(s, p)?,
    })
}
