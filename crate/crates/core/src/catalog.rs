//! Exact stationary spacetimes in canonical `(u, theta, g)` form.
//!
//! Units `G = c = 1`. Schwarzschild and Kerr use `(r, vartheta, phi)`, the rotating
//! chart uses cylindrical `(rho, phi, z)`, AdS and the flat entries Cartesian coordinates.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ChartDomain, ChartPoint, MetricField, ScalarField};
use crate::geometry::StationarySpacetime;
use crate::jet::Jet;

/// Coordinate margin kept from horizons, ergospheres and light cylinders.
pub const BOUNDARY_MARGIN: f64 = 1e-3;
/// Margin kept from the coordinate poles of spherical charts.
pub const POLE_MARGIN: f64 = 1e-2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    #[serde(rename = "static")]
    pub is_static: bool,
    pub vacuum: bool,
    pub einstein: bool,
    pub flat: bool,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub spacetime: StationarySpacetime,
    pub flags: Flags,
    /// Fixed test points.
    pub anchors: Vec<ChartPoint>,
    /// Coordinate box, inside the domain, used for random interior samples.
    pub sample_box: Vec<(f64, f64)>,
    /// Base point of the twist potential.
    pub psi_base: ChartPoint,
}

impl CatalogEntry {
    pub fn lambda(&self) -> Option<f64> {
        self.spacetime.lambda()
    }

    /// `count` points drawn uniformly from the sample box.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<ChartPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| ChartPoint::new(self.sample_box.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect::<Vec<_>>()))
            .collect()
    }
}

/// Entry parameters as accepted by [`by_name`]. Unused fields are ignored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntryParams {
    pub mass: Option<f64>,
    pub spin: Option<f64>,
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
    pub dim: Option<usize>,
}

pub const ENTRY_NAMES: [&str; 7] =
    ["minkowski-static", "minkowski-rotating", "schwarzschild", "kerr", "ads", "product-flat", "generic"];

pub fn by_name(name: &str, p: &EntryParams) -> Result<CatalogEntry> {
    match name {
        "minkowski-static" => Ok(make_minkowski_static()),
        "minkowski-rotating" => make_minkowski_rotating(p.omega.unwrap_or(0.5)),
        "schwarzschild" => make_schwarzschild(p.mass.unwrap_or(1.0)),
        "kerr" => make_kerr(p.mass.unwrap_or(1.0), p.spin.unwrap_or(0.5)),
        "ads" => make_ads(p.lambda.unwrap_or(-3.0)),
        "product-flat" => Ok(make_product_flat()),
        "generic" => make_generic(p.dim.unwrap_or(3)),
        other => Err(Error::Parameter(format!("unknown catalog entry '{other}'; known: {}", ENTRY_NAMES.join(", ")))),
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn zero_shift(n: usize) -> Vec<ScalarField> {
    (0..n).map(|i| ScalarField::constant(format!("theta{}", i + 1), n, 0.0)).collect()
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {v}")))
    }
}

fn away_from_poles(th: f64, margin: f64) -> bool {
    th > POLE_MARGIN + margin && th < PI - POLE_MARGIN - margin
}

/// Diagonal horizontal metric from component expressions.
fn diagonal(n: usize, comps: Vec<(&'static str, fn(&[Jet], &[f64]) -> Jet)>, consts: Vec<f64>) -> MetricField {
    MetricField::from_fn(n, |i, j| {
        if i == j {
            let (name, f) = comps[i];
            let c = consts.clone();
            ScalarField::from_expr(name, n, move |x| f(x, &c))
        } else {
            ScalarField::constant(format!("g{}{}", i + 1, j + 1), n, 0.0)
        }
    })
}

pub fn make_minkowski_static() -> CatalogEntry {
    let st = StationarySpacetime::new(
        ScalarField::constant("u", 3, 1.0),
        zero_shift(3),
        MetricField::identity(3),
        Some(0.0),
        ChartDomain::everywhere(),
    )
    .expect("valid fixture");
    CatalogEntry {
        name: "minkowski-static".into(),
        params: BTreeMap::new(),
        spacetime: st,
        flags: Flags { is_static: true, vacuum: true, einstein: true, flat: true },
        anchors: vec![ChartPoint::new(vec![0.0, 0.0, 0.0]), ChartPoint::new(vec![1.0, -2.0, 0.5])],
        sample_box: vec![(-5.0, 5.0); 3],
        psi_base: ChartPoint::new(vec![0.0, 0.0, 0.0]),
    }
}

/// Minkowski space in the frame rotating with angular velocity `omega`, `phi' = phi + omega t`.
pub fn make_minkowski_rotating(omega: f64) -> Result<CatalogEntry> {
    let om = positive("omega", omega)?;
    let rho_max = 1.0 / om;
    let u = ScalarField::from_expr("u", 3, move |x| (1.0 - (x[0] * om).square()).sqrt());
    let theta = vec![
        ScalarField::constant("theta_rho", 3, 0.0),
        ScalarField::from_expr("theta_phi", 3, move |x| {
            let r2 = x[0].square();
            r2 * om / (1.0 - r2 * om * om)
        }),
        ScalarField::constant("theta_z", 3, 0.0),
    ];
    let g = MetricField::from_fn(3, |i, j| match (i, j) {
        (0, 0) | (2, 2) => ScalarField::constant("g", 3, 1.0),
        (1, 1) => ScalarField::from_expr("g_phiphi", 3, move |x| {
            let r2 = x[0].square();
            r2 / (1.0 - r2 * om * om)
        }),
        _ => ScalarField::constant("g", 3, 0.0),
    });
    let domain = ChartDomain::new(move |p, m| {
        p.iter().all(|x| x.is_finite()) && p[0] > BOUNDARY_MARGIN + m && p[0] < rho_max - BOUNDARY_MARGIN - m
    });
    let st = StationarySpacetime::new(u, theta, g, Some(0.0), domain)?;
    Ok(CatalogEntry {
        name: "minkowski-rotating".into(),
        params: params(&[("omega", om)]),
        spacetime: st,
        flags: Flags { is_static: false, vacuum: true, einstein: true, flat: true },
        anchors: vec![
            ChartPoint::new(vec![0.5 * rho_max, 0.3, 0.0]),
            ChartPoint::new(vec![0.25 * rho_max, 1.0, 0.5]),
            ChartPoint::new(vec![0.8 * rho_max, -2.0, -1.0]),
        ],
        sample_box: vec![(0.1 * rho_max, 0.85 * rho_max), (-PI, PI), (-2.0, 2.0)],
        psi_base: ChartPoint::new(vec![0.5 * rho_max, 0.0, 0.0]),
    })
}

pub fn make_schwarzschild(mass: f64) -> Result<CatalogEntry> {
    let m = positive("M", mass)?;
    let u = ScalarField::from_expr("u", 3, move |x| (1.0 - 2.0 * m / x[0]).sqrt());
    let g = diagonal(
        3,
        vec![
            ("g_rr", |x, c| (1.0 - 2.0 * c[0] / x[0]).recip()),
            ("g_thth", |x, _| x[0].square()),
            ("g_phph", |x, _| (x[0] * x[1].sin()).square()),
        ],
        vec![m],
    );
    let domain = ChartDomain::new(move |p, margin| {
        p.iter().all(|x| x.is_finite()) && p[0] > 2.0 * m + BOUNDARY_MARGIN + margin && away_from_poles(p[1], margin)
    });
    let st = StationarySpacetime::new(u, zero_shift(3), g, Some(0.0), domain)?;
    Ok(CatalogEntry {
        name: "schwarzschild".into(),
        params: params(&[("M", m)]),
        spacetime: st,
        flags: Flags { is_static: true, vacuum: true, einstein: true, flat: false },
        anchors: [3.0, 4.0, 6.0, 10.0].iter().map(|&r| ChartPoint::new(vec![r * m, PI / 3.0, 0.4])).collect(),
        sample_box: vec![(2.5 * m, 12.0 * m), (0.3, PI - 0.3), (-PI, PI)],
        psi_base: ChartPoint::new(vec![10.0 * m, PI / 2.0, 0.0]),
    })
}

/// Kerr in Boyer-Lindquist coordinates, restricted to the region outside the ergosphere.
pub fn make_kerr(mass: f64, spin: f64) -> Result<CatalogEntry> {
    let m = positive("M", mass)?;
    if !(spin.is_finite() && spin >= 0.0 && spin < m) {
        return Err(Error::Parameter(format!("Kerr spin must satisfy 0 <= a < M, got a = {spin}, M = {m}")));
    }
    let a = spin;
    let sigma = move |x: &[Jet]| x[0].square() + x[1].cos().square() * (a * a);
    let delta = move |x: &[Jet]| x[0].square() - x[0] * (2.0 * m) + a * a;
    let u = ScalarField::from_expr("u", 3, move |x| (1.0 - x[0] * (2.0 * m) / sigma(x)).sqrt());
    let theta = vec![
        ScalarField::constant("theta_r", 3, 0.0),
        ScalarField::constant("theta_th", 3, 0.0),
        ScalarField::from_expr("theta_phi", 3, move |x| {
            x[0] * x[1].sin().square() * (2.0 * m * a) / (sigma(x) - x[0] * (2.0 * m))
        }),
    ];
    let g = MetricField::from_fn(3, |i, j| match (i, j) {
        (0, 0) => ScalarField::from_expr("g_rr", 3, move |x| sigma(x) / delta(x)),
        (1, 1) => ScalarField::from_expr("g_thth", 3, sigma),
        (2, 2) => ScalarField::from_expr("g_phph", 3, move |x| {
            delta(x) * x[1].sin().square() / (1.0 - x[0] * (2.0 * m) / sigma(x))
        }),
        _ => ScalarField::constant("g", 3, 0.0),
    });
    let domain = ChartDomain::new(move |p, margin| {
        if !p.iter().all(|x| x.is_finite()) || !away_from_poles(p[1], margin) {
            return false;
        }
        let ergo = m + (m * m - (a * p[1].cos()).powi(2)).sqrt();
        p[0] > ergo + BOUNDARY_MARGIN + margin
    });
    let st = StationarySpacetime::new(u, theta, g, Some(0.0), domain)?;
    Ok(CatalogEntry {
        name: "kerr".into(),
        params: params(&[("M", m), ("a", a)]),
        spacetime: st,
        flags: Flags { is_static: a == 0.0, vacuum: true, einstein: true, flat: false },
        anchors: vec![
            ChartPoint::new(vec![5.0 * m, PI / 3.0, 0.0]),
            ChartPoint::new(vec![6.0 * m, PI / 2.0, 1.0]),
            ChartPoint::new(vec![3.0 * m, PI / 4.0, -0.5]),
        ],
        sample_box: vec![(2.6 * m, 12.0 * m), (0.3, PI - 0.3), (-PI, PI)],
        psi_base: ChartPoint::new(vec![10.0 * m, PI / 2.0, 0.0]),
    })
}

/// Static anti-de Sitter in Cartesian coordinates, `lambda = -3/L^2`:
/// `-(1 + r^2/L^2) dt^2 + dr^2/(1 + r^2/L^2) + r^2 dOmega^2` with `r = |x|`.
/// The chart covers the whole space, origin included.
pub fn make_ads(lambda: f64) -> Result<CatalogEntry> {
    if !(lambda.is_finite() && lambda < 0.0) {
        return Err(Error::Parameter(format!("AdS needs lambda < 0, got {lambda}")));
    }
    let c = -lambda / 3.0;
    let r2 = |x: &[Jet]| x[0].square() + x[1].square() + x[2].square();
    let u = ScalarField::from_expr("u", 3, move |x| (r2(x) * c + 1.0).sqrt());
    // g_ij = delta_ij - c x_i x_j / (1 + c r^2)
    let g = MetricField::from_fn(3, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        ScalarField::from_expr(format!("g{}{}", i + 1, j + 1), 3, move |x| {
            -(x[i] * x[j] * c) / (r2(x) * c + 1.0) + delta
        })
    });
    let domain = ChartDomain::new(|p, _| p.iter().all(|x| x.is_finite()));
    let st = StationarySpacetime::new(u, zero_shift(3), g, Some(lambda), domain)?;
    let l = c.sqrt().recip();
    let dir = [(PI / 3.0).sin() * 0.2f64.cos(), (PI / 3.0).sin() * 0.2f64.sin(), (PI / 3.0).cos()];
    Ok(CatalogEntry {
        name: "ads".into(),
        params: params(&[("lambda", lambda)]),
        spacetime: st,
        flags: Flags { is_static: true, vacuum: false, einstein: true, flat: false },
        anchors: [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|&r| ChartPoint::new(dir.iter().map(|d| d * r * l).collect::<Vec<_>>()))
            .collect(),
        sample_box: vec![(-2.0 * l, 2.0 * l); 3],
        psi_base: ChartPoint::new(vec![0.0; 3]),
    })
}

/// `-(dt + theta)^2 + g` with constant closed `theta` and constant `g`: flat and static.
pub fn make_product_flat() -> CatalogEntry {
    let shift = [0.2, -0.1, 0.3];
    let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
    let st = StationarySpacetime::new(
        ScalarField::constant("u", 3, 1.0),
        (0..3).map(|i| ScalarField::constant(format!("theta{}", i + 1), 3, shift[i])).collect(),
        MetricField::constant(&g),
        Some(0.0),
        ChartDomain::everywhere(),
    )
    .expect("valid fixture");
    CatalogEntry {
        name: "product-flat".into(),
        params: BTreeMap::new(),
        spacetime: st,
        flags: Flags { is_static: true, vacuum: true, einstein: true, flat: true },
        anchors: vec![ChartPoint::new(vec![0.0, 0.0, 0.0]), ChartPoint::new(vec![1.0, 2.0, -1.0])],
        sample_box: vec![(-5.0, 5.0); 3],
        psi_base: ChartPoint::new(vec![0.0, 0.0, 0.0]),
    }
}

/// A smooth non-static, non-Einstein fixture in any dimension `2..=6` on the cube `|x^i| < 1`.
///
/// Nothing special holds here, which is the point: identities that are
/// trivial on Einstein metrics get exercised with nonzero terms.
pub fn make_generic(n: usize) -> Result<CatalogEntry> {
    if !(2..=6).contains(&n) {
        return Err(Error::Parameter(format!("generic fixture needs 2 <= n <= 6, got {n}")));
    }
    let u = ScalarField::from_expr("u", n, move |x| {
        let mut s = x[0] * 0.3 - x[1] * x[n - 1] * 0.2;
        if n > 2 {
            s = s + x[2].sin() * 0.1;
        }
        s.exp()
    });
    let theta = (0..n)
        .map(|i| {
            ScalarField::from_expr(format!("theta{}", i + 1), n, move |x| {
                let next = x[(i + 1) % n];
                let prev = x[(i + n - 1) % n];
                next * prev * (0.2 + 0.05 * i as f64) + (x[i] * 0.7).sin() * 0.1 + next.square() * 0.15
            })
        })
        .collect();
    let g = MetricField::from_fn(n, |i, j| {
        if i == j {
            ScalarField::from_expr(format!("g{}{}", i + 1, j + 1), n, move |x| {
                1.0 + (x[(i + 1) % n] * 0.8).sin().square() * 0.2 + x[i].square() * 0.1
            })
        } else {
            ScalarField::from_expr(format!("g{}{}", i + 1, j + 1), n, move |x| {
                (x[i] * 0.5 + x[j] * 0.3).cos() * (0.05 / (1.0 + (i + j) as f64))
            })
        }
    });
    let domain = ChartDomain::new(|p, m| p.iter().all(|x| x.is_finite() && x.abs() < 1.0 - m));
    let st = StationarySpacetime::new(u, theta, g, None, domain)?;
    let anchor = |v: f64| ChartPoint::new((0..n).map(|i| v * (1.0 - 0.3 * i as f64 / n as f64)).collect::<Vec<_>>());
    Ok(CatalogEntry {
        name: "generic".into(),
        params: params(&[("n", n as f64)]),
        spacetime: st,
        flags: Flags::default(),
        anchors: vec![anchor(0.1), anchor(-0.4), anchor(0.6)],
        sample_box: vec![(-0.8, 0.8); n],
        psi_base: ChartPoint::new(vec![0.0; n]),
    })
}
