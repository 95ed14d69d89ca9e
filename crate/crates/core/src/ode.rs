//! Dormand-Prince 5(4) with PI step control and chart-exit refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exit {
    ReachedSmax,
    LeftDomain,
    StepUnderflow,
    MaxSteps,
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Exit location is refined until the last rejected step is shorter than this.
    pub exit_resolution: f64,
    /// If set, samples are taken exactly at multiples of this spacing instead of at every step.
    pub output_step: Option<f64>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, max_steps: 1_000_000, exit_resolution: 1e-8, output_step: None }
    }
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub exit: Exit,
    pub s_end: f64,
    pub steps: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type Rhs<'a> = dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + 'a;

/// One trial step. Returns the new state, its derivative and the scaled error norm.
fn trial(f: &Rhs, s: f64, y: &[f64], k1: &[f64], h: f64, opts: &OdeOptions) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = vec![k1.to_vec()];
    for stage in 1..7 {
        let yi: Vec<f64> = (0..n).map(|i| y[i] + h * (0..stage).map(|j| A[stage][j] * k[j][i]).sum::<f64>()).collect();
        k.push(f(s + C[stage] * h, &yi)?);
    }
    // A[6] holds the fifth-order weights, so the seventh stage is evaluated at the new point.
    let y_new: Vec<f64> = (0..n).map(|i| y[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>()).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let err = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        acc += (err / scale).powi(2);
    }
    let k7 = k.pop().expect("seven stages");
    Ok((y_new, k7, (acc / n as f64).sqrt()))
}

/// Integrates `y' = f(s, y)` from `s = 0` to `s_max`, stopping when `inside` fails.
pub fn integrate(
    f: &Rhs,
    y0: &[f64],
    s_max: f64,
    inside: &dyn Fn(&[f64]) -> bool,
    opts: &OdeOptions,
) -> Result<OdeSolution> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Parameter("integration tolerances must be positive".into()));
    }
    if !(s_max >= 0.0 && s_max.is_finite()) {
        return Err(Error::Parameter(format!("s_max must be finite and non-negative, got {s_max}")));
    }
    if !inside(y0) {
        return Err(Error::Domain { point: y0.to_vec() });
    }
    let mut s = 0.0;
    let mut y = y0.to_vec();
    let mut k1 = f(s, &y)?;
    let mut samples = vec![(s, y.clone())];
    let mut steps = 0;
    let mut h = initial_step(&y, &k1, s_max, opts);
    let mut err_prev: f64 = 1.0;
    // Upper bound on h while closing in on a chart boundary.
    let mut cap = f64::INFINITY;
    let mut next_output = opts.output_step.map(|d| d.min(s_max));

    while s < s_max {
        if steps >= opts.max_steps {
            return Ok(OdeSolution { samples, exit: Exit::MaxSteps, s_end: s, steps });
        }
        let target = next_output.unwrap_or(s_max).min(s_max);
        let mut h_try = h.min(cap).min(target - s);
        let hits_target = h_try >= target - s;
        if hits_target {
            h_try = target - s;
        }
        if h_try < 1e-14 * s.abs().max(1.0) && !hits_target {
            return Ok(OdeSolution { samples, exit: Exit::StepUnderflow, s_end: s, steps });
        }
        let outcome = trial(f, s, &y, &k1, h_try, opts);
        let (y_new, k_new, err) = match outcome {
            Ok(t) if inside(&t.0) => t,
            Ok(_) | Err(Error::Domain { .. }) => {
                // the step leaves the chart: bisect towards the boundary
                cap = 0.5 * h_try;
                if cap < opts.exit_resolution {
                    if samples.last().map(|l| l.0) != Some(s) {
                        samples.push((s, y.clone()));
                    }
                    return Ok(OdeSolution { samples, exit: Exit::LeftDomain, s_end: s, steps });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if !err.is_finite() {
            h = 0.25 * h_try;
            continue;
        }
        if err <= 1.0 {
            steps += 1;
            s = if hits_target { target } else { s + h_try };
            y = y_new;
            k1 = k_new;
            let fac = 0.9 * err.max(1e-10).powf(-0.17) * err_prev.powf(0.04);
            let grown = h_try * fac.clamp(0.2, 5.0);
            // keep the controller's step when a short step was forced by an output point
            h = if hits_target { h.max(grown) } else { grown };
            err_prev = err.max(1e-4);
            match (opts.output_step, next_output) {
                (Some(d), Some(t)) => {
                    if hits_target {
                        samples.push((s, y.clone()));
                        next_output = Some((t + d).min(s_max));
                    }
                }
                _ => samples.push((s, y.clone())),
            }
        } else {
            h = h_try * (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    if samples.last().map(|l| l.0) != Some(s) {
        samples.push((s, y.clone()));
    }
    Ok(OdeSolution { samples, exit: Exit::ReachedSmax, s_end: s, steps })
}

fn initial_step(y: &[f64], k: &[f64], s_max: f64, opts: &OdeOptions) -> f64 {
    let scale = |v: &[f64]| {
        (v.iter().zip(y).map(|(a, b)| (a / (opts.atol + opts.rtol * b.abs())).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(k);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(s_max.max(1e-12)).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let f = |_s: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let sol = integrate(&f, &[1.0, 0.0], 10.0, &|_| true, &OdeOptions::with_tol(1e-11)).unwrap();
        let (s, y) = sol.samples.last().unwrap();
        assert_eq!(sol.exit, Exit::ReachedSmax);
        assert!((s - 10.0).abs() < 1e-15);
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn output_grid_is_hit_exactly() {
        let f = |_s: f64, y: &[f64]| Ok(vec![y[0]]);
        let mut o = OdeOptions::with_tol(1e-10);
        o.output_step = Some(0.25);
        let sol = integrate(&f, &[1.0], 1.0, &|_| true, &o).unwrap();
        let grid: Vec<f64> = sol.samples.iter().map(|s| s.0).collect();
        assert_eq!(grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!((sol.samples[4].1[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn exit_is_located_by_bisection() {
        let f = |_s: f64, _y: &[f64]| Ok(vec![1.0]);
        let sol = integrate(&f, &[0.0], 10.0, &|y| y[0] < 2.5, &OdeOptions::with_tol(1e-10)).unwrap();
        assert_eq!(sol.exit, Exit::LeftDomain);
        assert!((sol.s_end - 2.5).abs() < 1e-7);
    }
}
