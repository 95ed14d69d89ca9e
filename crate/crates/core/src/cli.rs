//! Command-line front end. Exit codes: 0 pass, 1 tolerance failure, 2 configuration error.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::catalog::{by_name, CatalogEntry, EntryParams, ENTRY_NAMES};
use crate::checks::{run_checks, Tier};
use crate::error::Error;
use crate::estimates::{curvature_estimate_ratio, gradient_estimate_ratio, two_scale_diagnostic, SampleSpec};
use crate::fields::ChartPoint;
use crate::geodesics::{
    horizontal_projection, integrate_geodesic, schwarzschild_circular_tangent, GeodesicOptions, GeodesicState, MetricKind,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "stationary", version, about = "Stationary spacetime geometry: residual suites, geodesics, estimate monitors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List catalog entries with their flags.
    List,
    /// Run the residual suites on one entry.
    Check(CheckArgs),
    /// Integrate one geodesic and write its trajectory as CSV.
    Geodesic(GeodesicArgs),
    /// Evaluate the estimate monitors on a ball.
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Catalog entry name.
    pub entry: Option<String>,
    #[arg(long = "entry", id = "entry_flag")]
    pub entry_flag: Option<String>,
    /// Mass parameter.
    #[arg(long = "M", allow_negative_numbers = true)]
    pub mass: Option<f64>,
    /// Kerr spin parameter.
    #[arg(long, allow_negative_numbers = true)]
    pub spin: Option<f64>,
    /// Angular velocity of the rotating chart.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Cosmological constant (AdS).
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Dimension of the generic fixture.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum)]
    pub tol_tier: Option<TierArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierArg {
    Analytic,
    Fd,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Tier {
        match t {
            TierArg::Analytic => Tier::Analytic,
            TierArg::Fd => Tier::Fd,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Kerr spin (same as --spin).
    #[arg(long = "a", allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Random interior points on top of the anchors.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Lorentzian,
    Hat,
}

#[derive(Args, Debug, Clone)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub common: Common,
    /// Kerr spin (same as --spin).
    #[arg(long = "a", allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Circular equatorial orbit of Schwarzschild at this radius.
    #[arg(long)]
    pub circular_r: Option<f64>,
    /// Radial fall from rest at this radius (spherical charts).
    #[arg(long)]
    pub radial_r: Option<f64>,
    /// Initial position, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    /// Initial tangent in adapted-frame components `T0,..,Tn`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub tangent: Option<Vec<f64>>,
    #[arg(long)]
    pub smax: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub output_step: Option<f64>,
    /// Allowed drift of the conserved quantities.
    #[arg(long)]
    pub drift_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonitorArg {
    Gradient,
    Curvature,
    Auto,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ball radius.
    #[arg(long = "a", alias = "radius")]
    pub radius: Option<f64>,
    /// Ball center, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    /// Center at this radius on the equator (or on the first axis).
    #[arg(long)]
    pub center_r: Option<f64>,
    #[arg(long, value_enum)]
    pub monitor: Option<MonitorArg>,
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long)]
    pub per_ray: Option<usize>,
    /// Also report sup |Rm| a^2 at radii a and a/2.
    #[arg(long)]
    pub two_scale: bool,
}

/// Everything a run can be configured with. Keys not listed here are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub entry: Option<String>,
    #[serde(rename = "M")]
    pub mass: Option<f64>,
    pub spin: Option<f64>,
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
    pub dim: Option<usize>,
    pub tol_tier: Option<TierArg>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub kind: Option<KindArg>,
    pub circular_r: Option<f64>,
    pub radial_r: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub tangent: Option<Vec<f64>>,
    pub smax: Option<f64>,
    pub tol: Option<f64>,
    pub output_step: Option<f64>,
    pub drift_tol: Option<f64>,
    pub radius: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub center_r: Option<f64>,
    pub monitor: Option<MonitorArg>,
    pub rays: Option<usize>,
    pub per_ray: Option<usize>,
    pub two_scale: Option<bool>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Dimension(_) | Error::NotStatic(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else { return Ok(RunConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

/// Flag value if given, else the config value.
fn pick<T: Clone>(flag: &Option<T>, cfg: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| cfg.clone())
}

fn merge_common(c: &Common, spin_flag: Option<f64>, mut cfg: RunConfig) -> CliResult<RunConfig> {
    if let (Some(a), Some(b)) = (&c.entry, &c.entry_flag) {
        if a != b {
            return Err(CliError::Config(format!("entry given twice: '{a}' and '{b}'")));
        }
    }
    cfg.entry = pick(&c.entry.clone().or(c.entry_flag.clone()), &cfg.entry);
    cfg.mass = pick(&c.mass, &cfg.mass);
    cfg.spin = pick(&spin_flag.or(c.spin), &cfg.spin);
    cfg.omega = pick(&c.omega, &cfg.omega);
    cfg.lambda = pick(&c.lambda, &cfg.lambda);
    cfg.dim = pick(&c.dim, &cfg.dim);
    cfg.tol_tier = pick(&c.tol_tier, &cfg.tol_tier);
    cfg.seed = pick(&c.seed, &cfg.seed);
    cfg.out = pick(&c.out, &cfg.out);
    if cfg.entry.is_none() {
        return Err(CliError::Config(format!("no entry given; known: {}", ENTRY_NAMES.join(", "))));
    }
    Ok(cfg)
}

fn entry_of(cfg: &RunConfig) -> CliResult<CatalogEntry> {
    let params = EntryParams { mass: cfg.mass, spin: cfg.spin, omega: cfg.omega, lambda: cfg.lambda, dim: cfg.dim };
    Ok(by_name(cfg.entry.as_deref().unwrap_or_default(), &params)?)
}

fn header(command: &str, cfg: &RunConfig, entry: &CatalogEntry) -> serde_json::Value {
    json!({
        "tool": "stationary",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": cfg,
        "entry": entry.name,
        "params": entry.params,
        "lambda": entry.lambda(),
        "flags": entry.flags,
        "tolerance_tiers": {
            "analytic": {"oracle_relative": 1e-5, "ricci": 1e-6, "flat": 1e-8, "algebraic": 1e-8},
            "fd": {"derivative": 1e-3, "algebraic": 1e-8},
            "selected": cfg.tol_tier.unwrap_or(TierArg::Analytic),
        },
    })
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable report") + "\n";
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(())
        }
    }
}

fn cmd_list() -> CliResult<i32> {
    let mut entries = Vec::new();
    for name in ENTRY_NAMES {
        let e = by_name(name, &EntryParams::default())?;
        entries.push(json!({
            "name": e.name,
            "n": e.spacetime.n(),
            "params": e.params,
            "lambda": e.lambda(),
            "flags": e.flags,
        }));
    }
    write_json(&json!({"tool": "stationary", "version": env!("CARGO_PKG_VERSION"), "entries": entries}), None)?;
    Ok(EXIT_PASS)
}

pub fn cmd_check(args: &CheckArgs) -> CliResult<i32> {
    let cfg = load_config(args.common.config.as_deref())?;
    let mut cfg = merge_common(&args.common, args.a, cfg)?;
    cfg.samples = pick(&args.samples, &cfg.samples);
    let entry = entry_of(&cfg)?;
    let tier: Tier = cfg.tol_tier.unwrap_or(TierArg::Analytic).into();
    let report = run_checks(&entry, tier, cfg.samples.unwrap_or(20), cfg.seed.unwrap_or(0))?;
    let mut value = header("check", &cfg, &entry);
    value["pass"] = json!(report.pass);
    value["report"] = serde_json::to_value(&report).expect("serializable");
    write_json(&value, cfg.out.as_deref())?;
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn spherical(entry: &CatalogEntry) -> bool {
    matches!(entry.name.as_str(), "schwarzschild" | "kerr")
}

fn geodesic_init(entry: &CatalogEntry, cfg: &RunConfig) -> CliResult<GeodesicState> {
    let s = &entry.spacetime;
    let n = s.n();
    if let Some(r) = cfg.circular_r {
        if entry.name != "schwarzschild" {
            return Err(CliError::Config("--circular-r needs the schwarzschild entry".into()));
        }
        let m = entry.params.get("M").copied().unwrap_or(1.0);
        let x = ChartPoint::new(vec![r, PI / 2.0, 0.0]);
        return Ok(GeodesicState { t: 0.0, x, frame_t: schwarzschild_circular_tangent(m, r)? });
    }
    let x = if let Some(r) = cfg.radial_r {
        if !spherical(entry) {
            return Err(CliError::Config("--radial-r needs a spherical chart (schwarzschild, kerr)".into()));
        }
        ChartPoint::new(vec![r, PI / 2.0, 0.0])
    } else {
        let x0 = cfg.x0.clone().unwrap_or_else(|| entry.anchors[0].to_vec());
        if x0.len() != n {
            return Err(CliError::Config(format!("--x0 needs {n} components")));
        }
        ChartPoint::new(x0)
    };
    s.check_point(&x)?;
    let frame_t = match &cfg.tangent {
        Some(t) if t.len() == n + 1 => DVector::from_column_slice(t),
        Some(_) => return Err(CliError::Config(format!("--tangent needs {} components", n + 1))),
        // at rest: unit along the Killing field
        None => {
            let mut t = DVector::zeros(n + 1);
            t[0] = 1.0 / s.lapse(&x);
            t
        }
    };
    Ok(GeodesicState { t: 0.0, x, frame_t })
}

pub fn cmd_geodesic(args: &GeodesicArgs) -> CliResult<i32> {
    let cfg = load_config(args.common.config.as_deref())?;
    let mut cfg = merge_common(&args.common, args.a, cfg)?;
    cfg.kind = pick(&args.kind, &cfg.kind);
    cfg.circular_r = pick(&args.circular_r, &cfg.circular_r);
    cfg.radial_r = pick(&args.radial_r, &cfg.radial_r);
    cfg.x0 = pick(&args.x0, &cfg.x0);
    cfg.tangent = pick(&args.tangent, &cfg.tangent);
    cfg.smax = pick(&args.smax, &cfg.smax);
    cfg.tol = pick(&args.tol, &cfg.tol);
    cfg.output_step = pick(&args.output_step, &cfg.output_step);
    cfg.drift_tol = pick(&args.drift_tol, &cfg.drift_tol);
    let entry = entry_of(&cfg)?;
    let kind = match cfg.kind.unwrap_or(KindArg::Lorentzian) {
        KindArg::Lorentzian => MetricKind::Lorentzian,
        KindArg::Hat => MetricKind::Hat,
    };
    let init = geodesic_init(&entry, &cfg)?;
    let smax = cfg.smax.unwrap_or(100.0);
    let step = cfg.output_step.unwrap_or(1.0);
    if !(step > 0.0) {
        return Err(CliError::Config("--output-step must be positive".into()));
    }
    let opts = GeodesicOptions::new(cfg.tol.unwrap_or(1e-12)).with_output_step(step);
    let traj = integrate_geodesic(&entry.spacetime, kind, &init, smax, &opts)?;
    let projection = horizontal_projection(&entry.spacetime, &traj)?;
    let inequality = projection.iter().all(|p| p.hat_speed_sigma <= p.hat_speed_gamma * (1.0 + 1e-9) + 1e-12);
    let drift_tol = cfg.drift_tol.unwrap_or(1e-8);
    let pass = traj.max_c_drift() <= drift_tol && traj.max_norm_drift() <= drift_tol;

    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(|e| CliError::Config(e.to_string()))?;
    let mut value = header("geodesic", &cfg, &entry);
    value["summary"] = json!({
        "kind": traj.kind,
        "x0": init.x,
        "tangent0": init.frame_t.as_slice(),
        "c": traj.c,
        "norm": traj.norm,
        "exit": traj.exit,
        "s_exit": traj.s_exit,
        "steps": traj.steps,
        "samples": traj.samples.len(),
        "max_c_drift": traj.max_c_drift(),
        "max_norm_drift": traj.max_norm_drift(),
        "drift_tol": drift_tol,
        "projection_length_inequality": inequality,
    });
    value["pass"] = json!(pass);
    let text = serde_json::to_string_pretty(&value).expect("serializable") + "\n";
    match &cfg.out {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Config(e.to_string()))?;
        }
        None => {
            std::io::stdout().write_all(&csv).map_err(|e| CliError::Config(e.to_string()))?;
            std::io::stderr().write_all(text.as_bytes()).map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<i32> {
    let cfg = load_config(args.common.config.as_deref())?;
    let mut cfg = merge_common(&args.common, None, cfg)?;
    cfg.radius = pick(&args.radius, &cfg.radius);
    cfg.center = pick(&args.center, &cfg.center);
    cfg.center_r = pick(&args.center_r, &cfg.center_r);
    cfg.monitor = pick(&args.monitor, &cfg.monitor);
    cfg.rays = pick(&args.rays, &cfg.rays);
    cfg.per_ray = pick(&args.per_ray, &cfg.per_ray);
    cfg.two_scale = if args.two_scale { Some(true) } else { cfg.two_scale };
    let entry = entry_of(&cfg)?;
    let s = &entry.spacetime;
    let n = s.n();
    let center = match (&cfg.center, cfg.center_r) {
        (Some(c), _) if c.len() == n => ChartPoint::new(c.clone()),
        (Some(_), _) => return Err(CliError::Config(format!("--center needs {n} components"))),
        (None, Some(r)) if spherical(&entry) => ChartPoint::new(vec![r, PI / 2.0, 0.0]),
        (None, Some(r)) => {
            let mut c = vec![0.0; n];
            c[0] = r;
            ChartPoint::new(c)
        }
        (None, None) => entry.anchors[0].clone(),
    };
    s.check_point(&center)?;
    let a = cfg.radius.unwrap_or(1.0);
    let defaults = SampleSpec::default();
    let spec = SampleSpec {
        rays: cfg.rays.unwrap_or(defaults.rays),
        per_ray: cfg.per_ray.unwrap_or(defaults.per_ray),
        seed: cfg.seed.unwrap_or(0),
    };
    let monitor = cfg.monitor.unwrap_or(MonitorArg::Auto);
    let mut reports = Vec::new();
    let want_gradient = match monitor {
        MonitorArg::Gradient => true,
        MonitorArg::Curvature => false,
        MonitorArg::Auto => entry.flags.is_static,
    };
    let want_curvature = match monitor {
        MonitorArg::Gradient => false,
        MonitorArg::Curvature => true,
        MonitorArg::Auto => n == 3,
    };
    if want_gradient {
        reports.push(gradient_estimate_ratio(s, &center, a, &spec)?.with_entry(&entry.name));
    }
    if want_curvature {
        reports.push(curvature_estimate_ratio(s, &center, a, &spec)?.with_entry(&entry.name));
    }
    let two_scale = if cfg.two_scale.unwrap_or(false) { Some(two_scale_diagnostic(s, &center, a, &spec)?) } else { None };
    let finite = reports.iter().all(|r| {
        r.implied_constant.is_finite() && r.companion.as_ref().is_none_or(|c| c.implied_constant.is_finite())
    });
    let mut value = header("estimate", &cfg, &entry);
    value["reports"] = serde_json::to_value(&reports).expect("serializable");
    if let Some(ts) = two_scale {
        value["two_scale"] = serde_json::to_value(ts).expect("serializable");
    }
    value["pass"] = json!(finite);
    write_json(&value, cfg.out.as_deref())?;
    Ok(if finite { EXIT_PASS } else { EXIT_FAIL })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::List => cmd_list(),
        Command::Check(a) => cmd_check(a),
        Command::Geodesic(a) => cmd_geodesic(a),
        Command::Estimate(a) => cmd_estimate(a),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}
