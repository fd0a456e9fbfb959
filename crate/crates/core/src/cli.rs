//! Command-line front end. Scenario files are JSON:
//!
//! ```json
//! { "vortices": [ { "x": 1.0, "y": 0.0, "gamma": 1.0 } ],
//!   "integrator": { "rel_tol": 1e-10 }, "t_end": 10.0, "sample_dt": 0.1 }
//! ```
//!
//! Exit codes: 0 success, 2 input error, 3 integration failure, 4 failed
//! precondition (e.g. not a relative equilibrium).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::calibration::calibrate;
use crate::dynamics::{integrate_with, Configuration, IntegratorConfig, TrajectorySample};
use crate::equilibria::{is_relative_equilibrium, re_shape, TOL_RE};
use crate::error::Error;
use crate::hypgeo::HPoint;
use crate::sl2::{classify_momentum, default_momentum_tol, orbit_curve, AlgebraElement, Sheet};
use crate::stability::{classify_stability, equilibrium_interval, sweep_isosceles};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

const DEFAULT_SEED: u64 = 0x4856_4f52;

#[derive(Debug, Parser)]
#[command(name = "hypervortex", version, about = "Point vortices on the hyperbolic plane")]
pub struct Cli {
    /// Tolerance for `re` (certificate) and `classify` (momentum type).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file for CSV-producing commands.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomised helpers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario; writes the trajectory CSV to --out and prints a drift summary.
    Simulate { scenario: PathBuf },
    /// Momentum value and its coadjoint type.
    Classify { scenario: PathBuf },
    /// Relative-equilibrium multipliers and certificate.
    Re { scenario: PathBuf },
    /// Stability verdict of a relative equilibrium with two or three vortices.
    Stability { scenario: PathBuf },
    /// Isosceles geodesic stability atlas, written to --out as CSV.
    ///
    /// verdict_code: 0 G_mu-stable, 1 G-stable, 2 leafwise only,
    /// 3 not formally stable, 4 zero momentum, 5 undetermined, 6 invalid cell.
    Sweep {
        #[arg(long, default_value_t = 1.0)]
        gamma1: f64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        a_min: f64,
        #[arg(long, default_value_t = -1.05, allow_hyphen_values = true)]
        a_max: f64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        g2_min: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        g2_max: f64,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
    },
    /// Samples of the isotropy orbit exp(t mu) . nu as CSV (t, x, y, z).
    Orbit {
        /// Momentum value "x,y,z".
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        /// Base point "x,y" in the chart.
        #[arg(long, allow_hyphen_values = true)]
        nu: String,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        t_max: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Determine the flow constant and KKS sign; prints the report as JSON.
    Calibrate {
        #[arg(long, default_value_t = 100)]
        probes: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Integration(String),
    #[error("{0}")]
    Precondition(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Integration(_) => EXIT_INTEGRATION,
            CliError::Precondition(_) => EXIT_PRECONDITION,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::IntegrationFailure { .. } => CliError::Integration(e.to_string()),
            Error::NotRelativeEquilibrium { .. }
            | Error::ContractViolation(_)
            | Error::DegenerateMomentum
            | Error::DegenerateBasis(_)
            | Error::InvalidDirections(_)
            | Error::Indeterminate(_) => CliError::Precondition(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub x: f64,
    pub y: f64,
    pub gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub vortices: Vec<VortexSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
}

fn default_t_end() -> f64 {
    10.0
}

fn default_sample_dt() -> f64 {
    0.1
}

impl Scenario {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Input(format!("scenario field `{path}`: {}", e.inner()))
        })?;
        if sc.vortices.is_empty() {
            return Err(CliError::Input("scenario field `vortices`: at least one vortex required".into()));
        }
        for (i, v) in sc.vortices.iter().enumerate() {
            if v.gamma == 0.0 {
                return Err(CliError::Input(format!("scenario field `vortices[{i}].gamma`: must be nonzero")));
            }
        }
        Ok(sc)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn configuration(&self) -> CliResult<Configuration> {
        let v: Vec<(f64, f64, f64)> = self.vortices.iter().map(|v| (v.x, v.y, v.gamma)).collect();
        Ok(Configuration::from_xy(&v)?)
    }
}

/// `{:.16e}`: seventeen significant digits, exact round trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        cols.extend([format!("x{i}"), format!("y{i}"), format!("z{i}")]);
    }
    cols.extend(["H", "mux", "muy", "muz", "h2_residual"].map(String::from));
    cols.join(",")
}

pub fn trajectory_row(s: &TrajectorySample) -> String {
    let mut vals = vec![s.t];
    for p in s.config.points() {
        vals.extend([p.x(), p.y(), p.z()]);
    }
    vals.extend([s.h, s.mu.x, s.mu.y, s.mu.z, s.h2_residual]);
    vals.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("creating {}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Input(format!("write failed: {e}"))
}

fn require_out(out: &Option<PathBuf>, cmd: &str) -> CliResult<PathBuf> {
    out.clone().ok_or_else(|| CliError::Input(format!("`{cmd}` needs --out <csv>")))
}

fn parse_list(s: &str, n: usize, what: &str) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Input(format!("--{what}: {e}")))?;
    if v.len() != n {
        return Err(CliError::Input(format!("--{what} expects {n} comma-separated numbers")));
    }
    Ok(v)
}

fn println_json(stdout: &mut dyn Write, v: &serde_json::Value) -> CliResult<()> {
    writeln!(stdout, "{v}").map_err(io_err)
}

fn simulate(cli: &Cli, scenario: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let sc = Scenario::load(scenario)?;
    let config = sc.configuration()?;
    let out = require_out(&cli.out, "simulate")?;
    let mut w = create(&out)?;
    writeln!(w, "{}", trajectory_header(config.len())).map_err(io_err)?;
    let mut first: Option<TrajectorySample> = None;
    let mut d = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0usize;
    let result = integrate_with(&config, sc.t_end, &sc.integrator, sc.sample_dt, |s| {
        writeln!(w, "{}", trajectory_row(s)).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let f = first.get_or_insert_with(|| s.clone());
        d.0 = d.0.max((s.h - f.h).abs());
        d.1 = d.1.max((s.mu - f.mu).norm());
        d.2 = d.2.max(s.h2_residual);
        count += 1;
        Ok(())
    });
    w.flush().map_err(io_err)?;
    let stats = result?;
    println_json(
        stdout,
        &json!({
            "delta_h": d.0,
            "delta_mu": d.1,
            "max_h2_residual": d.2,
            "samples": count,
            "accepted_steps": stats.accepted,
            "rejected_steps": stats.rejected,
        }),
    )
}

fn classify(cli: &Cli, scenario: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let config = Scenario::load(scenario)?.configuration()?;
    let mu = crate::dynamics::momentum(&config);
    let tol = cli.tol.unwrap_or_else(|| default_momentum_tol(&mu));
    let class = classify_momentum(&mu, tol);
    println_json(
        stdout,
        &json!({
            "mu": [mu.0.x, mu.0.y, mu.0.z],
            "det_mu": class.det,
            "type": class.kind.as_str(),
            "sheet": class.sheet.map(|s| match s { Sheet::Upper => "upper", Sheet::Lower => "lower" }),
            "isotropy_description": class.kind.isotropy_description(),
        }),
    )
}

fn re(cli: &Cli, scenario: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let config = Scenario::load(scenario)?.configuration()?;
    let tol = cli.tol.unwrap_or(TOL_RE);
    let (ok, rep) = is_relative_equilibrium(&config, tol)?;
    let shape = if ok { re_shape(&config) } else { None };
    println_json(
        stdout,
        &json!({
            "xi": [rep.xi.0.x, rep.xi.0.y, rep.xi.0.z],
            "lambdas": rep.lambdas,
            "residual": rep.residual,
            "is_re": ok,
            "shape": shape,
        }),
    )
}

fn stability(scenario: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let config = Scenario::load(scenario)?.configuration()?;
    if !(config.len() == 2 || config.len() == 3) {
        return Err(CliError::Precondition(format!(
            "stability needs 2 or 3 vortices, scenario has {}",
            config.len()
        )));
    }
    let v = classify_stability(&config)?;
    let value = serde_json::to_value(&v).map_err(|e| CliError::Input(e.to_string()))?;
    println_json(stdout, &value)
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cli: &Cli,
    gamma1: f64,
    a_min: f64,
    a_max: f64,
    g2_min: f64,
    g2_max: f64,
    resolution: usize,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let out = require_out(&cli.out, "sweep")?;
    let cells = sweep_isosceles(gamma1, (a_min, a_max), (g2_min, g2_max), resolution)?;
    let mut w = create(&out)?;
    writeln!(w, "a,gamma2,verdict_code,A_value,det_mu,detQ").map_err(io_err)?;
    for c in &cells {
        let det_q = c.det_q.map(fmt_f64).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(c.a),
            fmt_f64(c.gamma2),
            c.verdict_code,
            fmt_f64(c.a_value),
            fmt_f64(c.det_mu),
            det_q
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    let iv = equilibrium_interval(gamma1)?;
    println_json(
        stdout,
        &json!({
            "cells": cells.len(),
            "equilibrium_interval": iv.interval.map(|(a, b)| [a, b]),
            "sign_changes": iv.roots,
        }),
    )
}

fn orbit(cli: &Cli, mu: &str, nu: &str, t_max: f64, samples: usize, stdout: &mut dyn Write) -> CliResult<()> {
    let m = parse_list(mu, 3, "mu")?;
    let n = parse_list(nu, 2, "nu")?;
    let mu = AlgebraElement::new(m[0], m[1], m[2]);
    if mu.0.norm() == 0.0 {
        return Err(CliError::Input("--mu must be nonzero".into()));
    }
    if samples < 2 || !t_max.is_finite() {
        return Err(CliError::Input("--samples must be at least 2 and --t-max finite".into()));
    }
    let nu = HPoint::lift(n[0], n[1]);
    let mut rows = vec!["t,x,y,z".to_string()];
    for i in 0..samples {
        let t = t_max * i as f64 / (samples - 1) as f64;
        let p = orbit_curve(&mu, &nu, t)?;
        rows.push([t, p.x(), p.y(), p.z()].map(fmt_f64).join(","));
    }
    let text = rows.join("\n") + "\n";
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(io_err),
        None => stdout.write_all(text.as_bytes()).map_err(io_err),
    }
}

fn run_calibrate(cli: &Cli, probes: usize, stdout: &mut dyn Write) -> CliResult<()> {
    let report = calibrate(cli.seed.unwrap_or(DEFAULT_SEED), probes).map_err(|e| CliError::Precondition(e.to_string()))?;
    if let Some(path) = &cli.out {
        report.write_json(path)?;
    }
    let value = serde_json::to_value(&report).map_err(|e| CliError::Input(e.to_string()))?;
    println_json(stdout, &value)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Simulate { scenario } => simulate(cli, scenario, stdout),
        Command::Classify { scenario } => classify(cli, scenario, stdout),
        Command::Re { scenario } => re(cli, scenario, stdout),
        Command::Stability { scenario } => stability(scenario, stdout),
        Command::Sweep { gamma1, a_min, a_max, g2_min, g2_max, resolution } => {
            sweep(cli, *gamma1, *a_min, *a_max, *g2_min, *g2_max, *resolution, stdout)
        }
        Command::Orbit { mu, nu, t_max, samples } => orbit(cli, mu, nu, *t_max, *samples, stdout),
        Command::Calibrate { probes } => run_calibrate(cli, *probes, stdout),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = write!(stderr, "{e}");
            let _ = write!(stdout, "");
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
