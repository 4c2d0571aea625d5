//! Command-line front end: argument parsing, config-file merging, initial
//! condition grammar, CSV/JSON emission, and run manifests.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numerical failure
//! (blow-up or oracle disagreement).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::diagnostics::{self, energy_series};
use crate::error::{Error, Result};
use crate::front_solver::{remainder, solve_front_with_table};
use crate::ks_solver::{solve_ks, SolverConfig, Trajectory};
use crate::resolvent_lab::trace_check;
use crate::spectral_grid::{PeriodicGrid, RealField};
use crate::symbol_engine::{self, stability_threshold, GVariant, DEFAULT_G_VARIANT};

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Spectral laboratory for a weakly nonlinear solidification front and its Kuramoto-Sivashinsky limit", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the Fourier-multiplier symbols on a grid.
    Symbols(SymbolsArgs),
    /// Cross-check closed-form symbols against quadrature and BVP oracles.
    Oracle(OracleArgs),
    /// Integrate the Kuramoto-Sivashinsky equation.
    SolveKs(SolveKsArgs),
    /// Integrate the front equation at a given eps.
    SolveFront(SolveFrontArgs),
    /// Sweep eps and measure convergence to the eps = 0 limit.
    Converge(ConvergeArgs),
    /// Extract the remainder of a front run and its energy estimates.
    Energy(EnergyArgs),
    /// Evaluate the two-term transverse ansatz and its residuals.
    Ansatz(AnsatzArgs),
    /// Print the critical strip width for the flat-front instability.
    Threshold(ThresholdArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Optional key=value config file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SymbolsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    eps: Option<f64>,
    /// Strip width ell0.
    #[arg(long)]
    ell: Option<f64>,
    /// Number of collocation nodes n (rows cover modes 0..n/2).
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long, value_name = "4|14|oracle")]
    fek_variant: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveKsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    save_every: Option<usize>,
    /// Initial condition: `(cos|sin):MODE:AMP(,term)*` or `file:PATH`.
    #[arg(long)]
    ic: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveFrontArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    save_every: Option<usize>,
    #[arg(long)]
    ic: Option<String>,
    #[arg(long, value_name = "4|14|oracle")]
    fek_variant: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    save_every: Option<usize>,
    /// Comma-separated decreasing eps values.
    #[arg(long)]
    eps_list: Option<String>,
    #[arg(long)]
    ic: Option<String>,
    #[arg(long, value_name = "4|14|oracle")]
    fek_variant: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    ic: Option<String>,
    #[arg(long, value_name = "4|14|oracle")]
    fek_variant: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnsatzArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    /// Leading-order front profile psi0.
    #[arg(long)]
    ic: Option<String>,
    /// Optional second-order curvature data psi1_etaeta (defaults to 0).
    #[arg(long)]
    psi1: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    eps: Option<f64>,
}

/// Entry point returning the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { 0 } else { 1 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::BlowUp { .. } | Error::OracleDisagreement(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Symbols(a) => cmd_symbols(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::SolveKs(a) => cmd_solve_ks(a),
        Command::SolveFront(a) => cmd_solve_front(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Energy(a) => cmd_energy(a),
        Command::Ansatz(a) => cmd_ansatz(a),
        Command::Threshold(a) => cmd_threshold(a),
    }
}

// ---------------------------------------------------------------------------
// config-file merging

type ConfigMap = BTreeMap<String, String>;

fn load_config(path: Option<&Path>) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    if let Some(p) = path {
        for (lineno, line) in std::fs::read_to_string(p)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "{}:{}: expected key=value",
                    p.display(),
                    lineno + 1
                ))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn parse_as<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::InvalidParameter(format!("invalid value {raw:?} for {key}")))
}

/// Flag value if given, else config-file value, else error.
fn require<T: FromStr>(flag: Option<T>, cfg: &ConfigMap, key: &str) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => parse_as(key, raw),
        None => Err(Error::InvalidParameter(format!("missing --{key}"))),
    }
}

/// Flag value if given, else config-file value, else the default.
fn optional<T: FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => parse_as(key, raw),
        None => Ok(default),
    }
}

// ---------------------------------------------------------------------------
// initial-condition grammar

/// Parses `term(,term)*` with `term := (cos|sin):MODE:AMP`, or `file:PATH`
/// pointing at a nodal CSV with exactly n values.
pub fn parse_ic(spec: &str, grid: &PeriodicGrid) -> Result<RealField> {
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)?;
        let values: Vec<f64> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::InvalidIc(format!("bad nodal value {s:?} in {path}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != grid.n() {
            return Err(Error::InvalidIc(format!(
                "{path}: expected {} nodal values, found {}",
                grid.n(),
                values.len()
            )));
        }
        return RealField::from_values(grid, values);
    }
    let mut terms = Vec::new();
    for (i, term) in spec.split(',').enumerate() {
        let pos = i + 1;
        let mut parts = term.split(':');
        let kind = parts.next().unwrap_or("");
        let is_cos = match kind {
            "cos" => true,
            "sin" => false,
            other => {
                return Err(Error::InvalidIc(format!(
                    "term {pos}: unknown kind {other:?} (expected cos or sin)"
                )))
            }
        };
        let mode: usize = parts
            .next()
            .ok_or_else(|| Error::InvalidIc(format!("term {pos}: missing mode")))?
            .parse()
            .map_err(|_| Error::InvalidIc(format!("term {pos}: bad mode")))?;
        let amp: f64 = parts
            .next()
            .ok_or_else(|| Error::InvalidIc(format!("term {pos}: missing amplitude")))?
            .parse()
            .map_err(|_| Error::InvalidIc(format!("term {pos}: bad amplitude")))?;
        if parts.next().is_some() {
            return Err(Error::InvalidIc(format!("term {pos}: trailing fields")));
        }
        if mode == 0 || mode > grid.dealias_cutoff() {
            return Err(Error::InvalidIc(format!(
                "term {pos}: mode {mode} outside 1..={} (dealias-safe band)",
                grid.dealias_cutoff()
            )));
        }
        terms.push((is_cos, mode, amp));
    }
    if terms.is_empty() {
        return Err(Error::InvalidIc("empty initial condition".into()));
    }
    let ell0 = grid.ell0();
    Ok(RealField::from_fn(grid, |eta| {
        terms
            .iter()
            .map(|&(is_cos, mode, amp)| {
                let arg = 2.0 * std::f64::consts::PI * mode as f64 * eta / ell0;
                amp * if is_cos { arg.cos() } else { arg.sin() }
            })
            .sum()
    }))
}

// ---------------------------------------------------------------------------
// output plumbing

/// 17-significant-digit rendering: round-trip exact for 64-bit floats.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Serialize)]
struct OutputRecord {
    path: String,
    row_count: usize,
    checksum: String,
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: String,
    subcommand: String,
    parameters: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<(f64, usize)>,
    scheme: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_final: Option<f64>,
    fek_variant: String,
    outputs: Vec<OutputRecord>,
}

impl RunManifest {
    fn new(subcommand: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            parameters: BTreeMap::new(),
            grid: None,
            scheme: "etdrk4",
            dt: None,
            t_final: None,
            fek_variant: "oracle".to_string(),
            outputs: Vec::new(),
        }
    }

    fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    fn write_output(&mut self, path: &Path, contents: &str, row_count: usize) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, contents)?;
        self.outputs.push(OutputRecord {
            path: path.display().to_string(),
            row_count,
            checksum: format!("{:016x}", fnv1a64(contents.as_bytes())),
        });
        Ok(())
    }

    fn finish(&self, manifest_path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(manifest_path, text)?;
        Ok(())
    }
}

/// Manifest path convention: FILE.manifest.json next to a file output,
/// manifest.json inside a directory output.
fn manifest_for_file(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn resolve_variant(
    raw: &str,
    eps: f64,
    grid: &PeriodicGrid,
    manifest: &mut RunManifest,
) -> Result<GVariant> {
    manifest.param("fek_variant_requested", raw);
    let variant = match raw {
        "4" => GVariant::C4,
        "14" => GVariant::C14,
        "oracle" => {
            if eps > 0.0 {
                let report = trace_check(eps, grid)?;
                report.winner.ok_or_else(|| {
                    Error::OracleDisagreement(
                        "trace oracles do not agree on a single variant".into(),
                    )
                })?
            } else {
                // At eps = 0 the variant does not affect the evolution.
                DEFAULT_G_VARIANT
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "--fek-variant must be 4, 14 or oracle (got {other:?})"
            )))
        }
    };
    manifest.fek_variant = variant.label().to_string();
    Ok(variant)
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_symbols(a: SymbolsArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let eps: f64 = require(a.eps, &cfg, "eps")?;
    let ell: f64 = require(a.ell, &cfg, "ell")?;
    let n: usize = require(a.modes, &cfg, "modes")?;
    let raw_variant: String = optional(a.fek_variant, &cfg, "fek-variant", "oracle".into())?;
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let grid = PeriodicGrid::new(ell, n)?;
    let mut manifest = RunManifest::new("symbols");
    manifest.grid = Some((ell, n));
    manifest.param("eps", num(eps));
    manifest.param("ell", num(ell));
    manifest.param("modes", n);
    let variant = resolve_variant(&raw_variant, eps, &grid, &mut manifest)?;
    let table = symbol_engine::build_with_variant(eps, &grid, variant)?;

    let mut csv = String::from("mode,lambda,X,b,s,g,r,q,z,u1,u2\n");
    for m in 0..table.modes() {
        let _ = writeln!(
            csv,
            "{m},{},{},{},{},{},{},{},{},{},{}",
            num(table.lambda[m]),
            num(table.x[m]),
            num(table.b[m]),
            num(table.s[m]),
            num(table.g[m]),
            num(table.r[m]),
            num(table.q[m]),
            num(table.z[m]),
            num(table.u1[m]),
            num(table.u2[m]),
        );
    }
    manifest.write_output(&out, &csv, table.modes())?;
    manifest.finish(&manifest_for_file(&out))
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let eps: f64 = require(a.eps, &cfg, "eps")?;
    let ell: f64 = require(a.ell, &cfg, "ell")?;
    let n: usize = require(a.modes, &cfg, "modes")?;
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let grid = PeriodicGrid::new(ell, n)?;
    let report = trace_check(eps, &grid)?;

    let mut manifest = RunManifest::new("oracle");
    manifest.grid = Some((ell, n));
    manifest.param("eps", num(eps));
    manifest.param("ell", num(ell));
    manifest.param("modes", n);
    manifest.param(
        "skipped_modes",
        report
            .skipped_modes
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    manifest.fek_variant = report
        .winner
        .map(|w| w.label().to_string())
        .unwrap_or_else(|| "mixed".to_string());

    let mut csv = String::from(
        "mode,lambda,u1_closed,u1_quad,u1_bvp,u2_closed,u2_quad,u2_bvp,g_variant4,g_variant14,g_oracle,winner\n",
    );
    for c in &report.checks {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.mode,
            num(c.lambda),
            num(c.u1_closed),
            num(c.u1_quad),
            num(c.u1_bvp),
            num(c.u2_closed),
            num(c.u2_quad),
            num(c.u2_bvp),
            num(c.g_variant4),
            num(c.g_variant14),
            num(c.g_oracle),
            c.winner.label(),
        );
    }
    manifest.write_output(&out, &csv, report.checks.len())?;
    manifest.finish(&manifest_for_file(&out))
}

fn snapshot_csv(traj: &Trajectory) -> (String, usize) {
    let grid = &traj.config.grid;
    let mut csv = String::from("tau");
    for j in 0..grid.n() {
        let _ = write!(csv, ",eta_{j}");
    }
    csv.push('\n');
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let field = grid.inverse(state);
        let _ = write!(csv, "{}", num(*t));
        for &v in field.values() {
            let _ = write!(csv, ",{}", num(v));
        }
        csv.push('\n');
    }
    (csv, traj.times.len())
}

fn norm_csv(traj: &Trajectory, eps: Option<f64>) -> Result<(String, usize)> {
    let grid = &traj.config.grid;
    let mut csv = String::from(match eps {
        Some(_) => "tau,eps,l2_phi_eta,sup_phi,mean_phi\n",
        None => "tau,l2_phi_eta,sup_phi,mean_phi\n",
    });
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let l2e = state.differentiate(1)?.l2_norm();
        let field = grid.inverse(state);
        let _ = write!(csv, "{}", num(*t));
        if let Some(e) = eps {
            let _ = write!(csv, ",{}", num(e));
        }
        let _ = writeln!(csv, ",{},{},{}", num(l2e), num(field.sup_norm()), num(field.mean()));
    }
    Ok((csv, traj.times.len()))
}

struct SolveParams {
    grid: PeriodicGrid,
    dt: f64,
    t_final: f64,
    save_every: usize,
    ic: String,
    phi0: RealField,
}

fn solve_params(
    cfg: &ConfigMap,
    ell: Option<f64>,
    modes: Option<usize>,
    dt: Option<f64>,
    t_final: Option<f64>,
    save_every: Option<usize>,
    ic: Option<String>,
) -> Result<SolveParams> {
    let ell: f64 = require(ell, cfg, "ell")?;
    let n: usize = require(modes, cfg, "modes")?;
    let dt: f64 = require(dt, cfg, "dt")?;
    let t_final: f64 = require(t_final, cfg, "t-final")?;
    let save_every: usize = optional(save_every, cfg, "save-every", 1)?;
    let ic: String = require(ic, cfg, "ic")?;
    let grid = PeriodicGrid::new(ell, n)?;
    let phi0 = parse_ic(&ic, &grid)?;
    Ok(SolveParams { grid, dt, t_final, save_every, ic, phi0 })
}

fn record_solve_params(manifest: &mut RunManifest, p: &SolveParams) {
    manifest.grid = Some((p.grid.ell0(), p.grid.n()));
    manifest.dt = Some(p.dt);
    manifest.t_final = Some(p.t_final);
    manifest.param("ell", num(p.grid.ell0()));
    manifest.param("modes", p.grid.n());
    manifest.param("dt", num(p.dt));
    manifest.param("t_final", num(p.t_final));
    manifest.param("save_every", p.save_every);
    manifest.param("ic", &p.ic);
}

fn cmd_solve_ks(a: SolveKsArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let p = solve_params(&cfg, a.ell, a.modes, a.dt, a.t_final, a.save_every, a.ic)?;
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let config = SolverConfig::new(p.grid.clone(), p.dt, p.t_final, p.save_every)?;
    let traj = solve_ks(&p.phi0, &config)?;

    let mut manifest = RunManifest::new("solve-ks");
    record_solve_params(&mut manifest, &p);
    let (snap, snap_rows) = snapshot_csv(&traj);
    manifest.write_output(&out.join("snapshots.csv"), &snap, snap_rows)?;
    let (norms, norm_rows) = norm_csv(&traj, None)?;
    manifest.write_output(&out.join("norms.csv"), &norms, norm_rows)?;
    manifest.finish(&out.join("manifest.json"))
}

fn cmd_solve_front(a: SolveFrontArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let eps: f64 = require(a.eps, &cfg, "eps")?;
    let p = solve_params(&cfg, a.ell, a.modes, a.dt, a.t_final, a.save_every, a.ic)?;
    let raw_variant: String = optional(a.fek_variant, &cfg, "fek-variant", "oracle".into())?;
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let mut manifest = RunManifest::new("solve-front");
    record_solve_params(&mut manifest, &p);
    manifest.param("eps", num(eps));
    let variant = resolve_variant(&raw_variant, eps, &p.grid, &mut manifest)?;
    let table = symbol_engine::build_with_variant(eps, &p.grid, variant)?;

    let config = SolverConfig::new(p.grid.clone(), p.dt, p.t_final, p.save_every)?;
    let traj = solve_front_with_table(&table, &p.phi0, &config)?;

    let (snap, snap_rows) = snapshot_csv(&traj);
    manifest.write_output(&out.join("snapshots.csv"), &snap, snap_rows)?;
    let (norms, norm_rows) = norm_csv(&traj, Some(eps))?;
    manifest.write_output(&out.join("norms.csv"), &norms, norm_rows)?;
    manifest.finish(&out.join("manifest.json"))
}

fn parse_eps_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad eps value {s:?} in eps list")))
        })
        .collect()
}

#[derive(Serialize)]
struct ConvergeSummary {
    ell0: f64,
    #[serde(rename = "T")]
    t_final: f64,
    n: usize,
    dt: f64,
    order: Option<f64>,
    #[serde(rename = "M_estimate")]
    m_estimate: Option<f64>,
}

fn cmd_converge(a: ConvergeArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let p = solve_params(&cfg, a.ell, a.modes, a.dt, a.t_final, a.save_every, a.ic)?;
    let eps_raw: String = require(a.eps_list, &cfg, "eps-list")?;
    let eps_list = parse_eps_list(&eps_raw)?;
    let raw_variant: String = optional(a.fek_variant, &cfg, "fek-variant", "oracle".into())?;
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let mut manifest = RunManifest::new("converge");
    record_solve_params(&mut manifest, &p);
    manifest.param("eps_list", &eps_raw);
    let max_eps = eps_list.iter().cloned().fold(0.0f64, f64::max);
    let variant = resolve_variant(&raw_variant, max_eps, &p.grid, &mut manifest)?;
    let _ = variant; // the sweep builds per-eps tables below

    let config = SolverConfig::new(p.grid.clone(), p.dt, p.t_final, p.save_every)?;
    let report = diagnostics::convergence_study(&p.phi0, &eps_list, &config)?;

    let mut csv = String::from("eps,sup_err,ratio_to_next,fitted_order\n");
    for i in 0..report.eps_list.len() {
        let err = report.errors[i].map(num).unwrap_or_default();
        let ratio = report
            .ratios
            .get(i)
            .and_then(|r| *r)
            .map(num)
            .unwrap_or_default();
        let order = report.fitted_order.map(num).unwrap_or_default();
        let _ = writeln!(csv, "{},{err},{ratio},{order}", num(report.eps_list[i]));
    }
    manifest.write_output(&out.join("converge.csv"), &csv, report.eps_list.len())?;

    let summary = ConvergeSummary {
        ell0: p.grid.ell0(),
        t_final: p.t_final,
        n: p.grid.n(),
        dt: p.dt,
        order: report.fitted_order,
        m_estimate: report.m_estimate,
    };
    let mut json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidParameter(format!("summary serialization: {e}")))?;
    json.push('\n');
    manifest.write_output(&out.join("converge.json"), &json, 1)?;
    manifest.finish(&out.join("manifest.json"))
}

#[derive(Serialize)]
struct EnergySummary {
    eps: f64,
    sup_rho_eta: f64,
    sup_l2_rho_etaeta: f64,
    int_l2_rho_tau: f64,
    int_l2_rho_taueta: f64,
    sup_rho: f64,
}

fn cmd_energy(a: EnergyArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let eps: f64 = require(a.eps, &cfg, "eps")?;
    // Snapshot every step: the time integrals difference the snapshots.
    let p = solve_params(&cfg, a.ell, a.modes, a.dt, a.t_final, Some(1), a.ic)?;
    let raw_variant: String = optional(a.fek_variant, &cfg, "fek-variant", "oracle".into())?;
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let mut manifest = RunManifest::new("energy");
    record_solve_params(&mut manifest, &p);
    manifest.param("eps", num(eps));
    let variant = resolve_variant(&raw_variant, eps, &p.grid, &mut manifest)?;
    let table = symbol_engine::build_with_variant(eps, &p.grid, variant)?;

    let config = SolverConfig::new(p.grid.clone(), p.dt, p.t_final, 1)?;
    let phi = solve_ks(&p.phi0, &config)?;
    let psi = solve_front_with_table(&table, &p.phi0, &config)?;
    let rho = remainder(&psi, &phi, eps)?;
    let rows = energy_series(&rho)?;

    let mut csv = String::from("tau,sup_rho,l2_rho_etaeta,l2_rho_tau_cum,l2_rho_taueta_cum\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(r.tau),
            num(r.sup_rho),
            num(r.l2_rho_etaeta),
            num(r.l2_rho_tau_cum),
            num(r.l2_rho_taueta_cum),
        );
    }
    manifest.write_output(&out.join("remainder.csv"), &csv, rows.len())?;

    let rep = diagnostics::energy_report(&rho)?;
    let summary = EnergySummary {
        eps,
        sup_rho_eta: rep.sup_rho_eta,
        sup_l2_rho_etaeta: rep.sup_l2_rho_etaeta,
        int_l2_rho_tau: rep.int_l2_rho_tau,
        int_l2_rho_taueta: rep.int_l2_rho_taueta,
        sup_rho: rep.sup_rho,
    };
    let mut json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidParameter(format!("summary serialization: {e}")))?;
    json.push('\n');
    manifest.write_output(&out.join("energy.json"), &json, 1)?;
    manifest.finish(&out.join("manifest.json"))
}

#[derive(Serialize)]
struct AnsatzSummary {
    v0_ode: f64,
    v0_jump: f64,
    v0_trace: f64,
    v1_ode: f64,
    v1_jump_vs_defect: f64,
    v1_trace: f64,
    max_defect: f64,
}

fn cmd_ansatz(a: AnsatzArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let ell: f64 = require(a.ell, &cfg, "ell")?;
    let n: usize = require(a.modes, &cfg, "modes")?;
    let ic: String = require(a.ic, &cfg, "ic")?;
    let psi1_spec: Option<String> = match a.psi1 {
        Some(s) => Some(s),
        None => cfg.get("psi1").cloned(),
    };
    let out: PathBuf = require(a.out, &cfg, "out")?;

    let grid = PeriodicGrid::new(ell, n)?;
    let psi0 = parse_ic(&ic, &grid)?;
    let psi1 = match &psi1_spec {
        Some(s) => parse_ic(s, &grid)?,
        None => RealField::zeros(&grid),
    };
    let bundle = crate::front_solver::build_ansatz(&psi0, &psi1, &grid)?;
    let report = crate::front_solver::ansatz_residuals(&bundle)?;

    let mut manifest = RunManifest::new("ansatz");
    manifest.grid = Some((ell, n));
    manifest.param("ell", num(ell));
    manifest.param("modes", n);
    manifest.param("ic", &ic);
    manifest.param("psi1", psi1_spec.as_deref().unwrap_or("0"));

    let mut csv = String::from("eta,defect\n");
    for (j, &eta) in grid.nodes().iter().enumerate() {
        let _ = writeln!(csv, "{},{}", num(eta), num(report.defect.values()[j]));
    }
    manifest.write_output(&out.join("defect.csv"), &csv, grid.n())?;

    let summary = AnsatzSummary {
        v0_ode: report.v0_ode,
        v0_jump: report.v0_jump,
        v0_trace: report.v0_trace,
        v1_ode: report.v1_ode,
        v1_jump_vs_defect: report.v1_jump_vs_defect,
        v1_trace: report.v1_trace,
        max_defect: report.max_defect,
    };
    let mut json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidParameter(format!("summary serialization: {e}")))?;
    json.push('\n');
    manifest.write_output(&out.join("ansatz.json"), &json, 1)?;
    manifest.finish(&out.join("manifest.json"))
}

fn cmd_threshold(a: ThresholdArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let eps: f64 = require(a.eps, &cfg, "eps")?;
    let ell_crit = stability_threshold(eps)?;
    println!("ell_crit={}", num(ell_crit));
    Ok(())
}
