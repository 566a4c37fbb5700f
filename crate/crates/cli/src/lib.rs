//! `holonomy-lab` command line: verification suites, sweeps and flow runs.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage or configuration error,
//! 3 numerical failure.

use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use holonomy_lab::bryant_salamon::BSSpaceId;
use holonomy_lab::config::RunConfig;
use holonomy_lab::mcf::run_stability_experiment;
use holonomy_lab::suite::{sweep, verify, Family, SuiteReport};
use holonomy_lab::{LabError, Result};
use serde_json::json;

pub const THREADS_ENV: &str = "HOLONOMY_LAB_THREADS";

pub const SWEEP_HELP: &str = "CSV columns:
  abc           rho,r,A,B,C,dA,dB,dC  (stenzel)
  coefficients  rho,abs_A_over_rho,abs_C_over_rho,abs_B_times_rho  (stenzel)
  hessian       r,rho,min,h_0..h_{d-1}  (stenzel, calabi)
                s,min,bound,lambda_0..lambda_{d-1}  (bs)
  relation      s,alpha,beta,ode_alpha,ode_beta,ratio_residual,fd_residual  (bs)
  identities    r,closed_form,finite_difference  (stenzel, calabi)";

pub const FLOW_HELP: &str = "CSV columns (written to <out>.csv, report to <out>.json):
  step,t,psi_max,star_omega_min,stability_min,A2_max,volume";

#[derive(Debug, Parser)]
#[command(name = "holonomy-lab", version, about = "Numerics for Stenzel, Calabi and Bryant-Salamon metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full check suite for one family; exit 0 iff every check passes.
    Verify(Opts),
    /// Emit one quantity against a radial parameter as CSV.
    #[command(after_help = SWEEP_HELP)]
    Sweep(Opts),
    /// Mean curvature flow of a perturbed zero section of T*S^2.
    #[command(after_help = FLOW_HELP)]
    Flow(Opts),
    /// Run the suite for every standard family (or the given one) and print a summary.
    Report(Opts),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// stenzel, calabi or bs
    #[arg(value_name = "FAMILY")]
    pub family_pos: Option<String>,
    #[arg(long)]
    pub family: Option<String>,
    /// Key = value file; flags override its entries.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// spinor_S3, asd_S4, asd_CP2 or neg_spinor_S4
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// abc, coefficients, hessian, relation or identities
    #[arg(long)]
    pub quantity: Option<String>,
    /// lo:hi:count, the points of (lo, hi]
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "fd-step")]
    pub fd_step: Option<f64>,
    /// Random samples per sampled check.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long = "mesh-level")]
    pub mesh_level: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub k0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// uniform_frame_field, low_harmonic or random_seeded
    #[arg(long)]
    pub mode: Option<String>,
    /// Output path (flow: prefix for .csv and .json).
    #[arg(long)]
    pub out: Option<String>,
}

impl Opts {
    fn flags(&self) -> Result<RunConfig> {
        if self.family_pos.is_some() && self.family.is_some() && self.family_pos != self.family {
            return Err(LabError::Config("family given twice".into()));
        }
        Ok(RunConfig {
            family: self.family.clone().or_else(|| self.family_pos.clone()),
            n: self.n,
            space: self.space.clone(),
            kappa: self.kappa,
            quantity: self.quantity.clone(),
            grid: self.grid.clone(),
            tol: self.tol,
            fd_step: self.fd_step,
            samples: self.samples,
            mesh_level: self.mesh_level,
            eps: self.eps,
            k0: self.k0,
            dt: self.dt,
            t_end: self.t_end,
            seed: self.seed,
            mode: self.mode.clone(),
            out: self.out.clone(),
            ..Default::default()
        })
    }

    /// Config file entries overridden by flags.
    pub fn resolve(&self, command: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(c) = &cfg.command {
            if c != command {
                return Err(LabError::Config(format!("config is for {c:?}, not {command:?}")));
            }
        }
        cfg.merge(&self.flags()?);
        cfg.command = Some(command.into());
        Ok(cfg)
    }
}

/// Caps the global rayon pool at `HOLONOMY_LAB_THREADS` when it is set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| LabError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_file(path: &str, contents: &str) -> Result<()> {
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Config(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| LabError::Config(format!("{path}: {e}")))
}

fn io(e: std::io::Error) -> LabError {
    LabError::Config(format!("write failed: {e}"))
}

fn report_json(cfg: &RunConfig, reports: &[SuiteReport]) -> String {
    serde_json::to_string_pretty(&json!({ "config": cfg, "reports": reports })).unwrap_or_default()
}

fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let family = cfg.family()?;
    let rep = verify(&family, &cfg.suite_options()?)?;
    write!(out, "{}", rep.to_text()).map_err(io)?;
    if let Some(p) = &cfg.out {
        write_file(p, &report_json(cfg, std::slice::from_ref(&rep)))?;
    }
    Ok(if rep.passed() { 0 } else { 1 })
}

fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let table = sweep(&cfg.family()?, cfg.quantity()?, cfg.grid()?)?;
    let csv = table.to_csv();
    match &cfg.out {
        Some(p) => write_file(p, &csv)?,
        None => write!(out, "{csv}").map_err(io)?,
    }
    Ok(0)
}

fn cmd_flow(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let fc = cfg.flow_config()?;
    let rep = run_stability_experiment(&fc)?;
    let json = serde_json::to_string_pretty(&json!({ "config": cfg, "flow_config": fc, "report": rep })).unwrap_or_default();
    match &cfg.out {
        Some(prefix) => {
            write_file(&format!("{prefix}.csv"), &rep.monitors.to_csv())?;
            write_file(&format!("{prefix}.json"), &json)?;
        }
        None => writeln!(out, "{json}").map_err(io)?,
    }
    let mut summary = format!(
        "{} steps, t = {:.4}, psi_max {:.3e}, converged {}, psi monotone {}, stability monotone {}",
        rep.steps,
        rep.t_final,
        rep.terminal_psi_max,
        rep.converged,
        rep.psi_monotone(),
        rep.stability_monotone()
    );
    if let Some(f) = &rep.decay {
        summary += &format!(", rate {:.4}, R^2 {:.4}", f.rate, f.r_squared);
    }
    if let Some(f) = &rep.failure {
        summary += &format!(", failure: {f}");
    }
    if cfg.out.is_some() {
        writeln!(out, "{summary}").map_err(io)?;
    }
    Ok(if rep.passed() { 0 } else { 1 })
}

/// The families covered by `report` when none is given.
pub fn standard_families() -> Vec<Family> {
    let mut v: Vec<Family> = (2..=4).filter_map(|n| Family::stenzel(n).ok()).collect();
    v.extend((1..=3).filter_map(|n| Family::calabi(n).ok()));
    v.extend(BSSpaceId::ALL.into_iter().filter_map(|id| Family::bryant_salamon(id, 1.0).ok()));
    v
}

fn cmd_report(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let families = match cfg.family {
        Some(_) => vec![cfg.family()?],
        None => standard_families(),
    };
    let opts = cfg.suite_options()?;
    let mut reports = Vec::new();
    writeln!(out, "{:<28} {:>7} {:>9} {:>9}  {}", "family", "checks", "failures", "seconds", "constants").map_err(io)?;
    for f in &families {
        let rep = verify(f, &opts)?;
        let consts: Vec<String> = rep.constants.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
        writeln!(
            out,
            "{:<28} {:>7} {:>9} {:>9.2}  {}",
            rep.family,
            rep.checks.len(),
            rep.failures().len(),
            rep.seconds,
            consts.join(" ")
        )
        .map_err(io)?;
        for c in rep.failures() {
            writeln!(out, "    FAIL {} = {:.3e} (bound {:.1e}) {}", c.name, c.value, c.bound, c.detail).map_err(io)?;
        }
        reports.push(rep);
    }
    if let Some(p) = &cfg.out {
        write_file(p, &report_json(cfg, &reports))?;
    }
    Ok(if reports.iter().all(|r| r.passed()) { 0 } else { 1 })
}

/// Runs one command and returns the process exit code. Errors go to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Verify(o) => o.resolve("verify").and_then(|c| cmd_verify(&c, out)),
        Command::Sweep(o) => o.resolve("sweep").and_then(|c| cmd_sweep(&c, out)),
        Command::Flow(o) => o.resolve("flow").and_then(|c| cmd_flow(&c, out)),
        Command::Report(o) => o.resolve("report").and_then(|c| cmd_report(&c, out)),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
