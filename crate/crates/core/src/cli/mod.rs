//! Command-line driver: parses flags and an optional JSON config, runs one
//! computation and writes a CSV table plus a `.meta.json` sidecar.

pub mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

use crate::asymptotic::OccupancyMode;
use crate::error::Error;
use crate::relative::Dilation;
use commands::Plan;
use config::{Command, LadderParameter, RunConfig};
use format::{sidecar_path, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qdent", version, about = "Two electrons in an anisotropic 2D harmonic trap")]
struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// JSON file with run settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Explicit couplings, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    g: Vec<f64>,
    #[arg(long)]
    g_min: Option<f64>,
    #[arg(long)]
    g_max: Option<f64>,
    #[arg(long)]
    g_points: Option<usize>,
    /// Add g = 0 to a log-spaced grid.
    #[arg(long)]
    g_zero: bool,
    /// Explicit anisotropies, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    epsilon: Vec<f64>,
    /// Grid log-spaced in epsilon - 1.
    #[arg(long)]
    eps_min: Option<f64>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    eps_points: Option<usize>,
    /// Sector codes (x parity first), comma separated.
    #[arg(long, value_delimiter = ',')]
    sectors: Vec<String>,
    /// Levels per sector.
    #[arg(long)]
    levels: Option<usize>,
    /// Relative basis cutoff nx + ny <= n_max.
    #[arg(long)]
    n_max: Option<usize>,
    /// Relative basis scales: matched, auto, or factors "bx,by".
    #[arg(long, value_parser = parse_dilation)]
    dilation: Option<Dilation>,
    /// Outer Gauss-Legendre order of the Coulomb elements.
    #[arg(long)]
    quad_order: Option<usize>,
    /// Single-particle basis cutoff.
    #[arg(long)]
    sp_cutoff: Option<usize>,
    /// Asymptotic occupancies from the Nystrom grid or the analytic law.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<OccupancyMode>,
    #[arg(long)]
    nystrom_points: Option<usize>,
    #[arg(long)]
    n_cut: Option<usize>,
    #[arg(long)]
    m_cut: Option<usize>,
    /// Convergence ladder parameter.
    #[arg(long, value_enum)]
    parameter: Option<LadderParameter>,
    /// Convergence ladder values, comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
}

fn parse_dilation(s: &str) -> std::result::Result<Dilation, String> {
    match s {
        "matched" => Ok(Dilation::Matched),
        "auto" => Ok(Dilation::Auto),
        _ => {
            let parts: Vec<&str> = s.split(',').collect();
            let bad = || format!("expected matched, auto or \"bx,by\", got {s:?}");
            if parts.len() != 2 {
                return Err(bad());
            }
            let x: f64 = parts[0].trim().parse().map_err(|_| bad())?;
            let y: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            if !(x > 0.0 && y > 0.0) {
                return Err("dilation factors must be positive".into());
            }
            Ok(Dilation::Fixed { x, y })
        }
    }
}

fn parse_mode(s: &str) -> std::result::Result<OccupancyMode, String> {
    match s {
        "nystrom" => Ok(OccupancyMode::Nystrom),
        "analytic" => Ok(OccupancyMode::Analytic),
        _ => Err(format!("expected nystrom or analytic, got {s:?}")),
    }
}

impl Cli {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            g: self.g.clone(),
            g_min: self.g_min,
            g_max: self.g_max,
            g_points: self.g_points,
            include_g_zero: self.g_zero,
            epsilon: self.epsilon.clone(),
            eps_min: self.eps_min,
            eps_max: self.eps_max,
            eps_points: self.eps_points,
            sectors: self.sectors.clone(),
            levels: self.levels,
            n_max: self.n_max,
            dilation: self.dilation,
            quad_order: self.quad_order,
            sp_cutoff: self.sp_cutoff,
            mode: self.mode,
            nystrom_points: self.nystrom_points,
            n_cut: self.n_cut,
            m_cut: self.m_cut,
            parameter: self.parameter,
            values: self.values.clone(),
            output: self.output.clone(),
            jobs: self.jobs,
        }
    }
}

/// One JSON object on stderr describing the failure.
fn report_error(err: &Error, code: i32) {
    let line = json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": code,
        }
    });
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let cfg = base.overridden_by(cli.overrides());
    if cfg.jobs == Some(0) {
        return Err(Error::Config("jobs must be positive".into()));
    }
    Ok(cfg)
}

/// Runs the CLI on the given arguments and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = e.print();
            } else {
                let _ = writeln!(std::io::stderr(), "{e}");
                report_error(&Error::Config(e.kind().to_string()), code);
            }
            return code;
        }
    };
    let (cfg, plan) = match resolve(&cli).and_then(|cfg| Plan::from_config(cli.command, &cfg).map(|p| (cfg, p))) {
        Ok(v) => v,
        Err(e) => {
            report_error(&e, EXIT_USAGE);
            return EXIT_USAGE;
        }
    };

    let output = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| plan.execute())),
        None => plan.execute(),
    };
    let output = match output {
        Ok(o) => o,
        Err(e) => {
            if let Some(path) = &cfg.output {
                let _ = std::fs::remove_file(path);
                let _ = std::fs::remove_file(sidecar_path(path));
            }
            report_error(&e, EXIT_NUMERIC);
            return EXIT_NUMERIC;
        }
    };

    for note in &output.notes {
        let _ = writeln!(std::io::stderr(), "note: {note}");
    }
    let written = output.table.to_csv().and_then(|bytes| match &cfg.output {
        Some(path) => {
            write_atomic(path, &bytes)?;
            let meta = json!({
                "tool": "qdent",
                "version": env!("CARGO_PKG_VERSION"),
                "command": cli.command,
                "config": cfg,
                "rows": output.table.rows.len(),
                "notes": output.notes,
                "violation": output.violation.as_ref().map(|e| e.to_string()),
            });
            let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Data(e.to_string()))?;
            write_atomic(&sidecar_path(path), format!("{text}\n").as_bytes())
        }
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Error::Data(format!("stdout: {e}"))),
    });
    if let Err(e) = written {
        report_error(&e, EXIT_NUMERIC);
        return EXIT_NUMERIC;
    }
    if let Some(v) = output.violation {
        report_error(&v, EXIT_NUMERIC);
        return EXIT_NUMERIC;
    }
    EXIT_OK
}
