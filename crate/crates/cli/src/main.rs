use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ymbubble_cli::commands::{self, Format, EXIT_ERROR};
use ymbubble_cli::config::{ConnectionSpec, RunConfig};

/// Numerical checks for Yang–Mills bubbling obstructions.
///
/// Exit status: 0 compatible / all checks pass, 2 excluded, 3 a check failed,
/// 1 error. Thread count follows RAYON_NUM_THREADS.
#[derive(Parser)]
#[command(name = "ymbubble", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    sphere_order: Option<usize>,
    #[arg(long, global = true)]
    radial_order: Option<usize>,
    #[arg(long, global = true)]
    tail_r0: Option<f64>,
    /// Also evaluate with doubled quadrature orders and report the change.
    #[arg(long, global = true)]
    refine: bool,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    /// Include wall times (makes output nondeterministic).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the built-in verification suite.
    Verify,
    /// Conformal Pohozaev tensor on a ball.
    Pohozaev {
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        connection: Option<String>,
        #[arg(long, value_delimiter = ',')]
        radius: Vec<f64>,
    },
    /// Bubbling obstruction for a limit/bubble pair on a metric.
    Obstruction {
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        limit: Option<String>,
        #[arg(long)]
        bubble: Option<String>,
    },
    /// Flat-space sign test for a chirality pair, e.g. `+,-`.
    Branch {
        #[arg(long, allow_hyphen_values = true)]
        chirality: Option<String>,
    },
    /// Exclusion scan for the anti-self-dual family on CP².
    Cp2 {
        #[arg(long, value_delimiter = ',')]
        t_grid: Vec<f64>,
    },
    /// Fit the annulus model to a neck error form.
    AnnulusFit {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Samples JSON file, or `two-pole[:<rho>[:<distance>]]`.
        #[arg(long)]
        input: Option<String>,
    },
    /// Neck residual and energy across scales.
    Neck {
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long)]
        limit: Option<String>,
        #[arg(long)]
        bubble: Option<String>,
    },
}

fn conn(s: &Option<String>) -> Result<Option<ConnectionSpec>> {
    s.as_deref().map(ConnectionSpec::parse).transpose()
}

fn build_config(cli: &Cli) -> Result<(&'static str, RunConfig)> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    cfg.sphere_order = c.sphere_order.or(cfg.sphere_order);
    cfg.radial_order = c.radial_order.or(cfg.radial_order);
    cfg.tail_r0 = c.tail_r0.or(cfg.tail_r0);
    cfg.tolerance = c.tolerance.or(cfg.tolerance);
    cfg.refine |= c.refine;
    cfg.timings |= c.timings;
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    let name = match &cli.command {
        Cmd::Verify => "verify",
        Cmd::Pohozaev { metric, connection, radius } => {
            cfg.metric = metric.clone().or(cfg.metric);
            if let Some(s) = conn(connection)? {
                cfg.connection = Some(s);
            }
            if !radius.is_empty() {
                cfg.radii = radius.clone();
            }
            "pohozaev"
        }
        Cmd::Obstruction { metric, limit, bubble } => {
            cfg.metric = metric.clone().or(cfg.metric);
            if let Some(s) = conn(limit)? {
                cfg.limit = Some(s);
            }
            if let Some(s) = conn(bubble)? {
                cfg.bubble = Some(s);
            }
            "obstruction"
        }
        Cmd::Branch { chirality } => {
            cfg.chirality = chirality.clone().or(cfg.chirality);
            "branch"
        }
        Cmd::Cp2 { t_grid } => {
            if !t_grid.is_empty() {
                cfg.t_grid = t_grid.clone();
            }
            "cp2"
        }
        Cmd::AnnulusFit { lambda, alpha, input } => {
            cfg.lambda = lambda.or(cfg.lambda);
            cfg.alpha = alpha.or(cfg.alpha);
            cfg.input = input.clone().or(cfg.input);
            "annulus-fit"
        }
        Cmd::Neck { lambdas, limit, bubble } => {
            if !lambdas.is_empty() {
                cfg.lambdas = lambdas.clone();
            }
            if let Some(s) = conn(limit)? {
                cfg.limit = Some(s);
            }
            if let Some(s) = conn(bubble)? {
                cfg.bubble = Some(s);
            }
            "neck"
        }
    };
    if let Some(cmd) = &cfg.command {
        if cmd != name {
            anyhow::bail!("config is for '{cmd}', invoked '{name}'");
        }
    }
    Ok((name, cfg))
}

fn run(cli: &Cli) -> Result<i32> {
    let (name, cfg) = build_config(cli)?;
    let format = if cli.common.csv { Format::Csv } else { Format::Json };
    let outcome = commands::run(name, &cfg, format)?;
    match &cfg.out {
        Some(p) => std::fs::write(p, &outcome.body).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
