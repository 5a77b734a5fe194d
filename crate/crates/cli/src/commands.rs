//! Subcommands: each turns a RunConfig into a serialized report and an exit code.
//!
//! Exit codes: 0 compatible or all checks passed, 2 excluded, 3 some check
//! failed, 1 error (set by the binary).

use anyhow::{bail, Context, Result};
use serde::Serialize;
use ymbubble::annulus::{
    decompose_neck_fn, decompose_neck_form, default_annulus_points, NeckDecomposition, NeckSamples, TwoPoleNeck,
};
use ymbubble::gauge::Connection;
use ymbubble::obstruction::{
    assemble_report, cp2_default_points, cp2_default_t_grid, cp2_exclusion_check, weyl_quadrature, BubblingConfig,
    Cp2Verdict, ObstructionReport, Verdict,
};
use ymbubble::pohozaev::{neck_scaling_diagnostic, pohozaev_tensor, NeckRow, NeckRules, PohozaevResult, PohozaevRules};
use ymbubble::quadrature::SphereOrders;
use ymbubble::Exec;

use crate::config::{parse_chirality_pair, ConnectionSpec, RunConfig};
use crate::suite::{branch_report, run_verify_suite, SuiteReport, SuiteSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_EXCLUDED: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub body: String,
    pub exit_code: i32,
}

fn render<T: Serialize>(value: &T, csv: impl FnOnce() -> String, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            s
        }
        Format::Csv => csv(),
    })
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Compatible => EXIT_OK,
        Verdict::Excluded => EXIT_EXCLUDED,
    }
}

fn connection(spec: &Option<ConnectionSpec>, what: &str, default: Option<&str>) -> Result<Connection> {
    match (spec, default) {
        (Some(s), _) => s.resolve(),
        (None, Some(d)) => ConnectionSpec::Shorthand(d.into()).resolve(),
        (None, None) => bail!("missing {what}"),
    }
}

pub fn run(command: &str, cfg: &RunConfig, format: Format) -> Result<Outcome> {
    cfg.validate()?;
    match command {
        "verify" => verify(cfg, format),
        "pohozaev" => pohozaev(cfg, format),
        "obstruction" => obstruction(cfg, format),
        "branch" => branch(cfg, format),
        "cp2" => cp2(cfg, format),
        "annulus-fit" => annulus_fit(cfg, format),
        "neck" => neck(cfg, format),
        _ => bail!("unknown command '{command}'"),
    }
}

pub fn verify(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let settings = SuiteSettings { seed: cfg.seed, tolerance: cfg.tolerance, timings: cfg.timings, exec: Exec::Parallel };
    let report: SuiteReport = run_verify_suite(&settings);
    let body = render(&report, || report.to_csv(), format)?;
    Ok(Outcome { body, exit_code: if report.passed { EXIT_OK } else { EXIT_FAILED } })
}

#[derive(Debug, Clone, Serialize)]
pub struct PohozaevReport {
    pub metric: String,
    pub connection: Connection,
    pub rules: PohozaevRules,
    pub results: Vec<PohozaevResult>,
    /// max |P − P_doubled| per radius, with --refine.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_delta: Option<Vec<f64>>,
}

pub fn pohozaev(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let metric = cfg.metric_field()?;
    let a = connection(&cfg.connection, "connection", None)?.on_metric(&metric);
    let rules = cfg.pohozaev_rules();
    let radii = if cfg.radii.is_empty() { vec![0.5] } else { cfg.radii.clone() };
    let mut results = Vec::with_capacity(radii.len());
    for &r in &radii {
        results.push(pohozaev_tensor(&a, &metric, r, &rules, Exec::Parallel)?);
    }
    let refinement_delta = if cfg.refine {
        let fine = rules.doubled();
        let mut d = Vec::with_capacity(radii.len());
        for (res, &r) in results.iter().zip(&radii) {
            d.push((pohozaev_tensor(&a, &metric, r, &fine, Exec::Parallel)?.p - res.p).amax());
        }
        Some(d)
    } else {
        None
    };
    let report = PohozaevReport { metric: metric.id(), connection: a, rules, results, refinement_delta };
    let csv = || {
        let mut s = String::from("radius,trace,skew,total\n");
        for r in &report.results {
            s.push_str(&format!("{:e},{:e},{:e},{:e}\n", r.radius, r.conf_residual.trace, r.conf_residual.skew, r.conf_residual.total()));
        }
        s
    };
    Ok(Outcome { body: render(&report, csv, format)?, exit_code: EXIT_OK })
}

fn bubbling_config(cfg: &RunConfig) -> Result<BubblingConfig> {
    let metric = cfg.metric_field()?;
    let limit = connection(&cfg.limit, "limit connection", None)?;
    let bubble = connection(&cfg.bubble, "bubble connection", None)?;
    let mut b = BubblingConfig::new(metric, limit, bubble);
    b.quadrature = cfg.r4_quadrature(weyl_quadrature());
    if let Some(t) = cfg.tolerance {
        b.tolerance = t;
    }
    b.validate()?;
    Ok(b)
}

fn report_csv(r: &ObstructionReport) -> String {
    let mut s = String::from("i,j,p,pairing_term,weyl_term\n");
    for i in 0..4 {
        for j in 0..4 {
            s.push_str(&format!("{i},{j},{:e},{:e},{:e}\n", r.p[(i, j)], r.pairing_term[(i, j)], r.weyl_term[(i, j)]));
        }
    }
    s
}

pub fn obstruction(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let report = assemble_report(&bubbling_config(cfg)?, Exec::Parallel)?;
    Ok(Outcome { body: render(&report, || report_csv(&report), format)?, exit_code: verdict_code(report.verdict) })
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub limit_chirality: i32,
    pub bubble_chirality: i32,
    pub report: ObstructionReport,
}

pub fn branch(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let pair = cfg.chirality.as_deref().context("missing --chirality <+|->,<+|->")?;
    let (a, b) = parse_chirality_pair(pair)?;
    let report = BranchReport { limit_chirality: a, bubble_chirality: b, report: branch_report(a, b, Exec::Parallel)? };
    let code = verdict_code(report.report.verdict);
    Ok(Outcome { body: render(&report, || report_csv(&report.report), format)?, exit_code: code })
}

#[derive(Debug, Clone, Serialize)]
pub struct Cp2Report {
    pub grid: Vec<Cp2Verdict>,
    pub verdict: Verdict,
}

pub fn cp2(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let ts = if cfg.t_grid.is_empty() { cp2_default_t_grid() } else { cfg.t_grid.clone() };
    let pts = cp2_default_points();
    let grid = ts.iter().map(|&t| cp2_exclusion_check(t, &pts)).collect::<ymbubble::Result<Vec<_>>>()?;
    let verdict = if grid.iter().all(|v| v.verdict == Verdict::Excluded) { Verdict::Excluded } else { Verdict::Compatible };
    let report = Cp2Report { grid, verdict };
    let csv = || {
        let mut s = String::from("t,z1,z2,z3,z4,beta,ratio_error,min_abs_sum,excluded\n");
        for v in &report.grid {
            for p in &v.samples {
                s.push_str(&format!(
                    "{},{},{},{},{},{:e},{:e},{:e},{}\n",
                    p.t, p.z[0], p.z[1], p.z[2], p.z[3], p.beta, p.ratio_error, p.min_abs_sum, p.excluded
                ));
            }
        }
        s
    };
    Ok(Outcome { body: render(&report, csv, format)?, exit_code: verdict_code(verdict) })
}

/// `two-pole[:<ρ>[:<distance>]]`: the neck error form of a two-pole 't Hooft
/// instanton with far pole of weight ρ² at distance along x¹.
fn catalog_neck(spec: &str, lambda: f64, alpha: f64) -> Result<Option<NeckDecomposition>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts[0] != "two-pole" {
        return Ok(None);
    }
    let num = |k: usize, d: f64| -> Result<f64> {
        parts.get(k).map(|v| v.parse::<f64>().with_context(|| format!("bad number in '{spec}'"))).unwrap_or(Ok(d))
    };
    let neck = TwoPoleNeck::new(lambda, num(1, 1.0)?, [num(2, 3.0)?, 0.0, 0.0, 0.0]);
    let pts = default_annulus_points(lambda);
    Ok(Some(decompose_neck_fn(&|x| neck.error_form(x), lambda, alpha, &pts, Exec::Parallel)?))
}

pub fn annulus_fit(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let lambda = cfg.lambda.context("missing --lambda")?;
    let alpha = cfg.alpha.unwrap_or(2.5);
    let input = cfg.input.as_deref().unwrap_or("two-pole");
    let d = match catalog_neck(input, lambda, alpha)? {
        Some(d) => d,
        None => {
            let body = std::fs::read_to_string(input).with_context(|| format!("reading {input}"))?;
            let mut samples: NeckSamples = serde_json::from_str(&body).with_context(|| format!("samples in {input}"))?;
            samples.lambda = lambda;
            decompose_neck_form(&samples, alpha)?
        }
    };
    let csv = || {
        let mut s = String::from("r,omega,residual,residual_ratio,coefficient_ratio\n");
        for r in &d.rows {
            s.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.r, r.omega, r.residual, r.residual_ratio, r.coefficient_ratio));
        }
        s
    };
    Ok(Outcome { body: render(&d, csv, format)?, exit_code: EXIT_OK })
}

#[derive(Debug, Clone, Serialize)]
pub struct NeckReport {
    pub limit: Connection,
    pub bubble: Connection,
    pub rows: Vec<NeckRow>,
    /// Whether the sup-residual decreases strictly with λ.
    pub monotone: bool,
}

pub fn neck(cfg: &RunConfig, format: Format) -> Result<Outcome> {
    let limit = connection(&cfg.limit, "limit", Some("bpst:+"))?;
    let bubble = connection(&cfg.bubble, "bubble", Some("bpst-singular:+"))?;
    let lambdas = if cfg.lambdas.is_empty() { vec![1e-2, 1e-3, 1e-4] } else { cfg.lambdas.clone() };
    let mut rules = NeckRules::default();
    if let Some(n) = cfg.sphere_order {
        rules.sphere = SphereOrders::uniform(n);
    }
    if let Some(n) = cfg.radial_order {
        rules.radial = n;
    }
    let rows = neck_scaling_diagnostic(&limit, &bubble, &lambdas, &rules, Exec::Parallel)?;
    let monotone = rows.windows(2).all(|w| w[1].residual_sup < w[0].residual_sup);
    let report = NeckReport { limit, bubble, rows, monotone };
    let csv = || {
        let mut s = String::from("lambda,residual_sup,neck_energy\n");
        for r in &report.rows {
            s.push_str(&format!("{:e},{:e},{:e}\n", r.lambda, r.residual_sup, r.neck_energy));
        }
        s
    };
    Ok(Outcome { body: render(&report, csv, format)?, exit_code: EXIT_OK })
}
