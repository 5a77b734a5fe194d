//! Run configuration: one JSON document, every field overridable by a flag.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ymbubble::gauge::{Connection, InstantonSpec};
use ymbubble::geometry::MetricField;
use ymbubble::pohozaev::PohozaevRules;
use ymbubble::quadrature::{QuadratureConfig, SphereOrders};

/// A connection given either as a catalog shorthand or as a full JSON value.
///
/// Shorthands: `zero`, `bpst:<sign>[:<scale>]`, `bpst-singular:<sign>[:<scale>]`,
/// `groisser:<t>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConnectionSpec {
    Shorthand(String),
    Full(Connection),
    Instanton(InstantonSpec),
}

impl ConnectionSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            return serde_json::from_str(t).context("connection JSON");
        }
        if let Some(path) = t.strip_prefix('@') {
            let body = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            return serde_json::from_str(&body).with_context(|| format!("connection JSON in {path}"));
        }
        Ok(Self::Shorthand(t.to_string()))
    }

    pub fn resolve(&self) -> Result<Connection> {
        match self {
            Self::Full(c) => Ok(c.clone()),
            Self::Instanton(spec) => {
                spec.validate()?;
                Ok(Connection::Instanton(*spec))
            }
            Self::Shorthand(s) => shorthand(s),
        }
    }
}

fn sign_of(s: &str) -> Result<i32> {
    match s {
        "+" | "+1" | "1" | "sd" => Ok(1),
        "-" | "-1" | "asd" => Ok(-1),
        _ => bail!("chirality must be + or -, got '{s}'"),
    }
}

fn shorthand(s: &str) -> Result<Connection> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |k: usize, default: f64| -> Result<f64> {
        match parts.get(k) {
            Some(v) => v.parse().with_context(|| format!("bad number '{v}' in '{s}'")),
            None => Ok(default),
        }
    };
    let c = match parts[0] {
        "zero" => Connection::Zero,
        "bpst" | "bpst-singular" => {
            let sign = sign_of(parts.get(1).copied().unwrap_or("+"))?;
            let scale = num(2, 1.0)?;
            let spec = if parts[0] == "bpst" {
                InstantonSpec::bpst(sign, scale, [0.0; 4])
            } else {
                InstantonSpec::bpst_singular(sign, scale, [0.0; 4])
            };
            Connection::bpst(spec)?
        }
        "groisser" => {
            let spec = InstantonSpec::groisser(num(1, 0.0)?);
            spec.validate()?;
            Connection::Instanton(spec)
        }
        _ => bail!("unknown connection '{s}'"),
    };
    if parts.len() > 3 {
        bail!("too many fields in '{s}'");
    }
    Ok(c)
}

/// Parses "+,-" into a pair of signs.
pub fn parse_chirality_pair(s: &str) -> Result<(i32, i32)> {
    let (a, b) = s.split_once(',').with_context(|| format!("expected <sign>,<sign>, got '{s}'"))?;
    Ok((sign_of(a.trim())?, sign_of(b.trim())?))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub metric: Option<String>,
    pub connection: Option<ConnectionSpec>,
    pub limit: Option<ConnectionSpec>,
    pub bubble: Option<ConnectionSpec>,
    pub radii: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    /// Samples JSON path or a catalog neck such as `two-pole:1:3`, for the annulus fitter.
    pub input: Option<String>,
    pub chirality: Option<String>,
    pub sphere_order: Option<usize>,
    pub radial_order: Option<usize>,
    pub tail_r0: Option<f64>,
    pub tolerance: Option<f64>,
    pub refine: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub timings: bool,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&body).with_context(|| format!("config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                bail!("tolerance must be positive, got {t}");
            }
        }
        if self.sphere_order == Some(0) || self.radial_order == Some(0) {
            bail!("quadrature orders must be positive");
        }
        if let Some(r0) = self.tail_r0 {
            if !(r0 > 0.0) {
                bail!("tail_r0 must be positive");
            }
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            bail!("radii must be positive");
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            bail!("lambdas must lie in (0, 1)");
        }
        for spec in [&self.connection, &self.limit, &self.bubble].into_iter().flatten() {
            spec.resolve()?;
        }
        if let Some(m) = &self.metric {
            MetricField::from_id(m)?;
        }
        Ok(())
    }

    pub fn metric_field(&self) -> Result<MetricField> {
        let id = self.metric.as_deref().context("missing metric id")?;
        Ok(MetricField::from_id(id)?)
    }

    pub fn pohozaev_rules(&self) -> PohozaevRules {
        let mut r = PohozaevRules::default();
        if let Some(n) = self.sphere_order {
            r.sphere = SphereOrders::uniform(n);
        }
        if let Some(n) = self.radial_order {
            r.radial = n;
        }
        r
    }

    /// Overrides on top of a base R⁴ quadrature.
    pub fn r4_quadrature(&self, base: QuadratureConfig) -> QuadratureConfig {
        let mut q = base;
        if let Some(n) = self.sphere_order {
            q.sphere = SphereOrders::uniform(n);
        }
        if let Some(n) = self.radial_order {
            q.radial = n;
            q.tail = n;
        }
        if let Some(r0) = self.tail_r0 {
            q.tail_r0 = r0;
        }
        q
    }
}
