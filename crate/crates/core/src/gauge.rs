//! Connections and their curvature: the instanton catalog, rescaling,
//! inversion, chart pullbacks and constant gauge rotations.
//!
//! A connection is a tree of evaluators. Leaves with a potential provide an
//! exact 1-jet (A, ∂A), and composite nodes propagate jets by the chain rule,
//! so F = dA + [A∧A] is available to rounding error everywhere. Curvature-only
//! leaves (the Groisser family, formal sums) skip the potential.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{dx2, sd_asd_split, GForm1, GForm2, MetricAt};
use crate::fd;
use crate::geometry::{complex_structure, fubini_study_affine, MetricField};
use crate::lie::{bracket, LieElement};
use crate::poly::Poly;

/// Step for curvature by central differences of the potential.
pub const FD_CURVATURE_STEP: f64 = 1e-4;

/// Normalization of the 't Hooft potential in the q-basis.
const THOOFT_COUPLING: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// 't Hooft symbols η^±_a as antisymmetric matrices; η⁺ is self-dual.
pub fn thooft_symbols(chirality: i32) -> [Matrix4<f64>; 3] {
    let s = if chirality >= 0 { 1.0 } else { -1.0 };
    [dx2(1, 2) + dx2(0, 3) * s, dx2(2, 0) + dx2(1, 3) * s, dx2(0, 1) + dx2(2, 3) * s]
}

/// A and its first partials: da[k] = ∂_k A.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub a: GForm1,
    pub da: [GForm1; 4],
}

impl Jet {
    pub fn zero() -> Self {
        Self { a: GForm1::zero(), da: [GForm1::zero(); 4] }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { a: self.a + o.a, da: [0, 1, 2, 3].map(|k| self.da[k] + o.da[k]) }
    }

    /// F_ij = ∂_i A_j − ∂_j A_i + [A_i, A_j].
    pub fn curvature(&self) -> GForm2 {
        let mut f = GForm2::zero();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let mut v = self.da[i].component(j) - self.da[j].component(i);
                v += bracket(&self.a.component(i), &self.a.component(j));
                f.set_component(i, j, &v);
            }
        }
        f
    }

    fn rotate(&self, g: &Matrix3<f64>) -> Jet {
        Jet { a: self.a.apply_lie(g), da: self.da.map(|d| d.apply_lie(g)) }
    }

    /// Pullback by a map with Jacobian j and Jacobian derivatives dj[k] = ∂_k j,
    /// given the jet at the image point.
    fn pullback(&self, j: &Matrix4<f64>, dj: &[Matrix4<f64>; 4]) -> Jet {
        let a = self.a.pullback(j);
        let mut da = [GForm1::zero(); 4];
        for (k, out) in da.iter_mut().enumerate() {
            for c in 0..3 {
                let mut chain = Vector4::zeros();
                for m in 0..4 {
                    chain += self.da[m].parts[c] * j[(m, k)];
                }
                out.parts[c] = j.transpose() * chain + dj[k].transpose() * self.a.parts[c];
            }
        }
        Jet { a, da }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstantonFamily {
    #[default]
    Bpst,
    Groisser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BpstGauge {
    /// Potential smooth at the center, decaying like |x|⁻¹.
    #[default]
    Regular,
    /// Potential singular at the center, decaying like |x|⁻³.
    Singular,
}

fn default_sign() -> i32 {
    1
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantonSpec {
    #[serde(default)]
    pub family: InstantonFamily,
    /// +1 self-dual, −1 anti-self-dual.
    #[serde(default = "default_sign")]
    pub sign: i32,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub center: [f64; 4],
    /// Groisser modulus in [0, 1).
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub gauge: BpstGauge,
}

impl InstantonSpec {
    pub fn bpst(sign: i32, scale: f64, center: [f64; 4]) -> Self {
        Self { family: InstantonFamily::Bpst, sign, scale, center, t: 0.0, gauge: BpstGauge::Regular }
    }

    pub fn bpst_singular(sign: i32, scale: f64, center: [f64; 4]) -> Self {
        Self { gauge: BpstGauge::Singular, ..Self::bpst(sign, scale, center) }
    }

    pub fn groisser(t: f64) -> Self {
        Self { family: InstantonFamily::Groisser, sign: 1, scale: 1.0, center: [0.0; 4], t, gauge: BpstGauge::Regular }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::InvalidParameter(format!("instanton sign {}", self.sign)));
        }
        match self.family {
            InstantonFamily::Bpst => {
                if !(self.scale > 0.0 && self.scale.is_finite()) || !self.center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidParameter(format!("BPST scale {} / center", self.scale)));
                }
            }
            InstantonFamily::Groisser => {
                if !(0.0..1.0).contains(&self.t) {
                    return Err(Error::InvalidParameter(format!("Groisser t = {} outside [0, 1)", self.t)));
                }
            }
        }
        Ok(())
    }

    fn center(&self) -> Vector4<f64> {
        Vector4::from(self.center)
    }

    /// The 't Hooft log-potential realizing this BPST instanton.
    pub fn thooft(&self) -> ThooftPotential {
        let (l, c) = (self.scale, self.center);
        match self.gauge {
            BpstGauge::Regular => ThooftPotential {
                chirality: self.sign,
                coupling: THOOFT_COUPLING,
                constant: l * l,
                poles: vec![Pole { weight: 1.0, center: c, power: 2 }],
            },
            BpstGauge::Singular => ThooftPotential {
                chirality: -self.sign,
                coupling: -THOOFT_COUPLING,
                constant: 1.0,
                poles: vec![Pole { weight: l * l, center: c, power: -2 }],
            },
        }
    }
}

/// Closed-form regular-gauge BPST curvature −ρ(x) η^±_a ⊗ q_a / √2 with
/// ρ = 4λ²/(λ² + |x − c|²)².
pub fn bpst_curvature_regular(spec: &InstantonSpec, x: &Vector4<f64>) -> GForm2 {
    let l2 = spec.scale * spec.scale;
    let rho = 4.0 * l2 / (l2 + (x - spec.center()).norm_squared()).powi(2);
    GForm2 { parts: thooft_symbols(spec.sign).map(|e| e * (-rho / SQRT_2)) }
}

/// Term w·|x − c|^p of a 't Hooft function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub weight: f64,
    pub center: [f64; 4],
    pub power: i32,
}

fn default_coupling() -> f64 {
    THOOFT_COUPLING
}

/// A^a_μ = κ η^χ_aμν ∂_ν log φ with φ = constant + Σ w|x − c|^p. κ = 1/√2
/// for the regular form; κ = −1/√2 with φ harmonic gives the singular form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThooftPotential {
    pub chirality: i32,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    pub constant: f64,
    pub poles: Vec<Pole>,
}

impl ThooftPotential {
    /// (φ, ∇φ, ∇²φ).
    fn phi_jet(&self, x: &Vector4<f64>) -> Result<(f64, Vector4<f64>, Matrix4<f64>)> {
        let mut phi = self.constant;
        let mut g = Vector4::zeros();
        let mut hess = Matrix4::zeros();
        for p in &self.poles {
            let u = x - Vector4::from(p.center);
            let r2 = u.norm_squared();
            if p.power < 0 && r2 == 0.0 {
                return Err(Error::SingularPoint);
            }
            let s = p.power as f64;
            let rp = r2.powf(0.5 * s);
            phi += p.weight * rp;
            if r2 > 0.0 {
                g += u * (p.weight * s * rp / r2);
                hess += Matrix4::identity() * (p.weight * s * rp / r2)
                    + u * u.transpose() * (p.weight * s * (s - 2.0) * rp / (r2 * r2));
            } else if p.power == 2 {
                hess += Matrix4::identity() * (2.0 * p.weight);
            }
        }
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::SingularPoint);
        }
        Ok((phi, g, hess))
    }

    pub fn jet(&self, x: &Vector4<f64>) -> Result<Jet> {
        let (phi, g, h) = self.phi_jet(x)?;
        let lg = g / phi;
        let lh = h / phi - g * g.transpose() / (phi * phi);
        let eta = thooft_symbols(self.chirality);
        let mut jet = Jet::zero();
        for a in 0..3 {
            jet.a.parts[a] = eta[a] * lg * self.coupling;
            for k in 0..4 {
                jet.da[k].parts[a] = eta[a] * lh.column(k) * self.coupling;
            }
        }
        Ok(jet)
    }
}

/// One polynomial coefficient p(x) of dx^μ ⊗ q_a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialEntry {
    pub lie: usize,
    pub mu: usize,
    pub poly: Poly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPotential {
    pub entries: Vec<PotentialEntry>,
}

impl PolynomialPotential {
    pub fn jet(&self, x: &Vector4<f64>) -> Result<Jet> {
        let mut jet = Jet::zero();
        for e in &self.entries {
            if e.lie > 2 || e.mu > 3 {
                return Err(Error::InvalidParameter("potential entry index out of range".into()));
            }
            jet.a.parts[e.lie][e.mu] += e.poly.eval(x);
            for k in 0..4 {
                jet.da[k].parts[e.lie][e.mu] += e.poly.partial(k).eval(x);
            }
        }
        Ok(jet)
    }
}

/// Curvature of the Groisser instanton in affine coordinates of CP²:
/// 2(1 − t²)/(D − t²)² (−D² ω ⊗ 𝐢 + t (Re dz¹∧dz² ⊗ 𝐣 + Im dz¹∧dz² ⊗ 𝐤)).
pub fn groisser_curvature(t: f64, x: &Vector4<f64>) -> Result<GForm2> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("Groisser t = {t} outside [0, 1)")));
    }
    let d = 1.0 + x.norm_squared();
    let omega = complex_structure().transpose() * fubini_study_affine(x);
    let re = dx2(0, 2) - dx2(1, 3);
    let im = dx2(0, 3) + dx2(1, 2);
    let c = 2.0 * (1.0 - t * t) / (d - t * t).powi(2);
    let f = GForm2::from_real(&(omega * (-d * d)), &LieElement::from_quaternion([1.0, 0.0, 0.0]))
        + GForm2::from_real(&(re * t), &LieElement::from_quaternion([0.0, 1.0, 0.0]))
        + GForm2::from_real(&(im * t), &LieElement::from_quaternion([0.0, 0.0, 1.0]));
    Ok(f * c)
}

/// β = t / (2√D).
pub fn groisser_beta(t: f64, x: &Vector4<f64>) -> f64 {
    t / (2.0 * (1.0 + x.norm_squared()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Connection {
    Zero,
    Instanton(InstantonSpec),
    Thooft(ThooftPotential),
    Polynomial(PolynomialPotential),
    /// Curvature-level combination Σ c_k F_k; not the curvature of a potential.
    Formal { terms: Vec<(f64, Connection)> },
    /// Sum of potentials.
    Sum { terms: Vec<Connection> },
    /// λ A(λx).
    Rescaled { inner: Box<Connection>, lambda: f64 },
    /// Pullback by x ↦ x/|x|².
    Inverted { inner: Box<Connection> },
    /// Constant gauge rotation acting on the Lie coefficients.
    Rotated { inner: Box<Connection>, rotation: Matrix3<f64> },
    /// Pullback from the model chart of `metric` to its own chart.
    Pullback { inner: Box<Connection>, metric: MetricField },
}

/// x ↦ x/|x|² and its Jacobian (I − 2x̂x̂ᵀ)/|x|².
pub fn inversion(x: &Vector4<f64>) -> Result<(Vector4<f64>, Matrix4<f64>)> {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    Ok((x / r2, (Matrix4::identity() - x * x.transpose() * (2.0 / r2)) / r2))
}

fn inversion_jacobian_derivatives(x: &Vector4<f64>) -> [Matrix4<f64>; 4] {
    let r2 = x.norm_squared();
    let r4 = r2 * r2;
    [0, 1, 2, 3].map(|k| {
        Matrix4::from_fn(|i, j| {
            let dik = if i == k { 1.0 } else { 0.0 };
            let djk = if j == k { 1.0 } else { 0.0 };
            let dij = if i == j { 1.0 } else { 0.0 };
            -2.0 * dij * x[k] / r4 - 2.0 * (dik * x[j] + djk * x[i]) / r4 + 8.0 * x[i] * x[j] * x[k] / (r4 * r2)
        })
    })
}

impl Connection {
    pub fn bpst(spec: InstantonSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::Instanton(spec))
    }

    /// The flat connection (1/√2) η ∂ log|x − c|², gauge-equivalent to 0.
    pub fn pure_gauge(center: [f64; 4]) -> Self {
        Self::Thooft(ThooftPotential { chirality: 1, coupling: THOOFT_COUPLING, constant: 0.0, poles: vec![Pole { weight: 1.0, center, power: 2 }] })
    }

    pub fn rescale(self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("rescale factor {lambda}")));
        }
        if self == Self::Zero {
            return Ok(Self::Zero);
        }
        Ok(Self::Rescaled { inner: Box::new(self), lambda })
    }

    pub fn inverted(self) -> Self {
        Self::Inverted { inner: Box::new(self) }
    }

    pub fn rotated(self, rotation: Matrix3<f64>) -> Self {
        Self::Rotated { inner: Box::new(self), rotation }
    }

    /// Sum of potentials; zero terms are dropped.
    pub fn sum(terms: Vec<Connection>) -> Self {
        let mut terms: Vec<Connection> = terms.into_iter().filter(|t| *t != Self::Zero).collect();
        match terms.len() {
            0 => Self::Zero,
            1 => terms.pop().unwrap_or(Self::Zero),
            _ => Self::Sum { terms },
        }
    }

    /// Expresses a connection written in model coordinates in the chart of m.
    pub fn on_metric(self, m: &MetricField) -> Self {
        match m {
            MetricField::RoundSphere { chart: crate::geometry::SphereChart::Normal, .. }
            | MetricField::FubiniStudy { chart: crate::geometry::FsChart::Normal } => {
                Self::Pullback { inner: Box::new(self), metric: m.clone() }
            }
            _ => self,
        }
    }

    /// Exact jet of the potential.
    pub fn jet(&self, x: &Vector4<f64>) -> Result<Jet> {
        match self {
            Self::Zero => Ok(Jet::zero()),
            Self::Instanton(spec) => match spec.family {
                InstantonFamily::Bpst => spec.thooft().jet(x),
                InstantonFamily::Groisser => Err(Error::NoPotential("Groisser instanton".into())),
            },
            Self::Thooft(t) => t.jet(x),
            Self::Polynomial(p) => p.jet(x),
            Self::Formal { .. } => Err(Error::NoPotential("formal curvature field".into())),
            Self::Sum { terms } => {
                let mut j = Jet::zero();
                for t in terms {
                    j = j.add(&t.jet(x)?);
                }
                Ok(j)
            }
            Self::Rescaled { inner, lambda } => {
                let j = inner.jet(&(x * *lambda))?;
                Ok(Jet { a: j.a * *lambda, da: j.da.map(|d| d * (lambda * lambda)) })
            }
            Self::Inverted { inner } => {
                let (y, jac) = inversion(x)?;
                Ok(inner.jet(&y)?.pullback(&jac, &inversion_jacobian_derivatives(x)))
            }
            Self::Rotated { inner, rotation } => Ok(inner.jet(x)?.rotate(rotation)),
            Self::Pullback { inner, metric } => {
                let (z, jac) = metric.to_model(x)?;
                let dj = fd::gradient(&|p: &Vector4<f64>| Ok(metric.to_model(p)?.1), x, 1e-3)?;
                Ok(inner.jet(&z)?.pullback(&jac, &dj))
            }
        }
    }

    pub fn potential(&self, x: &Vector4<f64>) -> Result<GForm1> {
        Ok(self.jet(x)?.a)
    }

    /// Curvature from closed forms where available, otherwise from the exact
    /// jet. Transforming nodes act on the inner curvature directly.
    pub fn curvature(&self, x: &Vector4<f64>) -> Result<GForm2> {
        match self {
            Self::Zero => Ok(GForm2::zero()),
            Self::Instanton(spec) => match (spec.family, spec.gauge) {
                (InstantonFamily::Groisser, _) => groisser_curvature(spec.t, x),
                (InstantonFamily::Bpst, BpstGauge::Regular) => Ok(bpst_curvature_regular(spec, x)),
                (InstantonFamily::Bpst, BpstGauge::Singular) => Ok(spec.thooft().jet(x)?.curvature()),
            },
            Self::Formal { terms } => {
                let mut f = GForm2::zero();
                for (c, t) in terms {
                    f = f + t.curvature(x)? * *c;
                }
                Ok(f)
            }
            Self::Rescaled { inner, lambda } => Ok(inner.curvature(&(x * *lambda))? * (lambda * lambda)),
            Self::Inverted { inner } => {
                let (y, jac) = inversion(x)?;
                Ok(inner.curvature(&y)?.pullback(&jac))
            }
            Self::Rotated { inner, rotation } => Ok(inner.curvature(x)?.apply_lie(rotation)),
            Self::Pullback { inner, metric } => {
                let (z, jac) = metric.to_model(x)?;
                Ok(inner.curvature(&z)?.pullback(&jac))
            }
            Self::Thooft(_) | Self::Polynomial(_) | Self::Sum { .. } => Ok(self.jet(x)?.curvature()),
        }
    }

    /// Curvature from the chain-rule jet only.
    pub fn curvature_jet(&self, x: &Vector4<f64>) -> Result<GForm2> {
        Ok(self.jet(x)?.curvature())
    }

    /// Curvature with dA by central differences of the potential.
    pub fn curvature_fd(&self, x: &Vector4<f64>) -> Result<GForm2> {
        let a = self.potential(x)?;
        let da = fd::gradient(&|p: &Vector4<f64>| self.potential(p), x, FD_CURVATURE_STEP)?;
        Ok(Jet { a, da }.curvature())
    }

    /// max over (i, j, k) of |Σ_cyc ∂_i F_jk + [A_i, F_jk]|, with ∂F by
    /// differences of the curvature.
    pub fn bianchi_residual(&self, x: &Vector4<f64>) -> Result<f64> {
        let a = self.potential(x)?;
        let f = self.curvature(x)?;
        let df = fd::gradient(&|p: &Vector4<f64>| self.curvature(p), x, 1e-3)?;
        let mut r: f64 = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                for k in (j + 1)..4 {
                    let mut v = LieElement::ZERO;
                    for (p, q, s) in [(i, j, k), (j, k, i), (k, i, j)] {
                        v += df[p].component(q, s) + bracket(&a.component(p), &f.component(q, s));
                    }
                    r = r.max(v.norm());
                }
            }
        }
        Ok(r)
    }

    /// Chirality the catalog guarantees for the curvature (+1 SD, −1 ASD),
    /// relative to the metric the connection is written for.
    pub fn declared_chirality(&self) -> Option<i32> {
        match self {
            Self::Zero => None,
            Self::Instanton(spec) => Some(spec.sign),
            Self::Rescaled { inner, .. } | Self::Rotated { inner, .. } | Self::Pullback { inner, .. } => {
                inner.declared_chirality()
            }
            Self::Inverted { inner } => inner.declared_chirality().map(|c| -c),
            _ => None,
        }
    }

    /// Short human-readable description.
    pub fn label(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Instanton(s) => match s.family {
                InstantonFamily::Bpst => format!(
                    "bpst({}{}, λ={}, c={:?})",
                    if s.sign > 0 { "+" } else { "-" },
                    if s.gauge == BpstGauge::Singular { " singular" } else { "" },
                    s.scale,
                    s.center
                ),
                InstantonFamily::Groisser => format!("groisser(t={})", s.t),
            },
            Self::Thooft(t) => format!("thooft({} poles)", t.poles.len()),
            Self::Polynomial(p) => format!("polynomial({} entries)", p.entries.len()),
            Self::Formal { terms } => {
                let parts: Vec<String> = terms.iter().map(|(c, t)| format!("{c}·{}", t.label())).collect();
                format!("formal[{}]", parts.join(" + "))
            }
            Self::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| t.label()).collect();
                format!("sum[{}]", parts.join(" + "))
            }
            Self::Rescaled { inner, lambda } => format!("rescale({}, {lambda})", inner.label()),
            Self::Inverted { inner } => format!("inverted({})", inner.label()),
            Self::Rotated { inner, .. } => format!("rotated({})", inner.label()),
            Self::Pullback { inner, metric } => format!("{}@{}", inner.label(), metric.id()),
        }
    }
}

pub fn rescale(a: &Connection, lambda: f64) -> Result<Connection> {
    a.clone().rescale(lambda)
}

pub fn pullback_inversion(a: &Connection) -> Connection {
    a.clone().inverted()
}

/// Settings for recovering F̃(0) from rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayExtrapolation {
    pub start: f64,
    pub levels: usize,
    pub tolerance: f64,
}

impl Default for RayExtrapolation {
    fn default() -> Self {
        Self { start: 0.05, levels: 6, tolerance: 1e-6 }
    }
}

fn ray_directions() -> [Vector4<f64>; 4] {
    [
        Vector4::new(1.0, 0.0, 0.0, 0.0),
        Vector4::new(0.0, 0.6, 0.0, 0.8),
        Vector4::new(0.5, -0.5, 0.5, 0.5),
        Vector4::new(-0.2, 0.4, 0.8, -0.4).normalize(),
    ]
}

/// Richardson extrapolation of F(εv) to ε = 0 along four rays. Fails with
/// NoSmoothExtension if the rays disagree.
pub fn limit_curvature_by_rays(a: &Connection, opts: &RayExtrapolation) -> Result<GForm2> {
    let mut limits = Vec::new();
    for v in ray_directions() {
        let mut table: Vec<GForm2> = Vec::with_capacity(opts.levels);
        for k in 0..opts.levels {
            let eps = opts.start / 2f64.powi(k as i32);
            table.push(a.curvature(&(v * eps))?);
        }
        // Neville-style elimination of ε, ε², ...
        for m in 1..opts.levels {
            let p = 2f64.powi(m as i32);
            for k in (m..opts.levels).rev() {
                table[k] = (table[k] * p - table[k - 1]) * (1.0 / (p - 1.0));
            }
        }
        limits.push(table[opts.levels - 1]);
    }
    let mean = limits.iter().fold(GForm2::zero(), |s, f| s + *f) * 0.25;
    let spread = limits.iter().map(|f| (*f - mean).norm_max()).fold(0.0, f64::max);
    if spread > opts.tolerance * mean.norm_max().max(1.0) {
        return Err(Error::NoSmoothExtension(spread));
    }
    Ok(mean)
}

/// Closed form of F(0) for inverted BPST bubbles centered at the origin in
/// singular gauge: the inversion is a regular-gauge instanton of scale 1/λ
/// and opposite chirality.
fn closed_form_at_origin(a: &Connection) -> Option<GForm2> {
    match a {
        Connection::Inverted { inner } => match inner.as_ref() {
            Connection::Instanton(s)
                if s.family == InstantonFamily::Bpst && s.gauge == BpstGauge::Singular && s.center == [0.0; 4] =>
            {
                let reg = InstantonSpec::bpst(-s.sign, 1.0 / s.scale, [0.0; 4]);
                Some(bpst_curvature_regular(&reg, &Vector4::zeros()))
            }
            _ => None,
        },
        Connection::Rotated { inner, rotation } => closed_form_at_origin(inner).map(|f| f.apply_lie(rotation)),
        Connection::Rescaled { inner, lambda } => closed_form_at_origin(inner).map(|f| f * (lambda * lambda)),
        _ => None,
    }
}

/// F(0) of an inverted bubble: closed form, direct evaluation, or rays.
pub fn limit_curvature_at_origin(a: &Connection, opts: &RayExtrapolation) -> Result<GForm2> {
    if let Some(f) = closed_form_at_origin(a) {
        return Ok(f);
    }
    match a.curvature(&Vector4::zeros()) {
        Ok(f) if f.is_finite() => Ok(f),
        _ => limit_curvature_by_rays(a, opts),
    }
}

/// Largest wrong-chirality component of F for the given chirality.
pub fn chirality_defect(f: &GForm2, m: &MetricAt, chirality: i32) -> f64 {
    let (p, n) = sd_asd_split(f, m);
    if chirality >= 0 {
        n.norm_max()
    } else {
        p.norm_max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::exterior::{f_map, inner_forms_std, norm_sq};
    use crate::geometry::{FsChart, SphereChart};
    use crate::lie::gauge_rotation;
    use crate::poly::Term;
    use crate::quadrature::{integrate_r4, QuadratureConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vector4<f64> {
        Vector4::from_fn(|_, _| rng.gen_range(-s..s))
    }

    fn maxwell() -> Connection {
        Connection::Polynomial(PolynomialPotential {
            entries: vec![PotentialEntry {
                lie: 0,
                mu: 1,
                poly: Poly {
                    terms: vec![
                        Term { coef: 1.0, exps: [2, 0, 0, 0], rpow: 0 },
                        Term { coef: -1.0, exps: [0, 0, 2, 0], rpow: 0 },
                    ],
                },
            }],
        })
    }

    fn catalog() -> Vec<Connection> {
        let c = [0.3, -0.2, 0.1, 0.4];
        vec![
            Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4])).unwrap(),
            Connection::bpst(InstantonSpec::bpst(-1, 0.7, c)).unwrap(),
            Connection::bpst(InstantonSpec::bpst_singular(1, 0.8, c)).unwrap(),
            Connection::bpst(InstantonSpec::bpst_singular(-1, 1.2, [0.0; 4])).unwrap(),
            maxwell(),
            Connection::bpst(InstantonSpec::bpst(1, 1.0, c)).unwrap().rescale(0.5).unwrap(),
            Connection::bpst(InstantonSpec::bpst_singular(1, 0.5, [0.0; 4])).unwrap().inverted(),
            Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4]))
                .unwrap()
                .on_metric(&MetricField::sphere(2.0, SphereChart::Normal).unwrap()),
            Connection::sum(vec![maxwell(), Connection::bpst(InstantonSpec::bpst(-1, 1.0, c)).unwrap()]),
        ]
    }

    fn away_from_poles(rng: &mut ChaCha8Rng) -> Vector4<f64> {
        loop {
            let x = rand_vec(rng, 0.9);
            if x.norm() > 0.2 && (x - Vector4::new(0.3, -0.2, 0.1, 0.4)).norm() > 0.2 {
                return x;
            }
        }
    }

    #[test]
    fn zero_and_pure_gauge_are_flat() {
        let x = Vector4::new(0.3, 0.2, -0.5, 0.1);
        assert_eq!(Connection::Zero.curvature(&x).unwrap(), GForm2::zero());
        let g = Connection::pure_gauge([0.1, 0.0, 0.2, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = rand_vec(&mut rng, 2.0);
            assert!(g.potential(&x).unwrap().norm_max() > 0.1);
            assert!(g.curvature(&x).unwrap().norm_max() < 1e-12);
            assert!(g.curvature_fd(&x).unwrap().norm_max() < 1e-6);
        }
    }

    #[test]
    fn closed_form_matches_finite_differences() {
        let spec = InstantonSpec::bpst(1, 1.0, [0.0; 4]);
        let a = Connection::bpst(spec).unwrap();
        let m = MetricAt::flat();
        let exact = norm_sq(&a.curvature(&Vector4::zeros()).unwrap(), &m);
        let fd = norm_sq(&a.curvature_fd(&Vector4::zeros()).unwrap(), &m);
        assert!((exact - fd).abs() < 1e-6);
        assert!((exact - 96.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for c in catalog() {
            for _ in 0..100 {
                let x = away_from_poles(&mut rng);
                let f = c.curvature(&x).unwrap();
                let g = c.curvature_fd(&x).unwrap();
                let j = c.curvature_jet(&x).unwrap();
                assert!((f - g).norm_max() < 1e-6, "{}", c.label());
                assert!((f - j).norm_max() < 1e-9 * (1.0 + f.norm_max()), "{}", c.label());
            }
        }
    }

    #[test]
    fn bpst_chirality() {
        let m = MetricAt::flat();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for sign in [1, -1] {
            for spec in [InstantonSpec::bpst(sign, 0.8, [0.1, 0.0, 0.0, -0.3]), InstantonSpec::bpst_singular(sign, 0.8, [0.0; 4])] {
                let a = Connection::bpst(spec).unwrap();
                for _ in 0..20 {
                    let x = away_from_poles(&mut rng);
                    let f = a.curvature(&x).unwrap();
                    assert!(chirality_defect(&f, &m, sign) < 1e-12);
                    assert!(chirality_defect(&f, &m, -sign) > 1e-3);
                }
            }
        }
    }

    #[test]
    fn bpst_energy_and_scaling() {
        let a = Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4])).unwrap();
        let m = MetricAt::flat();
        let e: f64 = integrate_r4(|x| Ok(norm_sq(&a.curvature(x)?, &m)), &QuadratureConfig::default(), Exec::Parallel).unwrap();
        assert!((e - 16.0 * PI * PI).abs() < 1e-8, "{e}");
        let std: f64 =
            integrate_r4(|x| { let f = a.curvature(x)?; Ok(inner_forms_std(&f, &f, &m)) }, &QuadratureConfig::default(), Exec::Parallel).unwrap();
        assert!((std - 8.0 * PI * PI).abs() < 1e-8);
        let lam = 0.37;
        let b = Connection::bpst(InstantonSpec::bpst(1, lam, [0.0; 4])).unwrap();
        let x = Vector4::new(0.2, -0.1, 0.4, 0.3);
        let lhs = b.curvature(&x).unwrap();
        let rhs = a.curvature(&(x / lam)).unwrap() * (1.0 / (lam * lam));
        assert!((lhs - rhs).norm_max() < 1e-12 * lhs.norm_max());
    }

    #[test]
    fn rescale_laws() {
        let a = Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.2, 0.0, -0.1, 0.3])).unwrap();
        let x = Vector4::new(0.4, 0.1, -0.2, 0.6);
        let one = rescale(&a, 1.0).unwrap();
        assert!((one.potential(&x).unwrap() - a.potential(&x).unwrap()).norm_max() < 1e-15);
        let ab = a.clone().rescale(0.3).unwrap().rescale(2.5).unwrap();
        let direct = a.clone().rescale(0.75).unwrap();
        assert!((ab.potential(&x).unwrap() - direct.potential(&x).unwrap()).norm_max() < 1e-13);
        assert!(rescale(&a, -1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let lam = rng.gen_range(0.1..3.0);
            let r = a.clone().rescale(lam).unwrap();
            let x = rand_vec(&mut rng, 1.0);
            let by_jet = r.curvature_jet(&x).unwrap();
            let law = a.curvature(&(x * lam)).unwrap() * (lam * lam);
            assert!((by_jet - law).norm_max() < 1e-10 * (1.0 + law.norm_max()));
        }
    }

    #[test]
    fn inversion_properties() {
        let a = Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4])).unwrap();
        let inv = pullback_inversion(&a);
        let flat = MetricAt::flat();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = away_from_poles(&mut rng);
            let f = inv.curvature(&x).unwrap();
            assert!(chirality_defect(&f, &flat, -1) < 1e-10);
            // Chain-rule jet agrees with the curvature pullback.
            assert!((inv.curvature_jet(&x).unwrap() - f).norm_max() < 1e-10 * (1.0 + f.norm_max()));
            let twice = inv.clone().inverted().curvature(&x).unwrap();
            assert!((twice - a.curvature(&x).unwrap()).norm_max() < 1e-10);
            // On the unit sphere dψ is the reflection across x^⊥.
            let u = x.normalize();
            let refl = Matrix4::identity() - u * u.transpose() * 2.0;
            let on_sphere = inv.curvature(&u).unwrap();
            assert!((on_sphere - a.curvature(&u).unwrap().pullback(&refl)).norm_max() < 1e-12);
        }
        assert!(matches!(inv.curvature(&Vector4::zeros()), Err(Error::SingularPoint)));
    }

    #[test]
    fn limit_at_origin() {
        let opts = RayExtrapolation::default();
        for lam in [0.5, 1.0, 2.0] {
            let bubble = Connection::bpst(InstantonSpec::bpst_singular(1, lam, [0.0; 4])).unwrap().inverted();
            let closed = limit_curvature_at_origin(&bubble, &opts).unwrap();
            let rays = limit_curvature_by_rays(&bubble, &opts).unwrap();
            assert!((closed - rays).norm_max() < 1e-8, "{}", (closed - rays).norm_max());
            // λ² scaling against the λ = 1 reference.
            let reference = bpst_curvature_regular(&InstantonSpec::bpst(-1, 1.0, [0.0; 4]), &Vector4::zeros());
            assert!((closed - reference * (lam * lam)).norm_max() < 1e-12);
            assert!(chirality_defect(&closed, &MetricAt::flat(), -1) < 1e-12);
        }
        // The value at infinity does not see the center.
        let base = limit_curvature_by_rays(
            &Connection::bpst(InstantonSpec::bpst_singular(1, 1.0, [0.0; 4])).unwrap().inverted(),
            &opts,
        )
        .unwrap();
        for c in [[0.5, 0.0, 0.0, 0.0], [1.0, -1.0, 0.5, 0.0], [2.0, 1.0, 0.0, 1.5]] {
            let b = Connection::bpst(InstantonSpec::bpst_singular(1, 1.0, c)).unwrap().inverted();
            let f = limit_curvature_by_rays(&b, &opts).unwrap();
            assert!((f - base).norm_max() < 1e-6);
        }
        // Regular gauge has no continuous extension: rays disagree.
        let reg = Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4])).unwrap().inverted();
        assert!(matches!(limit_curvature_at_origin(&reg, &opts), Err(Error::NoSmoothExtension(_))));
    }

    #[test]
    fn groisser_structure() {
        let m_aff = MetricField::FubiniStudy { chart: FsChart::Affine };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Kähler form norm in the Λ² (i < j) product.
        let x = rand_vec(&mut rng, 1.0);
        let ma = m_aff.metric_at(&x).unwrap();
        let w = GForm2::from_real(&m_aff.kahler_form(&x).unwrap(), &LieElement::basis(0));
        assert!((inner_forms_std(&w, &w, &ma).sqrt() - SQRT_2).abs() < 1e-12);
        assert!((groisser_beta(0.5, &Vector4::zeros()) - 0.25).abs() < 1e-15);
        // t = 0: rank one.
        let f0 = groisser_curvature(0.0, &x).unwrap();
        let sv0 = f_map(&f0, &ma, 1).singular_values();
        let mut s: Vec<f64> = sv0.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(s[0] > 1e-3 && s[1] < 1e-12);
        for _ in 0..20 {
            let x = rand_vec(&mut rng, 2.0);
            let t = rng.gen_range(0.0..0.99);
            let ma = m_aff.metric_at(&x).unwrap();
            let f = groisser_curvature(t, &x).unwrap();
            assert!(chirality_defect(&f, &ma, 1) < 1e-12 * (1.0 + f.norm_max()));
            let mut s: Vec<f64> = f_map(&f, &ma, 1).singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let beta = groisser_beta(t, &x);
            assert!((s[1] / s[0] - beta).abs() < 1e-10 && (s[2] / s[0] - beta).abs() < 1e-10);
        }
        assert!(groisser_curvature(1.0, &x).is_err());
        // Normal-chart pullback stays self-dual for the chart metric.
        let n = MetricField::FubiniStudy { chart: FsChart::Normal };
        let g = Connection::Instanton(InstantonSpec::groisser(0.6)).on_metric(&n);
        let y = Vector4::new(0.3, -0.1, 0.2, 0.5);
        let f = g.curvature(&y).unwrap();
        assert!(chirality_defect(&f, &n.metric_at(&y).unwrap(), 1) < 1e-12);
        assert!(matches!(g.potential(&y), Err(Error::NoPotential(_))));
    }

    #[test]
    fn f_map_of_bpst_is_conformal() {
        let a = Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.1, 0.2, 0.0, 0.0])).unwrap();
        let m = MetricAt::flat();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = f_map(&a.curvature(&rand_vec(&mut rng, 2.0)).unwrap(), &m, 1);
            let ff = f.transpose() * f;
            assert!(ff[(0, 0)] > 1e-6);
            assert!((ff - Matrix3::identity() * ff[(0, 0)]).amax() < 1e-12 * ff[(0, 0)]);
        }
        assert_eq!(f_map(&GForm2::zero(), &m, 1), Matrix3::zeros());
    }

    #[test]
    fn bianchi_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for c in catalog() {
            for _ in 0..5 {
                let x = away_from_poles(&mut rng);
                assert!(c.bianchi_residual(&x).unwrap() < 1e-6, "{}", c.label());
            }
        }
    }

    #[test]
    fn energy_density_is_radial() {
        let a = Connection::bpst(InstantonSpec::bpst(1, 0.9, [0.0; 4])).unwrap();
        let m = MetricAt::flat();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = rand_vec(&mut rng, 2.0);
            let q = nalgebra::linalg::QR::new(Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0))).q();
            let e1 = norm_sq(&a.curvature(&x).unwrap(), &m);
            let e2 = norm_sq(&a.curvature(&(q * x)).unwrap(), &m);
            assert!((e1 - e2).abs() < 1e-12 * e1.max(1.0));
        }
    }

    #[test]
    fn gauge_rotation_acts_on_curvature() {
        let g = gauge_rotation([0.3, -0.2, 0.9], 1.1);
        let a = Connection::bpst(InstantonSpec::bpst_singular(1, 1.0, [0.1, 0.0, 0.0, 0.2])).unwrap();
        let r = a.clone().rotated(g);
        let x = Vector4::new(0.5, 0.3, -0.2, 0.1);
        let direct = a.curvature(&x).unwrap().apply_lie(&g);
        assert!((r.curvature(&x).unwrap() - direct).norm_max() < 1e-13);
        assert!((r.curvature_jet(&x).unwrap() - direct).norm_max() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let c = Connection::Formal {
            terms: vec![
                (1.0, Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4])).unwrap()),
                (0.5, Connection::bpst(InstantonSpec::bpst(-1, 1.0, [0.5, 0.0, 0.0, 0.0])).unwrap().inverted()),
            ],
        };
        let s = serde_json::to_string(&c).unwrap();
        let back: Connection = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let spec: InstantonSpec = serde_json::from_str(r#"{"family":"groisser","t":0.3}"#).unwrap();
        assert_eq!(spec.t, 0.3);
        assert!(InstantonSpec { sign: 2, ..spec }.validate().is_err());
    }
}
