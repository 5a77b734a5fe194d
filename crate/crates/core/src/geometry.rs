//! Background metrics in a single chart, with Christoffel symbols, Riemann
//! and Weyl tensors, the quadratic jet γ and the Kulkarni–Nomizu product.
//!
//! Conventions: R_abcd = ⟨R(∂_c, ∂_d)∂_b, ∂_a⟩ so that R_1212 = K on a sphere,
//! Ric_bd = h^{ac} R_abcd, Schouten = (Ric − scal/6·h)/2 and Rm = W + Schouten⊙h.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{MetricAt, Tensor2};
use crate::fd;
use crate::poly::Term;

/// Rank-4 covariant tensor on R⁴.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub v: [f64; 256],
}

impl Tensor4 {
    pub fn zeros() -> Self {
        Self { v: [0.0; 256] }
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        t.v[idx(a, b, c, d)] = f(a, b, c, d);
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.v[idx(a, b, c, d)]
    }

    pub fn add(&self, o: &Tensor4) -> Tensor4 {
        let mut t = self.clone();
        for (x, y) in t.v.iter_mut().zip(o.v.iter()) {
            *x += y;
        }
        t
    }

    pub fn scale(&self, s: f64) -> Tensor4 {
        let mut t = self.clone();
        t.v.iter_mut().for_each(|x| *x *= s);
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest violation of antisymmetry in (ab), (cd), pair symmetry and the
    /// first Bianchi identity.
    pub fn riemann_symmetry_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let x = self.get(a, b, c, d);
                        r = r.max((x + self.get(b, a, c, d)).abs());
                        r = r.max((x + self.get(a, b, d, c)).abs());
                        r = r.max((x - self.get(c, d, a, b)).abs());
                        r = r.max((x + self.get(a, c, d, b) + self.get(a, d, b, c)).abs());
                    }
                }
            }
        }
        r
    }

    /// Largest single trace h^{ac} T_abcd (the other traces follow by symmetry).
    pub fn trace_residual(&self, inv: &Matrix4<f64>) -> f64 {
        let mut r: f64 = 0.0;
        for b in 0..4 {
            for d in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    for c in 0..4 {
                        s += inv[(a, c)] * self.get(a, b, c, d);
                    }
                }
                r = r.max(s.abs());
            }
        }
        r
    }

    /// Components in a new basis: T'_abcd = T(Pe_a, Pe_b, Pe_c, Pe_d).
    pub fn transform(&self, p: &Matrix4<f64>) -> Tensor4 {
        let mut step = self.clone();
        for slot in 0..4 {
            let src = step.clone();
            step = Tensor4::from_fn(|a, b, c, d| {
                let mut ix = [a, b, c, d];
                let mut s = 0.0;
                for k in 0..4 {
                    ix[slot] = k;
                    s += p[(k, [a, b, c, d][slot])] * src.get(ix[0], ix[1], ix[2], ix[3]);
                }
                s
            });
        }
        step
    }
}

#[inline]
fn idx(a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * 4 + b) * 4 + c) * 4 + d
}

/// (A⊙B)_abcd = A_ac B_bd + A_bd B_ac − A_ad B_bc − A_bc B_ad.
pub fn kulkarni_nomizu(a: &Tensor2, b: &Tensor2) -> Tensor4 {
    Tensor4::from_fn(|i, j, k, l| {
        a[(i, k)] * b[(j, l)] + a[(j, l)] * b[(i, k)] - a[(i, l)] * b[(j, k)] - a[(j, k)] * b[(i, l)]
    })
}

/// Riemann tensor with its contractions at a point.
#[derive(Debug, Clone)]
pub struct CurvatureAtPoint {
    pub rm: Tensor4,
    pub ricci: Tensor2,
    pub scalar: f64,
    pub weyl: Tensor4,
}

impl CurvatureAtPoint {
    pub fn from_riemann(rm: Tensor4, m: &MetricAt) -> Self {
        let mut ricci = Matrix4::zeros();
        for b in 0..4 {
            for d in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    for c in 0..4 {
                        s += m.inv[(a, c)] * rm.get(a, b, c, d);
                    }
                }
                ricci[(b, d)] = s;
            }
        }
        let scalar = (m.inv * ricci).trace();
        let schouten = (ricci - m.h * (scalar / 6.0)) * 0.5;
        let weyl = rm.add(&kulkarni_nomizu(&schouten, &m.h).scale(-1.0));
        Self { rm, ricci, scalar, weyl }
    }

    pub fn schouten(&self, m: &MetricAt) -> Tensor2 {
        (self.ricci - m.h * (self.scalar / 6.0)) * 0.5
    }

    /// Sectional curvature of span(X, Y).
    pub fn sectional(&self, x: &Vector4<f64>, y: &Vector4<f64>, m: &MetricAt) -> f64 {
        let mut num = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        num += self.rm.get(a, b, c, d) * x[a] * y[b] * x[c] * y[d];
                    }
                }
            }
        }
        let den = m.vec_inner(x, x) * m.vec_inner(y, y) - m.vec_inner(x, y).powi(2);
        num / den
    }
}

/// γ(x)_ij = −⅓ R_iajb x^a x^b.
pub fn gamma_quadratic(rm: &Tensor4, x: &Vector4<f64>) -> Tensor2 {
    let mut g = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += rm.get(i, a, j, b) * x[a] * x[b];
                }
            }
            g[(i, j)] = -s / 3.0;
        }
    }
    g
}

/// ∂_k γ(x)_ij = −⅓ (R_ikjb x^b + R_iajk x^a).
pub fn gamma_quadratic_grad(rm: &Tensor4, x: &Vector4<f64>) -> [Tensor2; 4] {
    let mut out = [Matrix4::zeros(); 4];
    for (k, gk) in out.iter_mut().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    s += (rm.get(i, k, j, a) + rm.get(i, a, j, k)) * x[a];
                }
                gk[(i, j)] = -s / 3.0;
            }
        }
    }
    out
}

/// Potentials of σ(x) = (R⊙ξ)(·, x, ·, x) = fξ + ∇ˢω for symmetric R.
#[derive(Debug, Clone, Copy)]
pub struct KnPotential {
    pub r: Tensor2,
}

impl KnPotential {
    pub fn new(r: Tensor2) -> Self {
        Self { r: (r + r.transpose()) * 0.5 }
    }

    /// f(x) = 3 R(x, x).
    pub fn f(&self, x: &Vector4<f64>) -> f64 {
        3.0 * (x.transpose() * self.r * x)[0]
    }

    /// ω(x) = |x|² R(x, ·) − 2 R(x, x) x.
    pub fn omega(&self, x: &Vector4<f64>) -> Vector4<f64> {
        self.r * x * x.norm_squared() - x * (2.0 * (x.transpose() * self.r * x)[0])
    }

    /// (∂_a ω_b), exact.
    pub fn grad_omega(&self, x: &Vector4<f64>) -> Tensor2 {
        let rx = self.r * x;
        let rxx = x.dot(&rx);
        // ∂_a(|x|² R_bc x^c) = 2x_a (Rx)_b + |x|² R_ab; ∂_a(−2R(x,x)x_b) = −4(Rx)_a x_b − 2R(x,x)δ_ab
        x * rx.transpose() * 2.0 + self.r * x.norm_squared() - rx * x.transpose() * 4.0 - Matrix4::identity() * (2.0 * rxx)
    }

    /// ∇ˢω = |x|² R − (x (Rx)ᵀ + (Rx) xᵀ) − 2R(x, x) ξ.
    pub fn sym_grad_omega(&self, x: &Vector4<f64>) -> Tensor2 {
        let g = self.grad_omega(x);
        (g + g.transpose()) * 0.5
    }

    /// σ(x) directly from the Kulkarni–Nomizu product.
    pub fn sigma(&self, x: &Vector4<f64>) -> Tensor2 {
        let kn = kulkarni_nomizu(&self.r, &Matrix4::identity());
        let mut s = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut v = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        v += kn.get(i, a, j, b) * x[a] * x[b];
                    }
                }
                s[(i, j)] = v;
            }
        }
        s
    }

    /// Max-norm of σ − fξ − ∇ˢω at x.
    pub fn residual(&self, x: &Vector4<f64>) -> f64 {
        (self.sigma(x) - Matrix4::identity() * self.f(x) - self.sym_grad_omega(x)).amax()
    }
}

/// Returns (f, ω) evaluators.
pub fn decompose_kn_potential(r: &Tensor2) -> KnPotential {
    KnPotential::new(*r)
}

/// Jacobian of the radial map y ↦ φ(|y|) ŷ, given φ(s), φ'(s) and φ(s)/s.
fn radial_jacobian(y: &Vector4<f64>, dphi: f64, phi_over_s: f64) -> Matrix4<f64> {
    let s = y.norm();
    if s == 0.0 {
        return Matrix4::identity() * phi_over_s;
    }
    let u = y / s;
    let p = u * u.transpose();
    p * dphi + (Matrix4::identity() - p) * phi_over_s
}

/// tan(u)/u with a series near 0.
fn tan_over(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 + u * u / 3.0 + 2.0 * u.powi(4) / 15.0
    } else {
        u.tan() / u
    }
}

fn sin_over(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0 + u.powi(4) / 120.0
    } else {
        u.sin() / u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereChart {
    /// Geodesic normal coordinates at the north pole.
    Normal,
    /// Stereographic coordinates, h = (1 + |x|²/4R²)⁻² ξ.
    Stereographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FsChart {
    /// Geodesic normal coordinates at [1:0:0].
    Normal,
    /// Affine coordinates z¹ = x¹ + ix², z² = x³ + ix⁴.
    Affine,
}

/// Metric given as ξ + Σ polynomial entries; `terms` sets both h_ij and h_ji.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMetric {
    pub entries: Vec<PolyEntry>,
    #[serde(default = "default_custom_radius")]
    pub radius: f64,
}

fn default_custom_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyEntry {
    pub i: usize,
    pub j: usize,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricField {
    Flat,
    RoundSphere { radius: f64, chart: SphereChart },
    FubiniStudy { chart: FsChart },
    Custom(PolyMetric),
}

/// Finite-difference step for metric derivatives and for Christoffel symbols.
pub const METRIC_FD_STEP: f64 = 1e-3;

impl MetricField {
    /// Parses "flat", "s4:<R>", "s4-stereo:<R>", "cp2", "cp2-affine" or
    /// "custom:<path>".
    pub fn from_id(id: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown metric id '{id}'"));
        match id {
            "flat" => return Ok(Self::Flat),
            "cp2" => return Ok(Self::FubiniStudy { chart: FsChart::Normal }),
            "cp2-affine" => return Ok(Self::FubiniStudy { chart: FsChart::Affine }),
            _ => {}
        }
        if let Some(rest) = id.strip_prefix("s4-stereo:") {
            let radius: f64 = rest.parse().map_err(|_| bad())?;
            return Self::sphere(radius, SphereChart::Stereographic);
        }
        if let Some(rest) = id.strip_prefix("s4:") {
            let radius: f64 = rest.parse().map_err(|_| bad())?;
            return Self::sphere(radius, SphereChart::Normal);
        }
        if let Some(path) = id.strip_prefix("custom:") {
            return Self::custom_from_file(Path::new(path));
        }
        Err(bad())
    }

    pub fn sphere(radius: f64, chart: SphereChart) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("sphere radius {radius}")));
        }
        Ok(Self::RoundSphere { radius, chart })
    }

    pub fn custom_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let pm: PolyMetric = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if pm.entries.iter().any(|e| e.i > 3 || e.j > 3) {
            return Err(Error::Parse("metric entry index out of range".into()));
        }
        Ok(Self::Custom(pm))
    }

    pub fn id(&self) -> String {
        match self {
            Self::Flat => "flat".into(),
            Self::RoundSphere { radius, chart: SphereChart::Normal } => format!("s4:{radius}"),
            Self::RoundSphere { radius, chart: SphereChart::Stereographic } => format!("s4-stereo:{radius}"),
            Self::FubiniStudy { chart: FsChart::Normal } => "cp2".into(),
            Self::FubiniStudy { chart: FsChart::Affine } => "cp2-affine".into(),
            Self::Custom(_) => "custom".into(),
        }
    }

    /// Radius of the coordinate ball on which the chart is valid.
    pub fn chart_radius(&self) -> f64 {
        match self {
            Self::Flat => f64::INFINITY,
            Self::RoundSphere { radius, chart: SphereChart::Normal } => PI * radius,
            Self::RoundSphere { chart: SphereChart::Stereographic, .. } => f64::INFINITY,
            Self::FubiniStudy { chart: FsChart::Normal } => PI / SQRT_2,
            Self::FubiniStudy { chart: FsChart::Affine } => f64::INFINITY,
            Self::Custom(pm) => pm.radius,
        }
    }

    pub fn is_normal_chart(&self) -> bool {
        matches!(
            self,
            Self::Flat | Self::RoundSphere { chart: SphereChart::Normal, .. } | Self::FubiniStudy { chart: FsChart::Normal }
        )
    }

    pub fn is_conformally_flat(&self) -> bool {
        matches!(self, Self::Flat | Self::RoundSphere { .. })
    }

    fn check(&self, x: &Vector4<f64>) -> Result<()> {
        if !x.iter().all(|v| v.is_finite()) || x.norm() >= self.chart_radius() {
            return Err(Error::OutsideChart([x[0], x[1], x[2], x[3]]));
        }
        Ok(())
    }

    /// Map from this chart to the model coordinates in which catalog
    /// connections are written (stereographic for S⁴, affine for CP²), with
    /// its Jacobian. Identity for flat, stereographic, affine and custom.
    pub fn to_model(&self, y: &Vector4<f64>) -> Result<(Vector4<f64>, Matrix4<f64>)> {
        self.check(y)?;
        let s = y.norm();
        match self {
            Self::RoundSphere { radius, chart: SphereChart::Normal } => {
                let u = s / (2.0 * radius);
                let phi_over_s = tan_over(u);
                let dphi = 1.0 / u.cos().powi(2);
                Ok((y * phi_over_s, radial_jacobian(y, dphi, phi_over_s)))
            }
            Self::FubiniStudy { chart: FsChart::Normal } => {
                let u = s / SQRT_2;
                let phi_over_s = tan_over(u) / SQRT_2;
                let dphi = 1.0 / (SQRT_2 * u.cos().powi(2));
                Ok((y * phi_over_s, radial_jacobian(y, dphi, phi_over_s)))
            }
            _ => Ok((*y, Matrix4::identity())),
        }
    }

    pub fn metric(&self, x: &Vector4<f64>) -> Result<Matrix4<f64>> {
        self.check(x)?;
        match self {
            Self::Flat => Ok(Matrix4::identity()),
            Self::RoundSphere { radius, chart } => {
                let r = *radius;
                match chart {
                    SphereChart::Stereographic => {
                        let c = 1.0 + x.norm_squared() / (4.0 * r * r);
                        Ok(Matrix4::identity() / (c * c))
                    }
                    SphereChart::Normal => {
                        let s = x.norm();
                        let t = sin_over(s / r).powi(2);
                        if s == 0.0 {
                            return Ok(Matrix4::identity());
                        }
                        let u = x / s;
                        let p = u * u.transpose();
                        Ok(p + (Matrix4::identity() - p) * t)
                    }
                }
            }
            Self::FubiniStudy { chart } => match chart {
                FsChart::Affine => Ok(fubini_study_affine(x)),
                FsChart::Normal => {
                    let (z, j) = self.to_model(x)?;
                    Ok(j.transpose() * fubini_study_affine(&z) * j)
                }
            },
            Self::Custom(pm) => {
                let mut h = Matrix4::identity();
                for e in &pm.entries {
                    let v: f64 = e.terms.iter().map(|t| t.eval(x)).sum();
                    h[(e.i, e.j)] += v;
                    if e.i != e.j {
                        h[(e.j, e.i)] += v;
                    }
                }
                Ok(h)
            }
        }
    }

    pub fn metric_at(&self, x: &Vector4<f64>) -> Result<MetricAt> {
        MetricAt::new(self.metric(x)?)
    }

    /// ∂_k h at x.
    pub fn metric_derivatives(&self, x: &Vector4<f64>) -> Result<[Matrix4<f64>; 4]> {
        if let Self::Flat = self {
            self.check(x)?;
            return Ok([Matrix4::zeros(); 4]);
        }
        fd::gradient(&|p: &Vector4<f64>| self.metric(p), x, METRIC_FD_STEP)
    }

    /// Γ^k_ij as gamma[k][(i, j)].
    pub fn christoffel(&self, x: &Vector4<f64>) -> Result<[Matrix4<f64>; 4]> {
        let m = self.metric_at(x)?;
        let dh = self.metric_derivatives(x)?;
        Ok(christoffel_from(&m, &dh))
    }

    /// Riemann tensor by differencing the Christoffel symbols.
    pub fn riemann_fd(&self, x: &Vector4<f64>) -> Result<Tensor4> {
        let m = self.metric_at(x)?;
        let g = self.christoffel(x)?;
        let dg = fd::gradient(&|p: &Vector4<f64>| Ok(ChristoffelSum(self.christoffel(p)?)), x, METRIC_FD_STEP)?;
        // R^a_bcd = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb
        let mut up = Tensor4::zeros();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let mut v = dg[c].0[a][(d, b)] - dg[d].0[a][(c, b)];
                        for e in 0..4 {
                            v += g[a][(c, e)] * g[e][(d, b)] - g[a][(d, e)] * g[e][(c, b)];
                        }
                        up.v[idx(a, b, c, d)] = v;
                    }
                }
            }
        }
        Ok(Tensor4::from_fn(|a, b, c, d| (0..4).map(|e| m.h[(a, e)] * up.get(e, b, c, d)).sum()))
    }

    /// Closed-form Riemann tensor when the catalog provides one.
    pub fn riemann_closed_form(&self, x: &Vector4<f64>) -> Result<Option<Tensor4>> {
        match self {
            Self::Flat => {
                self.check(x)?;
                Ok(Some(Tensor4::zeros()))
            }
            Self::RoundSphere { radius, .. } => {
                let h = self.metric(x)?;
                Ok(Some(kulkarni_nomizu(&h, &h).scale(0.5 / (radius * radius))))
            }
            Self::FubiniStudy { .. } => {
                let h = self.metric(x)?;
                let w = self.kahler_form(x)?;
                Ok(Some(fubini_study_riemann(&h, &w)))
            }
            Self::Custom(_) => Ok(None),
        }
    }

    pub fn riemann(&self, x: &Vector4<f64>) -> Result<Tensor4> {
        match self.riemann_closed_form(x)? {
            Some(r) => Ok(r),
            None => self.riemann_fd(x),
        }
    }

    pub fn curvature(&self, x: &Vector4<f64>) -> Result<CurvatureAtPoint> {
        Ok(CurvatureAtPoint::from_riemann(self.riemann(x)?, &self.metric_at(x)?))
    }

    pub fn curvature_fd(&self, x: &Vector4<f64>) -> Result<CurvatureAtPoint> {
        Ok(CurvatureAtPoint::from_riemann(self.riemann_fd(x)?, &self.metric_at(x)?))
    }

    pub fn weyl(&self, x: &Vector4<f64>) -> Result<Tensor4> {
        Ok(self.curvature(x)?.weyl)
    }

    /// Kähler form ω_mn = h(J e_m, e_n) of the Fubini–Study metric.
    pub fn kahler_form(&self, x: &Vector4<f64>) -> Result<Matrix4<f64>> {
        match self {
            Self::FubiniStudy { .. } => {
                let (z, j) = self.to_model(x)?;
                let w = complex_structure().transpose() * fubini_study_affine(&z);
                Ok(j.transpose() * w * j)
            }
            _ => Err(Error::InvalidParameter(format!("{} is not Kähler in this catalog", self.id()))),
        }
    }
}

struct ChristoffelSum([Matrix4<f64>; 4]);

impl Clone for ChristoffelSum {
    fn clone(&self) -> Self {
        ChristoffelSum(self.0)
    }
}

impl crate::exec::Summand for ChristoffelSum {
    fn zero_like(&self) -> Self {
        ChristoffelSum([Matrix4::zeros(); 4])
    }
    fn add(&self, o: &Self) -> Self {
        ChristoffelSum([0, 1, 2, 3].map(|k| self.0[k] + o.0[k]))
    }
    fn scale(&self, w: f64) -> Self {
        ChristoffelSum(self.0.map(|m| m * w))
    }
    fn max_abs(&self) -> f64 {
        self.0.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }
}

pub fn christoffel_from(m: &MetricAt, dh: &[Matrix4<f64>; 4]) -> [Matrix4<f64>; 4] {
    let mut g = [Matrix4::zeros(); 4];
    for (k, gk) in g.iter_mut().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for l in 0..4 {
                    s += m.inv[(k, l)] * (dh[i][(j, l)] + dh[j][(i, l)] - dh[l][(i, j)]);
                }
                gk[(i, j)] = 0.5 * s;
            }
        }
    }
    g
}

/// Multiplication by i in the real coordinates (x¹ + ix², x³ + ix⁴).
pub fn complex_structure() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(1, 0)] = 1.0;
    j[(0, 1)] = -1.0;
    j[(3, 2)] = 1.0;
    j[(2, 3)] = -1.0;
    j
}

/// h = 2 Re(G_jk dz^j dz̄^k) with G_jk = (D δ_jk − z̄_j z_k)/D², D = 1 + |z|².
pub fn fubini_study_affine(x: &Vector4<f64>) -> Matrix4<f64> {
    let z = [(x[0], x[1]), (x[2], x[3])];
    let d = 1.0 + x.norm_squared();
    // Real basis vectors as complex 2-vectors: e1 = (1,0), e2 = (i,0), e3 = (0,1), e4 = (0,i).
    let basis: [[(f64, f64); 2]; 4] = [
        [(1.0, 0.0), (0.0, 0.0)],
        [(0.0, 1.0), (0.0, 0.0)],
        [(0.0, 0.0), (1.0, 0.0)],
        [(0.0, 0.0), (0.0, 1.0)],
    ];
    let cmul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let conj = |a: (f64, f64)| (a.0, -a.1);
    let mut g = [[(0.0, 0.0); 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            let zz = cmul(conj(z[j]), z[k]);
            let delta = if j == k { d } else { 0.0 };
            g[j][k] = ((delta - zz.0) / (d * d), -zz.1 / (d * d));
        }
    }
    let mut h = Matrix4::zeros();
    for m in 0..4 {
        for n in 0..4 {
            let mut re = 0.0;
            for j in 0..2 {
                for k in 0..2 {
                    re += cmul(cmul(basis[m][j], g[j][k]), conj(basis[n][k])).0;
                }
            }
            h[(m, n)] = 2.0 * re;
        }
    }
    (h + h.transpose()) * 0.5
}

/// Holomorphic sectional curvature of the catalog Fubini–Study metric.
pub const FS_HOLOMORPHIC_CURVATURE: f64 = 2.0;

/// R = (c/4)(h_ac h_bd − h_ad h_bc + ω_ac ω_bd − ω_ad ω_bc + 2 ω_ab ω_cd).
pub fn fubini_study_riemann(h: &Matrix4<f64>, w: &Matrix4<f64>) -> Tensor4 {
    let c = FS_HOLOMORPHIC_CURVATURE / 4.0;
    Tensor4::from_fn(|a, b, cc, d| {
        c * (h[(a, cc)] * h[(b, d)] - h[(a, d)] * h[(b, cc)] + w[(a, cc)] * w[(b, d)] - w[(a, d)] * w[(b, cc)]
            + 2.0 * w[(a, b)] * w[(cc, d)])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vector4<f64> {
        Vector4::from_fn(|_, _| rng.gen_range(-scale..scale))
    }

    fn rand_sym(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
        let a = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        a + a.transpose()
    }

    fn catalog() -> Vec<MetricField> {
        vec![
            MetricField::Flat,
            MetricField::sphere(1.0, SphereChart::Normal).unwrap(),
            MetricField::sphere(1.0, SphereChart::Stereographic).unwrap(),
            MetricField::FubiniStudy { chart: FsChart::Normal },
            MetricField::FubiniStudy { chart: FsChart::Affine },
        ]
    }

    #[test]
    fn kn_examples() {
        let xi = Matrix4::identity();
        assert_eq!(kulkarni_nomizu(&Matrix4::zeros(), &xi).max_abs(), 0.0);
        assert_eq!(kulkarni_nomizu(&xi, &xi).get(0, 1, 0, 1), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let r = rand_sym(&mut rng);
            let s = rand_sym(&mut rng);
            assert!(kulkarni_nomizu(&r, &s).riemann_symmetry_residual() < 1e-14);
        }
    }

    #[test]
    fn flat_has_no_curvature() {
        let m = MetricField::Flat;
        let x = Vector4::new(0.3, 0.1, -2.0, 5.0);
        assert!(m.christoffel(&x).unwrap().iter().all(|g| g.amax() == 0.0));
        assert_eq!(m.riemann_fd(&x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sphere_christoffel_vanish_at_origin() {
        for chart in [SphereChart::Normal, SphereChart::Stereographic] {
            let m = MetricField::sphere(1.3, chart).unwrap();
            let g = m.christoffel(&Vector4::zeros()).unwrap();
            assert!(g.iter().all(|g| g.amax() < 1e-12));
        }
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let m = MetricField::FubiniStudy { chart: FsChart::Normal };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x = rand_vec(&mut rng, 0.6);
            for g in m.christoffel(&x).unwrap() {
                assert!((g - g.transpose()).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn normal_sphere_metric_matches_pulled_back_stereographic() {
        let n = MetricField::sphere(1.7, SphereChart::Normal).unwrap();
        let st = MetricField::sphere(1.7, SphereChart::Stereographic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let y = rand_vec(&mut rng, 1.5);
            let (x, j) = n.to_model(&y).unwrap();
            let pulled = j.transpose() * st.metric(&x).unwrap() * j;
            assert!((pulled - n.metric(&y).unwrap()).amax() < 1e-12);
        }
    }

    #[test]
    fn sectional_curvature_of_unit_sphere() {
        for chart in [SphereChart::Normal, SphereChart::Stereographic] {
            let m = MetricField::sphere(1.0, chart).unwrap();
            let c = m.curvature_fd(&Vector4::zeros()).unwrap();
            let ma = m.metric_at(&Vector4::zeros()).unwrap();
            for a in 0..4 {
                for b in (a + 1)..4 {
                    let (ea, eb) = (Vector4::ith(a, 1.0), Vector4::ith(b, 1.0));
                    assert!((c.sectional(&ea, &eb, &ma) - 1.0).abs() < 1e-8);
                }
            }
            let closed = m.riemann_closed_form(&Vector4::zeros()).unwrap().unwrap();
            assert!(closed.add(&c.rm.scale(-1.0)).max_abs() < 1e-8);
        }
    }

    #[test]
    fn fd_riemann_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in catalog() {
            for _ in 0..3 {
                let x = rand_vec(&mut rng, 0.5);
                let fd = m.riemann_fd(&x).unwrap();
                let cf = m.riemann_closed_form(&x).unwrap().unwrap();
                assert!(fd.add(&cf.scale(-1.0)).max_abs() < 1e-8, "{}", m.id());
                assert!(fd.riemann_symmetry_residual() < 1e-8);
            }
        }
    }

    #[test]
    fn fubini_study_properties() {
        let m = MetricField::FubiniStudy { chart: FsChart::Affine };
        assert!((m.metric(&Vector4::zeros()).unwrap() - Matrix4::identity() * 2.0).amax() < 1e-15);
        let w = m.kahler_form(&Vector4::zeros()).unwrap();
        let expect = (crate::exterior::dx2(0, 1) + crate::exterior::dx2(2, 3)) * 2.0;
        assert!((w - expect).amax() < 1e-15);
        let n = MetricField::FubiniStudy { chart: FsChart::Normal };
        assert!((n.metric(&Vector4::zeros()).unwrap() - Matrix4::identity()).amax() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scal = Vec::new();
        for _ in 0..5 {
            let x = rand_vec(&mut rng, 0.7);
            let c = n.curvature_fd(&x).unwrap();
            scal.push(c.scalar);
            let ma = n.metric_at(&x).unwrap();
            // Einstein: Ric = (scal/4) h.
            assert!((c.ricci - ma.h * (c.scalar / 4.0)).amax() < 1e-7);
            assert!(c.weyl.trace_residual(&ma.inv) < 1e-8);
        }
        for s in &scal {
            assert!((s - 12.0).abs() < 1e-7, "{s}");
        }
        // Holomorphic sectional curvature 2 at the origin.
        let c = n.curvature(&Vector4::zeros()).unwrap();
        let ma = MetricAt::flat();
        let e1 = Vector4::ith(0, 1.0);
        let je1 = complex_structure() * e1;
        assert!((c.sectional(&e1, &je1, &ma) - 2.0).abs() < 1e-12);
        assert!(c.weyl.max_abs() > 0.1);
    }

    #[test]
    fn weyl_vanishes_on_conformally_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in [
            MetricField::Flat,
            MetricField::sphere(1.0, SphereChart::Normal).unwrap(),
            MetricField::sphere(2.0, SphereChart::Stereographic).unwrap(),
        ] {
            for _ in 0..3 {
                let x = rand_vec(&mut rng, 0.5);
                assert!(m.curvature_fd(&x).unwrap().weyl.max_abs() < 1e-8);
                assert!(m.curvature(&x).unwrap().weyl.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ricci_decomposition_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in catalog() {
            let x = rand_vec(&mut rng, 0.4);
            let c = m.curvature_fd(&x).unwrap();
            let ma = m.metric_at(&x).unwrap();
            let recon = c.weyl.add(&kulkarni_nomizu(&c.schouten(&ma), &ma.h));
            assert!(recon.add(&c.rm.scale(-1.0)).max_abs() < 1e-8);
            assert!(c.weyl.trace_residual(&ma.inv) < 1e-8);
        }
    }

    #[test]
    fn gamma_properties() {
        let m = MetricField::sphere(1.0, SphereChart::Normal).unwrap();
        let rm = m.riemann(&Vector4::zeros()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = rand_vec(&mut rng, 1.0);
        let g = gamma_quadratic(&rm, &x);
        // γ(x)(x, x) vanishes and tr γ = −⅓ Ric(x, x).
        assert!((x.transpose() * g * x)[0].abs() < 1e-14);
        let c = CurvatureAtPoint::from_riemann(rm.clone(), &MetricAt::flat());
        assert!((g.trace() + (x.transpose() * c.ricci * x)[0] / 3.0).abs() < 1e-13);
        assert_eq!(gamma_quadratic(&Tensor4::zeros(), &x), Matrix4::zeros());
        // Gradient against differences of γ itself.
        let gr = gamma_quadratic_grad(&rm, &x);
        for k in 0..4 {
            let e = Vector4::ith(k, 1e-5);
            let fd = (gamma_quadratic(&rm, &(x + e)) - gamma_quadratic(&rm, &(x - e))) / 2e-5;
            assert!((fd - gr[k]).amax() < 1e-9);
        }
    }

    #[test]
    fn gamma_is_the_quadratic_jet() {
        for m in [MetricField::sphere(1.0, SphereChart::Normal).unwrap(), MetricField::FubiniStudy { chart: FsChart::Normal }] {
            let rm = m.riemann(&Vector4::zeros()).unwrap();
            let dir = Vector4::new(0.3, -0.5, 0.7, 0.2).normalize();
            let mut pts = Vec::new();
            for t in [1e-1, 5e-2, 2.5e-2, 1.25e-2] {
                let x = dir * t;
                let res = (m.metric(&x).unwrap() - Matrix4::identity() - gamma_quadratic(&rm, &x)).amax();
                pts.push((t.ln(), res.ln()));
            }
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            assert!(slope >= 2.9, "{} slope {slope}", m.id());
        }
    }

    #[test]
    fn kn_potential_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = decompose_kn_potential(&rand_sym(&mut rng));
            for _ in 0..5 {
                let x = rand_vec(&mut rng, 2.0);
                assert!(p.residual(&x) < 1e-10);
            }
        }
        let p = decompose_kn_potential(&Matrix4::identity());
        let x = Vector4::new(0.2, 0.4, -0.1, 0.9);
        let closed = (Matrix4::identity() * x.norm_squared() - x * x.transpose()) * 2.0;
        assert!((p.sigma(&x) - closed).amax() < 1e-14);
        let z = decompose_kn_potential(&Matrix4::zeros());
        assert_eq!(z.f(&x), 0.0);
        assert_eq!(z.omega(&x), Vector4::zeros());
    }

    #[test]
    fn metric_ids_round_trip() {
        for id in ["flat", "s4:2", "s4-stereo:1.5", "cp2", "cp2-affine"] {
            assert_eq!(MetricField::from_id(id).unwrap().id(), id);
        }
        assert!(MetricField::from_id("torus").is_err());
        assert!(MetricField::from_id("s4:-1").is_err());
        assert!(matches!(
            MetricField::from_id("cp2").unwrap().metric(&Vector4::new(3.0, 0.0, 0.0, 0.0)),
            Err(Error::OutsideChart(_))
        ));
    }

    #[test]
    fn rotation_of_tensor4() {
        let rm = MetricField::FubiniStudy { chart: FsChart::Normal }.riemann(&Vector4::zeros()).unwrap();
        // Unitary rotations preserve the Fubini–Study curvature at the origin.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let mut u = Matrix4::identity();
        u[(0, 0)] = c;
        u[(0, 1)] = -s;
        u[(1, 0)] = s;
        u[(1, 1)] = c;
        assert!(rm.transform(&u).add(&rm.scale(-1.0)).max_abs() < 1e-13);
    }

    #[test]
    fn custom_metric_from_json() {
        let dir = std::env::temp_dir().join("ymbubble-custom-metric.json");
        std::fs::write(
            &dir,
            r#"{"entries":[{"i":0,"j":1,"terms":[{"coef":0.1,"exps":[0,0,1,1]}]}],"radius":0.5}"#,
        )
        .unwrap();
        let m = MetricField::from_id(&format!("custom:{}", dir.display())).unwrap();
        let x = Vector4::new(0.1, 0.2, 0.3, 0.2);
        let h = m.metric(&x).unwrap();
        assert!((h[(0, 1)] - 0.006).abs() < 1e-15 && (h[(1, 0)] - 0.006).abs() < 1e-15);
        assert!(m.riemann_closed_form(&x).unwrap().is_none());
        assert!(m.riemann(&x).unwrap().riemann_symmetry_residual() < 1e-8);
    }
}
