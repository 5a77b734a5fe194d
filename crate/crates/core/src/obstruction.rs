//! Bubbling obstruction: the tensor P = F∞∘F̃(0) + Weyl coupling, the gauge
//! obstruction, and the sign-pattern exclusion checks.
//!
//! Antisymmetrization is T_[ij] = T_ij − T_ji throughout, without a ½.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::exterior::{chiral_frame_flat, circ, f_map, inner_forms, inner_real, GForm2, MetricAt, Tensor2};
use crate::gauge::{chirality_defect, groisser_beta, groisser_curvature, limit_curvature_at_origin, Connection, RayExtrapolation};
use crate::geometry::{fubini_study_affine, gamma_quadratic, gamma_quadratic_grad, kulkarni_nomizu, CurvatureAtPoint, MetricField, Tensor4};
use crate::lie::{bracket, LieElement};
use crate::pohozaev::{conf_residual, ConfResidual};
use crate::quadrature::{integrate_r4_checked, QuadratureConfig, SphereOrders};
use crate::stress::stress;

/// 1/(3π²), the prefactor of the Weyl coupling.
pub fn weyl_prefactor() -> f64 {
    1.0 / (3.0 * PI * PI)
}

/// Relative tolerance of the order-doubling check on the Weyl integrals.
pub const WEYL_REFINEMENT_TOL: f64 = 1e-6;

/// Relative spread of singular values below which a 3×3 map is conformal.
pub const CONFORMAL_TOL: f64 = 1e-8;

/// Relative wrong-chirality part below which a curvature counts as chiral.
pub const CHIRAL_TOL: f64 = 1e-10;

/// Quadrature for the R⁴ Weyl integrals. Lighter than the ball default, since
/// the integrands decay like r⁻³ in the compactified tail.
pub fn weyl_quadrature() -> QuadratureConfig {
    QuadratureConfig { sphere: SphereOrders::uniform(16), radial: 48, tail: 32, tail_r0: 2.0 }
}

/// (F∞∘F̃)(0) in the flat metric of the normal chart.
pub fn pairing_term(f_inf: &GForm2, f_tilde: &GForm2) -> Tensor2 {
    circ(f_inf, f_tilde, &MetricAt::flat())
}

/// T_[ij] + tr(T) δ_ij, the componentwise form of "T ⊥ conf(4)".
pub fn skew_trace(t: &Tensor2) -> Tensor2 {
    t - t.transpose() + Matrix4::identity() * t.trace()
}

#[inline]
fn t_index(a: usize, b: usize, al: usize, mu: usize, be: usize, nu: usize) -> usize {
    ((((a * 4 + b) * 4 + al) * 4 + mu) * 4 + be) * 4 + nu
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// T^{ij}_{abαμβν}(x), stored with index ((((a·4+b)·4+α)·4+μ)·4+β)·4+ν:
/// (1/3π²)(δ_αa δ_βb x^ν x^[j δ_i]μ − δ_αa δ_b[i δ_j]β x^μ x^ν + δ_αa δ_βb δ_ij x^μ x^ν).
pub fn t_tensor(i: usize, j: usize, x: &Vector4<f64>) -> Vec<f64> {
    let c = weyl_prefactor();
    let mut t = vec![0.0; 4096];
    for a in 0..4 {
        for b in 0..4 {
            for mu in 0..4 {
                for be in 0..4 {
                    for nu in 0..4 {
                        let al = a;
                        let g1 = delta(be, b) * x[nu] * (x[j] * delta(i, mu) - x[i] * delta(j, mu));
                        let g2 = (delta(b, i) * delta(j, be) - delta(b, j) * delta(i, be)) * x[mu] * x[nu];
                        let g3 = delta(be, b) * delta(i, j) * x[mu] * x[nu];
                        t[t_index(a, b, al, mu, be, nu)] = c * (g1 - g2 + g3);
                    }
                }
            }
        }
    }
    t
}

/// ⟨S ⊗ W, T⟩ = S_ab W_αμβν T_abαμβν.
pub fn contract_t(s: &Tensor2, w: &Tensor4, t: &[f64]) -> f64 {
    let mut acc = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            if s[(a, b)] == 0.0 {
                continue;
            }
            for al in 0..4 {
                for mu in 0..4 {
                    for be in 0..4 {
                        for nu in 0..4 {
                            acc += s[(a, b)] * w.get(al, mu, be, nu) * t[t_index(a, b, al, mu, be, nu)];
                        }
                    }
                }
            }
        }
    }
    acc
}

/// The contraction ⟨S ⊗ W, T^{ij}(x)⟩ for all (i, j) in closed form:
/// (1/3π²)[S_αβ W_αiβν x^ν x^j − S_αβ W_αjβν x^ν x^i
///         − (S_αi W_αμjν − S_αj W_αμiν) x^μ x^ν + δ_ij S_αβ W_αμβν x^μ x^ν].
pub fn weyl_t_density(s: &Tensor2, w: &Tensor4, x: &Vector4<f64>) -> Tensor2 {
    // v_i = S_αβ W_αiβν x^ν and wx_αj = W_αμjν x^μ x^ν.
    let mut v = Vector4::zeros();
    let mut wx = Matrix4::zeros();
    for al in 0..4 {
        for i in 0..4 {
            let mut acc_w = 0.0;
            for mu in 0..4 {
                for nu in 0..4 {
                    acc_w += w.get(al, mu, i, nu) * x[mu] * x[nu];
                }
            }
            wx[(al, i)] = acc_w;
        }
    }
    for i in 0..4 {
        let mut acc = 0.0;
        for al in 0..4 {
            for be in 0..4 {
                for nu in 0..4 {
                    acc += s[(al, be)] * w.get(al, i, be, nu) * x[nu];
                }
            }
        }
        v[i] = acc;
    }
    let swx = s.transpose() * wx;
    let full: f64 = s.component_mul(&wx).sum();
    let c = weyl_prefactor();
    Matrix4::from_fn(|i, j| {
        c * (v[i] * x[j] - v[j] * x[i] - (swx[(i, j)] - swx[(j, i)]) + delta(i, j) * full)
    })
}

/// ½⟨S, ∇σ⟩ ⊗ r dr − S∘σ + ¼⟨S, σ⟩ξ, with (⟨S, ∇σ⟩ ⊗ r dr)_ij = S_ab ∂_i σ_ab x^j
/// and (S∘σ)_ij = S_ik σ_jk.
pub fn phi_density(s: &Tensor2, sigma: &Tensor2, dsigma: &[Tensor2; 4], x: &Vector4<f64>) -> Tensor2 {
    let ds = Vector4::from_fn(|i, _| s.component_mul(&dsigma[i]).sum());
    ds * x.transpose() * 0.5 - s * sigma.transpose() + Matrix4::identity() * (0.25 * s.component_mul(sigma).sum())
}

/// −(1/π²)·phi_density with σ = γ(x) = −⅓ Rm(·, x, ·, x). For Rm = W this is
/// the integrand of the Weyl coupling in P.
pub fn gamma_form_density(s: &Tensor2, rm: &Tensor4, x: &Vector4<f64>) -> Tensor2 {
    let g = gamma_quadratic(rm, x);
    let dg = gamma_quadratic_grad(rm, x);
    phi_density(s, &g, &dg, x) * (-1.0 / (PI * PI))
}

/// Weyl part of P computed two ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylTerm {
    /// ∫ γ-form density; the tensor that enters P.
    pub gamma_form: Tensor2,
    /// ∫ ⟨S ⊗ W, T^{ij}⟩, to be compared with skew_trace(gamma_form).
    pub t_form: Tensor2,
    /// max |t_form − skew_trace(gamma_form)|.
    pub forms_mismatch: f64,
    /// Change under order doubling.
    pub refinement_delta: f64,
    /// True when the integrand vanishes identically and no quadrature ran.
    pub exact_zero: bool,
    pub nodes: usize,
}

impl WeylTerm {
    pub fn zero() -> Self {
        Self {
            gamma_form: Matrix4::zeros(),
            t_form: Matrix4::zeros(),
            forms_mismatch: 0.0,
            refinement_delta: 0.0,
            exact_zero: true,
            nodes: 0,
        }
    }
}

/// Weyl coupling of an arbitrary stress field on R⁴.
pub fn weyl_term_of_field<F>(s_field: F, w: &Tensor4, q: &QuadratureConfig, exec: Exec) -> Result<WeylTerm>
where
    F: Fn(&Vector4<f64>) -> Result<Tensor2> + Sync + Send,
{
    let integrand = |x: &Vector4<f64>| -> Result<(Tensor2, Tensor2)> {
        let s = s_field(x)?;
        Ok((gamma_form_density(&s, w, x), weyl_t_density(&s, w, x)))
    };
    let ((gamma_form, t_form), delta) = integrate_r4_checked(integrand, q, WEYL_REFINEMENT_TOL, exec)?;
    Ok(WeylTerm {
        forms_mismatch: (t_form - skew_trace(&gamma_form)).amax(),
        gamma_form,
        t_form,
        refinement_delta: delta,
        exact_zero: false,
        nodes: q.doubled().r4().len(),
    })
}

/// Both forms of the Weyl coupling at one quadrature rule, without the
/// order-doubling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylForms {
    pub gamma_form: Tensor2,
    pub t_form: Tensor2,
    /// max |t_form − skew_trace(gamma_form)|.
    pub forms_mismatch: f64,
}

pub fn weyl_forms_at<F>(s_field: F, w: &Tensor4, q: &QuadratureConfig, exec: Exec) -> Result<WeylForms>
where
    F: Fn(&Vector4<f64>) -> Result<Tensor2> + Sync + Send,
{
    let (gamma_form, t_form): (Tensor2, Tensor2) = q.r4().integrate(exec, |x: &Vector4<f64>| {
        let s = s_field(x)?;
        Ok((gamma_form_density(&s, w, x), weyl_t_density(&s, w, x)))
    })?;
    Ok(WeylForms { forms_mismatch: (t_form - skew_trace(&gamma_form)).amax(), gamma_form, t_form })
}

/// Weyl coupling of a bubble on flat R⁴. Chiral bubbles and W = 0 return an
/// exact zero without quadrature.
pub fn weyl_term(bubble: &Connection, w: &Tensor4, q: &QuadratureConfig, exec: Exec) -> Result<WeylTerm> {
    if bubble.declared_chirality().is_some() || w.max_abs() == 0.0 || matches!(bubble, Connection::Zero) {
        return Ok(WeylTerm::zero());
    }
    let flat = MetricAt::flat();
    weyl_term_of_field(|x| Ok(stress(&bubble.curvature(x)?, &flat)), w, q, exec)
}

/// Quadrature for the Φ check, whose exact value is small and needs tighter
/// resolution than the Weyl term.
pub fn kn_quadrature() -> QuadratureConfig {
    QuadratureConfig { sphere: SphereOrders::uniform(24), radial: 64, tail: 48, tail_r0: 2.0 }
}

/// Φ = ∫ phi_density with σ = (R⊙ξ)(·, x, ·, x). Traceless symmetric when S is
/// a divergence-free traceless field.
pub fn kn_phi<F>(s_field: F, r: &Tensor2, q: &QuadratureConfig, exec: Exec) -> Result<Tensor2>
where
    F: Fn(&Vector4<f64>) -> Result<Tensor2> + Sync + Send,
{
    let kn = kulkarni_nomizu(r, &Matrix4::identity());
    q.r4().integrate(exec, |x: &Vector4<f64>| -> Result<Tensor2> {
        let sigma = gamma_quadratic(&kn, x) * -3.0;
        let dsigma = gamma_quadratic_grad(&kn, x).map(|g| g * -3.0);
        Ok(phi_density(&s_field(x)?, &sigma, &dsigma, x))
    })
}

/// Weyl part of Σ A⊙B over symmetrized pairs; every algebraic Weyl tensor
/// arises this way.
pub fn algebraic_weyl(pairs: &[(Tensor2, Tensor2)]) -> Tensor4 {
    let mut rm = Tensor4::zeros();
    for (a, b) in pairs {
        let a = (a + a.transpose()) * 0.5;
        let b = (b + b.transpose()) * 0.5;
        rm = rm.add(&kulkarni_nomizu(&a, &b));
    }
    CurvatureAtPoint::from_riemann(rm, &MetricAt::flat()).weyl
}

/// S_ij = C_ikjl ∂_k∂_l φ with φ = (λ² + |x − c|²)⁻³ and C Weyl-symmetric:
/// symmetric, traceless and divergence-free on flat R⁴.
#[derive(Debug, Clone)]
pub struct SyntheticStress {
    pub c: Tensor4,
    pub scale: f64,
    pub center: Vector4<f64>,
}

impl SyntheticStress {
    pub fn new(c: Tensor4, scale: f64, center: Vector4<f64>) -> Self {
        Self { c, scale, center }
    }

    /// ∂_k∂_l φ = −6δ_kl u⁻⁴ + 48 y_k y_l u⁻⁵; the δ part drops against trace-free C.
    pub fn eval(&self, x: &Vector4<f64>) -> Tensor2 {
        let y = x - self.center;
        let u = self.scale * self.scale + y.norm_squared();
        let k = 48.0 / u.powi(5);
        let mut s = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        acc += self.c.get(i, a, j, b) * y[a] * y[b];
                    }
                }
                s[(i, j)] = k * acc;
            }
        }
        s
    }
}

/// ⟨F, [G, q_i]⟩ for i = 1..3, by brackets of the Lie coefficients.
pub fn gauge_obstruction(f_inf: &GForm2, f_tilde: &GForm2) -> Vector3<f64> {
    let flat = MetricAt::flat();
    Vector3::from_fn(|i, _| {
        let qi = LieElement::basis(i);
        let mut parts = [Matrix4::zeros(); 3];
        for b in 0..3 {
            let c = bracket(&LieElement::basis(b), &qi).to_vector();
            for (k, part) in parts.iter_mut().enumerate() {
                *part += f_tilde.parts[b] * c[k];
            }
        }
        inner_forms(f_inf, &GForm2::from_parts(parts), &flat)
    })
}

/// F = Σ_b (Σ_a m_ab θ^a) ⊗ q_b in the flat chiral frame θ, so that
/// f_map(F, ξ, chirality) = m.
pub fn form_with_fmap(m: &Matrix3<f64>, chirality: i32) -> GForm2 {
    let th = chiral_frame_flat(chirality);
    GForm2::from_parts([0, 1, 2].map(|b| th[0] * m[(0, b)] + th[1] * m[(1, b)] + th[2] * m[(2, b)]))
}

/// M_ab = ⟨F_a, G_b⟩, the matrix of F*G on 𝔤.
pub fn gauge_pairing_matrix(f_inf: &GForm2, f_tilde: &GForm2) -> Matrix3<f64> {
    let flat = MetricAt::flat();
    Matrix3::from_fn(|a, b| inner_real(&f_inf.parts[a], &f_tilde.parts[b], &flat))
}

/// The gauge obstruction read off the skew part of M: √2(M₂₃ − M₃₂, M₃₁ − M₁₃, M₁₂ − M₂₁).
pub fn gauge_obstruction_from_matrix(m: &Matrix3<f64>) -> Vector3<f64> {
    let r = std::f64::consts::SQRT_2;
    Vector3::new(r * (m[(1, 2)] - m[(2, 1)]), r * (m[(2, 0)] - m[(0, 2)]), r * (m[(0, 1)] - m[(1, 0)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compatible,
    Excluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignPattern {
    pub signs: [i32; 3],
    pub sum: f64,
}

/// All eight signed sums ±σ₁ ± σ₂ ± σ₃ of a symmetric matrix's possible
/// eigenvalues. A trace-free symmetric matrix with these singular values
/// exists iff some sum vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignAnalysis {
    pub singular_values: [f64; 3],
    pub patterns: Vec<SignPattern>,
    pub min_abs_sum: f64,
    pub feasible: Option<[i32; 3]>,
    pub tolerance: f64,
}

/// Sorted singular values, largest first.
pub fn singular_values_desc(m: &Matrix3<f64>) -> [f64; 3] {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    [s[0], s[1], s[2]]
}

/// Enumerates sign patterns; a pattern is feasible when |sum| ≤ tol·max σ.
pub fn sign_analysis(sv: [f64; 3], tol: f64) -> SignAnalysis {
    let smax = sv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut patterns = Vec::with_capacity(8);
    let mut feasible = None;
    let mut min_abs = f64::INFINITY;
    for mask in 0..8u32 {
        let signs = [0, 1, 2].map(|k| if mask & (1 << k) == 0 { 1 } else { -1 });
        let sum: f64 = (0..3).map(|k| signs[k] as f64 * sv[k]).sum();
        min_abs = min_abs.min(sum.abs());
        if feasible.is_none() && sum.abs() <= tol * smax {
            feasible = Some(signs);
        }
        patterns.push(SignPattern { signs, sum });
    }
    SignAnalysis { singular_values: sv, patterns, min_abs_sum: min_abs, feasible, tolerance: tol }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchVerdict {
    /// s = f∞ᵀ f̃∞.
    pub s: Matrix3<f64>,
    /// α with s sᵀ = α² id.
    pub conformal_factor: f64,
    /// max |s − sᵀ|.
    pub asymmetry: f64,
    pub trace: f64,
    pub analysis: SignAnalysis,
    pub verdict: Verdict,
    pub reason: String,
}

fn conformal_spread(m: &Matrix3<f64>) -> Result<f64> {
    let sv = singular_values_desc(m);
    if sv[0] == 0.0 {
        return Err(Error::InvalidParameter("zero f-map".into()));
    }
    let spread = (sv[0] - sv[2]) / sv[0];
    if spread > CONFORMAL_TOL {
        return Err(Error::NonConformal(spread));
    }
    Ok(sv[0])
}

/// Two equal-chirality conformal f-maps: s = f∞ᵀf̃∞ is conformal, so its
/// eigenvalues are ±α and no sign pattern is trace-free.
pub fn branch_sign_check(f_inf: &Matrix3<f64>, f_tilde: &Matrix3<f64>) -> Result<BranchVerdict> {
    let a = conformal_spread(f_inf)?;
    let b = conformal_spread(f_tilde)?;
    let s = f_inf.transpose() * f_tilde;
    let analysis = sign_analysis(singular_values_desc(&s), CONFORMAL_TOL);
    let asymmetry = (s - s.transpose()).amax();
    let trace = s.trace();
    let (verdict, reason) = match analysis.feasible {
        None => {
            let violated = if asymmetry > CONFORMAL_TOL * a * b {
                format!("s is not symmetric (asymmetry {asymmetry:.3e})")
            } else {
                format!("s is symmetric with trace {trace:.6} ≠ 0")
            };
            (Verdict::Excluded, format!("s is conformal, no trace-free sign pattern exists; {violated}"))
        }
        Some(signs) => (Verdict::Compatible, format!("sign pattern {signs:?} is trace-free")),
    };
    Ok(BranchVerdict { s, conformal_factor: a * b, asymmetry, trace, analysis, verdict, reason })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cp2Sample {
    pub t: f64,
    pub z: [f64; 4],
    pub beta: f64,
    /// max over the two small singular values of |σ_k/σ₁ − β| of the Groisser f-map.
    pub ratio_error: f64,
    pub min_abs_sum: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cp2Verdict {
    pub samples: Vec<Cp2Sample>,
    pub max_beta: f64,
    pub max_ratio_error: f64,
    pub verdict: Verdict,
}

/// Default sample points in affine coordinates: |z| ∈ {0, 1, 3}.
pub fn cp2_default_points() -> Vec<Vector4<f64>> {
    vec![
        Vector4::zeros(),
        Vector4::new(1.0, 0.0, 0.0, 0.0),
        Vector4::new(0.0, 0.6, 0.0, 0.8),
        Vector4::new(0.0, 0.0, 3.0, 0.0),
        Vector4::new(1.5, -1.5, 1.5, 1.5),
    ]
}

pub fn cp2_default_t_grid() -> Vec<f64> {
    (0..10).map(|k| k as f64 / 10.0).collect()
}

/// Against a conformal bubble, s has singular values ∝ (1, β, β). With
/// β = t/(2√D) < ½ no signed sum vanishes.
pub fn cp2_exclusion_check(t: f64, points: &[Vector4<f64>]) -> Result<Cp2Verdict> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1)")));
    }
    let mut samples = Vec::with_capacity(points.len());
    for z in points {
        let beta = groisser_beta(t, z);
        let m = MetricAt::new(fubini_study_affine(z))?;
        let sv = singular_values_desc(&f_map(&groisser_curvature(t, z)?, &m, 1));
        let ratio_error = (sv[1] / sv[0] - beta).abs().max((sv[2] / sv[0] - beta).abs());
        let analysis = sign_analysis([1.0, beta, beta], 1e-12);
        samples.push(Cp2Sample {
            t,
            z: [z[0], z[1], z[2], z[3]],
            beta,
            ratio_error,
            min_abs_sum: analysis.min_abs_sum,
            excluded: analysis.feasible.is_none(),
        });
    }
    let verdict = if samples.iter().all(|s| s.excluded) { Verdict::Excluded } else { Verdict::Compatible };
    Ok(Cp2Verdict {
        max_beta: samples.iter().map(|s| s.beta).fold(0.0, f64::max),
        max_ratio_error: samples.iter().map(|s| s.ratio_error).fold(0.0, f64::max),
        samples,
        verdict,
    })
}

fn default_tolerance() -> f64 {
    1e-8
}

/// A limit connection and one bubble concentrating at the chart origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubblingConfig {
    pub metric: MetricField,
    /// A∞, written in the model chart of `metric`.
    pub limit: Connection,
    /// Â∞ on flat R⁴.
    pub bubble: Connection,
    #[serde(default = "weyl_quadrature")]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub rays: RayExtrapolation,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl BubblingConfig {
    pub fn new(metric: MetricField, limit: Connection, bubble: Connection) -> Self {
        Self { metric, limit, bubble, quadrature: weyl_quadrature(), rays: RayExtrapolation::default(), tolerance: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !self.metric.is_normal_chart() {
            return Err(Error::InvalidParameter(format!("metric {} is not in normal coordinates", self.metric.id())));
        }
        if matches!(self.bubble, Connection::Zero) {
            return Err(Error::InvalidParameter("bubble has zero energy".into()));
        }
        Ok(())
    }
}

/// The pair of constraints left when the Weyl term vanishes: the skew part
/// of F∞∘F̃ and ⟨F∞, F̃⟩ at 0 must both vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiralConstraints {
    pub skew: Tensor2,
    pub inner: f64,
    /// |⟨F∞, F̃⟩ − tr(F∞∘F̃)|.
    pub trace_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub metric: String,
    pub limit: String,
    pub bubble: String,
    pub p: Tensor2,
    pub pairing_term: Tensor2,
    pub weyl_term: Tensor2,
    pub weyl: WeylTerm,
    /// P_[ij] + tr(P)δ_ij from the T^{ij} contraction; zero for an admissible pair.
    pub componentwise: Tensor2,
    pub gauge_obstruction: [f64; 3],
    pub conf_residual: ConfResidual,
    pub limit_chirality: Option<i32>,
    pub bubble_tilde_chirality: Option<i32>,
    pub chiral_constraints: Option<ChiralConstraints>,
    pub sign_analysis: Option<SignAnalysis>,
    pub verdict: Verdict,
    pub reason: String,
}

/// +1, −1 when F is SD, ASD to CHIRAL_TOL; None for zero or mixed forms.
pub fn pure_chirality(f: &GForm2, m: &MetricAt) -> Option<i32> {
    let n = f.norm_max();
    if n == 0.0 {
        return None;
    }
    [1, -1].into_iter().find(|&c| chirality_defect(f, m, c) <= CHIRAL_TOL * n)
}

pub fn assemble_report(cfg: &BubblingConfig, exec: Exec) -> Result<ObstructionReport> {
    cfg.validate()?;
    let flat = MetricAt::flat();
    let origin = Vector4::zeros();
    let limit = cfg.limit.clone().on_metric(&cfg.metric);
    let f_inf = limit.curvature(&origin)?;
    if !f_inf.is_finite() {
        return Err(Error::SingularPoint);
    }
    let f_tilde = limit_curvature_at_origin(&cfg.bubble.clone().inverted(), &cfg.rays)?;
    let pairing = pairing_term(&f_inf, &f_tilde);
    let w = if cfg.metric.is_conformally_flat() { Tensor4::zeros() } else { cfg.metric.weyl(&origin)? };
    let weyl = weyl_term(&cfg.bubble, &w, &cfg.quadrature, exec)?;
    let p = pairing + weyl.gamma_form;
    let componentwise = skew_trace(&pairing) + weyl.t_form;
    let conf = conf_residual(&p);
    let gauge = gauge_obstruction(&f_inf, &f_tilde);

    let c_inf = pure_chirality(&f_inf, &flat);
    let c_tilde = pure_chirality(&f_tilde, &flat);
    let chiral_constraints = weyl.exact_zero.then(|| {
        let inner = inner_forms(&f_inf, &f_tilde, &flat);
        ChiralConstraints { skew: pairing - pairing.transpose(), inner, trace_mismatch: (inner - pairing.trace()).abs() }
    });
    let sign = match (weyl.exact_zero, c_inf, c_tilde) {
        (true, Some(a), Some(b)) if a == b => {
            let s = f_map(&f_inf, &flat, a).transpose() * f_map(&f_tilde, &flat, a);
            Some(sign_analysis(singular_values_desc(&s), cfg.tolerance))
        }
        _ => None,
    };

    let scale = pairing.amax().max(weyl.gamma_form.amax()).max(1.0);
    let (verdict, reason) = if let Some(a) = sign.as_ref().filter(|a| a.feasible.is_none()) {
        let sv = a.singular_values;
        (
            Verdict::Excluded,
            format!(
                "equal chirality at the concentration point; singular values ({:.6}, {:.6}, {:.6}) of f∞ᵀf̃∞ admit no trace-free sign pattern",
                sv[0], sv[1], sv[2]
            ),
        )
    } else if conf.total() > cfg.tolerance * scale {
        (Verdict::Excluded, format!("P has a conf(4) component of size {:.3e} for this gauge representative", conf.total()))
    } else if gauge.amax() > cfg.tolerance * scale {
        (Verdict::Excluded, format!("gauge obstruction {:.3e} is nonzero", gauge.amax()))
    } else {
        (Verdict::Compatible, "P is traceless symmetric and the gauge obstruction vanishes".into())
    };

    Ok(ObstructionReport {
        metric: cfg.metric.id(),
        limit: limit.label(),
        bubble: cfg.bubble.label(),
        p,
        pairing_term: pairing,
        weyl_term: weyl.gamma_form,
        weyl,
        componentwise,
        gauge_obstruction: [gauge[0], gauge[1], gauge[2]],
        conf_residual: conf,
        limit_chirality: c_inf,
        bubble_tilde_chirality: c_tilde,
        chiral_constraints,
        sign_analysis: sign,
        verdict,
        reason,
    })
}
