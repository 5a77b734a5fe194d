//! Harmonic spaces on R⁴ ∖ {0}, the moment map Φ, and least-squares
//! decomposition of 1-forms on degenerating annuli B₁ ∖ B_λ.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::exterior::GForm1;
use crate::fd;
use crate::gauge::{Pole, ThooftPotential};
use crate::geometry::MetricField;
use crate::lie::{LieElement, SQRT2};
use crate::poly::{Poly, Term};
use crate::quadrature::{SphereOrders, SphereRule};

/// ω_λ(x) = |x| + λ/|x|.
pub fn omega_lambda(x: &Vector4<f64>, lambda: f64) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    Ok(omega_radial(r, lambda))
}

pub fn omega_radial(r: f64, lambda: f64) -> f64 {
    r + lambda / r
}

/// Harmonic homogeneous polynomials of degree d, as the null space of the
/// exact Laplacian on degree-d monomials.
pub fn harmonic_polynomials(d: u32) -> Vec<Poly> {
    let mons = Poly::monomial_exponents(d);
    if d < 2 {
        return mons.into_iter().map(|e| Poly::monomial(1.0, e)).collect();
    }
    let lower = Poly::monomial_exponents(d - 2);
    let mut l = DMatrix::<f64>::zeros(lower.len(), mons.len());
    for (c, e) in mons.iter().enumerate() {
        for t in Poly::monomial(1.0, *e).laplacian().terms {
            let r = lower.iter().position(|x| *x == t.exps).expect("degree d−2 monomial");
            l[(r, c)] += t.coef;
        }
    }
    let eig = SymmetricEigen::new(l.transpose() * &l);
    let mut out = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() < 1e-9 {
            let v = eig.eigenvectors.column(k);
            let terms = mons
                .iter()
                .zip(v.iter())
                .filter(|(_, c)| c.abs() > 1e-14)
                .map(|(e, c)| Term { coef: *c, exps: *e, rpow: 0 })
                .collect();
            out.push(Poly { terms });
        }
    }
    out
}

/// Bases of H_α (harmonic polynomials of degree < α − 1) and of H̄_α, the
/// polynomials followed by their Kelvin partners |x|⁻² Q(x/|x|²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBasis {
    pub alpha: f64,
    pub h: Vec<Poly>,
    pub hbar: Vec<Poly>,
}

pub fn harmonic_basis(alpha: f64) -> Result<HarmonicBasis> {
    if !(alpha > 1.0) || alpha.fract() == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("α = {alpha} must be a non-integer greater than 1")));
    }
    let max_deg = (alpha - 1.0).ceil() as u32 - 1;
    let h: Vec<Poly> = (0..=max_deg).flat_map(harmonic_polynomials).collect();
    let mut hbar = h.clone();
    hbar.extend(h.iter().map(|p| p.kelvin()));
    Ok(HarmonicBasis { alpha, h, hbar })
}

impl HarmonicBasis {
    pub fn max_degree(&self) -> u32 {
        self.h.iter().flat_map(|p| p.terms.iter().map(|t| t.degree())).max().unwrap_or(0)
    }

    /// Largest coefficient of the exact Laplacian over all elements of H̄_α.
    pub fn laplacian_residual(&self) -> f64 {
        self.hbar.iter().map(|p| p.laplacian().max_abs_coef()).fold(0.0, f64::max)
    }

    /// Sphere rule converged to round-off for the products entering Φ.
    pub fn sphere_rule(&self) -> SphereRule {
        SphereRule::new(SphereOrders::uniform(8 * (self.max_degree() as usize + 2)))
    }
}

/// Φ(θ)φ = ∫_{S³} (θ, ∂_r θ)(ρω) φ(ω) dω for each φ in the H_α basis:
/// values first, then radial derivatives.
pub fn phi_map(theta: &Poly, basis: &[Poly], rho: f64, rule: &SphereRule) -> DVector<f64> {
    let n = basis.len();
    let mut out = DVector::zeros(2 * n);
    for (w, x) in rule.rule.weights.iter().zip(&rule.rule.nodes) {
        let y = x * rho;
        let v = theta.eval(&y);
        let dv = theta.radial_derivative(&y);
        for (k, p) in basis.iter().enumerate() {
            let pk = p.eval(x);
            out[k] += w * v * pk;
            out[n + k] += w * dv * pk;
        }
    }
    out
}

/// Φ in the chosen bases, with its conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiMatrix {
    pub alpha: f64,
    pub rho: f64,
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub smallest_singular_value: f64,
    pub condition_number: f64,
}

pub fn phi_matrix(basis: &HarmonicBasis, rho: f64, rule: &SphereRule) -> PhiMatrix {
    let n = basis.hbar.len();
    let mut m = DMatrix::zeros(n, n);
    for (c, theta) in basis.hbar.iter().enumerate() {
        m.set_column(c, &phi_map(theta, &basis.h, rho, rule));
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smallest = *sv.last().unwrap_or(&0.0);
    PhiMatrix {
        alpha: basis.alpha,
        rho,
        condition_number: if smallest > 0.0 { sv[0] / smallest } else { f64::INFINITY },
        smallest_singular_value: smallest,
        singular_values: sv,
        matrix: m,
    }
}

/// A real function on R⁴.
pub type ScalarFn = dyn Fn(&Vector4<f64>) -> f64 + Sync;

/// Gram matrix ∫_{S³} f_a f_b of the given functions.
pub fn gram_matrix(fs: &[&ScalarFn], rule: &SphereRule) -> DMatrix<f64> {
    let n = fs.len();
    let mut g = DMatrix::zeros(n, n);
    for (w, x) in rule.rule.weights.iter().zip(&rule.rule.nodes) {
        let v: Vec<f64> = fs.iter().map(|f| f(x)).collect();
        for a in 0..n {
            for b in 0..n {
                g[(a, b)] += w * v[a] * v[b];
            }
        }
    }
    g
}

/// The 14 functions x^j (j ≤ 4) and x^i x^j (i ≤ j) on S³.
pub fn radial_projection_functions() -> Vec<Poly> {
    let mut fs: Vec<Poly> = (0..4).map(Poly::coordinate).collect();
    for i in 0..4 {
        for j in i..4 {
            fs.push(Poly::coordinate(i).mul(&Poly::coordinate(j)));
        }
    }
    fs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCheck {
    pub singular_values: Vec<f64>,
    pub smallest_singular_value: f64,
}

pub fn gram_check(fs: &[&ScalarFn], rule: &SphereRule) -> GramCheck {
    let mut sv: Vec<f64> = gram_matrix(fs, rule).singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    GramCheck { smallest_singular_value: *sv.last().unwrap_or(&0.0), singular_values: sv }
}

/// Linear independence of {x^j, x^i x^j} on S³, as the smallest singular
/// value of their Gram matrix.
pub fn radial_harmonic_projection_check() -> GramCheck {
    let polys = radial_projection_functions();
    let fs: Vec<Box<ScalarFn>> =
        polys.into_iter().map(|p| Box::new(move |x: &Vector4<f64>| p.eval(x)) as Box<_>).collect();
    let refs: Vec<&ScalarFn> = fs.iter().map(|b| b.as_ref()).collect();
    gram_check(&refs, &SphereRule::new(SphereOrders::uniform(16)))
}

/// The unique θ ∈ H̄_α with the Φ-moments of v on ∂B_ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMatch {
    pub rho: f64,
    pub coefficients: Vec<f64>,
    pub theta: Poly,
    /// (r, max over the sphere of r|v − θ|, ω_λ(r)^α).
    pub rows: Vec<(f64, f64, f64)>,
}

/// v is given with its radial derivative. The fit uses ρ = √λ.
pub fn harmonic_match(
    v: &(dyn Fn(&Vector4<f64>) -> Result<(f64, f64)> + Sync),
    lambda: f64,
    basis: &HarmonicBasis,
    radii: &[f64],
) -> Result<HarmonicMatch> {
    let rho = lambda.sqrt();
    let rule = basis.sphere_rule();
    let phi = phi_matrix(basis, rho, &rule);
    let n = basis.h.len();
    let mut moments = DVector::zeros(2 * n);
    for (w, x) in rule.rule.weights.iter().zip(&rule.rule.nodes) {
        let (val, dr) = v(&(x * rho))?;
        for (k, p) in basis.h.iter().enumerate() {
            let pk = p.eval(x);
            moments[k] += w * val * pk;
            moments[n + k] += w * dr * pk;
        }
    }
    let c = phi
        .matrix
        .clone()
        .svd(true, true)
        .solve(&moments, 1e-14 * phi.singular_values[0])
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let mut theta = Poly::zero();
    for (k, p) in basis.hbar.iter().enumerate() {
        theta = theta.add(&p.scale(c[k]));
    }
    let check = SphereRule::new(SphereOrders::uniform(6));
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst: f64 = 0.0;
        for x in &check.rule.nodes {
            let y = x * r;
            worst = worst.max(r * (v(&y)?.0 - theta.eval(&y)).abs());
        }
        rows.push((r, worst, omega_radial(r, lambda).powf(basis.alpha)));
    }
    Ok(HarmonicMatch { rho, coefficients: c.iter().copied().collect(), theta, rows })
}

/// Index pairs i < j in a fixed order.
pub fn pairs_lt() -> Vec<(usize, usize)> {
    (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j))).collect()
}

/// Index pairs i ≤ j in a fixed order.
pub fn pairs_le() -> Vec<(usize, usize)> {
    (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect()
}

/// φ^{ij} = (x^i dx^j − x^j dx^i)/2.
pub fn phi_form(x: &Vector4<f64>, i: usize, j: usize) -> Vector4<f64> {
    let mut v = Vector4::zeros();
    v[j] += 0.5 * x[i];
    v[i] -= 0.5 * x[j];
    v
}

/// d(½x^i x^j): ψ^{ij} = (x^i dx^j + x^j dx^i)/2 for i < j and x^i dx^i for i = j.
pub fn nu_form(x: &Vector4<f64>, i: usize, j: usize) -> Vector4<f64> {
    let mut v = Vector4::zeros();
    if i == j {
        v[i] = x[i];
    } else {
        v[j] += 0.5 * x[i];
        v[i] += 0.5 * x[j];
    }
    v
}

/// Number of real model columns per Lie component: 6 a, 6 b, 4 β, 10 ν.
pub const MODEL_COLUMNS: usize = 26;

/// The model 1-forms at x, in column order a (6), b (6), β (4), ν (10).
pub fn model_columns_at(x: &Vector4<f64>) -> [Vector4<f64>; MODEL_COLUMNS] {
    let r4 = x.norm_squared().powi(2);
    let mut cols = [Vector4::zeros(); MODEL_COLUMNS];
    for (k, (i, j)) in pairs_lt().into_iter().enumerate() {
        let p = phi_form(x, i, j);
        cols[k] = p / r4;
        cols[6 + k] = p;
    }
    for j in 0..4 {
        cols[12 + j][j] = 1.0;
    }
    for (k, (i, j)) in pairs_le().into_iter().enumerate() {
        cols[16 + k] = nu_form(x, i, j);
    }
    cols
}

/// Samples of a 𝔤-valued 1-form on an annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckSamples {
    pub lambda: f64,
    pub points: Vec<[f64; 4]>,
    pub values: Vec<GForm1>,
}

/// Geometric radii in [2λ, 1/2] times the nodes of a sphere rule.
pub fn annulus_points(lambda: f64, radii: usize, sphere: SphereOrders) -> Vec<Vector4<f64>> {
    let rule = SphereRule::new(sphere);
    let (a, b) = ((2.0 * lambda).ln(), 0.5f64.ln());
    let mut pts = Vec::with_capacity(radii * rule.rule.len());
    for k in 0..radii {
        let r = (a + (b - a) * k as f64 / (radii.max(2) - 1) as f64).exp();
        pts.extend(rule.rule.nodes.iter().map(|x| x * r));
    }
    pts
}

/// Default grid: 8 radii × a degree-8 sphere rule.
pub fn default_annulus_points(lambda: f64) -> Vec<Vector4<f64>> {
    annulus_points(lambda, 8, SphereOrders::uniform(4))
}

impl NeckSamples {
    pub fn from_fn(
        lambda: f64,
        points: &[Vector4<f64>],
        e: &(dyn Fn(&Vector4<f64>) -> Result<GForm1> + Sync),
        exec: Exec,
    ) -> Result<Self> {
        let values = exec.try_map(points.len(), |k| e(&points[k]))?;
        Ok(Self { lambda, points: points.iter().map(|p| [p[0], p[1], p[2], p[3]]).collect(), values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCoefficient {
    pub i: usize,
    pub j: usize,
    pub value: LieElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub r: f64,
    pub omega: f64,
    /// max r|ẽ| on the sphere of radius r.
    pub residual: f64,
    /// residual / ω^α.
    pub residual_ratio: f64,
    /// (Σ r|β_j| + Σ r²|ν_ij| + Σ r⁻²|a_ij| + r²|b_ij|) / ω².
    pub coefficient_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckDecomposition {
    pub lambda: f64,
    pub alpha: f64,
    pub a: Vec<PairCoefficient>,
    pub b: Vec<PairCoefficient>,
    pub beta: [LieElement; 4],
    pub nu: Vec<PairCoefficient>,
    pub nu_trace: LieElement,
    pub residual: Vec<GForm1>,
    pub max_residual: f64,
    pub rows: Vec<RadiusRow>,
    /// max residual_ratio over the rows with r ∈ [2λ, 1/2].
    pub residual_constant: f64,
    /// max coefficient_ratio over the same rows.
    pub coefficient_constant: f64,
    pub condition_number: f64,
    /// max |d*e| over the samples, when e was given as a function.
    pub divergence: Option<f64>,
}

pub fn form_norm(e: &GForm1) -> f64 {
    e.parts.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt()
}

/// Weighted least squares of e against {(r⁻⁴a + b)φ^{ij}} ∪ {dη}, one real
/// problem per Lie component, rows weighted by r/ω_λ² and columns equilibrated.
pub fn decompose_neck_form(samples: &NeckSamples, alpha: f64) -> Result<NeckDecomposition> {
    let lambda = samples.lambda;
    if !(lambda > 0.0 && lambda <= 0.25) {
        return Err(Error::IllConditioned(format!("annulus too thin for λ = {lambda}; need λ ≤ 1/4")));
    }
    if samples.points.len() != samples.values.len() || samples.points.is_empty() {
        return Err(Error::InvalidParameter("sample points and values differ in length".into()));
    }
    let n = samples.points.len();
    let mut x_mat = DMatrix::zeros(4 * n, MODEL_COLUMNS);
    let mut y = DMatrix::zeros(4 * n, 3);
    for (s, (p, v)) in samples.points.iter().zip(&samples.values).enumerate() {
        let x = Vector4::from(*p);
        let r = x.norm();
        if r == 0.0 {
            return Err(Error::SingularPoint);
        }
        let w = r / omega_radial(r, lambda).powi(2);
        let cols = model_columns_at(&x);
        for k in 0..4 {
            for (c, col) in cols.iter().enumerate() {
                x_mat[(4 * s + k, c)] = w * col[k];
            }
            for a in 0..3 {
                y[(4 * s + k, a)] = w * v.parts[a][k];
            }
        }
    }
    let scales: Vec<f64> = (0..MODEL_COLUMNS).map(|c| x_mat.column(c).norm()).collect();
    if scales.contains(&0.0) {
        return Err(Error::IllConditioned("a model column vanishes on the samples".into()));
    }
    for (c, s) in scales.iter().enumerate() {
        x_mat.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = x_mat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = smax / smin;
    if !(condition_number < 1e12) {
        return Err(Error::IllConditioned(format!("condition number {condition_number:.3e}")));
    }
    let mut coef = svd.solve(&y, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    // One step of iterative refinement.
    let r = &y - &x_mat * &coef;
    coef += svd.solve(&r, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    for (c, s) in scales.iter().enumerate() {
        coef.row_mut(c).scale_mut(1.0 / s);
    }
    let lie = |c: usize| LieElement::new(coef[(c, 0)], coef[(c, 1)], coef[(c, 2)]);

    let lt = pairs_lt();
    let le = pairs_le();
    let a: Vec<PairCoefficient> = lt.iter().enumerate().map(|(k, &(i, j))| PairCoefficient { i, j, value: lie(k) }).collect();
    let b: Vec<PairCoefficient> = lt.iter().enumerate().map(|(k, &(i, j))| PairCoefficient { i, j, value: lie(6 + k) }).collect();
    let beta = [lie(12), lie(13), lie(14), lie(15)];
    let nu: Vec<PairCoefficient> = le.iter().enumerate().map(|(k, &(i, j))| PairCoefficient { i, j, value: lie(16 + k) }).collect();
    let nu_trace = nu.iter().filter(|p| p.i == p.j).fold(LieElement::default(), |s, p| s + p.value);

    let mut residual = Vec::with_capacity(n);
    for (p, v) in samples.points.iter().zip(&samples.values) {
        let x = Vector4::from(*p);
        let cols = model_columns_at(&x);
        let mut model = GForm1::zero();
        for (c, col) in cols.iter().enumerate() {
            for a in 0..3 {
                model.parts[a] += col * coef[(c, a)];
            }
        }
        residual.push(*v - model);
    }
    let max_residual = residual.iter().map(form_norm).fold(0.0, f64::max);

    let coef_sum = |r: f64| -> f64 {
        beta.iter().map(|v| r * v.norm()).sum::<f64>()
            + nu.iter().map(|v| r * r * v.value.norm()).sum::<f64>()
            + a.iter().map(|v| v.value.norm() / (r * r)).sum::<f64>()
            + b.iter().map(|v| r * r * v.value.norm()).sum::<f64>()
    };
    let mut by_radius: Vec<(f64, f64)> = Vec::new();
    for (p, e) in samples.points.iter().zip(&residual) {
        let r = Vector4::from(*p).norm();
        let v = r * form_norm(e);
        match by_radius.iter_mut().find(|(rr, _)| (rr - r).abs() <= 1e-12 * r) {
            Some(row) => row.1 = row.1.max(v),
            None => by_radius.push((r, v)),
        }
    }
    by_radius.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rows: Vec<RadiusRow> = by_radius
        .into_iter()
        .map(|(r, res)| {
            let omega = omega_radial(r, lambda);
            RadiusRow {
                r,
                omega,
                residual: res,
                residual_ratio: res / omega.powf(alpha),
                coefficient_ratio: coef_sum(r) / (omega * omega),
            }
        })
        .collect();
    let inside = |row: &&RadiusRow| row.r >= 2.0 * lambda * (1.0 - 1e-12) && row.r <= 0.5 * (1.0 + 1e-12);
    let residual_constant = rows.iter().filter(inside).map(|r| r.residual_ratio).fold(0.0, f64::max);
    let coefficient_constant = rows.iter().filter(inside).map(|r| r.coefficient_ratio).fold(0.0, f64::max);

    Ok(NeckDecomposition {
        lambda,
        alpha,
        a,
        b,
        beta,
        nu,
        nu_trace,
        residual,
        max_residual,
        rows,
        residual_constant,
        coefficient_constant,
        condition_number,
        divergence: None,
    })
}

/// Flat codifferential d*e = −Σ_k ∂_k e_k, per Lie component.
pub fn flat_divergence(e: &(dyn Fn(&Vector4<f64>) -> Result<GForm1> + Sync), x: &Vector4<f64>) -> Result<LieElement> {
    let g = fd::gradient(&|p: &Vector4<f64>| e(p), x, 1e-4 * x.norm().max(1e-3))?;
    let mut d = [0.0; 3];
    for (a, da) in d.iter_mut().enumerate() {
        *da = -(0..4).map(|k| g[k].parts[a][k]).sum::<f64>();
    }
    Ok(LieElement::new(d[0], d[1], d[2]))
}

/// Samples e on the default grid, checks d*e = 0 and decomposes.
pub fn decompose_neck_fn(
    e: &(dyn Fn(&Vector4<f64>) -> Result<GForm1> + Sync),
    lambda: f64,
    alpha: f64,
    points: &[Vector4<f64>],
    exec: Exec,
) -> Result<NeckDecomposition> {
    let samples = NeckSamples::from_fn(lambda, points, e, exec)?;
    let mut out = decompose_neck_form(&samples, alpha)?;
    let div = exec.try_map(points.len(), |k| flat_divergence(e, &points[k]).map(|d| d.norm() * points[k].norm().powi(2)))?;
    out.divergence = Some(div.into_iter().fold(0.0, f64::max));
    Ok(out)
}

/// The neck error form of the two-pole 't Hooft instanton: with
/// φ = 1 + λ²/|x|² + ρ²/|x − p|², e = A_φ − A_{1+ρ²/|x−p|²} − A_{1+λ²/|x|²}.
/// The three potentials are in singular gauge, so e is divergence-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPoleNeck {
    pub lambda: f64,
    pub rho: f64,
    pub far_center: [f64; 4],
}

impl TwoPoleNeck {
    pub fn new(lambda: f64, rho: f64, far_center: [f64; 4]) -> Self {
        Self { lambda, rho, far_center }
    }

    fn potential(poles: Vec<Pole>) -> ThooftPotential {
        ThooftPotential { chirality: -1, coupling: -1.0 / SQRT2, constant: 1.0, poles }
    }

    pub fn glued(&self) -> ThooftPotential {
        Self::potential(vec![self.near_pole(), self.far_pole()])
    }

    pub fn limit(&self) -> ThooftPotential {
        Self::potential(vec![self.far_pole()])
    }

    pub fn bubble(&self) -> ThooftPotential {
        Self::potential(vec![self.near_pole()])
    }

    fn near_pole(&self) -> Pole {
        Pole { weight: self.lambda * self.lambda, center: [0.0; 4], power: -2 }
    }

    fn far_pole(&self) -> Pole {
        Pole { weight: self.rho * self.rho, center: self.far_center, power: -2 }
    }

    pub fn error_form(&self, x: &Vector4<f64>) -> Result<GForm1> {
        Ok(self.glued().jet(x)?.a - self.limit().jet(x)?.a - self.bubble().jet(x)?.a)
    }
}

/// Hodge Laplacian dd* + d*d of one real 1-form in the chart metric h, by
/// nested central differences with step proportional to |x|.
fn hodge_laplacian(
    a: &(dyn Fn(&Vector4<f64>) -> Result<Vector4<f64>> + Sync),
    metric: &MetricField,
    x: &Vector4<f64>,
) -> Result<Vector4<f64>> {
    let step = 2e-3 * x.norm();
    let codiff = |p: &Vector4<f64>| -> Result<f64> {
        let v = |q: &Vector4<f64>| -> Result<Vector4<f64>> {
            let m = metric.metric_at(q)?;
            Ok(m.inv * a(q)? * m.sqrt_det)
        };
        let g = fd::gradient(&v, p, step)?;
        let m = metric.metric_at(p)?;
        Ok(-(0..4).map(|k| g[k][k]).sum::<f64>() / m.sqrt_det)
    };
    let dd = fd::gradient(&codiff, x, step)?;
    let flux = |p: &Vector4<f64>| -> Result<Matrix4<f64>> {
        let g = fd::gradient(&|q: &Vector4<f64>| a(q), p, step)?;
        let f = Matrix4::from_fn(|i, j| g[i][j] - g[j][i]);
        let m = metric.metric_at(p)?;
        Ok(m.inv * f * m.inv * m.sqrt_det)
    };
    let gf = fd::gradient(&flux, x, step)?;
    let m = metric.metric_at(x)?;
    let div = Vector4::from_fn(|c, _| (0..4).map(|i| gf[i][(i, c)]).sum::<f64>());
    let dstar_d = -(m.h * div) / m.sqrt_det;
    Ok(Vector4::from_fn(|k, _| dd[k]) + dstar_d)
}

/// max over Lie components of |Δ_ξA − Δ_hA| at x.
pub fn laplacian_gap(
    a: &(dyn Fn(&Vector4<f64>) -> Result<GForm1> + Sync),
    metric: &MetricField,
    x: &Vector4<f64>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for c in 0..3 {
        let comp = |p: &Vector4<f64>| -> Result<Vector4<f64>> { Ok(a(p)?.parts[c]) };
        let flat = hodge_laplacian(&comp, &MetricField::Flat, x)?;
        let curved = hodge_laplacian(&comp, metric, x)?;
        worst = worst.max((flat - curved).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessRow {
    pub r: f64,
    /// max over the sphere of |x|³|Δ_ξA − Δ_hA| / ω_λ⁴.
    pub ratio: f64,
}

/// Samples |x|³|Δ_ξA − Δ_hA| against ω_λ⁴ on geometric radii of B₁ ∖ B_λ.
/// The fitted constant is the largest ratio.
pub fn flatness_diagnostic(
    a: &(dyn Fn(&Vector4<f64>) -> Result<GForm1> + Sync),
    metric: &MetricField,
    lambda: f64,
    radii: usize,
    exec: Exec,
) -> Result<(Vec<FlatnessRow>, f64)> {
    let rule = SphereRule::new(SphereOrders::uniform(2));
    let (lo, hi) = ((2.0 * lambda).ln(), 0.5f64.ln());
    let mut rows = Vec::with_capacity(radii);
    for k in 0..radii {
        let r = (lo + (hi - lo) * k as f64 / (radii.max(2) - 1) as f64).exp();
        let vals = exec.try_map(rule.rule.len(), |n| laplacian_gap(a, metric, &(rule.rule.nodes[n] * r)))?;
        let worst = vals.into_iter().fold(0.0, f64::max);
        rows.push(FlatnessRow { r, ratio: r.powi(3) * worst / omega_radial(r, lambda).powi(4) });
    }
    let c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((rows, c))
}
