//! Registry of identity checks and the suite runner.
//!
//! Each check returns a residual that must not exceed its tolerance. Exact
//! checks compare values that are zero in exact arithmetic on inputs chosen to
//! be representable (verdicts, counts, dyadic frames); numerical checks carry
//! quadrature or finite-difference error.

use std::time::Instant;

use anyhow::Result;
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ymbubble::annulus::{
    decompose_neck_fn, decompose_neck_form, default_annulus_points, form_norm, harmonic_basis, model_columns_at, omega_radial,
    phi_matrix, radial_harmonic_projection_check, NeckSamples, TwoPoleNeck, MODEL_COLUMNS,
};
use ymbubble::exterior::{circ, interior_duality_residual, sd_asd_split, GForm1, GForm2, MetricAt};
use ymbubble::gauge::{Connection, InstantonSpec};
use ymbubble::geometry::{gamma_quadratic, kulkarni_nomizu, FsChart, MetricField, SphereChart, Tensor4};
use ymbubble::lie::{gauge_rotation, LieElement};
use ymbubble::obstruction::{
    algebraic_weyl, assemble_report, branch_sign_check, cp2_default_points, cp2_default_t_grid, cp2_exclusion_check,
    form_with_fmap, gauge_obstruction, weyl_forms_at, weyl_quadrature, weyl_term, BubblingConfig, SyntheticStress,
    Verdict,
};
use ymbubble::pohozaev::{neck_scaling_diagnostic, pohozaev_tensor, NeckRules, PohozaevRules};
use ymbubble::poly::{Poly, Term};
use ymbubble::stress::{connection_divergence, stress, stress_defects};
use ymbubble::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Exact,
    Numerical,
}

/// Shared inputs of a suite run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSettings {
    pub seed: u64,
    /// Replaces every check's own tolerance.
    pub tolerance: Option<f64>,
    pub timings: bool,
    pub exec: Exec,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self { seed: 0, tolerance: None, timings: false, exec: Exec::Parallel }
    }
}

pub struct Check {
    pub name: &'static str,
    /// The identity or statement the check verifies.
    pub identity: &'static str,
    pub kind: CheckKind,
    pub tolerance: f64,
    pub run: fn(&mut ChaCha8Rng, Exec) -> Result<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub identity: String,
    pub kind: CheckKind,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,kind,residual,tolerance,passed\n");
        for c in &self.checks {
            let kind = if c.kind == CheckKind::Exact { "exact" } else { "numerical" };
            let res = c.residual.map(|r| format!("{r:e}")).unwrap_or_else(|| "error".into());
            s.push_str(&format!("{},{kind},{res},{:e},{}\n", c.name, c.tolerance, c.passed));
        }
        s
    }
}

/// RNG of check `index`: ChaCha8 seeded with `seed`, stream `index`.
pub fn check_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn run_check(index: usize, settings: &SuiteSettings) -> CheckResult {
    let check = &registry()[index];
    let tolerance = settings.tolerance.unwrap_or(check.tolerance);
    let mut rng = check_rng(settings.seed, index);
    let start = Instant::now();
    let outcome = (check.run)(&mut rng, settings.exec);
    let elapsed = start.elapsed().as_secs_f64();
    let (residual, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(format!("{e:#}"))),
    };
    CheckResult {
        name: check.name.into(),
        identity: check.identity.into(),
        kind: check.kind,
        passed: residual.is_some_and(|r| r <= tolerance),
        residual,
        tolerance,
        error,
        wall_time_s: settings.timings.then_some(elapsed),
    }
}

pub fn find_check(name: &str) -> Option<usize> {
    registry().iter().position(|c| c.name == name)
}

/// Runs every registered check. Results are ordered by the registry, and a
/// failing or erroring check does not stop the others.
pub fn run_verify_suite(settings: &SuiteSettings) -> SuiteReport {
    let n = registry().len();
    let checks = settings.exec.map(n, |k| run_check(k, settings));
    SuiteReport { seed: settings.seed, passed: checks.iter().all(|c| c.passed), checks }
}

// Random inputs.

fn random_form2(rng: &mut ChaCha8Rng) -> GForm2 {
    let mut parts = [Matrix4::zeros(); 3];
    for p in parts.iter_mut() {
        for i in 0..4 {
            for j in (i + 1)..4 {
                let v = rng.gen_range(-1.0..1.0);
                p[(i, j)] = v;
                p[(j, i)] = -v;
            }
        }
    }
    GForm2::from_parts(parts)
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.gen_range(-r..r))
}

fn random_spd(rng: &mut ChaCha8Rng) -> Result<MetricAt> {
    let a = Matrix4::from_fn(|_, _| rng.gen_range(-0.5..0.5));
    Ok(MetricAt::new(Matrix4::identity() + a * a.transpose())?)
}

fn random_sym(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    a + a.transpose()
}

fn random_rotation3(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    gauge_rotation([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], rng.gen_range(0.0..6.0))
}

fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-16i32..=16) as f64 / 8.0
}

fn cp2() -> MetricField {
    MetricField::FubiniStudy { chart: FsChart::Normal }
}

fn s4() -> Result<MetricField> {
    Ok(MetricField::sphere(1.0, SphereChart::Normal)?)
}

fn bpst(sign: i32) -> Result<Connection> {
    Ok(Connection::bpst(InstantonSpec::bpst(sign, 1.0, [0.0; 4]))?)
}

fn bpst_singular(sign: i32) -> Result<Connection> {
    Ok(Connection::bpst(InstantonSpec::bpst_singular(sign, 1.0, [0.0; 4]))?)
}

fn indicator(bad: bool) -> f64 {
    if bad {
        1.0
    } else {
        0.0
    }
}

// Checks.

fn interior_duality(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b) = (random_form2(rng), random_form2(rng));
        let (x, y) = (random_vec(rng, 1.0), random_vec(rng, 1.0));
        let m = random_spd(rng)?;
        worst = worst.max(interior_duality_residual(&a, &b, &x, &y, &m).abs());
    }
    Ok(worst)
}

fn stress_chiral_split(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f = random_form2(rng);
        let m = random_spd(rng)?;
        let (p, n) = sd_asd_split(&f, &m);
        worst = worst.max((stress(&f, &m) + circ(&p, &n, &m) * 2.0).amax());
    }
    Ok(worst)
}

/// Chiral forms with dyadic coefficients in the flat frame: every product in
/// S is exact, so S must vanish exactly.
fn stress_chiral_zero(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let flat = MetricAt::flat();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = Matrix3::from_fn(|_, _| dyadic(rng));
        for chirality in [1, -1] {
            worst = worst.max(stress(&form_with_fmap(&m, chirality), &flat).amax());
        }
    }
    Ok(worst)
}

fn stress_traceless_symmetric(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f = random_form2(rng);
        let m = random_spd(rng)?;
        let s = stress(&f, &m);
        let (asym, tr) = stress_defects(&s, &m);
        worst = worst.max(asym).max(tr / (1.0 + s.amax()));
    }
    Ok(worst)
}

fn stress_divergence_cp2(rng: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let m = cp2();
    let t = rng.gen_range(0.1..0.9);
    let a = Connection::Instanton(InstantonSpec::groisser(t)).on_metric(&m);
    let pts: Vec<Vector4<f64>> = (0..50).map(|_| random_vec(rng, 1.0)).collect();
    let d = exec.try_map(pts.len(), |k| Ok(connection_divergence(&a, &m, &pts[k])?.amax()))?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// (flat, BPST), (S⁴, BPST), (CP², Groisser) at three radii, plus a flat
/// non-chiral Maxwell field so that the flat case is not S ≡ 0.
fn pohozaev_conf_residual(rng: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let rules = PohozaevRules::default();
    let s4 = s4()?;
    let cp2 = cp2();
    let t = rng.gen_range(0.1..0.9);
    let maxwell = Connection::Polynomial(ymbubble::gauge::PolynomialPotential {
        entries: vec![ymbubble::gauge::PotentialEntry {
            lie: 0,
            mu: 1,
            poly: Poly {
                terms: vec![Term { coef: 1.0, exps: [2, 0, 0, 0], rpow: 0 }, Term { coef: -1.0, exps: [0, 0, 2, 0], rpow: 0 }],
            },
        }],
    });
    let cases: Vec<(Connection, MetricField, [f64; 3])> = vec![
        (bpst(1)?, MetricField::Flat, [0.3, 0.7, 1.5]),
        (maxwell, MetricField::Flat, [0.3, 0.7, 1.5]),
        (bpst(1)?.on_metric(&s4), s4.clone(), [0.2, 0.5, 0.9]),
        (Connection::Instanton(InstantonSpec::groisser(t)).on_metric(&cp2), cp2.clone(), [0.2, 0.5, 0.9]),
    ];
    let mut worst: f64 = 0.0;
    for (a, m, radii) in &cases {
        for &r in radii {
            worst = worst.max(pohozaev_tensor(a, m, r, &rules, exec)?.conf_residual.total());
        }
    }
    Ok(worst)
}

fn random_synthetic(rng: &mut ChaCha8Rng) -> SyntheticStress {
    let pairs: Vec<_> = (0..4).map(|_| (random_sym(rng), random_sym(rng))).collect();
    let center = random_vec(rng, 0.3);
    SyntheticStress::new(algebraic_weyl(&pairs), rng.gen_range(0.7..1.3), center)
}

fn cp2_weyl() -> Result<Tensor4> {
    Ok(cp2().weyl(&Vector4::zeros())?)
}

fn weyl_forms_agree(rng: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let w = cp2_weyl()?;
    let q = weyl_quadrature();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let field = random_synthetic(rng);
        let forms = weyl_forms_at(|x| Ok(field.eval(x)), &w, &q, exec)?;
        if forms.gamma_form.amax() == 0.0 {
            anyhow::bail!("synthetic field has a vanishing Weyl term");
        }
        worst = worst.max(forms.forms_mismatch);
    }
    Ok(worst)
}

fn weyl_chiral_zero(rng: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let w = cp2_weyl()?;
    let mut bad = 0.0;
    for sign in [1, -1] {
        let scale = rng.gen_range(0.2..3.0);
        let center = [rng.gen_range(-1.0..1.0), 0.0, rng.gen_range(-1.0..1.0), 0.0];
        for spec in [InstantonSpec::bpst(sign, scale, center), InstantonSpec::bpst_singular(sign, scale, center)] {
            let wt = weyl_term(&Connection::bpst(spec)?, &w, &weyl_quadrature(), exec)?;
            bad += indicator(!wt.exact_zero || wt.nodes != 0) + wt.gamma_form.amax() + wt.t_form.amax();
        }
    }
    Ok(bad)
}

/// Counts wrong verdicts: conformal equal-chirality f-maps and every scaled
/// sign pattern must be excluded; on flat R⁴ a bubble whose inverted
/// curvature has the limit's chirality is excluded and the other is compatible.
fn branch_sign_patterns(rng: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let mut wrong = 0.0;
    let id = Matrix3::identity();
    for mask in 0..8u32 {
        let d = Vector3::from_fn(|k, _| if mask & (1 << k) == 0 { 1.0 } else { -1.0 }) * rng.gen_range(0.1..5.0);
        wrong += indicator(branch_sign_check(&id, &Matrix3::from_diagonal(&d))?.verdict != Verdict::Excluded);
    }
    for _ in 0..50 {
        let f = random_rotation3(rng) * rng.gen_range(0.1..5.0);
        let g = random_rotation3(rng) * random_rotation3(rng) * rng.gen_range(0.1..5.0);
        wrong += indicator(branch_sign_check(&f, &g)?.verdict != Verdict::Excluded);
    }
    for a in [1, -1] {
        for b in [1, -1] {
            let report = branch_report(a, b, exec)?;
            let want = if a == b { Verdict::Compatible } else { Verdict::Excluded };
            wrong += indicator(report.verdict != want);
        }
    }
    Ok(wrong)
}

/// Flat-space report for a BPST limit of chirality `a` and a singular-gauge
/// BPST bubble of chirality `b`.
pub fn branch_report(a: i32, b: i32, exec: Exec) -> Result<ymbubble::obstruction::ObstructionReport> {
    Ok(assemble_report(&BubblingConfig::new(MetricField::Flat, bpst(a)?, bpst_singular(b)?), exec)?)
}

fn cp2_exclusion(_: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let pts = cp2_default_points();
    let mut wrong = 0.0;
    for t in cp2_default_t_grid() {
        let v = cp2_exclusion_check(t, &pts)?;
        wrong += v.samples.iter().filter(|s| !s.excluded || s.beta >= 0.5).count() as f64;
        wrong += indicator(v.verdict != Verdict::Excluded);
    }
    Ok(wrong)
}

fn cp2_fmap_ratio(_: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let pts = cp2_default_points();
    let mut worst: f64 = 0.0;
    for t in cp2_default_t_grid() {
        worst = worst.max(cp2_exclusion_check(t, &pts)?.max_ratio_error);
    }
    Ok(worst)
}

/// Symmetric F∞*F̃ with dyadic entries: the obstruction is exactly zero.
fn gauge_obstruction_symmetric(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let id = form_with_fmap(&Matrix3::identity(), 1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = Matrix3::from_fn(|_, _| dyadic(rng));
        let sym = a + a.transpose();
        worst = worst.max(gauge_obstruction(&id, &form_with_fmap(&sym, 1)).amax());
    }
    Ok(worst)
}

/// Symmetric plus skew K: the obstruction recovers 2√2 (K23, K31, K12).
fn gauge_obstruction_skew(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let r2 = std::f64::consts::SQRT_2;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = random_rotation3(rng);
        let f = form_with_fmap(&g, 1);
        let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let k = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let k = k - k.transpose();
        // f_map(F̃) = g (A + Aᵀ + K) makes F∞*F̃ = A + Aᵀ + K.
        let tilde = form_with_fmap(&(g * (a + a.transpose() + k)), 1);
        let obs = gauge_obstruction(&f, &tilde);
        let want = Vector3::new(2.0 * r2 * k[(1, 2)], 2.0 * r2 * k[(2, 0)], 2.0 * r2 * k[(0, 1)]);
        worst = worst.max((obs - want).amax());
    }
    Ok(worst)
}

/// Smallest singular value of Φ at α = 2.5 against its value with doubled
/// sphere orders; infinite if Φ is not safely invertible.
fn phi_matrix_invertible(_: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let b = harmonic_basis(2.5)?;
    let rule = b.sphere_rule();
    let p = phi_matrix(&b, 1.0, &rule);
    let q = phi_matrix(&b, 1.0, &ymbubble::quadrature::SphereRule::new(rule.orders.doubled()));
    if !(p.smallest_singular_value > 1e-3) {
        return Ok(f64::INFINITY);
    }
    Ok((p.smallest_singular_value - q.smallest_singular_value).abs())
}

fn harmonic_basis_exact(_: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let b = harmonic_basis(2.5)?;
    Ok(b.laplacian_residual() + indicator(b.h.len() != 5 || b.hbar.len() != 10))
}

fn gram_nonsingular(_: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    // Floor 0.1 on the smallest singular value, as a residual.
    Ok((0.1 - radial_harmonic_projection_check().smallest_singular_value).max(0.0))
}

fn omega_minimum(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let lambda: f64 = 4f64.powi(-rng.gen_range(1..10));
    Ok((omega_radial(lambda.sqrt(), lambda) - 2.0 * lambda.sqrt()).abs())
}

/// Inputs assembled from the model family, with r⁻⁴ coefficients scaled to
/// 1e-3 so that no column dominates; residual relative to r|e|.
fn neck_fit_model(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let lambda = 10f64.powi(-rng.gen_range(2..5));
    let coef: Vec<[f64; 3]> = (0..MODEL_COLUMNS).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let pts = default_annulus_points(lambda);
    let values: Vec<GForm1> = pts
        .iter()
        .map(|x| {
            let cols = model_columns_at(x);
            let mut e = GForm1::zero();
            for (c, col) in cols.iter().enumerate() {
                for a in 0..3 {
                    e.parts[a] += col * (coef[c][a] * if c < 6 { 1e-3 } else { 1.0 });
                }
            }
            e
        })
        .collect();
    let scale: Vec<f64> = pts.iter().zip(&values).map(|(x, e)| x.norm() * form_norm(e)).collect();
    let samples = NeckSamples { lambda, points: pts.iter().map(|p| [p[0], p[1], p[2], p[3]]).collect(), values };
    let d = decompose_neck_form(&samples, 2.5)?;
    let mut worst: f64 = 0.0;
    for ((x, r), s) in pts.iter().zip(&d.residual).zip(&scale) {
        worst = worst.max(x.norm() * form_norm(r) / s);
    }
    // A pure r⁻⁴ input has vanishing b-coefficients.
    let q1 = LieElement::basis(0);
    let pure = NeckSamples {
        lambda,
        points: samples.points.clone(),
        values: pts.iter().map(|x| GForm1::from_real(&model_columns_at(x)[0], &q1)).collect(),
    };
    let d = decompose_neck_form(&pure, 2.5)?;
    let b_max = d.b.iter().map(|c| c.value.norm()).fold(0.0, f64::max);
    Ok(worst.max(b_max).max((d.a[0].value - q1).norm()))
}

/// Fitted constants of the two-pole neck form at λ = 1e-2, 1e-3, 1e-4: the
/// residual is the largest relative growth of either constant between
/// consecutive λ.
fn neck_fit_trend(_: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let mut constants = Vec::new();
    for lambda in [1e-2, 1e-3, 1e-4] {
        let neck = TwoPoleNeck::new(lambda, 1.0, [3.0, 0.0, 0.0, 0.0]);
        let d = decompose_neck_fn(&|x| neck.error_form(x), lambda, 2.5, &default_annulus_points(lambda), exec)?;
        if d.divergence.unwrap_or(f64::INFINITY) > 1e-6 {
            anyhow::bail!("neck form is not divergence-free: {:?}", d.divergence);
        }
        constants.push((d.coefficient_constant, d.residual_constant));
    }
    let mut growth: f64 = 0.0;
    for w in constants.windows(2) {
        growth = growth.max(w[1].0 / w[0].0 - 1.0).max(w[1].1 / w[0].1 - 1.0);
    }
    Ok(growth.max(0.0))
}

/// Number of λ steps at which the sup-residual on ∂B_√λ fails to decrease.
fn neck_residual_monotone(_: &mut ChaCha8Rng, exec: Exec) -> Result<f64> {
    let rows = neck_scaling_diagnostic(&bpst(1)?, &bpst_singular(1)?, &[1e-2, 1e-3, 1e-4], &NeckRules::default(), exec)?;
    Ok(rows.windows(2).filter(|w| !(w[1].residual_sup < w[0].residual_sup)).count() as f64)
}

fn weyl_conformally_flat(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for m in [MetricField::Flat, s4()?, MetricField::sphere(2.0, SphereChart::Stereographic)?] {
        for _ in 0..3 {
            worst = worst.max(m.curvature_fd(&random_vec(rng, 0.5))?.weyl.max_abs());
        }
    }
    Ok(worst)
}

fn weyl_cp2_nonzero(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let w = cp2().curvature_fd(&random_vec(rng, 0.5))?.weyl.max_abs();
    Ok(indicator(!(w > 0.1)))
}

fn ricci_reconstruction(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for m in [MetricField::Flat, s4()?, cp2(), MetricField::FubiniStudy { chart: FsChart::Affine }] {
        let x = random_vec(rng, 0.4);
        let c = m.curvature_fd(&x)?;
        let ma = m.metric_at(&x)?;
        let recon = c.weyl.add(&kulkarni_nomizu(&c.schouten(&ma), &ma.h));
        worst = worst.max(recon.add(&c.rm.scale(-1.0)).max_abs());
    }
    Ok(worst)
}

/// 3 − slope of log|h − ξ − γ| against log r, clipped at 0; γ is the
/// quadratic jet, so the remainder is cubic.
fn gamma_jet_slope(rng: &mut ChaCha8Rng, _: Exec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for m in [s4()?, cp2()] {
        let rm = m.riemann(&Vector4::zeros())?;
        let dir = random_vec(rng, 1.0).normalize();
        let pts: Vec<(f64, f64)> = [1e-1, 5e-2, 2.5e-2, 1.25e-2]
            .iter()
            .map(|&t| {
                let x = dir * t;
                let res = (m.metric(&x)? - Matrix4::identity() - gamma_quadratic(&rm, &x)).amax();
                Ok((t.ln(), res.ln()))
            })
            .collect::<Result<_>>()?;
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        worst = worst.max(3.0 - slope);
    }
    Ok(worst.max(0.0))
}

pub fn registry() -> &'static [Check] {
    use CheckKind::*;
    &[
        Check {
            name: "interior_duality",
            identity: "<i_X a, i_Y b> + <i_Y *a, i_X *b> = <X, Y><a, b>",
            kind: Numerical,
            tolerance: 1e-12,
            run: interior_duality,
        },
        Check {
            name: "stress_chiral_split",
            identity: "S_F = -2 F+ o F-",
            kind: Numerical,
            tolerance: 1e-12,
            run: stress_chiral_split,
        },
        Check { name: "stress_chiral_zero", identity: "S_F = 0 for F = +-*F", kind: Exact, tolerance: 1e-12, run: stress_chiral_zero },
        Check {
            name: "stress_traceless_symmetric",
            identity: "tr_h S = 0 and S = S^T",
            kind: Numerical,
            tolerance: 1e-12,
            run: stress_traceless_symmetric,
        },
        Check {
            name: "stress_divergence_cp2",
            identity: "div_h S = 0 for the Groisser instanton on CP2",
            kind: Numerical,
            tolerance: 1e-5,
            run: stress_divergence_cp2,
        },
        Check {
            name: "pohozaev_conf_residual",
            identity: "finite-ball P is orthogonal to conf(4)",
            kind: Numerical,
            tolerance: 1e-6,
            run: pohozaev_conf_residual,
        },
        Check {
            name: "weyl_forms_agree",
            identity: "T-form = skew_trace(gamma-form) of the Weyl coupling",
            kind: Numerical,
            tolerance: 1e-8,
            run: weyl_forms_agree,
        },
        Check {
            name: "weyl_chiral_zero",
            identity: "Weyl coupling vanishes identically for SD or ASD bubbles",
            kind: Exact,
            tolerance: 1e-12,
            run: weyl_chiral_zero,
        },
        Check {
            name: "branch_sign_patterns",
            identity: "no traceless symmetric conformal s = f_inf^T f_tilde",
            kind: Exact,
            tolerance: 1e-12,
            run: branch_sign_patterns,
        },
        Check {
            name: "cp2_exclusion",
            identity: "beta < 1/2 and no signed sum of (1, beta, beta) vanishes",
            kind: Exact,
            tolerance: 1e-12,
            run: cp2_exclusion,
        },
        Check {
            name: "cp2_fmap_ratio",
            identity: "Groisser f-map singular values are (1, beta, beta)",
            kind: Numerical,
            tolerance: 1e-10,
            run: cp2_fmap_ratio,
        },
        Check {
            name: "gauge_obstruction_symmetric",
            identity: "gauge obstruction vanishes for symmetric F_inf* F_tilde",
            kind: Exact,
            tolerance: 1e-12,
            run: gauge_obstruction_symmetric,
        },
        Check {
            name: "gauge_obstruction_skew",
            identity: "gauge obstruction recovers the skew part of F_inf* F_tilde",
            kind: Numerical,
            tolerance: 1e-12,
            run: gauge_obstruction_skew,
        },
        Check {
            name: "phi_matrix_invertible",
            identity: "Phi: Hbar_alpha -> L(H_alpha, R^2) is an isomorphism (alpha = 2.5)",
            kind: Numerical,
            tolerance: 1e-10,
            run: phi_matrix_invertible,
        },
        Check {
            name: "harmonic_basis_exact",
            identity: "Hbar_alpha elements are harmonic, dim Hbar = 2 dim H",
            kind: Exact,
            tolerance: 1e-12,
            run: harmonic_basis_exact,
        },
        Check {
            name: "gram_nonsingular",
            identity: "x^j, x^i x^j are linearly independent on S3",
            kind: Exact,
            tolerance: 1e-12,
            run: gram_nonsingular,
        },
        Check {
            name: "omega_minimum",
            identity: "min omega_lambda = 2 sqrt(lambda) at |x| = sqrt(lambda)",
            kind: Numerical,
            tolerance: 1e-15,
            run: omega_minimum,
        },
        Check {
            name: "neck_fit_model",
            identity: "model-family 1-forms are decomposed exactly",
            kind: Numerical,
            tolerance: 1e-10,
            run: neck_fit_model,
        },
        Check {
            name: "neck_fit_trend",
            identity: "neck fit constants stay bounded as lambda -> 0",
            kind: Numerical,
            tolerance: 1.0,
            run: neck_fit_trend,
        },
        Check {
            name: "neck_residual_monotone",
            identity: "sup |F_glued - F_inf - F_bubble| on |x| = sqrt(lambda) decreases with lambda",
            kind: Exact,
            tolerance: 1e-12,
            run: neck_residual_monotone,
        },
        Check {
            name: "weyl_conformally_flat",
            identity: "W = 0 on flat R4 and S4",
            kind: Numerical,
            tolerance: 1e-8,
            run: weyl_conformally_flat,
        },
        Check { name: "weyl_cp2_nonzero", identity: "W != 0 on CP2", kind: Exact, tolerance: 1e-12, run: weyl_cp2_nonzero },
        Check {
            name: "ricci_reconstruction",
            identity: "Rm = W + P o h",
            kind: Numerical,
            tolerance: 1e-8,
            run: ricci_reconstruction,
        },
        Check {
            name: "gamma_jet_slope",
            identity: "h - xi - gamma = O(|x|^3) in normal coordinates",
            kind: Numerical,
            tolerance: 0.1,
            run: gamma_jet_slope,
        },
    ]
}
