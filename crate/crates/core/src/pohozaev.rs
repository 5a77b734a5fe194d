//! Finite-ball Pohozaev tensor and its conf(4) component.
//!
//! For X = x^j ∂_i and div S = 0, the divergence theorem gives
//! ∮ S(X, ν) dA_h = ∫ ½⟨S, L_X h⟩_h vol_h. Splitting off the part of the
//! right side that survives in flat space leaves P = boundary − volume with
//! P = ∫ (S − ¼ tr_ξ S ξ) vol_h, which is traceless symmetric.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Exec;
use crate::exterior::{norm_sq, MetricAt, Tensor2};
use crate::gauge::Connection;
use crate::geometry::MetricField;
use crate::quadrature::{RadialRule, SphereOrders, SphereRule};
use crate::stress::stress;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevRules {
    pub sphere: SphereOrders,
    pub radial: usize,
}

impl Default for PohozaevRules {
    fn default() -> Self {
        Self { sphere: SphereOrders::uniform(16), radial: 20 }
    }
}

impl PohozaevRules {
    pub fn doubled(&self) -> Self {
        Self { sphere: self.sphere.doubled(), radial: 2 * self.radial }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfResidual {
    /// |tr T|.
    pub trace: f64,
    /// Frobenius norm of (T − Tᵀ)/2.
    pub skew: f64,
}

impl ConfResidual {
    pub fn total(&self) -> f64 {
        self.trace + self.skew
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResult {
    pub p: Tensor2,
    pub boundary_term: Tensor2,
    pub volume_term: Tensor2,
    /// ∫ (S − ¼ tr_ξ S ξ) vol_h, equal to P when div S = 0.
    pub direct: Tensor2,
    pub conf_residual: ConfResidual,
    /// Largest pointwise gap between ½⟨S, L_X h⟩_h and its compact form.
    pub lie_route_mismatch: f64,
    pub radius: f64,
    pub boundary_nodes: usize,
    pub volume_nodes: usize,
}

/// conf(4) part (tr T/4)ξ + (T − Tᵀ)/2 and the traceless symmetric rest.
pub fn conf_project(t: &Tensor2) -> (Tensor2, Tensor2) {
    let conf = Matrix4::identity() * (t.trace() / 4.0) + (t - t.transpose()) * 0.5;
    (conf, t - conf)
}

pub fn conf_residual(t: &Tensor2) -> ConfResidual {
    ConfResidual { trace: t.trace().abs(), skew: ((t - t.transpose()) * 0.5).norm() }
}

/// (L_X h)_cd for X = x^j ∂_i: x^j ∂_i h_cd + h_id δ_cj + h_ci δ_dj.
fn lie_derivative(x: &Vector4<f64>, h: &Matrix4<f64>, dh: &[Matrix4<f64>; 4], i: usize, j: usize) -> Matrix4<f64> {
    let mut l = dh[i] * x[j];
    for d in 0..4 {
        l[(j, d)] += h[(i, d)];
        l[(d, j)] += h[(d, i)];
    }
    l
}

/// Compact volume density ½ x^j tr(h⁻¹ S h⁻¹ ∂_i h) + (S h⁻¹)_ij, the
/// coefficient form of ½⟨S, L_X h⟩_h.
fn compact_density(x: &Vector4<f64>, s: &Tensor2, m: &MetricAt, dh: &[Matrix4<f64>; 4]) -> Tensor2 {
    let a = m.inv * s * m.inv;
    let sh = s * m.inv;
    Matrix4::from_fn(|i, j| 0.5 * x[j] * (a * dh[i]).trace() + sh[(i, j)])
}

fn lie_density_mismatch(x: &Vector4<f64>, s: &Tensor2, m: &MetricAt, dh: &[Matrix4<f64>; 4]) -> f64 {
    let compact = compact_density(x, s, m, dh);
    let a = m.inv * s * m.inv;
    let mut r: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let lie = 0.5 * (a * lie_derivative(x, &m.h, dh, i, j)).trace();
            r = r.max((lie - compact[(i, j)]).abs());
        }
    }
    r
}

pub fn pohozaev_tensor(
    a: &Connection,
    metric: &MetricField,
    radius: f64,
    rules: &PohozaevRules,
    exec: Exec,
) -> Result<PohozaevResult> {
    let sphere = SphereRule::new(rules.sphere);
    // Boundary: ∮ (S h⁻¹ x̂)_i x_j √det h R³ dω.
    let r3 = radius.powi(3);
    let boundary_term = sphere.integrate(exec, |u| {
        let x = u * radius;
        let m = metric.metric_at(&x)?;
        let s = stress(&a.curvature(&x)?, &m);
        Ok((s * m.inv * u) * x.transpose() * (m.sqrt_det * r3))
    })?;
    let ball = RadialRule::gauss(0.0, radius, rules.radial).with_sphere(&sphere);
    let (volume_term, direct) = ball.integrate(exec, |x| {
        let m = metric.metric_at(x)?;
        let dh = metric.metric_derivatives(x)?;
        let s = stress(&a.curvature(x)?, &m);
        let flat_trace = s.trace();
        let off = flat_trace - (m.inv * s).trace();
        let v = compact_density(x, &s, &m, &dh) - s + Matrix4::identity() * (0.25 * off);
        let d = s - Matrix4::identity() * (0.25 * flat_trace);
        Ok((v * m.sqrt_det, d * m.sqrt_det))
    })?;
    let stride = (ball.len() / 256).max(1);
    let probes: Vec<usize> = (0..ball.len()).step_by(stride).collect();
    let mismatches = exec.try_map(probes.len(), |k| {
        let x = ball.nodes[probes[k]];
        let m = metric.metric_at(&x)?;
        let dh = metric.metric_derivatives(&x)?;
        let s = stress(&a.curvature(&x)?, &m);
        Ok(lie_density_mismatch(&x, &s, &m, &dh) / (1.0 + s.amax()))
    })?;
    let p = boundary_term - volume_term;
    Ok(PohozaevResult {
        p,
        boundary_term,
        volume_term,
        direct,
        conf_residual: conf_residual(&p),
        lie_route_mismatch: mismatches.into_iter().fold(0.0, f64::max),
        radius,
        boundary_nodes: sphere.rule.len(),
        volume_nodes: ball.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckRow {
    pub lambda: f64,
    /// sup over |x| = √λ of |F_{A_λ} − F_{A∞} − λ⁻²F_bubble(x/λ)|.
    pub residual_sup: f64,
    /// Energy of A_λ on λ/δ < |x| < δ with δ = λ^{1/4}.
    pub neck_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckRules {
    pub sphere: SphereOrders,
    pub radial: usize,
}

impl Default for NeckRules {
    fn default() -> Self {
        Self { sphere: SphereOrders::uniform(12), radial: 40 }
    }
}

/// The glued potential A∞ + λ⁻¹ bubble(·/λ).
pub fn glued(a_inf: &Connection, bubble: &Connection, lambda: f64) -> Result<Connection> {
    Ok(Connection::sum(vec![a_inf.clone(), bubble.clone().rescale(1.0 / lambda)?]))
}

pub fn neck_scaling_diagnostic(
    a_inf: &Connection,
    bubble: &Connection,
    lambdas: &[f64],
    rules: &NeckRules,
    exec: Exec,
) -> Result<Vec<NeckRow>> {
    let sphere = SphereRule::new(rules.sphere);
    let flat = MetricAt::flat();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let a = glued(a_inf, bubble, lambda)?;
        let b = bubble.clone().rescale(1.0 / lambda)?;
        let r = lambda.sqrt();
        let vals = exec.try_map(sphere.rule.len(), |k| {
            let x = sphere.rule.nodes[k] * r;
            let d = a.curvature(&x)? - a_inf.curvature(&x)? - b.curvature(&x)?;
            Ok(norm_sq(&d, &flat).sqrt())
        })?;
        let residual_sup = vals.into_iter().fold(0.0, f64::max);
        let delta = lambda.powf(0.25);
        let shell = RadialRule::log_gauss(lambda / delta, delta, rules.radial).with_sphere(&sphere);
        let neck_energy = shell.integrate(exec, |x| Ok(norm_sq(&a.curvature(x)?, &flat)))?;
        rows.push(NeckRow { lambda, residual_sup, neck_energy });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{InstantonSpec, PolynomialPotential, PotentialEntry};
    use crate::geometry::{FsChart, SphereChart};
    use crate::lie::gauge_rotation;
    use crate::poly::{Poly, Term};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    fn bpst(sign: i32, c: [f64; 4]) -> Connection {
        Connection::bpst(InstantonSpec::bpst(sign, 1.0, c)).unwrap()
    }

    #[test]
    fn conf_projection() {
        let (c, r) = conf_project(&Matrix4::identity());
        assert!((c - Matrix4::identity()).amax() < 1e-15 && r.amax() < 1e-15);
        let ts = Matrix4::from_diagonal(&Vector4::new(1.0, -2.0, 0.5, 0.5));
        assert!(conf_project(&ts).0.amax() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let (c, r) = conf_project(&t);
            assert!((c + r - t).amax() < 1e-15);
            assert!(c.dot(&r).abs() < 1e-14);
        }
    }

    #[test]
    fn self_dual_flat_is_exactly_zero() {
        let res = pohozaev_tensor(&bpst(1, [0.0; 4]), &MetricField::Flat, 0.7, &PohozaevRules::default(), Exec::Parallel)
            .unwrap();
        assert!(res.p.amax() < 1e-14, "{}", res.p.amax());
    }

    #[test]
    fn maxwell_is_traceless_symmetric() {
        let rules = PohozaevRules::default();
        let flat = pohozaev_tensor(&maxwell(), &MetricField::Flat, 0.5, &rules, Exec::Parallel).unwrap();
        assert!(flat.p.amax() > 1e-3);
        assert!(flat.conf_residual.total() < 1e-10, "{:?}", flat.conf_residual);
        assert!((flat.p - flat.direct).amax() < 1e-10);
        let s4 = MetricField::sphere(1.0, SphereChart::Normal).unwrap();
        let on_s4 = maxwell().on_metric(&s4);
        for r in [0.2, 0.5, 0.9] {
            let res = pohozaev_tensor(&on_s4, &s4, r, &rules, Exec::Parallel).unwrap();
            assert!(res.conf_residual.total() < 1e-6, "r={r} {:?}", res.conf_residual);
            assert!(res.lie_route_mismatch < 1e-12);
            assert!(res.volume_term.amax() > 1e-6);
        }
    }

    #[test]
    fn formal_non_yang_mills_field_is_detected() {
        let f = Connection::Formal { terms: vec![(1.0, bpst(1, [0.0; 4])), (0.7, bpst(-1, [0.3, 0.1, 0.0, 0.0]))] };
        let res = pohozaev_tensor(&f, &MetricField::Flat, 0.8, &PohozaevRules::default(), Exec::Parallel).unwrap();
        assert!(res.conf_residual.total() > 1e-3, "{:?}", res.conf_residual);
    }

    #[test]
    fn gauge_rotation_invariance() {
        let cp2 = MetricField::FubiniStudy { chart: FsChart::Normal };
        let a = Connection::Formal { terms: vec![(1.0, bpst(1, [0.0; 4])), (0.5, bpst(-1, [0.2, 0.0, 0.0, 0.0]))] };
        let g = gauge_rotation([0.2, 0.7, -0.3], 2.0);
        let rules = PohozaevRules { sphere: SphereOrders::uniform(8), radial: 8 };
        let p1 = pohozaev_tensor(&a, &cp2, 0.3, &rules, Exec::Parallel).unwrap().p;
        let p2 = pohozaev_tensor(&a.clone().rotated(g), &cp2, 0.3, &rules, Exec::Parallel).unwrap().p;
        assert!((p1 - p2).amax() < 1e-12);
    }

    #[test]
    fn curved_instantons() {
        let rules = PohozaevRules::default();
        let cp2 = MetricField::FubiniStudy { chart: FsChart::Normal };
        let g = Connection::Instanton(InstantonSpec::groisser(0.4)).on_metric(&cp2);
        let res = pohozaev_tensor(&g, &cp2, 0.3, &rules, Exec::Parallel).unwrap();
        assert!(res.conf_residual.total() < 1e-6);
        let s4 = MetricField::sphere(1.0, SphereChart::Normal).unwrap();
        let b = bpst(1, [0.0; 4]).on_metric(&s4);
        let res = pohozaev_tensor(&b, &s4, 0.6, &rules, Exec::Parallel).unwrap();
        assert!(res.conf_residual.total() < 1e-6);
    }

    #[test]
    fn policies_agree_bitwise() {
        let rules = PohozaevRules { sphere: SphereOrders::uniform(6), radial: 6 };
        let a = pohozaev_tensor(&maxwell(), &MetricField::Flat, 0.5, &rules, Exec::Sequential).unwrap();
        let b = pohozaev_tensor(&maxwell(), &MetricField::Flat, 0.5, &rules, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn neck_diagnostic() {
        let a_inf = bpst(1, [0.0; 4]);
        let bubble = Connection::bpst(InstantonSpec::bpst_singular(1, 1.0, [0.0; 4])).unwrap();
        let lambdas = [1e-2, 1e-3, 1e-4];
        let rules = NeckRules::default();
        let rows = neck_scaling_diagnostic(&a_inf, &bubble, &lambdas, &rules, Exec::Parallel).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].residual_sup < w[0].residual_sup);
            assert!(w[1].neck_energy < w[0].neck_energy);
        }
        let zero = neck_scaling_diagnostic(&a_inf, &Connection::Zero, &lambdas, &rules, Exec::Parallel).unwrap();
        assert!(zero.iter().all(|r| r.residual_sup == 0.0));
        let pure = neck_scaling_diagnostic(&Connection::Zero, &bubble, &lambdas, &rules, Exec::Parallel).unwrap();
        assert!(pure.iter().all(|r| r.residual_sup == 0.0));
    }
}
