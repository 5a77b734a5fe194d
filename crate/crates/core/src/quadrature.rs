//! Deterministic product quadrature on S³, balls, shells and R⁴.
//!
//! S³ uses hyperspherical angles
//! x = (cos θ₁, sin θ₁ cos θ₂, sin θ₁ sin θ₂ cos φ, sin θ₁ sin θ₂ sin φ)
//! with Gauss–Legendre in θ₁, θ₂ and the periodic trapezoid rule in φ.

use std::f64::consts::PI;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec, Summand};

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A flat list of weighted nodes in R⁴.
#[derive(Debug, Clone)]
pub struct PointRule {
    pub nodes: Vec<Vector4<f64>>,
    pub weights: Vec<f64>,
}

impl PointRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<T, F>(&self, exec: Exec, f: F) -> Result<T>
    where
        T: Summand,
        F: Fn(&Vector4<f64>) -> Result<T> + Sync + Send,
    {
        let vals = exec.try_map(self.len(), |k| Ok(f(&self.nodes[k])?.scale(self.weights[k])))?;
        pairwise_sum(&vals).ok_or_else(|| Error::InvalidParameter("empty quadrature rule".into()))
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.weights).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereOrders {
    pub theta1: usize,
    pub theta2: usize,
    pub phi: usize,
}

impl Default for SphereOrders {
    fn default() -> Self {
        Self { theta1: 24, theta2: 24, phi: 48 }
    }
}

impl SphereOrders {
    pub fn uniform(n: usize) -> Self {
        Self { theta1: n, theta2: n, phi: 2 * n }
    }

    pub fn doubled(&self) -> Self {
        Self { theta1: 2 * self.theta1, theta2: 2 * self.theta2, phi: 2 * self.phi }
    }
}

/// Product rule on the unit S³; weights sum to 2π².
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub orders: SphereOrders,
    pub rule: PointRule,
}

impl SphereRule {
    pub fn new(orders: SphereOrders) -> Self {
        let (t1, w1) = gauss_legendre(orders.theta1);
        let (t2, w2) = gauss_legendre(orders.theta2);
        let nphi = orders.phi.max(1);
        let mut nodes = Vec::with_capacity(t1.len() * t2.len() * nphi);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (a, wa) in t1.iter().zip(&w1) {
            let th1 = 0.5 * PI * (a + 1.0);
            let (s1, c1) = th1.sin_cos();
            for (b, wb) in t2.iter().zip(&w2) {
                let th2 = 0.5 * PI * (b + 1.0);
                let (s2, c2) = th2.sin_cos();
                let w = wa * wb * 0.25 * PI * PI * s1 * s1 * s2 * 2.0 * PI / nphi as f64;
                for k in 0..nphi {
                    let ph = 2.0 * PI * k as f64 / nphi as f64;
                    let (s3, c3) = ph.sin_cos();
                    nodes.push(Vector4::new(c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3));
                    weights.push(w);
                }
            }
        }
        Self { orders, rule: PointRule { nodes, weights } }
    }

    pub fn integrate<T, F>(&self, exec: Exec, f: F) -> Result<T>
    where
        T: Summand,
        F: Fn(&Vector4<f64>) -> Result<T> + Sync + Send,
    {
        self.rule.integrate(exec, f)
    }
}

impl Default for SphereRule {
    fn default() -> Self {
        Self::new(SphereOrders::default())
    }
}

/// One-dimensional rule on [a, b].
#[derive(Debug, Clone)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl RadialRule {
    pub fn gauss(a: f64, b: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let h = 0.5 * (b - a);
        Self {
            nodes: x.iter().map(|t| a + h * (t + 1.0)).collect(),
            weights: w.iter().map(|wi| wi * h).collect(),
            order: n,
        }
    }

    /// Gauss–Legendre in s = ln r, for integrands spread over many scales.
    pub fn log_gauss(a: f64, b: f64, n: usize) -> Self {
        let base = Self::gauss(a.ln(), b.ln(), n);
        let nodes: Vec<f64> = base.nodes.iter().map(|s| s.exp()).collect();
        let weights = base.weights.iter().zip(&nodes).map(|(w, r)| w * r).collect();
        Self { nodes, weights, order: n }
    }

    /// Compactified tail [r0, ∞) through r = r0/(1 − u), u ∈ [0, 1).
    pub fn tail(r0: f64, n: usize) -> Self {
        let base = Self::gauss(0.0, 1.0, n);
        let nodes = base.nodes.iter().map(|u| r0 / (1.0 - u)).collect();
        let weights = base.weights.iter().zip(&base.nodes).map(|(w, u)| w * r0 / ((1.0 - u) * (1.0 - u))).collect();
        Self { nodes, weights, order: n }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let v: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(r, w)| w * f(*r)).collect();
        pairwise_sum(&v).unwrap_or(0.0)
    }

    /// Product with a sphere rule in polar coordinates, Jacobian r³ included.
    pub fn with_sphere(&self, sphere: &SphereRule) -> PointRule {
        let mut nodes = Vec::with_capacity(self.nodes.len() * sphere.rule.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (r, wr) in self.nodes.iter().zip(&self.weights) {
            let jac = wr * r * r * r;
            for (x, ws) in sphere.rule.nodes.iter().zip(&sphere.rule.weights) {
                nodes.push(x * *r);
                weights.push(jac * ws);
            }
        }
        PointRule { nodes, weights }
    }
}

/// Orders and split radius for the R⁴ and ball rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub sphere: SphereOrders,
    pub radial: usize,
    pub tail: usize,
    pub tail_r0: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { sphere: SphereOrders::default(), radial: 48, tail: 48, tail_r0: 2.0 }
    }
}

impl QuadratureConfig {
    pub fn doubled(&self) -> Self {
        Self { sphere: self.sphere.doubled(), radial: 2 * self.radial, tail: 2 * self.tail, tail_r0: self.tail_r0 }
    }

    pub fn ball(&self, radius: f64) -> PointRule {
        RadialRule::gauss(0.0, radius, self.radial).with_sphere(&SphereRule::new(self.sphere))
    }

    /// Radius rule on [0, r0] ∪ [r0, ∞).
    pub fn r4(&self) -> PointRule {
        let sphere = SphereRule::new(self.sphere);
        let mut a = RadialRule::gauss(0.0, self.tail_r0, self.radial).with_sphere(&sphere);
        let b = RadialRule::tail(self.tail_r0, self.tail).with_sphere(&sphere);
        a.nodes.extend(b.nodes);
        a.weights.extend(b.weights);
        a
    }
}

/// Ball of the given radius at the configured orders.
pub fn integrate_ball<T, F>(f: F, radius: f64, q: &QuadratureConfig, exec: Exec) -> Result<T>
where
    T: Summand,
    F: Fn(&Vector4<f64>) -> Result<T> + Sync + Send,
{
    q.ball(radius).integrate(exec, f)
}

pub fn integrate_sphere3<T, F>(f: F, rule: &SphereRule, exec: Exec) -> Result<T>
where
    T: Summand,
    F: Fn(&Vector4<f64>) -> Result<T> + Sync + Send,
{
    rule.integrate(exec, f)
}

pub fn integrate_r4<T, F>(f: F, q: &QuadratureConfig, exec: Exec) -> Result<T>
where
    T: Summand,
    F: Fn(&Vector4<f64>) -> Result<T> + Sync + Send,
{
    q.r4().integrate(exec, f)
}

/// Integral over R⁴ with an order-doubling check. Returns the refined value
/// and the change between the two orders, and fails when the relative change
/// exceeds `rel_tol`.
pub fn integrate_r4_checked<T, F>(f: F, q: &QuadratureConfig, rel_tol: f64, exec: Exec) -> Result<(T, f64)>
where
    T: Summand,
    F: Fn(&Vector4<f64>) -> Result<T> + Sync + Send,
{
    let coarse = q.r4().integrate(exec, &f)?;
    let fine = q.doubled().r4().integrate(exec, &f)?;
    let delta = fine.add(&coarse.scale(-1.0)).max_abs();
    let scale = fine.max_abs().max(1e-300);
    if !(delta <= rel_tol * scale.max(1.0)) {
        return Err(Error::NonConvergence(delta));
    }
    Ok((fine, delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    const S3: f64 = 2.0 * PI * PI;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn sphere_moments() {
        let r = SphereRule::default();
        let one: f64 = r.integrate(Exec::Sequential, |_| Ok(1.0)).unwrap();
        assert!((one - S3).abs() < 1e-13);
        assert!((r.rule.weight_sum() - S3).abs() < 1e-13);
        assert!(r.rule.weights.iter().all(|w| *w > 0.0));
        let x11: f64 = r.integrate(Exec::Sequential, |x| Ok(x[0] * x[0])).unwrap();
        assert!((x11 - S3 / 4.0).abs() < 1e-13);
        let x12: f64 = r.integrate(Exec::Sequential, |x| Ok(x[0] * x[1])).unwrap();
        assert!(x12.abs() < 1e-15);
        for k in 0..4 {
            let s: f64 = r.integrate(Exec::Sequential, |x| Ok(x[k].powi(4))).unwrap();
            assert!((s - PI * PI / 4.0).abs() < 1e-13);
        }
        let m: f64 = r.integrate(Exec::Sequential, |x| Ok(x[2] * x[2] * x[3] * x[3])).unwrap();
        assert!((m - PI * PI / 12.0).abs() < 1e-13);
    }

    #[test]
    fn sphere_monomials_and_odd_symmetry() {
        // ∫ x^a over S³ = 2 Π Γ((a_i+1)/2) / Γ((|a|+4)/2) for even exponents.
        fn gamma_half(k: u32) -> f64 {
            // Γ(k/2) for positive integer k.
            if k == 1 {
                return PI.sqrt();
            }
            if k == 2 {
                return 1.0;
            }
            (k as f64 / 2.0 - 1.0) * gamma_half(k - 2)
        }
        let r = SphereRule::default();
        for a in 0..5u32 {
            for b in 0..5u32 {
                for c in 0..3u32 {
                    for d in 0..3u32 {
                        let e = [a, b, c, d];
                        let v: f64 = r
                            .integrate(Exec::Sequential, |x| {
                                Ok((0..4).map(|i| x[i].powi(e[i] as i32)).product())
                            })
                            .unwrap();
                        if e.iter().any(|k| k % 2 == 1) {
                            assert!(v.abs() < 1e-14);
                        } else {
                            let num: f64 = e.iter().map(|k| gamma_half(k + 1)).product();
                            let s: u32 = e.iter().sum();
                            let exact = 2.0 * num / gamma_half(s + 4);
                            assert!((v - exact).abs() < 1e-12 * exact.max(1.0), "{e:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ball_integrals() {
        let q = QuadratureConfig { radial: 16, sphere: SphereOrders::uniform(12), ..Default::default() };
        let v: f64 = integrate_ball(|_| Ok(1.0), 1.0, &q, Exec::Sequential).unwrap();
        assert!((v - PI * PI / 2.0).abs() < 1e-13);
        let v: f64 = integrate_ball(|x| Ok(x.norm_squared()), 1.0, &q, Exec::Sequential).unwrap();
        assert!((v - S3 / 6.0).abs() < 1e-13);
        let v: f64 = integrate_ball(|x| Ok(x[0] * (1.0 + x[1] * x[1])), 1.0, &q, Exec::Sequential).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn r4_integrals() {
        let q = QuadratureConfig::default();
        let (v, delta): (f64, f64) = integrate_r4_checked(
            |x| Ok((1.0 + x.norm_squared()).powi(-4)),
            &q,
            1e-8,
            Exec::Parallel,
        )
        .unwrap();
        assert!((v - S3 / 12.0).abs() < 1e-12, "{v}");
        assert!(delta < 1e-10);
        let odd: f64 = integrate_r4(|x| Ok(x[1] * (1.0 + x.norm_squared()).powi(-4)), &q, Exec::Sequential).unwrap();
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn r4_detects_slow_decay() {
        let q = QuadratureConfig { radial: 8, tail: 8, sphere: SphereOrders::uniform(4), tail_r0: 1.0 };
        let r = integrate_r4_checked(|x| Ok((1.0 + x.norm_squared()).powf(-2.05)), &q, 1e-8, Exec::Sequential);
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }

    #[test]
    fn log_gauss_shell() {
        let r = RadialRule::log_gauss(1e-4, 1.0, 40);
        let v = r.integrate(|r| 1.0 / r);
        assert!((v - (1e4f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn policies_agree_bitwise() {
        let q = QuadratureConfig { radial: 10, tail: 10, sphere: SphereOrders::uniform(8), tail_r0: 1.5 };
        let f = |x: &Vector4<f64>| Ok((x[0] + 0.3).exp() * (1.0 + x.norm_squared()).powi(-5));
        let a: f64 = integrate_r4(f, &q, Exec::Sequential).unwrap();
        let b: f64 = integrate_r4(f, &q, Exec::Parallel).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
