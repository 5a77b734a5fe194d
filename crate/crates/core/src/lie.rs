//! su(2) in the orthonormal basis q_i = σ_i / (i√2), with ⟨a, b⟩ = −tr(ab).
//!
//! In coefficients the bracket is √2 times the cross product. Constant gauge
//! rotations act on coefficients through SO(3).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Element of su(2) given by its coefficients in (q1, q2, q3).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LieElement {
    pub c: [f64; 3],
}

impl LieElement {
    pub const ZERO: LieElement = LieElement { c: [0.0; 3] };

    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Self { c: [c1, c2, c3] }
    }

    /// Basis element q_i, zero-based.
    pub fn basis(i: usize) -> Self {
        let mut c = [0.0; 3];
        c[i] = 1.0;
        Self { c }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self { c: [v[0], v[1], v[2]] }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.c[0], self.c[1], self.c[2])
    }

    /// Imaginary quaternion v·(i, j, k) mapped into su(2); i ↦ √2 q1 keeps
    /// [i, j] = 2k.
    pub fn from_quaternion(v: [f64; 3]) -> Self {
        Self::new(SQRT2 * v[0], SQRT2 * v[1], SQRT2 * v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).sqrt()
    }

    /// Constant gauge rotation g·a·g⁻¹, acting as an SO(3) matrix.
    pub fn rotate(&self, g: &Matrix3<f64>) -> Self {
        Self::from_vector(&(g * self.to_vector()))
    }
}

impl Add for LieElement {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.c[0] + o.c[0], self.c[1] + o.c[1], self.c[2] + o.c[2])
    }
}

impl AddAssign for LieElement {
    fn add_assign(&mut self, o: Self) {
        for k in 0..3 {
            self.c[k] += o.c[k];
        }
    }
}

impl Sub for LieElement {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2])
    }
}

impl Neg for LieElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.c[0], -self.c[1], -self.c[2])
    }
}

impl Mul<f64> for LieElement {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.c[0] * s, self.c[1] * s, self.c[2] * s)
    }
}

/// Lie bracket, [q1, q2] = √2 q3 and cyclic.
pub fn bracket(a: &LieElement, b: &LieElement) -> LieElement {
    let [a1, a2, a3] = a.c;
    let [b1, b2, b3] = b.c;
    LieElement::new(
        SQRT2 * (a2 * b3 - a3 * b2),
        SQRT2 * (a3 * b1 - a1 * b3),
        SQRT2 * (a1 * b2 - a2 * b1),
    )
}

/// Invariant inner product −tr(ab); the q-basis is orthonormal.
pub fn inner(a: &LieElement, b: &LieElement) -> f64 {
    a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2]
}

/// Matrix of b ↦ [x, b] in the q-basis.
pub fn ad_matrix(x: &LieElement) -> Matrix3<f64> {
    let [x1, x2, x3] = x.c;
    Matrix3::new(0.0, -x3, x2, x3, 0.0, -x1, -x2, x1, 0.0) * SQRT2
}

/// Rotation exp(θ n̂×) in SO(3), used as a constant gauge transformation.
pub fn gauge_rotation(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let n = Vector3::new(axis[0], axis[1], axis[2]);
    let norm = n.norm();
    if norm == 0.0 {
        return Matrix3::identity();
    }
    let u = nalgebra::Unit::new_unchecked(n / norm);
    *nalgebra::Rotation3::from_axis_angle(&u, angle).matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M2 = [[Complex64; 2]; 2];

    fn pauli(i: usize) -> M2 {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let im = Complex64::new(0.0, 1.0);
        match i {
            0 => [[z, o], [o, z]],
            1 => [[z, -im], [im, z]],
            _ => [[o, z], [z, -o]],
        }
    }

    // q_i = σ_i / (i√2)
    fn q_matrix(i: usize) -> M2 {
        let s = pauli(i);
        let f = Complex64::new(0.0, -1.0 / SQRT2);
        [[s[0][0] * f, s[0][1] * f], [s[1][0] * f, s[1][1] * f]]
    }

    fn mat_of(a: &LieElement) -> M2 {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..3 {
            let q = q_matrix(i);
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] += q[r][c] * a.c[i];
                }
            }
        }
        m
    }

    fn mul(a: &M2, b: &M2) -> M2 {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                for k in 0..2 {
                    m[r][c] += a[r][k] * b[k][c];
                }
            }
        }
        m
    }

    fn neg_trace(a: &M2, b: &M2) -> f64 {
        let p = mul(a, b);
        -(p[0][0] + p[1][1]).re
    }

    fn coeffs_of(m: &M2) -> LieElement {
        let mut c = [0.0; 3];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = neg_trace(&q_matrix(i), m);
        }
        LieElement { c }
    }

    fn random(rng: &mut ChaCha8Rng) -> LieElement {
        LieElement::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    }

    #[test]
    fn matrix_basis_is_orthonormal() {
        for i in 0..3 {
            for j in 0..3 {
                let v = neg_trace(&q_matrix(i), &q_matrix(j));
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bracket_matches_matrix_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = random(&mut rng);
            let b = random(&mut rng);
            let (ma, mb) = (mat_of(&a), mat_of(&b));
            let ab = mul(&ma, &mb);
            let ba = mul(&mb, &ma);
            let mut comm = ab;
            for r in 0..2 {
                for c in 0..2 {
                    comm[r][c] -= ba[r][c];
                }
            }
            let expect = coeffs_of(&comm);
            let got = bracket(&a, &b);
            assert!((got - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn basis_brackets() {
        let q = |i| LieElement::basis(i);
        assert_eq!(bracket(&q(0), &q(0)), LieElement::ZERO);
        assert!((bracket(&q(0), &q(1)) - q(2) * SQRT2).norm() < 1e-15);
        assert!((bracket(&q(1), &q(2)) - q(0) * SQRT2).norm() < 1e-15);
        assert!((bracket(&q(2), &q(0)) - q(1) * SQRT2).norm() < 1e-15);
        assert_eq!(inner(&q(0), &q(0)), 1.0);
        assert_eq!(inner(&q(0), &q(1)), 0.0);
    }

    #[test]
    fn jacobi_and_ad_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (x, a, b) = (random(&mut rng), random(&mut rng), random(&mut rng));
            let jac = bracket(&x, &bracket(&a, &b))
                + bracket(&a, &bracket(&b, &x))
                + bracket(&b, &bracket(&x, &a));
            assert!(jac.norm() < 1e-12);
            let inv = inner(&bracket(&x, &a), &b) + inner(&a, &bracket(&x, &b));
            assert!(inv.abs() < 1e-12);
            let anti = bracket(&a, &b) + bracket(&b, &a);
            assert!(anti.norm() < 1e-15);
        }
    }

    #[test]
    fn ad_matrix_is_skew_and_matches_bracket() {
        assert_eq!(ad_matrix(&LieElement::ZERO), Matrix3::zeros());
        for i in 0..3 {
            let m = ad_matrix(&LieElement::basis(i));
            assert_eq!(m + m.transpose(), Matrix3::zeros());
        }
        let m = ad_matrix(&LieElement::basis(0));
        let img = m * Vector3::new(0.0, 1.0, 0.0);
        assert!((img - Vector3::new(0.0, 0.0, SQRT2)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (x, b) = (random(&mut rng), random(&mut rng));
            let via = LieElement::from_vector(&(ad_matrix(&x) * b.to_vector()));
            assert!((via - bracket(&x, &b)).norm() < 1e-14);
        }
    }

    #[test]
    fn quaternion_units_close_under_bracket() {
        let i = LieElement::from_quaternion([1.0, 0.0, 0.0]);
        let j = LieElement::from_quaternion([0.0, 1.0, 0.0]);
        let k = LieElement::from_quaternion([0.0, 0.0, 1.0]);
        assert!((bracket(&i, &j) - k * 2.0).norm() < 1e-14);
    }

    #[test]
    fn rotations_preserve_bracket() {
        let g = gauge_rotation([0.3, -1.0, 0.2], 0.7);
        let a = LieElement::new(0.1, 0.5, -0.3);
        let b = LieElement::new(-0.7, 0.2, 0.4);
        let lhs = bracket(&a.rotate(&g), &b.rotate(&g));
        let rhs = bracket(&a, &b).rotate(&g);
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((inner(&a.rotate(&g), &b.rotate(&g)) - inner(&a, &b)).abs() < 1e-14);
    }
}
