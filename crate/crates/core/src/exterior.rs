//! Pointwise exterior algebra on R⁴ for real and su(2)-valued forms.
//!
//! A 2-form is stored as an antisymmetric 4×4 matrix F_ij; a su(2)-valued
//! 2-form as three such matrices, one per q-coefficient. Inner products sum
//! over all ordered index pairs, so |dx¹∧dx²|² = 2.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::LieElement;

pub type Tensor2 = Matrix4<f64>;

/// Metric at a point with the factorizations used by the Hodge star.
#[derive(Debug, Clone, Copy)]
pub struct MetricAt {
    pub h: Matrix4<f64>,
    pub inv: Matrix4<f64>,
    /// Lower-triangular L with h = L Lᵀ.
    pub l: Matrix4<f64>,
    pub sqrt_det: f64,
}

impl MetricAt {
    pub fn new(h: Matrix4<f64>) -> Result<Self> {
        if !h.iter().all(|v| v.is_finite()) || (h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::InvalidMetric);
        }
        let sym = (h + h.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(sym).ok_or(Error::InvalidMetric)?;
        let l = chol.l();
        let inv = chol.inverse();
        let sqrt_det = l.diagonal().product();
        Ok(Self { h: sym, inv, l, sqrt_det })
    }

    pub fn flat() -> Self {
        Self {
            h: Matrix4::identity(),
            inv: Matrix4::identity(),
            l: Matrix4::identity(),
            sqrt_det: 1.0,
        }
    }

    pub fn vec_inner(&self, x: &Vector4<f64>, y: &Vector4<f64>) -> f64 {
        (x.transpose() * self.h * y)[0]
    }
}

/// Real 2-form dx^i∧dx^j as a matrix (zero-based indices).
pub fn dx2(i: usize, j: usize) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(i, j)] += 1.0;
    m[(j, i)] -= 1.0;
    m
}

/// Wedge of two real 1-forms.
pub fn wedge1(a: &Vector4<f64>, b: &Vector4<f64>) -> Matrix4<f64> {
    a * b.transpose() - b * a.transpose()
}

/// Levi-Civita symbol on four zero-based indices.
pub fn levi_civita(i: usize, j: usize, k: usize, l: usize) -> f64 {
    let p = [i, j, k, l];
    for a in 0..4 {
        for b in (a + 1)..4 {
            if p[a] == p[b] {
                return 0.0;
            }
        }
    }
    let mut sign = 1.0;
    let mut q = p;
    for a in 0..4 {
        while q[a] != a {
            let t = q[a];
            q.swap(a, t);
            sign = -sign;
        }
    }
    sign
}

/// Flat Hodge star of a real 2-form: (⋆F)_ij = ½ ε_klij F_kl.
pub fn star_flat_real(f: &Matrix4<f64>) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    let e = levi_civita(k, l, i, j);
                    if e != 0.0 {
                        s += e * f[(k, l)];
                    }
                }
            }
            out[(i, j)] = 0.5 * s;
        }
    }
    out
}

/// Hodge star of a real 2-form for the metric h, through the Cholesky frame.
pub fn star_real(f: &Matrix4<f64>, m: &MetricAt) -> Matrix4<f64> {
    // Frame components F' = L⁻¹ F L⁻ᵀ; back to coordinates with L F'' Lᵀ.
    let linv = m.l.try_inverse().expect("cholesky factor is invertible");
    let framed = linv * f * linv.transpose();
    let s = star_flat_real(&framed);
    m.l * s * m.l.transpose()
}

/// Full-sum inner product Σ_ij F_ij G_ij contracted with h⁻¹.
pub fn inner_real(f: &Matrix4<f64>, g: &Matrix4<f64>, m: &MetricAt) -> f64 {
    (f * m.inv * g.transpose() * m.inv).trace()
}

/// su(2)-valued 1-form; parts[a] holds the q_a-coefficient covector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GForm1 {
    pub parts: [Vector4<f64>; 3],
}

impl GForm1 {
    pub fn zero() -> Self {
        Self { parts: [Vector4::zeros(); 3] }
    }

    /// ω ⊗ q: a real 1-form times a Lie element.
    pub fn from_real(w: &Vector4<f64>, q: &LieElement) -> Self {
        Self { parts: [w * q.c[0], w * q.c[1], w * q.c[2]] }
    }

    /// Coefficient A_i ∈ su(2) of dx^i.
    pub fn component(&self, i: usize) -> LieElement {
        LieElement::new(self.parts[0][i], self.parts[1][i], self.parts[2][i])
    }

    pub fn set_component(&mut self, i: usize, v: &LieElement) {
        for a in 0..3 {
            self.parts[a][i] = v.c[a];
        }
    }

    pub fn from_components(c: [LieElement; 4]) -> Self {
        let mut out = Self::zero();
        for (i, v) in c.iter().enumerate() {
            out.set_component(i, v);
        }
        out
    }

    /// Pointwise inner product with h⁻¹.
    pub fn inner(&self, o: &GForm1, m: &MetricAt) -> f64 {
        (0..3).map(|a| (self.parts[a].transpose() * m.inv * o.parts[a])[0]).sum()
    }

    /// Pullback by a linear map: (Jᵀ A) with J the Jacobian of the chart map.
    pub fn pullback(&self, j: &Matrix4<f64>) -> Self {
        Self { parts: self.parts.map(|p| j.transpose() * p) }
    }

    pub fn apply_lie(&self, g: &Matrix3<f64>) -> Self {
        let mut out = Self::zero();
        for a in 0..3 {
            for b in 0..3 {
                out.parts[a] += self.parts[b] * g[(a, b)];
            }
        }
        out
    }

    pub fn norm_max(&self) -> f64 {
        self.parts.iter().map(|p| p.amax()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

impl Add for GForm1 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { parts: [0, 1, 2].map(|a| self.parts[a] + o.parts[a]) }
    }
}

impl Sub for GForm1 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { parts: [0, 1, 2].map(|a| self.parts[a] - o.parts[a]) }
    }
}

impl Mul<f64> for GForm1 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { parts: self.parts.map(|p| p * s) }
    }
}

/// su(2)-valued 2-form; parts[a] is the antisymmetric matrix ⟨q_a, F_ij⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GForm2 {
    pub parts: [Matrix4<f64>; 3],
}

impl GForm2 {
    pub fn zero() -> Self {
        Self { parts: [Matrix4::zeros(); 3] }
    }

    /// f ⊗ q for a real 2-form f. The antisymmetric part of f is kept.
    pub fn from_real(f: &Matrix4<f64>, q: &LieElement) -> Self {
        let a = (f - f.transpose()) * 0.5;
        Self { parts: [a * q.c[0], a * q.c[1], a * q.c[2]] }
    }

    /// Builds from antisymmetrized parts.
    pub fn from_parts(parts: [Matrix4<f64>; 3]) -> Self {
        Self { parts: parts.map(|p| (p - p.transpose()) * 0.5) }
    }

    /// F_ij as a Lie element.
    pub fn component(&self, i: usize, j: usize) -> LieElement {
        LieElement::new(self.parts[0][(i, j)], self.parts[1][(i, j)], self.parts[2][(i, j)])
    }

    /// Sets F_ij and F_ji = −F_ij.
    pub fn set_component(&mut self, i: usize, j: usize, v: &LieElement) {
        for a in 0..3 {
            self.parts[a][(i, j)] = v.c[a];
            self.parts[a][(j, i)] = -v.c[a];
        }
    }

    pub fn pullback(&self, j: &Matrix4<f64>) -> Self {
        Self { parts: self.parts.map(|p| j.transpose() * p * j) }
    }

    /// Constant gauge rotation g F g⁻¹.
    pub fn apply_lie(&self, g: &Matrix3<f64>) -> Self {
        let mut out = Self::zero();
        for a in 0..3 {
            for b in 0..3 {
                out.parts[a] += self.parts[b] * g[(a, b)];
            }
        }
        out
    }

    pub fn norm_max(&self) -> f64 {
        self.parts.iter().map(|p| p.amax()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

impl Add for GForm2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { parts: [0, 1, 2].map(|a| self.parts[a] + o.parts[a]) }
    }
}

impl Sub for GForm2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { parts: [0, 1, 2].map(|a| self.parts[a] - o.parts[a]) }
    }
}

impl Neg for GForm2 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for GForm2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { parts: self.parts.map(|p| p * s) }
    }
}

/// (ι_X F)_j = Σ_i X^i F_ij.
pub fn interior(x: &Vector4<f64>, f: &GForm2) -> GForm1 {
    GForm1 { parts: f.parts.map(|p| p.transpose() * x) }
}

pub fn hodge_star(f: &GForm2, m: &MetricAt) -> GForm2 {
    GForm2 { parts: f.parts.map(|p| star_real(&p, m)) }
}

/// (F⁺, F⁻) = ((F + ⋆F)/2, (F − ⋆F)/2).
pub fn sd_asd_split(f: &GForm2, m: &MetricAt) -> (GForm2, GForm2) {
    let s = hodge_star(f, m);
    ((*f + s) * 0.5, (*f - s) * 0.5)
}

/// (F∘G)_ij = h^{kl} ⟨F_ik, G_jl⟩.
pub fn circ(f: &GForm2, g: &GForm2, m: &MetricAt) -> Tensor2 {
    let mut out = Matrix4::zeros();
    for a in 0..3 {
        out += f.parts[a] * m.inv * g.parts[a].transpose();
    }
    out
}

/// Full-sum inner product of su(2)-valued 2-forms.
pub fn inner_forms(f: &GForm2, g: &GForm2, m: &MetricAt) -> f64 {
    (0..3).map(|a| inner_real(&f.parts[a], &g.parts[a], m)).sum()
}

pub fn norm_sq(f: &GForm2, m: &MetricAt) -> f64 {
    inner_forms(f, f, m)
}

/// The usual Λ² inner product, Σ over i < j; half the full sum.
pub fn inner_forms_std(f: &GForm2, g: &GForm2, m: &MetricAt) -> f64 {
    0.5 * inner_forms(f, g, m)
}

/// ⟨ι_X a, ι_Y b⟩ + ⟨ι_Y ⋆a, ι_X ⋆b⟩ − ⟨X, Y⟩⟨a, b⟩ with the Λ² product on
/// the right counted over i < j.
pub fn interior_duality_residual(
    a: &GForm2,
    b: &GForm2,
    x: &Vector4<f64>,
    y: &Vector4<f64>,
    m: &MetricAt,
) -> f64 {
    let sa = hodge_star(a, m);
    let sb = hodge_star(b, m);
    let lhs = interior(x, a).inner(&interior(y, b), m) + interior(y, &sa).inner(&interior(x, &sb), m);
    lhs - m.vec_inner(x, y) * inner_forms_std(a, b, m)
}

/// Real self-dual (chirality +1) or anti-self-dual (−1) basis of the flat
/// Λ², orthonormal in the full-sum product.
pub fn chiral_frame_flat(chirality: i32) -> [Matrix4<f64>; 3] {
    let s = if chirality >= 0 { 1.0 } else { -1.0 };
    [
        (dx2(0, 1) + dx2(2, 3) * s) * 0.5,
        (dx2(0, 2) - dx2(1, 3) * s) * 0.5,
        (dx2(0, 3) + dx2(1, 2) * s) * 0.5,
    ]
}

/// The same frame built from the h-orthonormal coframe e^a = Σ_i L_ia dx^i.
pub fn chiral_frame(chirality: i32, m: &MetricAt) -> [Matrix4<f64>; 3] {
    chiral_frame_flat(chirality).map(|t| m.l * t * m.l.transpose())
}

/// Matrix f_ab = ⟨θ^a, ⟨q_b, F⟩⟩_h of the map su(2) → Λ^± for the chosen
/// chirality, after projecting F onto that chirality.
pub fn f_map(f: &GForm2, m: &MetricAt, chirality: i32) -> Matrix3<f64> {
    let (p, n) = sd_asd_split(f, m);
    let part = if chirality >= 0 { p } else { n };
    let frame = chiral_frame(chirality, m);
    let mut out = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            out[(a, b)] = inner_real(&frame[a], &part.parts[b], m);
        }
    }
    out
}

impl crate::exec::Summand for GForm1 {
    fn zero_like(&self) -> Self {
        Self::zero()
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn scale(&self, w: f64) -> Self {
        *self * w
    }
    fn max_abs(&self) -> f64 {
        self.norm_max()
    }
}

impl crate::exec::Summand for GForm2 {
    fn zero_like(&self) -> Self {
        Self::zero()
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn scale(&self, w: f64) -> Self {
        *self * w
    }
    fn max_abs(&self) -> f64 {
        self.norm_max()
    }
}
