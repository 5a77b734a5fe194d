//! Sums of terms c·x^e·|x|^s on R⁴ with exact differentiation.

use std::collections::BTreeMap;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub exps: [u32; 4],
    #[serde(default)]
    pub rpow: i32,
}

impl Term {
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn eval(&self, x: &Vector4<f64>) -> f64 {
        let mut v = self.coef;
        for i in 0..4 {
            if self.exps[i] > 0 {
                v *= x[i].powi(self.exps[i] as i32);
            }
        }
        if self.rpow != 0 {
            v *= x.norm().powi(self.rpow);
        }
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub terms: Vec<Term>,
}

impl Poly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn monomial(coef: f64, exps: [u32; 4]) -> Self {
        Self { terms: vec![Term { coef, exps, rpow: 0 }] }.simplified()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, [0; 4])
    }

    pub fn coordinate(i: usize) -> Self {
        let mut e = [0; 4];
        e[i] = 1;
        Self::monomial(1.0, e)
    }

    pub fn eval(&self, x: &Vector4<f64>) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Merges like terms and drops zero coefficients.
    pub fn simplified(mut self) -> Self {
        let mut map: BTreeMap<([u32; 4], i32), f64> = BTreeMap::new();
        for t in self.terms.drain(..) {
            *map.entry((t.exps, t.rpow)).or_insert(0.0) += t.coef;
        }
        Self {
            terms: map
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|((exps, rpow), coef)| Term { coef, exps, rpow })
                .collect(),
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().copied());
        Poly { terms }.simplified()
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly { terms: self.terms.iter().map(|t| Term { coef: t.coef * s, ..*t }).collect() }.simplified()
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &o.terms {
                let mut exps = a.exps;
                for i in 0..4 {
                    exps[i] += b.exps[i];
                }
                terms.push(Term { coef: a.coef * b.coef, exps, rpow: a.rpow + b.rpow });
            }
        }
        Poly { terms }.simplified()
    }

    /// ∂_k, using ∂_k |x|^s = s x_k |x|^{s−2}.
    pub fn partial(&self, k: usize) -> Poly {
        let mut terms = Vec::new();
        for t in &self.terms {
            if t.exps[k] > 0 {
                let mut e = t.exps;
                e[k] -= 1;
                terms.push(Term { coef: t.coef * t.exps[k] as f64, exps: e, rpow: t.rpow });
            }
            if t.rpow != 0 {
                let mut e = t.exps;
                e[k] += 1;
                terms.push(Term { coef: t.coef * t.rpow as f64, exps: e, rpow: t.rpow - 2 });
            }
        }
        Poly { terms }.simplified()
    }

    /// Exact flat Laplacian: Δ(m r^s) = r^s Δm + s(2d + s + 2) m r^{s−2}.
    pub fn laplacian(&self) -> Poly {
        let mut terms = Vec::new();
        for t in &self.terms {
            for i in 0..4 {
                if t.exps[i] >= 2 {
                    let mut e = t.exps;
                    e[i] -= 2;
                    let f = (t.exps[i] * (t.exps[i] - 1)) as f64;
                    terms.push(Term { coef: t.coef * f, exps: e, rpow: t.rpow });
                }
            }
            if t.rpow != 0 {
                let s = t.rpow as f64;
                let d = t.degree() as f64;
                terms.push(Term { coef: t.coef * s * (2.0 * d + s + 2.0), exps: t.exps, rpow: t.rpow - 2 });
            }
        }
        Poly { terms }.simplified()
    }

    /// ∂_r at x, from homogeneity: x·∇(m r^s) = (d + s) m r^s.
    pub fn radial_derivative(&self, x: &Vector4<f64>) -> f64 {
        let r = x.norm();
        self.terms.iter().map(|t| (t.degree() as f64 + t.rpow as f64) * t.eval(x)).sum::<f64>() / r
    }

    /// Kelvin partner |x|⁻² Q(x/|x|²) = Q(x)|x|^{−2−2d}, termwise in the
    /// polynomial degree d.
    pub fn kelvin(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|t| Term { rpow: t.rpow - 2 - 2 * (t.degree() as i32 + t.rpow), ..*t })
                .collect(),
        }
        .simplified()
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.coef.abs()))
    }

    /// All monomials x^e of total degree d, in a fixed order.
    pub fn monomial_exponents(d: u32) -> Vec<[u32; 4]> {
        let mut out = Vec::new();
        for a in (0..=d).rev() {
            for b in (0..=(d - a)).rev() {
                for c in (0..=(d - a - b)).rev() {
                    out.push([a, b, c, d - a - b - c]);
                }
            }
        }
        out
    }
}
