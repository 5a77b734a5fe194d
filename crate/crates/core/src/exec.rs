//! Execution policy for node-parallel evaluation and deterministic reduction.
//!
//! Values are always collected in index order and reduced pairwise, so a
//! result does not depend on the thread count or on the policy.

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Evaluates f at 0..n, keeping index order. Without the `parallel`
    /// feature both policies run sequentially.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn try_map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

/// Values that can be accumulated by a quadrature rule.
pub trait Summand: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn scale(&self, w: f64) -> Self;
    fn max_abs(&self) -> f64;
}

impl Summand for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn scale(&self, w: f64) -> Self {
        self * w
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

macro_rules! summand_matrix {
    ($t:ty) => {
        impl Summand for $t {
            fn zero_like(&self) -> Self {
                <$t>::zeros()
            }
            fn add(&self, o: &Self) -> Self {
                self + o
            }
            fn scale(&self, w: f64) -> Self {
                self * w
            }
            fn max_abs(&self) -> f64 {
                self.amax()
            }
        }
    };
}

summand_matrix!(Matrix4<f64>);
summand_matrix!(Matrix3<f64>);
summand_matrix!(Vector4<f64>);

impl<A: Summand, B: Summand> Summand for (A, B) {
    fn zero_like(&self) -> Self {
        (self.0.zero_like(), self.1.zero_like())
    }
    fn add(&self, o: &Self) -> Self {
        (self.0.add(&o.0), self.1.add(&o.1))
    }
    fn scale(&self, w: f64) -> Self {
        (self.0.scale(w), self.1.scale(w))
    }
    fn max_abs(&self) -> f64 {
        self.0.max_abs().max(self.1.max_abs())
    }
}

impl Summand for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add(&self, o: &Self) -> Self {
        self.iter().zip(o).map(|(a, b)| a + b).collect()
    }
    fn scale(&self, w: f64) -> Self {
        self.iter().map(|a| a * w).collect()
    }
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Pairwise (cascade) summation in index order. Returns None when empty.
pub fn pairwise_sum<T: Summand>(values: &[T]) -> Option<T> {
    match values.len() {
        0 => None,
        1 => Some(values[0].clone()),
        n => {
            let (l, r) = values.split_at(n / 2);
            Some(pairwise_sum(l)?.add(&pairwise_sum(r)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_order_and_policy() {
        let v: Vec<f64> = (0..1001).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let s = pairwise_sum(&v).unwrap();
        let naive: f64 = v.iter().sum();
        assert!((s - naive).abs() < 1e-12);
        let a = Exec::Sequential.map(1001, |i| 1.0 / (1.0 + i as f64));
        let b = Exec::Parallel.map(1001, |i| 1.0 / (1.0 + i as f64));
        assert_eq!(pairwise_sum(&a).unwrap().to_bits(), pairwise_sum(&b).unwrap().to_bits());
        assert!(pairwise_sum::<f64>(&[]).is_none());
    }
}
