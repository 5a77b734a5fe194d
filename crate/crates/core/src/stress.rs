//! Stress-energy tensor S = ¼|F|²h − F∘F and its covariant divergence.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::exterior::{circ, inner_forms, GForm2, MetricAt, Tensor2};
use crate::fd;
use crate::gauge::Connection;
use crate::geometry::MetricField;

/// Step for the divergence stencil.
pub const DIVERGENCE_STEP: f64 = 1e-3;

pub fn stress(f: &GForm2, m: &MetricAt) -> Tensor2 {
    let s = m.h * (0.25 * inner_forms(f, f, m)) - circ(f, f, m);
    (s + s.transpose()) * 0.5
}

/// S_{F+G} − S_F − S_G = ½⟨F,G⟩h − F∘G − G∘F.
pub fn stress_cross_expansion(f: &GForm2, g: &GForm2, m: &MetricAt) -> Tensor2 {
    m.h * (0.5 * inner_forms(f, g, m)) - circ(f, g, m) - circ(g, f, m)
}

/// tr_h S.
pub fn trace_h(s: &Tensor2, m: &MetricAt) -> f64 {
    (m.inv * s).trace()
}

/// S of a connection in the chart of `metric`.
pub fn stress_at(a: &Connection, metric: &MetricField, x: &Vector4<f64>) -> Result<Tensor2> {
    let m = metric.metric_at(x)?;
    Ok(stress(&a.curvature(x)?, &m))
}

/// (div S)_j = h^{ik}(∂_k S_ij − Γ^m_ki S_mj − Γ^m_kj S_im).
pub fn divergence(
    s_field: &impl Fn(&Vector4<f64>) -> Result<Tensor2>,
    metric: &MetricField,
    x: &Vector4<f64>,
) -> Result<Vector4<f64>> {
    let m = metric.metric_at(x)?;
    let g = metric.christoffel(x)?;
    let s = s_field(x)?;
    let ds = fd::gradient(s_field, x, DIVERGENCE_STEP)?;
    let mut out = Vector4::zeros();
    for j in 0..4 {
        let mut v = 0.0;
        for i in 0..4 {
            for k in 0..4 {
                let mut t = ds[k][(i, j)];
                for mm in 0..4 {
                    t -= g[mm][(k, i)] * s[(mm, j)] + g[mm][(k, j)] * s[(i, mm)];
                }
                v += m.inv[(i, k)] * t;
            }
        }
        out[j] = v;
    }
    Ok(out)
}

/// Covariant divergence of the stress tensor of a connection.
pub fn connection_divergence(a: &Connection, metric: &MetricField, x: &Vector4<f64>) -> Result<Vector4<f64>> {
    divergence(&|p: &Vector4<f64>| stress_at(a, metric, p), metric, x)
}

/// (ι_{∂r}S ⊗ r dr)_ij = S_ik x̂^k x_j.
pub fn radial_stress_row(s: &Tensor2, x: &Vector4<f64>) -> Result<Tensor2> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    Ok(s * (x / r) * x.transpose())
}

/// Largest asymmetry and |tr_h| of S.
pub fn stress_defects(s: &Tensor2, m: &MetricAt) -> (f64, f64) {
    ((s - s.transpose()).amax(), trace_h(s, m).abs())
}

/// A symmetric tensor rotated by an orthogonal matrix.
pub fn conjugate(s: &Tensor2, r: &Matrix4<f64>) -> Tensor2 {
    r * s * r.transpose()
}
