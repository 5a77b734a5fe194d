//! Central finite differences with Richardson extrapolation.

use nalgebra::Vector4;

use crate::error::Result;
use crate::exec::Summand;

fn central<T: Summand>(f: &impl Fn(&Vector4<f64>) -> Result<T>, x: &Vector4<f64>, k: usize, h: f64) -> Result<T> {
    let mut e = Vector4::zeros();
    e[k] = h;
    let p = f(&(x + e))?;
    let m = f(&(x - e))?;
    Ok(p.add(&m.scale(-1.0)).scale(0.5 / h))
}

/// ∂_k f(x) from steps h and h/2 with one Richardson level (error O(h⁴)).
pub fn partial<T: Summand>(f: &impl Fn(&Vector4<f64>) -> Result<T>, x: &Vector4<f64>, k: usize, h: f64) -> Result<T> {
    let d1 = central(f, x, k, h)?;
    let d2 = central(f, x, k, 0.5 * h)?;
    Ok(d2.scale(4.0 / 3.0).add(&d1.scale(-1.0 / 3.0)))
}

/// ∂_k f(x) with two Richardson levels (error O(h⁶)).
pub fn partial2<T: Summand>(f: &impl Fn(&Vector4<f64>) -> Result<T>, x: &Vector4<f64>, k: usize, h: f64) -> Result<T> {
    let r1 = partial(f, x, k, h)?;
    let r2 = partial(f, x, k, 0.5 * h)?;
    Ok(r2.scale(16.0 / 15.0).add(&r1.scale(-1.0 / 15.0)))
}

/// All four partials.
pub fn gradient<T: Summand>(f: &impl Fn(&Vector4<f64>) -> Result<T>, x: &Vector4<f64>, h: f64) -> Result<[T; 4]> {
    Ok([partial(f, x, 0, h)?, partial(f, x, 1, h)?, partial(f, x, 2, h)?, partial(f, x, 3, h)?])
}
