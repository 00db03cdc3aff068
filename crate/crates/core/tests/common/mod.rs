//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-15 * (left + right).abs() {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// E1(s) by quadrature after substituting x = e^v, which removes the 1/x
/// singularity: E1(s) = e^{-s} ∫_{ln s}^{∞} exp(s - e^v) dv. Factoring out
/// e^{-s} keeps the integrand O(1) so the tolerance is effectively relative.
pub fn e1_quadrature(s: f64) -> f64 {
    let lo = s.ln();
    let hi = (s + 750.0).ln();
    let f = |v: f64| (s - v.exp()).exp();
    let tol = 1e-14 / (1.0 + s);
    let inner = if lo < 0.0 {
        adaptive_simpson(&f, lo, 0.0, tol) + adaptive_simpson(&f, 0.0, hi, tol)
    } else {
        adaptive_simpson(&f, lo, hi, tol)
    };
    (-s).exp() * inner
}

/// Φ(x) by quadrature of the normal density from 0.
pub fn normal_cdf_quadrature(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 + adaptive_simpson(&pdf, 0.0, x, 1e-16)
}

/// Bisection for a root of an increasing function on [lo, hi].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Student t(3) distribution function in closed form.
pub fn t3_cdf(x: f64) -> f64 {
    let s3 = 3f64.sqrt();
    let th = (x / s3).atan();
    0.5 + (th + th.sin() * th.cos()) / std::f64::consts::PI
}

/// Central finite difference of a vector-valued function in one coordinate.
pub fn central_diff<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[k] += h;
    dn[k] -= h;
    let a = f(&up);
    let b = f(&dn);
    a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}
