//! Root conditions for linear CAViaR DGPs
//! `y_t = β₀(u_t) + Σ_i β_i f_{t-i}(β_{u_t}) + Σ_j β_{q+j} y_{t-j}`.
//!
//! A DGP passes when `|Σ β_i| < 1` and the roots of
//! `g₁(x) = 1 − Σ β_i xⁱ − Σ β_{q+j} xʲ`, together with the common roots of
//! `g₂(x) = 1 − Σ β_i xⁱ` and `g₃(x) = 1 − Σ β_{q+j} xʲ`, all lie outside the
//! unit circle. These are necessary conditions only, so a `Stable` verdict
//! means "passes the necessary conditions".

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::model::{InterceptBasis, Transform};

/// Roots within this distance of the unit circle are undecidable.
pub const UNIT_CIRCLE_MARGIN: f64 = 1e-8;
const COMMON_ROOT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    Explosive,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub quantile_lag_sum: f64,
    pub condition1_ok: bool,
    pub g1_roots: Vec<Complex64>,
    pub g2g3_common_roots: Vec<Complex64>,
    pub verdict: Verdict,
}

impl StabilityVerdict {
    /// Moduli of every root that enters the verdict, ascending.
    pub fn root_moduli(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .g1_roots
            .iter()
            .chain(&self.g2g3_common_roots)
            .map(|z| z.norm())
            .collect();
        m.sort_by(f64::total_cmp);
        m
    }
}

/// Classifies quantile-lag coefficients `β₁..β_q` and y-lag coefficients
/// `β_{q+1}..β_{q+r}` (y-lag `j` at index `j-1`).
pub fn classify(quantile_lags: &[f64], y_lags: &[f64]) -> Result<StabilityVerdict> {
    if quantile_lags.iter().chain(y_lags).any(|b| !b.is_finite()) {
        return Err(Error::Domain("stability coefficients must be finite".into()));
    }
    let q = quantile_lags.len();
    let r = y_lags.len();
    let deg = q.max(r);
    let mut g1 = vec![0.0; deg + 1];
    g1[0] = 1.0;
    for (i, b) in quantile_lags.iter().enumerate() {
        g1[i + 1] -= b;
    }
    for (j, b) in y_lags.iter().enumerate() {
        g1[j + 1] -= b;
    }
    let g2: Vec<f64> = std::iter::once(1.0).chain(quantile_lags.iter().map(|b| -b)).collect();
    let g3: Vec<f64> = std::iter::once(1.0).chain(y_lags.iter().map(|b| -b)).collect();

    let g1_roots = find_roots(&g1)?;
    let common: Vec<Complex64> = find_roots(&g2)?
        .into_iter()
        .filter(|x| horner(&g3, *x).norm() <= COMMON_ROOT_TOL * (1.0 + x.norm().powi(r as i32)))
        .collect();

    let sum: f64 = quantile_lags.iter().sum();
    let condition1_ok = sum.abs() < 1.0;
    let moduli: Vec<f64> = g1_roots.iter().chain(&common).map(|z| z.norm()).collect();
    let inside = moduli.iter().any(|m| *m < 1.0 - UNIT_CIRCLE_MARGIN);
    let near = moduli
        .iter()
        .any(|m| (m - 1.0).abs() <= UNIT_CIRCLE_MARGIN)
        || (sum.abs() - 1.0).abs() <= UNIT_CIRCLE_MARGIN;
    let verdict = if inside || (!condition1_ok && !near) {
        Verdict::Explosive
    } else if near {
        Verdict::Boundary
    } else {
        Verdict::Stable
    };
    Ok(StabilityVerdict {
        quantile_lag_sum: sum,
        condition1_ok,
        g1_roots,
        g2g3_common_roots: common,
        verdict,
    })
}

/// Classifies a catalog-style DGP whose slope coefficients do not depend on
/// `u` and whose regressors are plain lagged observations.
pub fn classify_dgp(dgp: &DgpSpec) -> Result<StabilityVerdict> {
    if dgp.intercept != InterceptBasis::Constant {
        return Err(Error::UnsupportedForm(format!(
            "DGP {} scales its intercept by a lagged observable",
            dgp.name
        )));
    }
    if let Some(reg) = dgp.regressors.iter().find(|r| r.transform != Transform::Identity) {
        return Err(Error::UnsupportedForm(format!(
            "DGP {} enters y_(t-{}) through a {:?} transform",
            dgp.name, reg.lag, reg.transform
        )));
    }
    if dgp.coefs[1..].iter().any(|c| !c.is_constant()) {
        return Err(Error::UnsupportedForm(format!(
            "DGP {} has slope coefficients that vary with the quantile level",
            dgp.name
        )));
    }
    let beta = dgp.beta_at(0.5);
    let quantile_lags = beta[1..=dgp.q].to_vec();
    let max_lag = dgp.regressors.iter().map(|r| r.lag).max().unwrap_or(0);
    let mut y_lags = vec![0.0; max_lag];
    for (j, reg) in dgp.regressors.iter().enumerate() {
        y_lags[reg.lag - 1] += beta[1 + dgp.q + j];
    }
    classify(&quantile_lags, &y_lags)
}

fn horner(coefs: &[f64], x: Complex64) -> Complex64 {
    coefs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

fn horner_with_derivative(coefs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coefs.iter().rev().fold((zero, zero), |(p, dp), c| (p * x + c, dp * x + p))
}

/// All complex roots of `c₀ + c₁x + … + c_n xⁿ`, repeated by multiplicity.
///
/// Eigenvalues of the balanced companion matrix by shifted Hessenberg QR,
/// then a few Newton steps on the original polynomial. A nonzero constant has
/// no roots.
pub fn find_roots(coefs: &[f64]) -> Result<Vec<Complex64>> {
    let n_nonzero = coefs.iter().rposition(|c| *c != 0.0);
    let top = match n_nonzero {
        None => return Err(Error::ZeroPolynomial),
        Some(i) => i,
    };
    if coefs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("polynomial coefficients must be finite".into()));
    }
    let c = &coefs[..=top];
    let n = top;
    if n == 0 {
        return Ok(Vec::new());
    }
    // companion matrix in upper Hessenberg form
    let lead = c[n];
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..n {
        a[0][j] = -c[n - 1 - j] / lead;
    }
    for i in 1..n {
        a[i][i - 1] = 1.0;
    }
    balance(&mut a);
    let eig = hqr(&mut a)?;
    Ok(eig
        .into_iter()
        .map(|mut z| {
            for _ in 0..3 {
                let (p, dp) = horner_with_derivative(c, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                let cand = z - step;
                if horner(c, cand).norm() < p.norm() {
                    z = cand;
                } else {
                    break;
                }
            }
            z
        })
        .collect())
}

// Parlett–Reinsch balancing.
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
// iteration (after the classic EISPACK hqr routine).
#[allow(clippy::needless_range_loop)]
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let s = a[lu - 1][lu - 1].abs() + a[lu][lu].abs();
                let s = if s == 0.0 { anorm } else { s };
                if a[lu][lu - 1].abs() + s == s {
                    a[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            let x = a[nu][nu];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let y = a[nu - 1][nu - 1];
            let w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let z = q.abs().sqrt();
                let xx = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    wr[nu - 1] = xx + z;
                    wr[nu] = if z != 0.0 { xx - w / z } else { xx + z };
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = xx + p;
                    wr[nu] = xx + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::Domain("QR iteration for polynomial roots did not converge".into()));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                t += x;
                for i in 0..=nu {
                    a[i][i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let lu = l as usize;
            let mut m = nn - 2;
            while m >= l {
                let mu = m as usize;
                let z = a[mu][mu];
                r = x - z;
                let s = y - z;
                p = (r * s - w) / a[mu + 1][mu] + a[mu][mu + 1];
                q = a[mu + 1][mu + 1] - z - r - s;
                r = a[mu + 2][mu + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[mu][mu - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[mu - 1][mu - 1].abs() + z.abs() + a[mu + 1][mu + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in mu + 2..=nu {
                a[i][i - 2] = 0.0;
                if i != mu + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = mu;
            while k < nu {
                if k != mu {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k + 1 != nu { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == mu {
                        if lu != mu {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in lu..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k + 1 != nu {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re));
        v.into_iter().map(|z| z.re).collect()
    }

    #[test]
    fn linear_and_quadratic_roots() {
        let r = find_roots(&[1.0, -0.5]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        let r = sorted_re(find_roots(&[1.0, 0.0, -1.0]).unwrap());
        assert!((r[0] + 1.0).abs() < 1e-14 && (r[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_pair() {
        // x² + 1
        let r = find_roots(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.len(), 2);
        for z in r {
            assert!((z.norm() - 1.0).abs() < 1e-14 && z.re.abs() < 1e-14);
        }
    }

    #[test]
    fn trailing_zeros_and_constants() {
        assert_eq!(find_roots(&[0.0, 0.0]), Err(Error::ZeroPolynomial));
        assert!(find_roots(&[3.0, 0.0]).unwrap().is_empty());
        let r = find_roots(&[1.0, -0.5, 0.0, 0.0]).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn verdict_examples() {
        let v = classify(&[], &[0.5]).unwrap();
        assert_eq!(v.verdict, Verdict::Stable);
        assert!((v.g1_roots[0].re - 2.0).abs() < 1e-12);

        // DGP 1.b: g1 ≡ 1
        let v = classify(&[0.5], &[-0.5]).unwrap();
        assert!(v.g1_roots.is_empty());
        assert_eq!(v.verdict, Verdict::Stable);

        let v = classify(&[0.6], &[0.6]).unwrap();
        assert_eq!(v.verdict, Verdict::Explosive);
        assert!((v.g1_roots[0].re - 1.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn common_roots_need_both_polynomials() {
        // g2 = 1 - 2x and g3 = 1 - 2x share the root 1/2
        let v = classify(&[2.0], &[2.0]).unwrap();
        assert_eq!(v.g2g3_common_roots.len(), 1);
        assert_eq!(v.verdict, Verdict::Explosive);
        // here they share nothing
        let v = classify(&[0.5], &[0.3]).unwrap();
        assert!(v.g2g3_common_roots.is_empty());
    }

    #[test]
    fn unit_root_is_boundary() {
        assert_eq!(classify(&[], &[1.0]).unwrap().verdict, Verdict::Boundary);
        assert_eq!(classify(&[1.0], &[-1.0]).unwrap().verdict, Verdict::Boundary);
    }
}
