//! Sine and cosine integrals in the upper-tail convention
//! `si(x) = −∫ₓ^∞ sin t / t dt`, `ci(x) = −∫ₓ^∞ cos t / t dt`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Below this the power series is used, above it the continued fraction.
pub const SERIES_LIMIT: f64 = 4.0;

/// Returns `(si(x), ci(x))` for `x > 0`.
///
/// Power series for x ≤ 4. Beyond, the auxiliary functions come from the
/// continued fraction of E₁(ix) = −ci(x) + i·si(x), which (unlike the
/// asymptotic expansion) is accurate to rounding already at x = 4.
pub fn sici(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("sici needs a finite x > 0, got {x}")));
    }
    if x <= SERIES_LIMIT {
        Ok(series(x))
    } else {
        continued_fraction(x)
    }
}

pub(crate) fn series(x: f64) -> (f64, f64) {
    let x2 = x * x;
    // Si = Σ (−1)^k x^(2k+1) / ((2k+1)(2k+1)!)
    let mut term = x; // (−1)^k x^(2k+1)/(2k+1)!
    let mut si = x;
    // Ci − γ − ln x = Σ_{k≥1} (−1)^k x^(2k) / (2k (2k)!)
    let mut cterm = 1.0; // (−1)^k x^(2k)/(2k)!
    let mut ci = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= -x2 / ((2.0 * kf) * (2.0 * kf + 1.0));
        cterm *= -x2 / ((2.0 * kf - 1.0) * (2.0 * kf));
        let ds = term / (2.0 * kf + 1.0);
        let dc = cterm / (2.0 * kf);
        si += ds;
        ci += dc;
        if ds.abs() < 1e-18 * si.abs() && dc.abs() < 1e-18 * (1.0 + ci.abs()) {
            break;
        }
    }
    (si - FRAC_PI_2, EULER_GAMMA + x.ln() + ci)
}

fn continued_fraction(x: f64) -> Result<(f64, f64)> {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            let e1 = Complex64::new(x.cos(), -x.sin()) * h;
            return Ok((e1.im, -e1.re));
        }
    }
    Err(Error::Numerical { message: format!("sici continued fraction did not converge at x = {x}"), achieved: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        let (si, _) = sici(1e-12).unwrap();
        assert!((si + FRAC_PI_2).abs() < 1e-11);
        let (si, ci) = sici(1e8).unwrap();
        assert!(si.abs() < 1e-7 && ci.abs() < 1e-7);
        assert!(sici(0.0).is_err() && sici(-1.0).is_err() && sici(f64::NAN).is_err());
    }

    #[test]
    fn branches_agree_at_the_switch() {
        for x in [3.0, 3.5, 4.0, 4.5, 5.0, 6.0] {
            let (s1, c1) = series(x);
            let (s2, c2) = continued_fraction(x).unwrap();
            assert!((s1 - s2).abs() < 1e-13 && (c1 - c2).abs() < 1e-13, "x={x}");
        }
    }
}
