//! Enhancement factor `F(γ) = 3 − ∫₀^∞ e^(−s) b₂(s/γ) ds` for time-reversal
//! invariant systems, where `b₂ = 1 − K` is the two-level form factor.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::stats::{spectral_form_factor, FormFactorKind};

use super::quadrature::integrate;
use super::special::sici;

/// Upper integration limit; the neglected tail is bounded by e^(−30) ≈ 9.4e-14.
const S_MAX: f64 = 30.0;

/// Two-level form factor `b₂(τ) = 1 − K(τ)`.
pub fn b2_form_factor(kind: FormFactorKind, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
    }
    Ok(match kind {
        FormFactorKind::Poisson => 0.0,
        FormFactorKind::SemiPoisson => 2.0 / (4.0 + PI * PI * tau * tau),
        FormFactorKind::Goe if tau > 1.0 => tau * (2.0 / (2.0 * tau - 1.0)).ln_1p() - 1.0,
        FormFactorKind::Goe => 1.0 - spectral_form_factor(kind, tau)?,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || gamma.is_infinite() {
        return Err(Error::domain(format!("gamma must be finite and non-negative, got {gamma}")));
    }
    Ok(())
}

/// F(γ) by adaptive quadrature, absolute error below about 1e-13.
pub fn eef_theory_integral(kind: FormFactorKind, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if gamma == 0.0 || kind == FormFactorKind::Poisson {
        return Ok(3.0);
    }
    let breaks: Vec<f64> = [0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0].iter().map(|c| c * gamma).collect();
    let r = integrate(
        |s| {
            let b = b2_form_factor(kind, s / gamma).unwrap_or(f64::NAN);
            (-s).exp() * b
        },
        0.0,
        S_MAX,
        &breaks,
        1e-14,
    )?;
    if !r.value.is_finite() {
        return Err(Error::Numerical { message: "enhancement-factor integrand is not finite".into(), achieved: r.error });
    }
    Ok(3.0 - r.value)
}

/// Semi-Poisson F(γ) in closed form:
/// `3 − (γ/π)[ci(x) sin x − si(x) cos x]` with `x = 2γ/π`.
pub fn eef_theory_sp_closed(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Ok(3.0);
    }
    let x = 2.0 * gamma / PI;
    let (si, ci) = sici(x)?;
    Ok(3.0 - gamma / PI * (ci * x.sin() - si * x.cos()))
}

pub fn eef_theory_goe(gamma: f64) -> Result<f64> {
    eef_theory_integral(FormFactorKind::Goe, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    // 30-digit reference quadrature of the defining integral.
    const REFERENCE: [(f64, f64, f64); 8] = [
        (0.001, 2.9995015770888925481, 2.9995007519739173113),
        (0.1, 2.9565336499467022143, 2.9536829159055889951),
        (1.0, 2.7523458625043879551, 2.6799450141806381659),
        (2.0, 2.6563249630696850697, 2.5130391975691100163),
        (4.0, 2.5763900308435352611, 2.3407167178501899487),
        (10.0, 2.5200074539050637729, 2.1681689728138166102),
        (50.0, 2.5009755998306460984, 2.0384870554455539306),
        (1000.0, 2.5000024673280488611, 2.001996011936475445),
    ];

    #[test]
    fn matches_reference_values() {
        for (g, sp, goe) in REFERENCE {
            let closed = eef_theory_sp_closed(g).unwrap();
            let quad = eef_theory_integral(FormFactorKind::SemiPoisson, g).unwrap();
            let q_goe = eef_theory_goe(g).unwrap();
            assert!((closed - sp).abs() < 1e-12, "closed γ={g}: {closed} vs {sp}");
            assert!((quad - sp).abs() < 1e-12, "quad γ={g}: {quad} vs {sp}");
            assert!((q_goe - goe).abs() < 1e-12, "goe γ={g}: {q_goe} vs {goe}");
        }
    }

    #[test]
    fn edge_cases() {
        assert_eq!(eef_theory_sp_closed(0.0).unwrap(), 3.0);
        assert_eq!(eef_theory_goe(0.0).unwrap(), 3.0);
        assert_eq!(eef_theory_integral(FormFactorKind::Poisson, 3.0).unwrap(), 3.0);
        assert!(eef_theory_sp_closed(-1.0).is_err());
        assert!(eef_theory_goe(f64::NAN).is_err());
    }

    #[test]
    fn goe_form_factor_continuous_at_one() {
        let a = b2_form_factor(FormFactorKind::Goe, 1.0).unwrap();
        let b = b2_form_factor(FormFactorKind::Goe, 1.0 + 1e-12).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((a - (3f64.ln() - 1.0)).abs() < 1e-15);
    }
}
