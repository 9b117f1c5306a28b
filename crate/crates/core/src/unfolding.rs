//! Weyl-law unfolding: raw levels → dimensionless levels with unit mean spacing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::billiard::{CavityGeometry, WeylLaw};
use crate::ensembles::{LevelSequence, StatKind};
use crate::error::{Error, Result};

/// Dimensionless levels with mean nearest-neighbour spacing exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedSpectrum {
    epsilons: Vec<f64>,
    source: StatKind,
}

impl UnfoldedSpectrum {
    /// Affinely rescales `epsilons` about the first level so that the mean
    /// spacing is exactly one.
    pub fn normalized(epsilons: Vec<f64>, source: StatKind) -> Result<Self> {
        let seq = LevelSequence::new(epsilons, source)?;
        let mean = seq.mean_spacing();
        let mut eps = seq.into_levels();
        if mean != 1.0 {
            let origin = eps[0];
            eps.iter_mut().for_each(|e| *e = origin + (*e - origin) / mean);
        }
        Ok(Self { epsilons: eps, source })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn source(&self) -> StatKind {
        self.source
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }

    pub fn mean_spacing(&self) -> f64 {
        let n = self.epsilons.len();
        (self.epsilons[n - 1] - self.epsilons[0]) / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub law: WeylLaw,
    /// RMS of N(ν_i) − (i − 1/2).
    pub residual_rms: f64,
    /// True when a2 was pinned to Aπ/c².
    pub used_geometry: bool,
}

pub const MIN_WEYL_LEVELS: usize = 20;

/// Least-squares fit of N(ν_i) = i − 1/2 (i = 1..n) by a quadratic.
///
/// With a geometry, a2 is pinned to the area term and only a1, a0 are fitted.
pub fn fit_weyl(levels: &LevelSequence, geometry: Option<&CavityGeometry>) -> Result<FitReport> {
    let nu = levels.levels();
    let n = nu.len();
    if n < MIN_WEYL_LEVELS {
        return Err(Error::size(format!("Weyl fit needs at least {MIN_WEYL_LEVELS} levels, got {n}")));
    }
    let staircase: Vec<f64> = (0..n).map(|i| i as f64 + 0.5).collect();
    // scale frequencies to O(1) for conditioning
    let scale = nu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(scale > 0.0) {
        return Err(Error::Fit("all levels are zero".into()));
    }
    let x: Vec<f64> = nu.iter().map(|v| v / scale).collect();

    let law = match geometry {
        None => {
            let design = DMatrix::from_fn(n, 3, |i, j| x[i].powi(2 - j as i32));
            let coef = least_squares(design, &staircase)?;
            WeylLaw { a2: coef[0] / (scale * scale), a1: coef[1] / scale, a0: coef[2] }
        }
        Some(geom) => {
            let a2 = WeylLaw::for_geometry(geom).a2;
            let target: Vec<f64> = staircase.iter().zip(nu).map(|(t, v)| t - a2 * v * v).collect();
            let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { x[i] } else { 1.0 });
            let coef = least_squares(design, &target)?;
            WeylLaw { a2, a1: coef[0] / scale, a0: coef[1] }
        }
    };
    let residual_rms = (nu
        .iter()
        .zip(&staircase)
        .map(|(&v, t)| (law.eval(v) - t).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(FitReport { law, residual_rms, used_geometry: geometry.is_some() })
}

fn least_squares(design: DMatrix<f64>, target: &[f64]) -> Result<Vec<f64>> {
    let cols = design.ncols();
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Fit(format!(
            "rank-deficient Weyl design (singular values {smin:e} / {smax:e}); levels are degenerate"
        )));
    }
    let b = DVector::from_column_slice(target);
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    Ok((0..cols).map(|i| sol[i]).collect())
}

/// ε_i = N(ν_i), then rescaled to unit mean spacing.
pub fn unfold(levels: &LevelSequence, law: &WeylLaw) -> Result<UnfoldedSpectrum> {
    let nu = levels.levels();
    let (lo, hi) = (nu[0], nu[nu.len() - 1]);
    if !law.is_monotone_on(lo, hi) {
        return Err(Error::domain(format!(
            "Weyl law {law:?} is not increasing over [{lo}, {hi}]"
        )));
    }
    let eps: Vec<f64> = nu.iter().map(|&v| law.eval(v)).collect();
    UnfoldedSpectrum::normalized(eps, levels.kind())
}

/// Fits and unfolds each realization on its own; order is preserved.
pub fn unfold_realizations(
    realizations: &[LevelSequence],
    geometry: Option<&CavityGeometry>,
) -> Result<Vec<(FitReport, UnfoldedSpectrum)>> {
    realizations
        .iter()
        .map(|seq| {
            let fit = fit_weyl(seq, geometry)?;
            let spec = unfold(seq, &fit.law)?;
            Ok((fit, spec))
        })
        .collect()
}

/// Order-q spacings ε_(i+q) − ε_i.
pub fn spacings(spectrum: &UnfoldedSpectrum, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::domain("spacing order must be positive"));
    }
    let eps = spectrum.epsilons();
    if order >= eps.len() {
        return Err(Error::size(format!(
            "order-{order} spacings need more than {order} levels, got {}",
            eps.len()
        )));
    }
    Ok(eps.windows(order + 1).map(|w| w[order] - w[0]).collect())
}

/// Concatenates per-realization spacings; no spacing straddles two realizations.
pub fn pooled_spacings(spectra: &[UnfoldedSpectrum], order: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for spec in spectra {
        out.extend(spacings(spec, order)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::billiard::rectangle_eigenfrequencies;
    use crate::ensembles::{sample_gamma_levels, EnsembleSpec, RandomSeed};
    use proptest::prelude::*;

    /// Inverse of a monotone quadratic count: the ν with N(ν) = t.
    fn invert(law: &WeylLaw, t: f64) -> f64 {
        let c = law.a0 - t;
        (-law.a1 + (law.a1 * law.a1 - 4.0 * law.a2 * c).sqrt()) / (2.0 * law.a2)
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let law = WeylLaw { a2: 2.7, a1: -0.9, a0: 0.3 };
        let nu: Vec<f64> = (0..200).map(|i| invert(&law, i as f64 + 0.5)).collect();
        let seq = LevelSequence::new(nu, StatKind::Ingested).unwrap();
        let fit = fit_weyl(&seq, None).unwrap();
        assert!(fit.residual_rms < 1e-10, "{}", fit.residual_rms);
        assert!((fit.law.a2 - 2.7).abs() < 1e-9 && (fit.law.a1 + 0.9).abs() < 1e-8 && (fit.law.a0 - 0.3).abs() < 1e-7);
    }

    #[test]
    fn size_and_rank_guards() {
        let seq = LevelSequence::new((0..10).map(|i| i as f64 + 1.0).collect(), StatKind::Ingested).unwrap();
        assert!(matches!(fit_weyl(&seq, None), Err(Error::Size(_))));
        // a billiard sequence with only two distinct values cannot determine a quadratic
        let mut two = vec![1.0; 10];
        two.extend(vec![2.0; 15]);
        let seq = LevelSequence::new(two, StatKind::Billiard).unwrap();
        assert!(matches!(fit_weyl(&seq, None), Err(Error::Fit(_))));
    }

    #[test]
    fn free_fit_recovers_area_term() {
        let g = CavityGeometry::brass_cavity(0.365).unwrap();
        let seq = rectangle_eigenfrequencies(&g, 18.0).unwrap();
        let fit = fit_weyl(&seq, None).unwrap();
        let exact = WeylLaw::for_geometry(&g).a2;
        assert!((fit.law.a2 / exact - 1.0).abs() < 0.01, "{} vs {}", fit.law.a2, exact);
        let pinned = fit_weyl(&seq, Some(&g)).unwrap();
        assert!(pinned.used_geometry && pinned.law.a2 == exact);
        // residual has near-zero mean once a0 is fitted
        let mean_resid: f64 = seq
            .levels()
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64 + 0.5) - pinned.law.eval(v))
            .sum::<f64>()
            / seq.len() as f64;
        assert!(mean_resid.abs() < 1e-9);
    }

    #[test]
    fn identity_law_leaves_unit_spectrum_alone() {
        let mut eps: Vec<f64> = (0..50).map(|i| i as f64 + if i % 2 == 0 { 0.25 } else { 0.0 }).collect();
        eps[49] = 49.25; // mean spacing exactly 1
        let seq = LevelSequence::new(eps.clone(), StatKind::Ingested).unwrap();
        let id = WeylLaw { a2: 0.0, a1: 1.0, a0: 0.0 };
        let out = unfold(&seq, &id).unwrap();
        assert_eq!(out.epsilons(), &eps[..]);
        let bad = WeylLaw { a2: -1.0, a1: 1.0, a0: 0.0 };
        assert!(matches!(unfold(&seq, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn poisson_through_own_fit_has_unit_mean() {
        let seq = sample_gamma_levels(&EnsembleSpec::poisson(5000), RandomSeed::new(4, 0)).unwrap();
        let fit = fit_weyl(&seq, None).unwrap();
        let spec = unfold(&seq, &fit.law).unwrap();
        let s = spacings(&spec, 1).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 1e-6);
        let s2 = spacings(&spec, 2).unwrap();
        let mean2 = s2.iter().sum::<f64>() / s2.len() as f64;
        assert!((mean2 - 2.0).abs() < 0.01);
        assert!(matches!(spacings(&spec, 5000), Err(Error::Size(_))));
    }

    #[test]
    fn pooling_keeps_unit_mean() {
        let seqs: Vec<LevelSequence> = (0..5)
            .map(|i| sample_gamma_levels(&EnsembleSpec::semi_poisson(300 + 50 * i), RandomSeed::new(8, i as u64)).unwrap())
            .collect();
        let unfolded: Vec<UnfoldedSpectrum> = unfold_realizations(&seqs, None).unwrap().into_iter().map(|(_, s)| s).collect();
        let pooled = pooled_spacings(&unfolded, 1).unwrap();
        assert_eq!(pooled.len(), seqs.iter().map(|s| s.len() - 1).sum::<usize>());
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn unfolding_is_idempotent_up_to_affine(a2 in 0.5f64..5.0, a1 in -1.0f64..1.0, a0 in -2.0f64..2.0, n in 30usize..200) {
            let law = WeylLaw { a2, a1, a0 };
            // start above the vertex so the count is increasing
            let start = law.eval(1.0).max(0.0);
            let nu: Vec<f64> = (0..n).map(|i| invert(&law, start + i as f64)).collect();
            let seq = LevelSequence::new(nu, StatKind::Ingested).unwrap();
            let once = unfold(&seq, &fit_weyl(&seq, None).unwrap().law).unwrap();
            let again_seq = LevelSequence::new(once.epsilons().to_vec(), StatKind::Ingested).unwrap();
            let twice = unfold(&again_seq, &fit_weyl(&again_seq, None).unwrap().law).unwrap();
            let (o0, t0) = (once.epsilons()[0], twice.epsilons()[0]);
            for (a, b) in once.epsilons().iter().zip(twice.epsilons()) {
                prop_assert!(((a - o0) - (b - t0)).abs() < 1e-8 * (1.0 + (a - o0).abs()), "{} vs {}", a, b);
            }
        }
    }
}
