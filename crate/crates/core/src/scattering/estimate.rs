//! Windowed estimation of the elastic enhancement factor
//! `F = sqrt(var S_aa · var S_bb) / var S_ab` and of transmission coefficients.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::heidelberg::{SMatrix, SMatrixSeries};

/// Relative tolerance for the dual (T, γ) / (Γ, Δ) absorption specification.
pub const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionInputs {
    pub t_a: f64,
    pub t_b: f64,
    pub gamma_internal: f64,
    /// Optional `(Γ, Δ)`: total resonance width and mean spacing in the same unit.
    pub width: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionBudget {
    pub t_a: f64,
    pub t_b: f64,
    pub gamma_internal: f64,
    pub gamma_tot: f64,
}

/// `γ_tot = T_a + T_b + γ`, cross-checked against `2πΓ/Δ` when a width is given.
pub fn total_absorption(inputs: AbsorptionInputs) -> Result<AbsorptionBudget> {
    let AbsorptionInputs { t_a, t_b, gamma_internal, width } = inputs;
    for (name, t) in [("T_a", t_a), ("T_b", t_b)] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("{name} must lie in [0, 1], got {t}")));
        }
    }
    if !(gamma_internal >= 0.0) || !gamma_internal.is_finite() {
        return Err(Error::domain(format!("internal gamma must be finite and >= 0, got {gamma_internal}")));
    }
    let gamma_tot = t_a + t_b + gamma_internal;
    if let Some((g, d)) = width {
        if !(g >= 0.0) || !(d > 0.0) || !g.is_finite() || !d.is_finite() {
            return Err(Error::domain(format!("width {g} and spacing {d} must be finite, width >= 0, spacing > 0")));
        }
        let from_width = 2.0 * std::f64::consts::PI * g / d;
        if (from_width - gamma_tot).abs() > CONSISTENCY_TOL * gamma_tot.max(from_width).max(1.0) {
            return Err(Error::Consistency(format!(
                "2πΓ/Δ = {from_width} disagrees with T_a + T_b + γ = {gamma_tot}"
            )));
        }
    }
    Ok(AbsorptionBudget { t_a, t_b, gamma_internal, gamma_tot })
}

/// Widths in GHz. Estimates use non-overlapping tiles of `estimate_window`;
/// output points average them over `average_window`, stepped by `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub estimate_window: f64,
    pub average_window: f64,
    pub step: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { estimate_window: 0.025, average_window: 0.5, step: 0.25 }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.estimate_window, self.average_window, self.step].iter().all(|x| *x > 0.0 && x.is_finite())
            && self.estimate_window <= self.average_window;
        if ok {
            Ok(())
        } else {
            Err(Error::Window(format!("invalid window spec {self:?}")))
        }
    }

    /// Centres of the averaging windows that fit inside `band`.
    pub fn centers(&self, band: (f64, f64)) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = band;
        if !(hi > lo) {
            return Err(Error::Window(format!("empty band [{lo}, {hi}]")));
        }
        if self.average_window > hi - lo + 1e-12 {
            return Err(Error::Window(format!(
                "average window {} GHz exceeds the band width {} GHz",
                self.average_window,
                hi - lo
            )));
        }
        let half = 0.5 * self.average_window;
        let count = ((hi - lo - self.average_window) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|j| lo + half + j as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionPoint {
    pub frequency: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub realizations: usize,
}

/// Minimum number of realizations contributing to a transmission estimate.
pub const MIN_REALIZATIONS: usize = 10;

fn band_of(series: &[&SMatrixSeries]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for &f in &s.frequencies {
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    if !(hi > lo) {
        return Err(Error::Window("S-matrix data span no frequency range".into()));
    }
    Ok((lo, hi))
}

fn samples_in(series: &[&SMatrixSeries], lo: f64, hi: f64) -> (Vec<SMatrix>, usize) {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for s in series {
        for (f, m) in s.frequencies.iter().zip(&s.s) {
            if *f >= lo && *f < hi {
                out.push(*m);
                ids.insert(s.realization_id);
            }
        }
    }
    (out, ids.len())
}

/// `T_i = 1 − |⟨S_ii⟩|²` over each averaging window.
pub fn transmission_coefficients(series: &[SMatrixSeries], window: &WindowSpec) -> Result<Vec<TransmissionPoint>> {
    let refs: Vec<&SMatrixSeries> = series.iter().collect();
    transmissions_in(&refs, band_of(&refs)?, window)
}

fn transmissions_in(series: &[&SMatrixSeries], band: (f64, f64), window: &WindowSpec) -> Result<Vec<TransmissionPoint>> {
    let mut out = Vec::new();
    for c in window.centers(band)? {
        let half = 0.5 * window.average_window;
        let (samples, realizations) = samples_in(series, c - half, c + half);
        if realizations < MIN_REALIZATIONS {
            return Err(Error::Window(format!(
                "window at {c} GHz has {realizations} realizations; need at least {MIN_REALIZATIONS}"
            )));
        }
        let (maa, _) = mean_var(samples.iter().map(|s| s[0][0]));
        let (mbb, _) = mean_var(samples.iter().map(|s| s[1][1]));
        out.push(TransmissionPoint { frequency: c, t_a: 1.0 - maa.norm_sqr(), t_b: 1.0 - mbb.norm_sqr(), realizations });
    }
    Ok(out)
}

fn mean_var(values: impl Iterator<Item = Complex64> + Clone) -> (Complex64, f64) {
    let mut n = 0usize;
    let mut sum = Complex64::new(0.0, 0.0);
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean).norm_sqr()).sum::<f64>() / n as f64;
    (mean, var)
}

/// F for one pooled window of S-matrices; population variances about the window mean.
pub fn eef_window_estimate(samples: &[SMatrix]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Window(format!("need at least 2 samples per window, got {}", samples.len())));
    }
    let (_, vaa) = mean_var(samples.iter().map(|s| s[0][0]));
    let (_, vbb) = mean_var(samples.iter().map(|s| s[1][1]));
    let (mab, vab) = mean_var(samples.iter().map(|s| s[0][1]));
    // rounding noise of a constant sequence is not a fluctuation
    if !(vab > 1e-24 * (1.0 + mab.norm_sqr())) {
        return Err(Error::UndefinedEstimate("var(S_ab) vanishes in this window".into()));
    }
    Ok((vaa * vbb).sqrt() / vab)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EefPoint {
    pub frequency: f64,
    pub gamma_tot: f64,
    pub f_mean: f64,
    /// Spread (sample standard deviation) of the per-window estimates.
    pub f_std: f64,
    pub windows: usize,
    pub t_a: f64,
    pub t_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EefCurve {
    pub points: Vec<EefPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EefEstimate {
    pub curve: EefCurve,
    /// Frequencies and reasons of estimate windows that were skipped.
    pub skipped: Vec<(f64, String)>,
}

/// Enhancement-factor curve. `internal_gamma(ν)` supplies the absorption part of
/// `γ_tot = T_a + T_b + γ`; transmissions are measured from the data.
pub fn eef_estimate(
    series: &[SMatrixSeries],
    window: &WindowSpec,
    internal_gamma: impl Fn(f64) -> f64,
) -> Result<EefEstimate> {
    window.validate()?;
    let refs: Vec<&SMatrixSeries> = series.iter().collect();
    estimate_in(&refs, band_of(&refs)?, window, &internal_gamma)
}

/// Delete-group jackknife standard error of each point's `f_mean`.
///
/// Realizations are split into `groups` groups by position in `series`; the
/// curve is re-estimated with each group left out. Unlike `f_std / sqrt(windows)`
/// this accounts for correlations between estimate windows.
pub fn eef_jackknife_error(
    series: &[SMatrixSeries],
    window: &WindowSpec,
    internal_gamma: impl Fn(f64) -> f64,
    groups: usize,
) -> Result<Vec<f64>> {
    window.validate()?;
    if groups < 2 || groups > series.len() {
        return Err(Error::size(format!("jackknife needs 2..={} groups, got {groups}", series.len())));
    }
    let refs: Vec<&SMatrixSeries> = series.iter().collect();
    let band = band_of(&refs)?;
    let full = estimate_in(&refs, band, window, &internal_gamma)?;
    let freqs: Vec<f64> = full.curve.points.iter().map(|p| p.frequency).collect();
    let mut sums = vec![0.0; freqs.len()];
    let mut sq = vec![0.0; freqs.len()];
    for g in 0..groups {
        let kept: Vec<&SMatrixSeries> = refs.iter().enumerate().filter(|(i, _)| i % groups != g).map(|(_, s)| *s).collect();
        let part = estimate_in(&kept, band, window, &internal_gamma)?;
        if part.curve.points.iter().map(|p| p.frequency).ne(freqs.iter().copied()) {
            return Err(Error::UndefinedEstimate(format!("jackknife replicate {g} lost an averaging window")));
        }
        for (k, p) in part.curve.points.iter().enumerate() {
            sums[k] += p.f_mean;
            sq[k] += p.f_mean * p.f_mean;
        }
    }
    let g = groups as f64;
    Ok(sums
        .iter()
        .zip(&sq)
        .map(|(s, q)| ((g - 1.0) / g * (q - s * s / g)).max(0.0).sqrt())
        .collect())
}

fn estimate_in(
    series: &[&SMatrixSeries],
    (lo, hi): (f64, f64),
    window: &WindowSpec,
    internal_gamma: &impl Fn(f64) -> f64,
) -> Result<EefEstimate> {
    let w = window.estimate_window;
    let tiles = ((hi - lo) / w).floor() as usize + 1;
    let mut buckets: Vec<Vec<SMatrix>> = vec![Vec::new(); tiles];
    for s in series {
        for (f, m) in s.frequencies.iter().zip(&s.s) {
            let j = (((f - lo) / w).floor() as usize).min(tiles - 1);
            buckets[j].push(*m);
        }
    }
    let mut estimates: Vec<(f64, f64)> = Vec::new();
    let mut skipped = Vec::new();
    for (j, b) in buckets.iter().enumerate() {
        let center = lo + (j as f64 + 0.5) * w;
        if b.is_empty() {
            continue;
        }
        match eef_window_estimate(b) {
            Ok(f) => estimates.push((center, f)),
            Err(e @ (Error::UndefinedEstimate(_) | Error::Window(_))) => skipped.push((center, e.to_string())),
            Err(e) => return Err(e),
        }
    }

    let transmissions = transmissions_in(series, (lo, hi), window)?;
    let half = 0.5 * window.average_window;
    let mut points = Vec::new();
    for t in transmissions {
        let fs: Vec<f64> = estimates
            .iter()
            .filter(|(c, _)| *c >= t.frequency - half && *c < t.frequency + half)
            .map(|(_, f)| *f)
            .collect();
        if fs.is_empty() {
            continue;
        }
        let n = fs.len() as f64;
        let mean = fs.iter().sum::<f64>() / n;
        let std = if fs.len() > 1 { (fs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        points.push(EefPoint {
            frequency: t.frequency,
            gamma_tot: t.t_a + t.t_b + internal_gamma(t.frequency),
            f_mean: mean,
            f_std: std,
            windows: fs.len(),
            t_a: t.t_a,
            t_b: t.t_b,
        });
    }
    if points.is_empty() {
        return Err(Error::UndefinedEstimate("no averaging window produced an estimate".into()));
    }
    Ok(EefEstimate { curve: EefCurve { points }, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_adds_up() {
        let b = total_absorption(AbsorptionInputs { t_a: 0.2, t_b: 0.3, gamma_internal: 1.5, width: None }).unwrap();
        assert_eq!(b.gamma_tot, 2.0);
        let w = 2.0 / (2.0 * std::f64::consts::PI);
        assert!(total_absorption(AbsorptionInputs { t_a: 0.2, t_b: 0.3, gamma_internal: 1.5, width: Some((w, 1.0)) }).is_ok());
        assert!(matches!(
            total_absorption(AbsorptionInputs { t_a: 0.2, t_b: 0.3, gamma_internal: 1.5, width: Some((2.0 * w, 1.0)) }),
            Err(Error::Consistency(_))
        ));
        assert!(total_absorption(AbsorptionInputs { t_a: 1.2, t_b: 0.3, gamma_internal: 0.0, width: None }).is_err());
        assert!(total_absorption(AbsorptionInputs { t_a: 0.2, t_b: 0.3, gamma_internal: -1.0, width: None }).is_err());
    }

    #[test]
    fn constant_s_is_undefined() {
        let one = Complex64::new(1.0, 0.0);
        let s = [[one * 0.5, one * 0.1], [one * 0.1, one * 0.4]];
        assert!(matches!(eef_window_estimate(&[s; 8]), Err(Error::UndefinedEstimate(_))));
    }

    #[test]
    fn window_centres() {
        let w = WindowSpec::default();
        let c = w.centers((1.0, 2.0)).unwrap();
        assert_eq!(c.len(), 3);
        assert!((c[0] - 1.25).abs() < 1e-12 && (c[2] - 1.75).abs() < 1e-12);
        assert!(w.centers((1.0, 1.2)).is_err());
        assert!(WindowSpec { estimate_window: 1.0, average_window: 0.5, step: 0.1 }.validate().is_err());
    }

    #[test]
    fn too_few_realizations() {
        let s = SMatrixSeries {
            realization_id: 0,
            frequencies: (0..100).map(|i| 1.0 + i as f64 * 0.01).collect(),
            s: vec![[[Complex64::new(0.5, 0.0); 2]; 2]; 100],
            pole_perturbations: 0,
        };
        assert!(matches!(transmission_coefficients(&[s], &WindowSpec::default()), Err(Error::Window(_))));
    }

    #[test]
    fn jackknife_error_is_positive_and_shrinks_with_data() {
        use super::super::heidelberg::{simulate_smatrix, Absorption, ChannelCoupling, GammaProfile, HamiltonianSource, HeidelbergModel};
        use crate::RandomSeed;
        let model = HeidelbergModel {
            source: HamiltonianSource::Daisy { levels: 160 },
            couplings: [ChannelCoupling::Random { transmission: 0.2 }, ChannelCoupling::Random { transmission: 0.2 }],
            absorption: Absorption::UniformWidth(GammaProfile::constant(2.0)),
            origin_ghz: 0.0,
            spacing_ghz: 0.02,
        };
        let grid: Vec<f64> = (0..1000).map(|i| 0.4 + i as f64 * 0.002).collect();
        let series = simulate_smatrix(&model, &grid, 80, RandomSeed::new(9, 0)).unwrap();
        let w = WindowSpec::default();
        let small = eef_jackknife_error(&series[..20], &w, |_| 2.0, 10).unwrap();
        let large = eef_jackknife_error(&series, &w, |_| 2.0, 10).unwrap();
        assert_eq!(small.len(), eef_estimate(&series, &w, |_| 2.0).unwrap().curve.points.len());
        assert!(small.iter().chain(&large).all(|e| e.is_finite() && *e > 0.0));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&large) < mean(&small));
        assert!(eef_jackknife_error(&series, &w, |_| 2.0, 1).is_err());
    }
}
