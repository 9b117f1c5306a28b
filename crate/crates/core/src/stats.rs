//! Short- and long-range spectral observables.
//!
//! Theory side: the gamma-family spacing densities (Poisson η = 1,
//! semi-Poisson η = 2), the semi-Poisson second-neighbour density, spectral
//! form factors and the expected power spectrum of the δ_q statistic.
//! Data side: spacing histograms, η estimation, δ_q series and their discrete
//! power spectra, and goodness-of-fit distances.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

use crate::ensembles::{daisy_thin, sample_gamma_levels, sample_goe_levels, EnsembleSpec, RandomSeed};
use crate::error::{Error, Result};
use crate::unfolding::UnfoldedSpectrum;

/// Nearest-neighbour spacing law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpacingLaw {
    Poisson,
    SemiPoisson,
    /// Gamma family with shape = rate = η, η ≥ 1.
    GammaEta(f64),
    /// Wigner surmise for β = 1.
    Goe,
}

impl SpacingLaw {
    fn check(&self) -> Result<()> {
        if let SpacingLaw::GammaEta(eta) = *self {
            if !(eta >= 1.0) || !eta.is_finite() {
                return Err(Error::domain(format!("eta must lie in [1, inf), got {eta}")));
            }
        }
        Ok(())
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("spacing must be non-negative, got {s}")));
    }
    Ok(())
}

fn gamma_density(eta: f64, s: f64) -> f64 {
    if s == 0.0 {
        return if eta == 1.0 { 1.0 } else { 0.0 };
    }
    (eta * eta.ln() + (eta - 1.0) * s.ln() - eta * s - ln_gamma(eta)).exp()
}

/// Spacing density P(s).
pub fn theory_nnsd(law: SpacingLaw, s: f64) -> Result<f64> {
    check_s(s)?;
    law.check()?;
    Ok(match law {
        SpacingLaw::Poisson => (-s).exp(),
        SpacingLaw::SemiPoisson => 4.0 * s * (-2.0 * s).exp(),
        SpacingLaw::GammaEta(eta) => gamma_density(eta, s),
        SpacingLaw::Goe => 0.5 * PI * s * (-0.25 * PI * s * s).exp(),
    })
}

/// Integrated spacing distribution I(s) = ∫₀ˢ P.
pub fn theory_integrated_nnsd(law: SpacingLaw, s: f64) -> Result<f64> {
    check_s(s)?;
    law.check()?;
    Ok(match law {
        SpacingLaw::Poisson => -(-s).exp_m1(),
        SpacingLaw::SemiPoisson => 1.0 - (1.0 + 2.0 * s) * (-2.0 * s).exp(),
        SpacingLaw::GammaEta(eta) => gamma_lr(eta, eta * s),
        SpacingLaw::Goe => -(-0.25 * PI * s * s).exp_m1(),
    })
}

/// Semi-Poisson second-nearest-neighbour density (8/3) s³ e^(−2s).
pub fn theory_second_nnsd(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(8.0 / 3.0 * s.powi(3) * (-2.0 * s).exp())
}

/// Cumulative of [`theory_second_nnsd`].
pub fn theory_integrated_second_nnsd(s: f64) -> Result<f64> {
    check_s(s)?;
    let x = 2.0 * s;
    Ok(1.0 - (-x).exp() * (1.0 + x + x * x / 2.0 + x * x * x / 6.0))
}

/// Density histogram on uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Number of samples that fell inside the binned range.
    pub count: usize,
}

impl SpacingHistogram {
    /// Densities are normalised to integrate to one over `[0, max)`.
    pub fn new(samples: &[f64], bins: usize, max: f64) -> Result<Self> {
        if bins == 0 || !(max > 0.0) {
            return Err(Error::domain(format!("invalid binning: {bins} bins on [0, {max})")));
        }
        let width = max / bins as f64;
        let mut counts = vec![0usize; bins];
        for &s in samples {
            if s >= 0.0 && s < max {
                let b = ((s / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        let count: usize = counts.iter().sum();
        if count == 0 {
            return Err(Error::size("no samples inside the histogram range"));
        }
        let norm = 1.0 / (count as f64 * width);
        Ok(Self {
            bin_edges: (0..=bins).map(|i| i as f64 * width).collect(),
            densities: counts.iter().map(|&c| c as f64 * norm).collect(),
            count,
        })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (w[1] - w[0]) * d)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaMethod {
    /// Maximum likelihood with observed-information standard error.
    Mle,
    /// Least squares against a 40-bin histogram on [0, 4], bootstrap error.
    HistogramLsq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    pub eta: f64,
    pub std_error: f64,
    pub method: EtaMethod,
}

pub const MIN_FIT_SPACINGS: usize = 100;
const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x00e7_a0f1;

/// Estimates η of the gamma spacing family. The sample is renormalised to unit mean first.
pub fn fit_eta(spacings: &[f64], method: EtaMethod) -> Result<EtaFit> {
    if spacings.len() < MIN_FIT_SPACINGS {
        return Err(Error::size(format!(
            "fit_eta needs at least {MIN_FIT_SPACINGS} spacings, got {}",
            spacings.len()
        )));
    }
    if let Some(i) = spacings.iter().position(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(Error::Data(format!("spacing {i} is negative or not finite: {}", spacings[i])));
    }
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Fit("all spacings are zero".into()));
    }
    let normalized: Vec<f64> = spacings.iter().map(|s| s / mean).collect();
    match method {
        EtaMethod::Mle => {
            let eta = mle_eta(&normalized)?;
            let info = normalized.len() as f64 * (trigamma(eta) - 1.0 / eta);
            let std_error = if info > 0.0 { 1.0 / info.sqrt() } else { f64::INFINITY };
            Ok(EtaFit { eta, std_error, method })
        }
        EtaMethod::HistogramLsq => {
            let eta = lsq_eta(&normalized)?;
            let mut rng = RandomSeed::new(BOOTSTRAP_SEED, 0).rng();
            let n = normalized.len();
            let mut resample = vec![0.0; n];
            let mut estimates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
            for _ in 0..BOOTSTRAP_RESAMPLES {
                for r in resample.iter_mut() {
                    *r = normalized[rng.random_range(0..n)];
                }
                let m = resample.iter().sum::<f64>() / n as f64;
                resample.iter_mut().for_each(|r| *r /= m);
                if let Ok(e) = lsq_eta(&resample) {
                    estimates.push(e);
                }
            }
            let k = estimates.len() as f64;
            let mu = estimates.iter().sum::<f64>() / k;
            let var = estimates.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(EtaFit { eta, std_error: var.sqrt(), method })
        }
    }
}

/// Solves `ln η − ψ(η) = −⟨ln s⟩` on unit-mean data; clamps to the η = 1 boundary.
fn mle_eta(normalized: &[f64]) -> Result<f64> {
    let mean_log = normalized.iter().map(|s| s.ln()).sum::<f64>() / normalized.len() as f64;
    let target = -mean_log;
    if !(target > 0.0) {
        return Err(Error::Fit("degenerate sample: all spacings equal".into()));
    }
    let h = |eta: f64| eta.ln() - digamma(eta) - target;
    if h(1.0) <= 0.0 {
        return Ok(1.0);
    }
    // ln η − ψ(η) ≈ 1/(2η) for large η
    let mut hi = (1.0 / target).max(2.0);
    while h(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Fit("eta diverges: spacings are nearly rigid".into()));
        }
    }
    let mut lo = 1.0;
    let mut eta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = h(eta);
        if f > 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        let slope = 1.0 / eta - trigamma(eta);
        let newton = eta - f / slope;
        eta = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 1e-14 * eta || f == 0.0 {
            break;
        }
    }
    Ok(eta)
}

fn lsq_eta(normalized: &[f64]) -> Result<f64> {
    let hist = SpacingHistogram::new(normalized, 40, 4.0)?;
    let centers = hist.centers();
    let cost = |eta: f64| -> f64 {
        centers
            .iter()
            .zip(&hist.densities)
            .map(|(&s, &d)| (d - gamma_density(eta, s)).powi(2))
            .sum()
    };
    // coarse scan in ln η, then golden section
    let grid: Vec<f64> = (0..=120).map(|i| (i as f64 * 0.035).exp()).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| cost(*a.1).total_cmp(&cost(*b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    while (b - a).abs() > 1e-10 * (1.0 + a.abs()) {
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
    }
    Ok((0.5 * (a + b)).max(1.0))
}

/// ψ'(x) for x > 0: upward recurrence then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
}

/// δ_q = ε_(q+1) − ε_1 − q for q = 0..N−1, with N the number of spacings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub values: Vec<f64>,
    pub n: usize,
}

pub fn delta_series(spectrum: &UnfoldedSpectrum) -> Result<DeltaSeries> {
    let eps = spectrum.epsilons();
    if eps.len() < 3 {
        return Err(Error::size(format!("delta series needs at least 3 levels, got {}", eps.len())));
    }
    let n = eps.len() - 1;
    let values = (0..n).map(|q| eps[q] - eps[0] - q as f64).collect();
    Ok(DeltaSeries { values, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrumEstimate {
    /// Wavenumbers 1..N−1.
    pub k: Vec<usize>,
    pub s_of_k: Vec<f64>,
    /// |δ̃_0|², kept so that Parseval can be checked.
    pub zero_mode: f64,
    pub n: usize,
    pub ensembles_averaged: usize,
}

pub const MIN_POWER_SPECTRUM_N: usize = 8;

/// s(k) = |δ̃_k|² with δ̃_k = N^(−1/2) Σ_q δ_q e^(−2πikq/N).
pub fn power_spectrum(series: &DeltaSeries) -> Result<PowerSpectrumEstimate> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(series.n);
    power_spectrum_with(series, &fft)
}

fn power_spectrum_with(series: &DeltaSeries, fft: &Arc<dyn rustfft::Fft<f64>>) -> Result<PowerSpectrumEstimate> {
    let n = series.n;
    if n < MIN_POWER_SPECTRUM_N || series.values.len() != n {
        return Err(Error::size(format!(
            "power spectrum needs N >= {MIN_POWER_SPECTRUM_N} matching values, got N = {n}"
        )));
    }
    let mut buf: Vec<Complex64> = series.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr() * scale).collect();
    Ok(PowerSpectrumEstimate {
        k: (1..n).collect(),
        s_of_k: power[1..].to_vec(),
        zero_mode: power[0],
        n,
        ensembles_averaged: 1,
    })
}

/// Pairwise sum, so ensemble means do not depend on how work was scheduled.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Ensemble average of equally sized estimates.
pub fn average_power_spectra(estimates: &[PowerSpectrumEstimate]) -> Result<PowerSpectrumEstimate> {
    let first = estimates.first().ok_or_else(|| Error::size("no power spectra to average"))?;
    if estimates.iter().any(|e| e.n != first.n) {
        return Err(Error::size("power spectra of different lengths cannot be averaged"));
    }
    let total: usize = estimates.iter().map(|e| e.ensembles_averaged).sum();
    let weights: Vec<f64> = estimates.iter().map(|e| e.ensembles_averaged as f64 / total as f64).collect();
    let mut column = vec![0.0; estimates.len()];
    let mut s_of_k = Vec::with_capacity(first.s_of_k.len());
    for j in 0..first.s_of_k.len() {
        for (c, (e, w)) in column.iter_mut().zip(estimates.iter().zip(&weights)) {
            *c = e.s_of_k[j] * w;
        }
        s_of_k.push(pairwise_sum(&column));
    }
    for (c, (e, w)) in column.iter_mut().zip(estimates.iter().zip(&weights)) {
        *c = e.zero_mode * w;
    }
    Ok(PowerSpectrumEstimate {
        k: first.k.clone(),
        s_of_k,
        zero_mode: pairwise_sum(&column),
        n: first.n,
        ensembles_averaged: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormFactorKind {
    Poisson,
    SemiPoisson,
    Goe,
}

/// Spectral form factor K(τ).
///
/// The GOE form factor uses `2τ − τ ln(1 + 2τ)` for τ ≤ 1 and
/// `2 − τ ln((2τ + 1)/(2τ − 1))` beyond.
pub fn spectral_form_factor(kind: FormFactorKind, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
    }
    Ok(match kind {
        FormFactorKind::Poisson => 1.0,
        FormFactorKind::SemiPoisson => {
            let p = PI * PI * tau * tau;
            (2.0 + p) / (4.0 + p)
        }
        FormFactorKind::Goe => {
            if tau <= 1.0 {
                2.0 * tau - tau * (2.0 * tau).ln_1p()
            } else {
                2.0 - tau * (2.0 / (2.0 * tau - 1.0)).ln_1p()
            }
        }
    })
}

/// Offset Δ of the expected power spectrum for Gaussian ensembles.
pub const GAUSSIAN_DELTA: f64 = -1.0 / 12.0;

/// Calibrated offset Δ for semi-Poisson spectra.
///
/// Produced by `calibrate_semi_poisson_delta(10_000, 512, RandomSeed::new(2021, 0))`
/// (daisy sequences of 513 levels, relative least squares over k = 1..N−1).
/// A unit test recomputes it.
pub const SEMI_POISSON_DELTA: f64 = -0.06364826144843501;

/// Conventional Δ for a form-factor kind: 0 (Poisson), −1/12 (GOE), calibrated (semi-Poisson).
pub fn default_delta(kind: FormFactorKind) -> f64 {
    match kind {
        FormFactorKind::Poisson => 0.0,
        FormFactorKind::SemiPoisson => SEMI_POISSON_DELTA,
        FormFactorKind::Goe => GAUSSIAN_DELTA,
    }
}

/// Expected ⟨s(k)⟩ for a sequence of N spacings.
pub fn theory_power_spectrum(kind: FormFactorKind, k: usize, n: usize, delta_offset: f64) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::domain(format!(
            "k = {k} hits the pole of 1/(4 sin²(πk/N)) for N = {n}; need 1 <= k <= N-1"
        )));
    }
    let tau = k as f64 / n as f64;
    let comp = 1.0 - tau;
    let form = (spectral_form_factor(kind, tau)? - 1.0) / (tau * tau)
        + (spectral_form_factor(kind, comp)? - 1.0) / (comp * comp);
    let sin = (PI * tau).sin();
    Ok(form / (4.0 * PI * PI) + 1.0 / (4.0 * sin * sin) + delta_offset)
}

/// Synthetic sources for Monte Carlo power spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SyntheticSource {
    Poisson,
    /// Every second level of a Poisson sequence.
    Daisy,
    GammaEta(f64),
    Goe,
}

/// Unfolded sequence of `n + 1` levels from a synthetic source.
pub fn synthetic_spectrum(source: SyntheticSource, n: usize, seed: RandomSeed) -> Result<UnfoldedSpectrum> {
    let levels = n + 1;
    let seq = match source {
        SyntheticSource::Poisson => sample_gamma_levels(&EnsembleSpec::poisson(levels), seed)?,
        SyntheticSource::Daisy => {
            let poisson = sample_gamma_levels(&EnsembleSpec::poisson(2 * levels), seed)?;
            daisy_thin(&poisson, 2)?
        }
        SyntheticSource::GammaEta(eta) => sample_gamma_levels(&EnsembleSpec::gamma(eta, levels), seed)?,
        SyntheticSource::Goe => sample_goe_levels(&EnsembleSpec::goe(2 * levels), seed)?,
    };
    let mut eps = seq.into_levels();
    eps.truncate(levels);
    UnfoldedSpectrum::normalized(eps, crate::ensembles::StatKind::Ingested)
}

/// Ensemble-averaged power spectrum of `sequences` synthetic spectra with N = `n`.
pub fn monte_carlo_power_spectrum(
    source: SyntheticSource,
    sequences: usize,
    n: usize,
    seed: RandomSeed,
) -> Result<PowerSpectrumEstimate> {
    if sequences == 0 {
        return Err(Error::size("need at least one sequence"));
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let estimates = (0..sequences)
        .into_par_iter()
        .map(|i| {
            let spec = synthetic_spectrum(source, n, seed.derive(i as u64))?;
            power_spectrum_with(&delta_series(&spec)?, &fft)
        })
        .collect::<Result<Vec<_>>>()?;
    average_power_spectra(&estimates)
}

/// Least-squares Δ minimising Σ_k ((mc_k − th_k(Δ)) / th_k(0))² over k = 1..N−1.
pub fn fit_delta_offset(kind: FormFactorKind, estimate: &PowerSpectrumEstimate) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&k, &s) in estimate.k.iter().zip(&estimate.s_of_k) {
        let th = theory_power_spectrum(kind, k, estimate.n, 0.0)?;
        let w = 1.0 / (th * th);
        num += w * (s - th);
        den += w;
    }
    Ok(num / den)
}

/// Monte Carlo calibration of the semi-Poisson Δ from daisy sequences.
pub fn calibrate_semi_poisson_delta(sequences: usize, n: usize, seed: RandomSeed) -> Result<f64> {
    let mc = monte_carlo_power_spectrum(SyntheticSource::Daisy, sequences, n, seed)?;
    fit_delta_offset(FormFactorKind::SemiPoisson, &mc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GofMetric {
    /// Kolmogorov–Smirnov sup distance.
    Ks,
    /// Pearson χ² over `bins` uniform bins on [0, max) plus an overflow bin.
    ChiSquare { bins: usize, max: f64 },
}

/// Distance between a sample and a theoretical CDF.
pub fn gof_distance(sample: &[f64], cdf: impl Fn(f64) -> f64, metric: GofMetric) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::size("goodness of fit needs a non-empty sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    match metric {
        GofMetric::Ks => {
            let mut d: f64 = 0.0;
            for (i, &x) in sorted.iter().enumerate() {
                let f = cdf(x);
                d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
            }
            Ok(d)
        }
        GofMetric::ChiSquare { bins, max } => {
            if bins == 0 || !(max > 0.0) {
                return Err(Error::domain("chi-square needs a positive bin count and range"));
            }
            let width = max / bins as f64;
            let mut observed = vec![0usize; bins + 1];
            for &x in &sorted {
                let b = if x >= max { bins } else { ((x.max(0.0) / width) as usize).min(bins - 1) };
                observed[b] += 1;
            }
            let mut chi2 = 0.0;
            for (b, &o) in observed.iter().enumerate() {
                let p = if b == bins {
                    1.0 - cdf(max)
                } else {
                    cdf((b + 1) as f64 * width) - cdf(b as f64 * width)
                };
                let e = n * p;
                if e > 0.0 {
                    chi2 += (o as f64 - e).powi(2) / e;
                }
            }
            Ok(chi2)
        }
    }
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::size("two-sample KS needs non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}
