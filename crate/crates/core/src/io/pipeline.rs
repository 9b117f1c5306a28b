//! Subcommand orchestration: each subcommand turns a config into a [`PlotBundle`].

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::billiard::{perturb_point_scatterers, CavityGeometry, ScattererSet, WeylLaw};
use crate::ensembles::{
    daisy_thin, sample_gamma_levels, sample_goe_levels, EnsembleSpec, LevelSequence, RandomSeed,
};
use crate::error::{Error, Result};
use crate::scattering::{
    eef_estimate, eef_theory_goe, eef_theory_integral, eef_theory_sp_closed, simulate_smatrix, Absorption,
    ChannelCoupling, GammaProfile, HamiltonianSource, HeidelbergModel, SMatrixSeries, WindowSpec,
};
use crate::stats::{
    fit_eta, gof_distance, monte_carlo_power_spectrum, theory_integrated_nnsd, theory_integrated_second_nnsd,
    theory_nnsd, theory_power_spectrum, theory_second_nnsd, EtaMethod, FormFactorKind, GofMetric,
    SpacingHistogram, SpacingLaw, SyntheticSource, SEMI_POISSON_DELTA,
};
use crate::unfolding::{fit_weyl, pooled_spacings, unfold, UnfoldedSpectrum};

use super::bundle::{PlotBundle, Provenance, Table};
use super::config::AnalysisConfig;
use super::formats::{ingest_resonances, ResonanceFormat, SParamTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Generate,
    Billiard,
    Unfold,
    Nnsd,
    P2s,
    Powerspec,
    EefSim,
    EefTheory,
    FullReport,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Subcommand::Generate,
        Subcommand::Billiard,
        Subcommand::Unfold,
        Subcommand::Nnsd,
        Subcommand::P2s,
        Subcommand::Powerspec,
        Subcommand::EefSim,
        Subcommand::EefTheory,
        Subcommand::FullReport,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Generate => "generate",
            Subcommand::Billiard => "billiard",
            Subcommand::Unfold => "unfold",
            Subcommand::Nnsd => "nnsd",
            Subcommand::P2s => "p2s",
            Subcommand::Powerspec => "powerspec",
            Subcommand::EefSim => "eef-sim",
            Subcommand::EefTheory => "eef-theory",
            Subcommand::FullReport => "full-report",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownSubcommand(s.to_string()))
    }
}

pub fn run_pipeline(config: &AnalysisConfig, subcommand: Subcommand) -> Result<PlotBundle> {
    config.validate()?;
    let mut bundle = PlotBundle::new(subcommand.name(), config);
    match subcommand {
        Subcommand::Generate => generate(config, &mut bundle)?,
        Subcommand::Billiard => billiard(config, &mut bundle)?,
        Subcommand::Unfold => unfold_cmd(config, &mut bundle)?,
        Subcommand::Nnsd => nnsd(config, &mut bundle, 1)?,
        Subcommand::P2s => nnsd(config, &mut bundle, 2)?,
        Subcommand::Powerspec => powerspec(config, &mut bundle)?,
        Subcommand::EefSim => {
            eef_sim(config, &mut bundle)?;
        }
        Subcommand::EefTheory => eef_theory(config, &mut bundle)?,
        Subcommand::FullReport => {
            for sub in Subcommand::ALL.iter().filter(|s| **s != Subcommand::FullReport) {
                let part = run_pipeline(config, *sub)?;
                bundle.absorb(&format!("{}_", sub.name().replace('-', "_")), part);
            }
        }
    }
    Ok(bundle)
}

fn seed(config: &AnalysisConfig, stream: u64) -> RandomSeed {
    RandomSeed::new(config.seed, stream)
}

/// Stream ids keep subcommands statistically independent of each other.
mod stream {
    pub const ENSEMBLE: u64 = 1;
    pub const POWERSPEC_DAISY: u64 = 2;
    pub const POWERSPEC_POISSON: u64 = 3;
    pub const EEF: u64 = 4;
}

fn ensemble(config: &AnalysisConfig) -> Result<Vec<LevelSequence>> {
    let base = seed(config, stream::ENSEMBLE);
    let n = config.ensemble_levels;
    (0..config.ensemble_sequences as u64)
        .into_par_iter()
        .map(|i| {
            let s = base.derive(i);
            match config.ensemble_kind.as_str() {
                "poisson" => sample_gamma_levels(&EnsembleSpec::poisson(n), s),
                "semi-poisson" => sample_gamma_levels(&EnsembleSpec::semi_poisson(n), s),
                "gamma" => sample_gamma_levels(&EnsembleSpec::gamma(config.ensemble_eta, n), s),
                "daisy" => daisy_thin(&sample_gamma_levels(&EnsembleSpec::poisson(2 * n), s)?, 2),
                "goe" => sample_goe_levels(&EnsembleSpec::goe(2 * n), s),
                other => Err(Error::Kind(format!("unknown ensemble kind `{other}`"))),
            }
        })
        .collect()
}

fn ensemble_operation(config: &AnalysisConfig) -> &'static str {
    match config.ensemble_kind.as_str() {
        "daisy" => "ensembles::daisy_thin",
        "goe" => "ensembles::sample_goe_levels",
        _ => "ensembles::sample_gamma_levels",
    }
}

fn generate(config: &AnalysisConfig, bundle: &mut PlotBundle) -> Result<()> {
    let seqs = ensemble(config)?;
    let mut t = Table::new("levels", &["realization_id", "level"]);
    for (id, s) in seqs.iter().enumerate() {
        for &x in s.levels() {
            t.push(vec![id as f64, x]);
        }
    }
    bundle.add(
        t,
        Provenance::MonteCarlo,
        ensemble_operation(config),
        &format!("{} sequences of kind {}, unit mean spacing; ingestible as a resonance list", config.ensemble_sequences, config.ensemble_kind),
    );
    Ok(())
}

/// Five fixed hole positions (x along L1, y along L2) in metres.
pub const HOLES: [(f64, f64); 5] = [(0.071, 0.043), (0.137, 0.151), (0.203, 0.089), (0.262, 0.027), (0.318, 0.167)];

fn hole_pairs() -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..HOLES.len() {
        for j in i + 1..HOLES.len() {
            v.push((i, j));
        }
    }
    v
}

/// One configuration per length step; configuration j uses hole pair j mod 10.
pub fn billiard_sweep(config: &AnalysisConfig) -> Result<Vec<(f64, CavityGeometry, LevelSequence)>> {
    let pairs = hole_pairs();
    (0..=config.cavity_length_steps)
        .into_par_iter()
        .map(|j| {
            let length = config.cavity_length_start_m + j as f64 * config.cavity_length_step_m;
            let geom = CavityGeometry::new(length, config.cavity_width_m, config.cavity_height_m)?;
            let (a, b) = pairs[j % pairs.len()];
            let set = ScattererSet::new(vec![HOLES[a], HOLES[b]], vec![config.scatterer_strength; 2]);
            let out = perturb_point_scatterers(&geom, &set, (config.billiard_band_low_ghz, config.billiard_band_high_ghz))?;
            Ok((length, geom, out.levels))
        })
        .collect()
}

fn unfold_one(config: &AnalysisConfig, levels: &LevelSequence, geom: Option<&CavityGeometry>) -> Result<(WeylLaw, f64, UnfoldedSpectrum)> {
    let pin = if config.weyl_mode == "geometry" { geom } else { None };
    let fit = fit_weyl(levels, pin)?;
    let spec = unfold(levels, &fit.law)?;
    Ok((fit.law, fit.residual_rms, spec))
}

fn histogram_tables(
    config: &AnalysisConfig,
    bundle: &mut PlotBundle,
    spacings: &[f64],
    order: usize,
    prefix: &str,
    what: &str,
) -> Result<()> {
    let h = SpacingHistogram::new(spacings, config.histogram_bins, config.histogram_max_s)?;
    let mut t = Table::new(format!("{prefix}histogram"), &["s", "density"]);
    for (c, d) in h.centers().iter().zip(&h.densities) {
        t.push(vec![*c, *d]);
    }
    bundle.add(t, Provenance::ExperimentalEstimate, "stats::SpacingHistogram::new", &format!("order-{order} spacing histogram of {what}"));

    let mut th = if order == 1 {
        Table::new(format!("{prefix}theory"), &["s", "poisson", "semi_poisson", "goe"])
    } else {
        Table::new(format!("{prefix}theory"), &["s", "poisson", "semi_poisson"])
    };
    let points = 200;
    for i in 0..=points {
        let s = config.histogram_max_s * i as f64 / points as f64;
        if order == 1 {
            th.push(vec![
                s,
                theory_nnsd(SpacingLaw::Poisson, s)?,
                theory_nnsd(SpacingLaw::SemiPoisson, s)?,
                theory_nnsd(SpacingLaw::Goe, s)?,
            ]);
        } else {
            th.push(vec![s, s * (-s).exp(), theory_second_nnsd(s)?]);
        }
    }
    bundle.add(th, Provenance::Theory, if order == 1 { "stats::theory_nnsd" } else { "stats::theory_second_nnsd" }, &format!("order-{order} spacing densities"));

    let mut ks = Table::new(format!("{prefix}ks"), &["ks_poisson", "ks_semi_poisson"]);
    if order == 1 {
        ks.push(vec![
            gof_distance(spacings, |s| theory_integrated_nnsd(SpacingLaw::Poisson, s).unwrap_or(f64::NAN), GofMetric::Ks)?,
            gof_distance(spacings, |s| theory_integrated_nnsd(SpacingLaw::SemiPoisson, s).unwrap_or(f64::NAN), GofMetric::Ks)?,
        ]);
    } else {
        ks.push(vec![
            gof_distance(spacings, |s| 1.0 - (1.0 + s) * (-s).exp(), GofMetric::Ks)?,
            gof_distance(spacings, |s| theory_integrated_second_nnsd(s).unwrap_or(f64::NAN), GofMetric::Ks)?,
        ]);
    }
    bundle.add(ks, Provenance::ExperimentalEstimate, "stats::gof_distance", "Kolmogorov-Smirnov distance to each law");

    if order == 1 {
        let mut eta = Table::new(format!("{prefix}eta_fit"), &["method", "eta", "std_error", "spacings"]);
        for (code, method) in [(0.0, EtaMethod::Mle), (1.0, EtaMethod::HistogramLsq)] {
            let f = fit_eta(spacings, method)?;
            eta.push(vec![code, f.eta, f.std_error, spacings.len() as f64]);
        }
        bundle.add(eta, Provenance::ExperimentalEstimate, "stats::fit_eta", "method 0 = maximum likelihood, 1 = histogram least squares");
        let fit = fit_eta(spacings, EtaMethod::Mle)?;
        let mut curve = Table::new(format!("{prefix}eta_curve"), &["s", "density"]);
        for i in 0..=points {
            let s = config.histogram_max_s * i as f64 / points as f64;
            curve.push(vec![s, theory_nnsd(SpacingLaw::GammaEta(fit.eta), s)?]);
        }
        bundle.add(curve, Provenance::Theory, "stats::theory_nnsd", "gamma-family density at the fitted eta");
    }
    Ok(())
}

fn billiard(config: &AnalysisConfig, bundle: &mut PlotBundle) -> Result<()> {
    let sweep = billiard_sweep(config)?;
    let mut levels = Table::new("levels", &["config_id", "length_m", "frequency_ghz"]);
    let mut weyl = Table::new("weyl", &["config_id", "length_m", "a2_fit", "a1_fit", "a0_fit", "a2_area", "residual_rms"]);
    let mut spectra = Vec::new();
    for (id, (length, geom, seq)) in sweep.iter().enumerate() {
        for &f in seq.levels() {
            levels.push(vec![id as f64, *length, f]);
        }
        let (law, rms, spec) = unfold_one(config, seq, Some(geom))?;
        weyl.push(vec![id as f64, *length, law.a2, law.a1, law.a0, WeylLaw::for_geometry(geom).a2, rms]);
        spectra.push(spec);
    }
    bundle.add(levels, Provenance::ExperimentalEstimate, "billiard::perturb_point_scatterers", "eigenfrequencies of the cavity with two point scatterers per length step");
    bundle.add(weyl, Provenance::ExperimentalEstimate, "unfolding::fit_weyl", "Weyl fit per configuration against the area term");
    let spacings = pooled_spacings(&spectra, 1)?;
    histogram_tables(config, bundle, &spacings, 1, "nnsd_", "the unfolded billiard sweep")
}

fn unfold_cmd(config: &AnalysisConfig, bundle: &mut PlotBundle) -> Result<()> {
    let raw: Vec<(Option<CavityGeometry>, LevelSequence)> = match &config.resonances_path {
        Some(p) => ingest_resonances(Path::new(p), ResonanceFormat::Csv)?
            .realizations()?
            .into_iter()
            .map(|(_, s)| (None, s))
            .collect(),
        None => billiard_sweep(config)?.into_iter().map(|(_, g, s)| (Some(g), s)).collect(),
    };
    let mut unfolded = Table::new("unfolded", &["realization_id", "frequency_ghz", "epsilon"]);
    let mut staircase = Table::new("staircase", &["realization_id", "frequency_ghz", "count", "smooth_count"]);
    for (id, (g, seq)) in raw.iter().enumerate() {
        let (law, _, spec) = unfold_one(config, seq, g.as_ref())?;
        for (i, (&f, &e)) in seq.levels().iter().zip(spec.epsilons()).enumerate() {
            unfolded.push(vec![id as f64, f, e]);
            staircase.push(vec![id as f64, f, i as f64 + 0.5, law.eval(f)]);
        }
    }
    bundle.add(unfolded, Provenance::ExperimentalEstimate, "unfolding::unfold", "unfolded levels, unit mean spacing per realization");
    bundle.add(staircase, Provenance::ExperimentalEstimate, "unfolding::fit_weyl", "staircase i - 1/2 against the fitted Weyl law");
    Ok(())
}

fn source_spectra(config: &AnalysisConfig) -> Result<(Vec<UnfoldedSpectrum>, String)> {
    match &config.resonances_path {
        Some(p) => {
            let table = ingest_resonances(Path::new(p), ResonanceFormat::Csv)?;
            let spectra = table
                .realizations()?
                .iter()
                .map(|(_, s)| unfold_one(config, s, None).map(|x| x.2))
                .collect::<Result<Vec<_>>>()?;
            Ok((spectra, format!("resonances from {p}")))
        }
        None => {
            let spectra = ensemble(config)?
                .into_iter()
                .map(|s| {
                    let kind = s.kind();
                    UnfoldedSpectrum::normalized(s.into_levels(), kind)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((spectra, format!("generated {} sequences", config.ensemble_kind)))
        }
    }
}

fn nnsd(config: &AnalysisConfig, bundle: &mut PlotBundle, order: usize) -> Result<()> {
    let (spectra, what) = source_spectra(config)?;
    let spacings = pooled_spacings(&spectra, order)?;
    histogram_tables(config, bundle, &spacings, order, "", &what)
}

fn powerspec(config: &AnalysisConfig, bundle: &mut PlotBundle) -> Result<()> {
    let n = config.powerspec_n;
    let m = config.powerspec_sequences;
    let daisy = monte_carlo_power_spectrum(SyntheticSource::Daisy, m, n, seed(config, stream::POWERSPEC_DAISY))?;
    let poisson = monte_carlo_power_spectrum(SyntheticSource::Poisson, m, n, seed(config, stream::POWERSPEC_POISSON))?;
    let mut mc = Table::new("monte_carlo", &["k", "semi_poisson", "poisson", "ratio"]);
    let mut th = Table::new("theory", &["k", "semi_poisson", "poisson"]);
    for ((&k, &sp), &p) in daisy.k.iter().zip(&daisy.s_of_k).zip(&poisson.s_of_k) {
        mc.push(vec![k as f64, sp, p, sp / p]);
        th.push(vec![
            k as f64,
            theory_power_spectrum(FormFactorKind::SemiPoisson, k, n, SEMI_POISSON_DELTA)?,
            theory_power_spectrum(FormFactorKind::Poisson, k, n, 0.0)?,
        ]);
    }
    bundle.add(mc, Provenance::MonteCarlo, "stats::monte_carlo_power_spectrum", &format!("mean power spectrum of delta_q over {m} daisy and {m} Poisson sequences, N = {n}"));
    bundle.add(th, Provenance::Theory, "stats::theory_power_spectrum", "expected power spectrum with the calibrated semi-Poisson offset");
    Ok(())
}

/// The simulated model behind `eef-sim`: levels cover the band with a margin on each side.
pub fn eef_model(config: &AnalysisConfig) -> Result<HeidelbergModel> {
    let d = config.eef_level_spacing_ghz;
    let width = config.band_high_ghz - config.band_low_ghz;
    let in_band = (width / d).ceil() as usize;
    let profile = GammaProfile::ramp(config.eef_gamma_start, config.eef_gamma_end, config.band_low_ghz, config.band_high_ghz);
    let absorption = match config.eef_absorption.as_str() {
        "parasitic" => Absorption::Parasitic { channels: config.eef_parasitic_channels, profile },
        _ => Absorption::UniformWidth(profile),
    };
    let couplings = [
        ChannelCoupling::Random { transmission: config.eef_transmission_a },
        ChannelCoupling::Random { transmission: config.eef_transmission_b },
    ];
    let (source, origin) = match config.eef_source.as_str() {
        "goe" => {
            let dim = config.eef_goe_dim;
            if (dim as f64) < 1.25 * in_band as f64 {
                return Err(Error::Config(vec![format!(
                    "eef_goe_dim = {dim} is too small for {in_band} levels in the band; need at least {}",
                    (1.25 * in_band as f64).ceil()
                )]));
            }
            let center = 0.5 * (config.band_low_ghz + config.band_high_ghz);
            (HamiltonianSource::Goe { dim }, center - 0.5 * dim as f64 * d)
        }
        _ => {
            // a daisy level count fluctuates like sqrt(n); the margin covers that many times over
            let margin = 40 + 6 * (in_band as f64).sqrt() as usize;
            (HamiltonianSource::Daisy { levels: in_band + 2 * margin }, config.band_low_ghz - margin as f64 * d)
        }
    };
    let model = HeidelbergModel { source, couplings, absorption, origin_ghz: origin, spacing_ghz: d };
    model.validate()?;
    Ok(model)
}

pub fn eef_grid(config: &AnalysisConfig) -> Vec<f64> {
    let steps = ((config.band_high_ghz - config.band_low_ghz) / config.eef_grid_step_ghz + 1e-9).floor() as usize;
    (0..=steps).map(|i| config.band_low_ghz + i as f64 * config.eef_grid_step_ghz).collect()
}

pub fn window_spec(config: &AnalysisConfig) -> WindowSpec {
    WindowSpec {
        estimate_window: config.estimate_window_ghz,
        average_window: config.average_window_ghz,
        step: config.window_step_ghz,
    }
}

/// Simulated S-matrices, also returned so callers can check the file round trip.
pub fn eef_sim(config: &AnalysisConfig, bundle: &mut PlotBundle) -> Result<Vec<SMatrixSeries>> {
    let model = eef_model(config)?;
    let series = simulate_smatrix(&model, &eef_grid(config), config.eef_realizations, seed(config, stream::EEF))?;
    let est = eef_estimate(&series, &window_spec(config), |nu| model.internal_gamma(nu))?;

    let table = SParamTable::from_series(&series);
    let mut sp = Table::new(
        "sparams",
        &["realization_id", "frequency_ghz", "saa_re", "saa_im", "sab_re", "sab_im", "sba_re", "sba_im", "sbb_re", "sbb_im"],
    );
    for r in &table.rows {
        let s = &r.s;
        sp.push(vec![
            r.realization_id as f64,
            r.frequency_ghz,
            s[0][0].re,
            s[0][0].im,
            s[0][1].re,
            s[0][1].im,
            s[1][0].re,
            s[1][0].im,
            s[1][1].re,
            s[1][1].im,
        ]);
    }
    bundle.add(sp, Provenance::MonteCarlo, "scattering::simulate_smatrix", &format!("{} source, {} realizations; ingestible S-parameter table", config.eef_source, config.eef_realizations));

    let mut curve = Table::new("eef", &["frequency_ghz", "gamma_tot", "f", "f_std", "t_a", "t_b", "windows"]);
    let mut theory = Table::new("eef_theory", &["gamma_tot", "semi_poisson", "goe"]);
    for p in &est.curve.points {
        curve.push(vec![p.frequency, p.gamma_tot, p.f_mean, p.f_std, p.t_a, p.t_b, p.windows as f64]);
        theory.push(vec![p.gamma_tot, eef_theory_sp_closed(p.gamma_tot)?, eef_theory_goe(p.gamma_tot)?]);
    }
    bundle.add(curve, Provenance::ExperimentalEstimate, "scattering::eef_estimate", "windowed enhancement factor with per-window spread");
    bundle.add(theory, Provenance::Theory, "scattering::eef_theory_sp_closed", "theory at the measured total absorption");
    let mut skipped = Table::new("skipped_windows", &["frequency_ghz"]);
    for (f, _) in &est.skipped {
        skipped.push(vec![*f]);
    }
    bundle.add(skipped, Provenance::ExperimentalEstimate, "scattering::eef_estimate", "estimate windows without a defined enhancement factor");
    Ok(series)
}

pub fn gamma_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (min.ln(), max.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

fn eef_theory(config: &AnalysisConfig, bundle: &mut PlotBundle) -> Result<()> {
    let mut t = Table::new("curve", &["gamma_tot", "semi_poisson", "semi_poisson_quadrature", "goe", "poisson"]);
    for g in gamma_grid(config.gamma_min, config.gamma_max, config.gamma_points) {
        t.push(vec![
            g,
            eef_theory_sp_closed(g)?,
            eef_theory_integral(FormFactorKind::SemiPoisson, g)?,
            eef_theory_goe(g)?,
            3.0,
        ]);
    }
    bundle.add(t, Provenance::Theory, "scattering::eef_theory_sp_closed", "enhancement factor against total absorption");
    Ok(())
}
