//! Flat TOML analysis configuration. Keys carry their unit as a suffix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub seed: u64,
    /// Not recorded in manifests, so bundles written to different places compare equal.
    #[serde(skip)]
    pub output_dir: String,

    pub band_low_ghz: f64,
    pub band_high_ghz: f64,
    pub estimate_window_ghz: f64,
    pub average_window_ghz: f64,
    pub window_step_ghz: f64,

    /// poisson, semi-poisson, daisy, gamma or goe
    pub ensemble_kind: String,
    pub ensemble_eta: f64,
    pub ensemble_sequences: usize,
    pub ensemble_levels: usize,

    pub histogram_bins: usize,
    pub histogram_max_s: f64,

    /// Optional resonance list used by unfold, nnsd and p2s instead of a generated ensemble.
    pub resonances_path: Option<String>,
    /// free or geometry
    pub weyl_mode: String,

    pub billiard_band_low_ghz: f64,
    pub billiard_band_high_ghz: f64,
    pub cavity_length_start_m: f64,
    pub cavity_length_step_m: f64,
    pub cavity_length_steps: usize,
    pub cavity_width_m: f64,
    pub cavity_height_m: f64,
    pub scatterer_strength: f64,

    pub powerspec_n: usize,
    pub powerspec_sequences: usize,

    /// daisy or goe
    pub eef_source: String,
    pub eef_goe_dim: usize,
    pub eef_realizations: usize,
    pub eef_level_spacing_ghz: f64,
    pub eef_grid_step_ghz: f64,
    pub eef_transmission_a: f64,
    pub eef_transmission_b: f64,
    pub eef_gamma_start: f64,
    pub eef_gamma_end: f64,
    /// uniform or parasitic
    pub eef_absorption: String,
    pub eef_parasitic_channels: usize,

    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            seed: 2021,
            output_dir: "levelstat-out".into(),
            band_low_ghz: 8.0,
            band_high_ghz: 13.5,
            estimate_window_ghz: 0.025,
            average_window_ghz: 0.5,
            window_step_ghz: 0.25,
            ensemble_kind: "semi-poisson".into(),
            ensemble_eta: 2.0,
            ensemble_sequences: 10,
            ensemble_levels: 1000,
            histogram_bins: 40,
            histogram_max_s: 4.0,
            resonances_path: None,
            weyl_mode: "free".into(),
            billiard_band_low_ghz: 1.0,
            billiard_band_high_ghz: 13.5,
            cavity_length_start_m: 0.365,
            cavity_length_step_m: 0.002,
            cavity_length_steps: 25,
            cavity_width_m: 0.202,
            cavity_height_m: 0.008,
            scatterer_strength: 5.0,
            powerspec_n: 512,
            powerspec_sequences: 1000,
            eef_source: "daisy".into(),
            eef_goe_dim: 400,
            eef_realizations: 100,
            eef_level_spacing_ghz: 0.02,
            eef_grid_step_ghz: 0.002,
            eef_transmission_a: 0.01,
            eef_transmission_b: 0.01,
            eef_gamma_start: 1.48,
            eef_gamma_end: 3.98,
            eef_absorption: "uniform".into(),
            eef_parasitic_channels: 20,
            gamma_min: 0.01,
            gamma_max: 100.0,
            gamma_points: 60,
        }
    }
}

struct Reader {
    table: toml::Table,
    errors: Vec<String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.table.remove(key)
    }

    fn f64(&mut self, key: &str, into: &mut f64) {
        match self.take(key) {
            None => {}
            Some(toml::Value::Float(v)) => *into = v,
            Some(toml::Value::Integer(v)) => *into = v as f64,
            Some(v) => self.errors.push(format!("{key}: expected a number, got {}", v.type_str())),
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.take(key) {
            None => None,
            Some(toml::Value::Integer(v)) if v >= 0 => Some(v as u64),
            Some(v) => {
                self.errors.push(format!("{key}: expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str, into: &mut usize) {
        if let Some(v) = self.uint(key) {
            *into = v as usize;
        }
    }

    fn string(&mut self, key: &str, into: &mut String) {
        match self.take(key) {
            None => {}
            Some(toml::Value::String(s)) => *into = s,
            Some(v) => self.errors.push(format!("{key}: expected a string, got {}", v.type_str())),
        }
    }
}

impl AnalysisConfig {
    /// Parses TOML text. Every problem (unknown key, wrong type, invalid value) is reported.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let mut r = Reader { table, errors: Vec::new() };
        let mut c = AnalysisConfig::default();
        if let Some(s) = r.uint("seed") {
            c.seed = s;
        }
        r.string("output_dir", &mut c.output_dir);
        r.f64("band_low_ghz", &mut c.band_low_ghz);
        r.f64("band_high_ghz", &mut c.band_high_ghz);
        r.f64("estimate_window_ghz", &mut c.estimate_window_ghz);
        r.f64("average_window_ghz", &mut c.average_window_ghz);
        r.f64("window_step_ghz", &mut c.window_step_ghz);
        r.string("ensemble_kind", &mut c.ensemble_kind);
        r.f64("ensemble_eta", &mut c.ensemble_eta);
        r.usize("ensemble_sequences", &mut c.ensemble_sequences);
        r.usize("ensemble_levels", &mut c.ensemble_levels);
        r.usize("histogram_bins", &mut c.histogram_bins);
        r.f64("histogram_max_s", &mut c.histogram_max_s);
        let mut path = String::new();
        r.string("resonances_path", &mut path);
        if !path.is_empty() {
            c.resonances_path = Some(path);
        }
        r.string("weyl_mode", &mut c.weyl_mode);
        r.f64("billiard_band_low_ghz", &mut c.billiard_band_low_ghz);
        r.f64("billiard_band_high_ghz", &mut c.billiard_band_high_ghz);
        r.f64("cavity_length_start_m", &mut c.cavity_length_start_m);
        r.f64("cavity_length_step_m", &mut c.cavity_length_step_m);
        r.usize("cavity_length_steps", &mut c.cavity_length_steps);
        r.f64("cavity_width_m", &mut c.cavity_width_m);
        r.f64("cavity_height_m", &mut c.cavity_height_m);
        r.f64("scatterer_strength", &mut c.scatterer_strength);
        r.usize("powerspec_n", &mut c.powerspec_n);
        r.usize("powerspec_sequences", &mut c.powerspec_sequences);
        r.string("eef_source", &mut c.eef_source);
        r.usize("eef_goe_dim", &mut c.eef_goe_dim);
        r.usize("eef_realizations", &mut c.eef_realizations);
        r.f64("eef_level_spacing_ghz", &mut c.eef_level_spacing_ghz);
        r.f64("eef_grid_step_ghz", &mut c.eef_grid_step_ghz);
        r.f64("eef_transmission_a", &mut c.eef_transmission_a);
        r.f64("eef_transmission_b", &mut c.eef_transmission_b);
        r.f64("eef_gamma_start", &mut c.eef_gamma_start);
        r.f64("eef_gamma_end", &mut c.eef_gamma_end);
        r.string("eef_absorption", &mut c.eef_absorption);
        r.usize("eef_parasitic_channels", &mut c.eef_parasitic_channels);
        r.f64("gamma_min", &mut c.gamma_min);
        r.f64("gamma_max", &mut c.gamma_max);
        r.usize("gamma_points", &mut c.gamma_points);

        let mut errors = r.errors;
        for key in r.table.keys() {
            errors.push(format!("{key}: unknown key"));
        }
        errors.extend(c.violations());
        if errors.is_empty() {
            Ok(c)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0) || !x.is_finite() {
                v.push(format!("{name}: must be a positive finite number, got {x}"));
            }
        };
        positive("band_low_ghz", self.band_low_ghz);
        positive("band_high_ghz", self.band_high_ghz);
        positive("estimate_window_ghz", self.estimate_window_ghz);
        positive("average_window_ghz", self.average_window_ghz);
        positive("window_step_ghz", self.window_step_ghz);
        positive("histogram_max_s", self.histogram_max_s);
        positive("billiard_band_low_ghz", self.billiard_band_low_ghz);
        positive("billiard_band_high_ghz", self.billiard_band_high_ghz);
        positive("cavity_length_start_m", self.cavity_length_start_m);
        positive("cavity_length_step_m", self.cavity_length_step_m);
        positive("cavity_width_m", self.cavity_width_m);
        positive("cavity_height_m", self.cavity_height_m);
        positive("eef_level_spacing_ghz", self.eef_level_spacing_ghz);
        positive("eef_grid_step_ghz", self.eef_grid_step_ghz);
        positive("gamma_min", self.gamma_min);
        positive("gamma_max", self.gamma_max);

        let mut count = |name: &str, x: usize, min: usize| {
            if x < min {
                v.push(format!("{name}: must be at least {min}, got {x}"));
            }
        };
        count("ensemble_sequences", self.ensemble_sequences, 1);
        count("ensemble_levels", self.ensemble_levels, 2);
        count("histogram_bins", self.histogram_bins, 1);
        count("cavity_length_steps", self.cavity_length_steps, 0);
        count("powerspec_n", self.powerspec_n, crate::stats::MIN_POWER_SPECTRUM_N);
        count("powerspec_sequences", self.powerspec_sequences, 1);
        count("eef_goe_dim", self.eef_goe_dim, crate::ensembles::MIN_GOE_DIM);
        count("eef_realizations", self.eef_realizations, crate::scattering::estimate::MIN_REALIZATIONS);
        count("eef_parasitic_channels", self.eef_parasitic_channels, 1);
        count("gamma_points", self.gamma_points, 2);

        if self.band_low_ghz >= self.band_high_ghz {
            v.push(format!("band_low_ghz ({}) must be below band_high_ghz ({})", self.band_low_ghz, self.band_high_ghz));
        }
        if self.billiard_band_low_ghz >= self.billiard_band_high_ghz {
            v.push("billiard_band_low_ghz must be below billiard_band_high_ghz".into());
        }
        if self.estimate_window_ghz > self.average_window_ghz {
            v.push("estimate_window_ghz must not exceed average_window_ghz".into());
        }
        if self.average_window_ghz > self.band_high_ghz - self.band_low_ghz {
            v.push("average_window_ghz must fit inside the band".into());
        }
        if self.gamma_min >= self.gamma_max {
            v.push("gamma_min must be below gamma_max".into());
        }
        if !["poisson", "semi-poisson", "daisy", "gamma", "goe"].contains(&self.ensemble_kind.as_str()) {
            v.push(format!("ensemble_kind: unknown kind `{}`", self.ensemble_kind));
        }
        if !(self.ensemble_eta >= 1.0) || !self.ensemble_eta.is_finite() {
            v.push(format!("ensemble_eta: must be >= 1, got {}", self.ensemble_eta));
        }
        if !["free", "geometry"].contains(&self.weyl_mode.as_str()) {
            v.push(format!("weyl_mode: expected `free` or `geometry`, got `{}`", self.weyl_mode));
        }
        if !["daisy", "goe"].contains(&self.eef_source.as_str()) {
            v.push(format!("eef_source: expected `daisy` or `goe`, got `{}`", self.eef_source));
        }
        if !["uniform", "parasitic"].contains(&self.eef_absorption.as_str()) {
            v.push(format!("eef_absorption: expected `uniform` or `parasitic`, got `{}`", self.eef_absorption));
        }
        for (name, t) in [("eef_transmission_a", self.eef_transmission_a), ("eef_transmission_b", self.eef_transmission_b)] {
            if !(0.0..=1.0).contains(&t) {
                v.push(format!("{name}: must lie in [0, 1], got {t}"));
            }
        }
        for (name, g) in [("eef_gamma_start", self.eef_gamma_start), ("eef_gamma_end", self.eef_gamma_end)] {
            if !(g >= 0.0) || !g.is_finite() {
                v.push(format!("{name}: must be finite and >= 0, got {g}"));
            }
        }
        if !(self.scatterer_strength.is_finite()) {
            v.push("scatterer_strength: must be finite".into());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(AnalysisConfig::from_toml_str("").unwrap(), AnalysisConfig::default());
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "band_low_ghz = 14.0\nhistogram_bins = 0\nbogus = 1\neef_source = 3\n";
        match AnalysisConfig::from_toml_str(text) {
            Err(Error::Config(v)) => {
                let all = v.join("\n");
                for key in ["band_low_ghz", "histogram_bins", "bogus", "eef_source"] {
                    assert!(all.contains(key), "{key} missing from {all}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        let c = AnalysisConfig::from_toml_str("band_low_ghz = 9\nseed = 7").unwrap();
        assert_eq!(c.band_low_ghz, 9.0);
        assert_eq!(c.seed, 7);
    }
}
