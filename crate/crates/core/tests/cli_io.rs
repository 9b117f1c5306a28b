use std::path::Path;
use std::process::Command;

use num_complex::Complex64;
use proptest::prelude::*;

use levelstat_core::io::{
    ingest_resonances, ingest_sparams, run_pipeline, write_resonances, write_sparams, AnalysisConfig,
    ResonanceFormat, ResonanceTable, SParamTable, Subcommand,
};
use levelstat_core::scattering::{eef_theory_sp_closed, SMatrixSeries};
use levelstat_core::stats::{fit_eta, EtaMethod};
use levelstat_core::{LevelSequence, StatKind};

fn levelstat(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_levelstat"));
    cmd.args(args).env_remove("LEVELSTAT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn small_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, format!("ensemble_sequences = 2\nensemble_levels = 300\n{body}")).unwrap();
    p.display().to_string()
}

#[test]
fn cli_success_writes_bundle() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), "");
    let out = d.path().join("out");
    let (code, err) = levelstat(&["nnsd", "--config", &cfg, "--out", out.to_str().unwrap()], &[("LEVELSTAT_THREADS", "1")]);
    assert_eq!(code, 0, "{err}");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "nnsd");
    for t in manifest["tables"].as_array().unwrap() {
        assert!(out.join(t["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn cli_seed_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), "");
    let run = |seed: &str, name: &str| {
        let out = d.path().join(name);
        let (code, err) = levelstat(&["generate", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(code, 0, "{err}");
        std::fs::read(out.join("levels.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "a"), run("6", "c"));
}

#[test]
fn cli_validation_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let good = small_config(d.path(), "");
    assert_eq!(levelstat(&["bogus", "--config", &good], &[]).0, 2);
    assert_eq!(levelstat(&["nnsd"], &[]).0, 2);
    assert_eq!(levelstat(&["nnsd", "--config", &good], &[("LEVELSTAT_THREADS", "zero")]).0, 2);

    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "histogram_bins = 0\nno_such_key = 1\n").unwrap();
    let (code, err) = levelstat(&["nnsd", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("histogram_bins") && err.contains("no_such_key"), "{err}");

    let res = d.path().join("res.csv");
    std::fs::write(&res, "# realization_id,frequency_ghz,width_ghz\n0,2.0,\n0,1.5,\n").unwrap();
    let cfg = small_config(d.path(), &format!("resonances_path = {:?}\n", res.to_str().unwrap()));
    let (code, err) = levelstat(&["unfold", "--config", &cfg, "--out", d.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(code, 2);
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn billiard_sweep_is_semi_poisson_like() {
    let bundle = run_pipeline(&AnalysisConfig::default(), Subcommand::Billiard).unwrap();
    let fit = bundle.table("nnsd_eta_fit").unwrap();
    let eta = fit.rows[0][1];
    assert!((1.7..=2.4).contains(&eta), "eta = {eta}");
}

#[test]
fn eta_fit_is_scale_invariant() {
    let s: Vec<f64> = (0..500).map(|i| 0.2 + ((i * 37) % 101) as f64 / 50.0).collect();
    let a = fit_eta(&s, EtaMethod::Mle).unwrap();
    let scaled: Vec<f64> = s.iter().map(|x| x * 8.0).collect();
    let b = fit_eta(&scaled, EtaMethod::Mle).unwrap();
    assert!((a.eta - b.eta).abs() < 1e-12);
}

fn series_from(values: &[(f64, f64)], realizations: usize, points: usize) -> Vec<SMatrixSeries> {
    (0..realizations)
        .map(|r| {
            let s = (0..points)
                .map(|i| {
                    let (m, p) = values[(r * points + i) % values.len()];
                    let z = Complex64::from_polar(m, p);
                    [[z, z * 0.5], [z * 0.5, z.conj()]]
                })
                .collect();
            SMatrixSeries {
                realization_id: r as u64,
                frequencies: (0..points).map(|i| 3.0 + i as f64 * 0.004).collect(),
                s,
                pole_perturbations: 0,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resonance_round_trip(gaps in prop::collection::vec(1e-6f64..3.0, 2..60), start in 0.5f64..20.0) {
        let mut f = start;
        let levels: Vec<f64> = gaps.iter().map(|g| { f += g; f }).collect();
        let seq = LevelSequence::new(levels, StatKind::Ingested).unwrap();
        let table = ResonanceTable::from_sequences(&[seq.clone(), seq]);
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("r.csv");
        write_resonances(&p, &table).unwrap();
        prop_assert_eq!(ingest_resonances(&p, ResonanceFormat::Csv).unwrap(), table);
    }

    #[test]
    fn sparam_round_trip(values in prop::collection::vec((0.0f64..0.9, -3.2f64..3.2), 1..40), realizations in 1usize..4, points in 2usize..30) {
        let table = SParamTable::from_series(&series_from(&values, realizations, points));
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("s.csv");
        write_sparams(&p, &table).unwrap();
        prop_assert_eq!(ingest_sparams(&p).unwrap(), table);
    }

    #[test]
    fn sp_enhancement_factor_bounds(g in 1e-3f64..1e3) {
        let f = eef_theory_sp_closed(g).unwrap();
        prop_assert!(f > 2.5 && f < 3.0);
        prop_assert!(eef_theory_sp_closed(g * 1.01).unwrap() < f);
    }
}
