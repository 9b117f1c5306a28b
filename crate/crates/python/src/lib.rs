//! Python bindings for levelstat.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use levelstat_core::io::{run_pipeline, AnalysisConfig, Subcommand};
use levelstat_core::scattering::{eef_theory_goe, eef_theory_integral, eef_theory_sp_closed};
use levelstat_core::stats::{self, EtaMethod, FormFactorKind, SpacingLaw};
use levelstat_core::{ensembles, EnsembleSpec, Error, RandomSeed};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyArithmeticError::new_err(e.to_string()),
        1 => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn law(name: &str, eta: Option<f64>) -> PyResult<SpacingLaw> {
    match (name, eta) {
        ("poisson", _) => Ok(SpacingLaw::Poisson),
        ("semi-poisson", _) => Ok(SpacingLaw::SemiPoisson),
        ("goe", _) => Ok(SpacingLaw::Goe),
        ("gamma", Some(e)) => Ok(SpacingLaw::GammaEta(e)),
        ("gamma", None) => Err(PyValueError::new_err("law `gamma` needs eta")),
        _ => Err(PyValueError::new_err(format!("unknown law `{name}`"))),
    }
}

/// Unit-mean levels from a gamma-family ensemble ("poisson", "semi-poisson" or "gamma").
#[pyfunction]
#[pyo3(signature = (kind, count, seed=2021, eta=None))]
fn sample_levels(kind: &str, count: usize, seed: u64, eta: Option<f64>) -> PyResult<Vec<f64>> {
    let spec = match law(kind, eta)? {
        SpacingLaw::Poisson => EnsembleSpec::poisson(count),
        SpacingLaw::SemiPoisson => EnsembleSpec::semi_poisson(count),
        SpacingLaw::GammaEta(e) => EnsembleSpec::gamma(e, count),
        SpacingLaw::Goe => return Err(PyValueError::new_err("use a gamma-family kind")),
    };
    let seq = ensembles::sample_gamma_levels(&spec, RandomSeed::new(seed, 0)).map_err(py_err)?;
    Ok(seq.into_levels())
}

/// Fit of the gamma-family shape parameter; returns (eta, std_error).
#[pyfunction]
#[pyo3(signature = (spacings, method="mle"))]
fn fit_eta(spacings: Vec<f64>, method: &str) -> PyResult<(f64, f64)> {
    let method = match method {
        "mle" => EtaMethod::Mle,
        "histogram" => EtaMethod::HistogramLsq,
        m => return Err(PyValueError::new_err(format!("unknown method `{m}`"))),
    };
    let fit = stats::fit_eta(&spacings, method).map_err(py_err)?;
    Ok((fit.eta, fit.std_error))
}

/// Spacing density P(s).
#[pyfunction]
#[pyo3(signature = (law_name, s, eta=None))]
fn nnsd(law_name: &str, s: f64, eta: Option<f64>) -> PyResult<f64> {
    stats::theory_nnsd(law(law_name, eta)?, s).map_err(py_err)
}

/// Enhancement factor at total absorption `gamma`. `kind` is "semi-poisson", "goe" or "poisson".
#[pyfunction]
#[pyo3(signature = (gamma, kind="semi-poisson", quadrature=false))]
fn eef_theory(gamma: f64, kind: &str, quadrature: bool) -> PyResult<f64> {
    let r = match (kind, quadrature) {
        ("semi-poisson", false) => eef_theory_sp_closed(gamma),
        ("semi-poisson", true) => eef_theory_integral(FormFactorKind::SemiPoisson, gamma),
        ("goe", _) => eef_theory_goe(gamma),
        ("poisson", _) => eef_theory_integral(FormFactorKind::Poisson, gamma),
        _ => return Err(PyValueError::new_err(format!("unknown kind `{kind}`"))),
    };
    r.map_err(py_err)
}

/// (si(x), ci(x)) with si(x) = Si(x) − π/2.
#[pyfunction]
fn sici(x: f64) -> PyResult<(f64, f64)> {
    levelstat_core::scattering::sici(x).map_err(py_err)
}

/// Runs a subcommand and writes its bundle; returns the output directory.
#[pyfunction]
#[pyo3(signature = (subcommand, config=None, out=None, seed=None))]
fn run(py: Python<'_>, subcommand: &str, config: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<String> {
    let sub: Subcommand = subcommand.parse().map_err(py_err)?;
    let mut cfg = match config {
        Some(p) => AnalysisConfig::from_file(&p).map_err(py_err)?,
        None => AnalysisConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    py.detach(|| {
        let bundle = run_pipeline(&cfg, sub)?;
        bundle.write(&out)
    })
    .map_err(py_err)?;
    Ok(out.display().to_string())
}

#[pymodule]
fn levelstat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sample_levels, m)?)?;
    m.add_function(wrap_pyfunction!(fit_eta, m)?)?;
    m.add_function(wrap_pyfunction!(nnsd, m)?)?;
    m.add_function(wrap_pyfunction!(eef_theory, m)?)?;
    m.add_function(wrap_pyfunction!(sici, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
