//! Two-port S-matrix of a resonator in the Heidelberg approach,
//! `S(E) = (1 − iπK)(1 + iπK)⁻¹` with `K = Σₙ wₙ wₙᵀ / (E − εₙ + iΓₙ/2)`.
//!
//! Energies are measured in units of the mean level spacing and mapped to
//! frequency by `ν = origin + ε · spacing`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ensembles::{
    daisy_thin, goe_matrix, sample_gamma_levels, semicircle_count, EnsembleSpec, LevelSequence, RandomSeed,
    MIN_GOE_DIM,
};
use crate::error::{Error, Result};

/// `[[S_aa, S_ab], [S_ba, S_bb]]`.
pub type SMatrix = [[Complex64; 2]; 2];

#[derive(Debug, Clone)]
pub enum HamiltonianSource {
    /// Full GOE matrix of this dimension, unfolded with the semicircle law.
    Goe { dim: usize },
    /// Fresh semi-Poisson (every second Poisson level) sequence per realization.
    Daisy { levels: usize },
    /// Fixed levels, rescaled to unit mean spacing. Identical in every realization.
    DiagonalLevels(LevelSequence),
}

#[derive(Debug, Clone)]
pub enum ChannelCoupling {
    /// Gaussian coupling vector whose variance yields this transmission coefficient.
    Random { transmission: f64 },
    /// Explicit vector, in the site basis for GOE and in the level basis otherwise.
    Fixed(Vec<f64>),
}

/// Internal absorption γ(ν), linear between two frequencies and constant outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaProfile {
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub nu_start: f64,
    pub nu_end: f64,
}

impl GammaProfile {
    pub fn constant(gamma: f64) -> Self {
        Self { gamma_start: gamma, gamma_end: gamma, nu_start: 0.0, nu_end: 1.0 }
    }

    pub fn ramp(gamma_start: f64, gamma_end: f64, nu_start: f64, nu_end: f64) -> Self {
        Self { gamma_start, gamma_end, nu_start, nu_end }
    }

    pub fn at(&self, nu: f64) -> f64 {
        if self.gamma_start == self.gamma_end {
            return self.gamma_start;
        }
        let t = ((nu - self.nu_start) / (self.nu_end - self.nu_start)).clamp(0.0, 1.0);
        self.gamma_start + t * (self.gamma_end - self.gamma_start)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.gamma_start >= 0.0
            && self.gamma_end >= 0.0
            && self.gamma_start.is_finite()
            && self.gamma_end.is_finite()
            && (self.gamma_start == self.gamma_end || self.nu_end > self.nu_start);
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid absorption profile {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub enum Absorption {
    None,
    /// `channels` weakly coupled parasitic channels sharing γ(ν) equally.
    Parasitic { channels: usize, profile: GammaProfile },
    /// Many-channel limit: every level gets the width `Γ = γ(ν) Δ / 2π`.
    UniformWidth(GammaProfile),
}

#[derive(Debug, Clone)]
pub struct HeidelbergModel {
    pub source: HamiltonianSource,
    pub couplings: [ChannelCoupling; 2],
    pub absorption: Absorption,
    /// Frequency of the unit-spacing energy origin, GHz.
    pub origin_ghz: f64,
    /// Mean level spacing, GHz.
    pub spacing_ghz: f64,
}

/// S-matrices of one realization on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrixSeries {
    pub realization_id: u64,
    pub frequencies: Vec<f64>,
    pub s: Vec<SMatrix>,
    /// Grid points that landed on a pole of K and were shifted by a tiny offset.
    pub pole_perturbations: usize,
}

/// Coupling strength `x = π² v²` that yields transmission `T = 4x/(1+x)²`, taking the root x ≤ 1.
pub fn coupling_strength(transmission: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&transmission) {
        return Err(Error::domain(format!("transmission must lie in [0, 1], got {transmission}")));
    }
    if transmission == 0.0 {
        return Ok(0.0);
    }
    let t = transmission;
    Ok((2.0 - t - 2.0 * (1.0 - t).sqrt()) / t)
}

fn rms_coupling(transmission: f64) -> Result<f64> {
    Ok(coupling_strength(transmission)?.sqrt() / PI)
}

impl HeidelbergModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_ghz > 0.0) || !self.spacing_ghz.is_finite() || !self.origin_ghz.is_finite() {
            return Err(Error::domain("spacing_ghz must be positive and origin_ghz finite"));
        }
        match &self.source {
            HamiltonianSource::Goe { dim } if *dim < MIN_GOE_DIM => {
                return Err(Error::size(format!("GOE dimension must be at least {MIN_GOE_DIM}, got {dim}")))
            }
            HamiltonianSource::Daisy { levels } if *levels < 2 => {
                return Err(Error::size(format!("daisy source needs at least 2 levels, got {levels}")))
            }
            _ => {}
        }
        let n = self.level_count();
        for c in &self.couplings {
            match c {
                ChannelCoupling::Random { transmission } => {
                    coupling_strength(*transmission)?;
                }
                ChannelCoupling::Fixed(v) => {
                    if v.len() != n {
                        return Err(Error::size(format!("coupling vector has {} entries, need {n}", v.len())));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::domain("coupling vector has non-finite entries"));
                    }
                }
            }
        }
        match &self.absorption {
            Absorption::None => {}
            Absorption::UniformWidth(p) => p.validate()?,
            Absorption::Parasitic { channels, profile } => {
                profile.validate()?;
                if *channels == 0 {
                    return Err(Error::size("parasitic absorption needs at least one channel"));
                }
                let peak = profile.gamma_start.max(profile.gamma_end);
                if peak / *channels as f64 > 1.0 {
                    return Err(Error::domain(format!(
                        "gamma {peak} cannot be shared by {channels} channels of transmission <= 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn level_count(&self) -> usize {
        match &self.source {
            HamiltonianSource::Goe { dim } => *dim,
            HamiltonianSource::Daisy { levels } => *levels,
            HamiltonianSource::DiagonalLevels(seq) => seq.len(),
        }
    }

    /// Internal absorption γ at frequency ν.
    pub fn internal_gamma(&self, nu: f64) -> f64 {
        match &self.absorption {
            Absorption::None => 0.0,
            Absorption::Parasitic { profile, .. } | Absorption::UniformWidth(profile) => profile.at(nu),
        }
    }

    fn has_fixed_coupling(&self) -> bool {
        self.couplings.iter().any(|c| matches!(c, ChannelCoupling::Fixed(_)))
    }

    fn frequency(&self, eps: f64) -> f64 {
        self.origin_ghz + eps * self.spacing_ghz
    }

    fn energy(&self, nu: f64) -> f64 {
        (nu - self.origin_ghz) / self.spacing_ghz
    }

    fn realize(&self, seed: RandomSeed) -> Result<Realization> {
        let n = self.level_count();
        let (eps, basis): (Vec<f64>, Option<DMatrix<f64>>) = match &self.source {
            HamiltonianSource::Goe { dim } if !self.has_fixed_coupling() => {
                // A Gaussian vector projected on an orthogonal basis is again i.i.d. Gaussian,
                // so eigenvectors are only needed for fixed couplings.
                let h = goe_matrix(*dim, seed.derive(0));
                let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
                eig.sort_by(|a, b| a.total_cmp(b));
                (eig.iter().map(|&e| semicircle_count(e, *dim)).collect(), None)
            }
            HamiltonianSource::Goe { dim } => {
                let h = goe_matrix(*dim, seed.derive(0));
                let eig = h.symmetric_eigen();
                let mut order: Vec<usize> = (0..*dim).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let eps = order.iter().map(|&i| semicircle_count(eig.eigenvalues[i], *dim)).collect();
                let vecs = DMatrix::from_fn(*dim, *dim, |r, c| eig.eigenvectors[(r, order[c])]);
                (eps, Some(vecs))
            }
            HamiltonianSource::Daisy { levels } => {
                let poisson = sample_gamma_levels(&EnsembleSpec::poisson(2 * levels + 2), seed.derive(0))?;
                let thinned = daisy_thin(&poisson, 2)?;
                let l = thinned.levels();
                (l[..*levels].iter().map(|x| x - l[0]).collect(), None)
            }
            HamiltonianSource::DiagonalLevels(seq) => {
                let l = seq.levels();
                let d = seq.mean_spacing();
                (l.iter().map(|x| (x - l[0]) / d).collect(), None)
            }
        };

        let draw = |index: u64, rms: f64| -> Vec<f64> {
            let mut rng = seed.derive(index).rng();
            (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); rms * z }).collect::<Vec<f64>>()
        };
        let mut vectors = Vec::new();
        for (i, c) in self.couplings.iter().enumerate() {
            let site = match c {
                ChannelCoupling::Random { transmission } => draw(1 + i as u64, rms_coupling(*transmission)?),
                ChannelCoupling::Fixed(v) => v.clone(),
            };
            vectors.push(project(&basis, site));
        }

        let level_gamma: Vec<f64> = eps.iter().map(|&e| self.internal_gamma(self.frequency(e))).collect();
        let mut widths = vec![0.0; n];
        if let Absorption::Parasitic { channels, .. } = &self.absorption {
            for c in 0..*channels {
                let mut rng = seed.derive(16 + c as u64).rng();
                let mut w = Vec::with_capacity(n);
                for g in &level_gamma {
                    let rms = rms_coupling(g / *channels as f64)?;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w.push(rms * z);
                }
                vectors.push(project(&basis, w));
            }
        } else if let Absorption::UniformWidth(_) = &self.absorption {
            for (w, g) in widths.iter_mut().zip(&level_gamma) {
                *w = g / (2.0 * PI);
            }
        }
        Ok(Realization { eps, vectors, widths })
    }
}

fn project(basis: &Option<DMatrix<f64>>, v: Vec<f64>) -> Vec<f64> {
    match basis {
        Some(o) => (o.transpose() * DVector::from_vec(v)).iter().copied().collect(),
        None => v,
    }
}

struct Realization {
    eps: Vec<f64>,
    /// Channel coupling vectors in the level basis: two ports first, then parasitic channels.
    vectors: Vec<Vec<f64>>,
    /// Γₙ in units of the mean spacing.
    widths: Vec<f64>,
}

const POLE_TOL: f64 = 1e-12;
const POLE_SHIFT: f64 = 1e-9;

impl Realization {
    fn smatrix(&self, energy: f64) -> Result<(SMatrix, bool)> {
        let mut e = energy;
        let mut shifted = false;
        let lossless_hit = |e: f64| {
            self.eps.iter().zip(&self.widths).any(|(&x, &g)| g == 0.0 && (e - x).abs() < POLE_TOL)
        };
        if lossless_hit(e) {
            e += POLE_SHIFT;
            shifted = true;
            if lossless_hit(e) {
                return Err(Error::Numerical { message: "resolvent singular after perturbation".into(), achieved: POLE_SHIFT });
            }
        }
        let m = self.vectors.len();
        let mut k = vec![Complex64::new(0.0, 0.0); m * m];
        for (n, (&x, &g)) in self.eps.iter().zip(&self.widths).enumerate() {
            let r = 1.0 / Complex64::new(e - x, 0.5 * g);
            for i in 0..m {
                let wi = self.vectors[i][n];
                if wi == 0.0 {
                    continue;
                }
                for j in i..m {
                    k[i * m + j] += r * (wi * self.vectors[j][n]);
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                k[i * m + j] = k[j * m + i];
            }
        }
        let ipk = |i: usize, j: usize| Complex64::new(0.0, PI) * k[i * m + j];
        let one = Complex64::new(1.0, 0.0);
        let s = if m == 2 {
            // S = (1 − iπK)(1 + iπK)⁻¹
            let (a, b, c, d) = (one + ipk(0, 0), ipk(0, 1), ipk(1, 0), one + ipk(1, 1));
            let det = a * d - b * c;
            let inv = [[d / det, -b / det], [-c / det, a / det]];
            let lhs = [[one - ipk(0, 0), -ipk(0, 1)], [-ipk(1, 0), one - ipk(1, 1)]];
            let mut s = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] = lhs[i][0] * inv[0][j] + lhs[i][1] * inv[1][j];
                }
            }
            s
        } else {
            let a = DMatrix::from_fn(m, m, |i, j| if i == j { one + ipk(i, j) } else { ipk(i, j) });
            let b = DMatrix::from_fn(m, m, |i, j| if i == j { one - ipk(i, j) } else { -ipk(i, j) });
            // K is symmetric, so the two factors commute.
            let full = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Numerical { message: "singular 1 + iπK".into(), achieved: f64::NAN })?;
            [[full[(0, 0)], full[(0, 1)]], [full[(1, 0)], full[(1, 1)]]]
        };
        Ok((s, shifted))
    }
}

/// One realization on `grid` (GHz). Realization `id` uses `seed.derive(id)`.
pub fn simulate_realization(model: &HeidelbergModel, grid: &[f64], id: u64, seed: RandomSeed) -> Result<SMatrixSeries> {
    model.validate()?;
    if grid.is_empty() {
        return Err(Error::size("frequency grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("frequency grid has non-finite entries"));
    }
    let r = model.realize(seed.derive(id))?;
    let lo = model.frequency(r.eps[0]);
    let hi = model.frequency(r.eps[r.eps.len() - 1]);
    if let Some(bad) = grid.iter().find(|&&nu| nu < lo || nu > hi) {
        return Err(Error::domain(format!("frequency {bad} GHz lies outside the level band [{lo}, {hi}]")));
    }
    let mut s = Vec::with_capacity(grid.len());
    let mut pole_perturbations = 0;
    for &nu in grid {
        let (m, shifted) = r.smatrix(model.energy(nu))?;
        pole_perturbations += shifted as usize;
        s.push(m);
    }
    Ok(SMatrixSeries { realization_id: id, frequencies: grid.to_vec(), s, pole_perturbations })
}

/// `realizations` independent realizations, computed in parallel.
pub fn simulate_smatrix(
    model: &HeidelbergModel,
    grid: &[f64],
    realizations: usize,
    seed: RandomSeed,
) -> Result<Vec<SMatrixSeries>> {
    if realizations == 0 {
        return Err(Error::size("need at least one realization"));
    }
    (0..realizations as u64).into_par_iter().map(|id| simulate_realization(model, grid, id, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::StatKind;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn model(absorption: Absorption) -> HeidelbergModel {
        HeidelbergModel {
            source: HamiltonianSource::Goe { dim: 60 },
            couplings: [ChannelCoupling::Random { transmission: 0.6 }, ChannelCoupling::Random { transmission: 0.3 }],
            absorption,
            origin_ghz: 1.0,
            spacing_ghz: 0.01,
        }
    }

    fn unitarity_defect(s: &SMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut v = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    v += s[k][i].conj() * s[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    #[test]
    fn lossless_is_unitary_and_reciprocal() {
        let m = model(Absorption::None);
        let series = simulate_smatrix(&m, &grid(1.1, 1.5, 400), 3, RandomSeed::new(5, 0)).unwrap();
        for r in &series {
            for s in &r.s {
                assert!(unitarity_defect(s) < 1e-10);
                assert!((s[0][1] - s[1][0]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn absorption_reduces_flux() {
        let g = grid(1.1, 1.5, 200);
        let weak = simulate_realization(&model(Absorption::UniformWidth(GammaProfile::constant(0.5))), &g, 0, RandomSeed::new(3, 1)).unwrap();
        let strong = simulate_realization(&model(Absorption::UniformWidth(GammaProfile::constant(5.0))), &g, 0, RandomSeed::new(3, 1)).unwrap();
        let flux = |s: &SMatrix| s[0][0].norm_sqr() + s[1][0].norm_sqr();
        let fw: f64 = weak.s.iter().map(flux).sum();
        let fs: f64 = strong.s.iter().map(flux).sum();
        assert!(fs < fw);
        assert!(weak.s.iter().all(|s| flux(s) <= 1.0 + 1e-12));
    }

    #[test]
    fn parasitic_channels_absorb() {
        let g = grid(1.1, 1.5, 100);
        let p = model(Absorption::Parasitic { channels: 8, profile: GammaProfile::constant(2.0) });
        let r = simulate_realization(&p, &g, 0, RandomSeed::new(3, 1)).unwrap();
        for s in &r.s {
            let flux = s[0][0].norm_sqr() + s[1][0].norm_sqr();
            assert!(flux < 1.0);
            assert!((s[0][1] - s[1][0]).norm() < 1e-10);
        }
    }

    #[test]
    fn global_phase_of_couplings_is_irrelevant() {
        let levels = LevelSequence::new((0..40).map(|i| i as f64 + 0.3 * ((i * 7) % 5) as f64).collect(), StatKind::Poisson).unwrap();
        let wa: Vec<f64> = (0..40).map(|i| 0.1 * ((i as f64) * 1.3).sin()).collect();
        let wb: Vec<f64> = (0..40).map(|i| 0.1 * ((i as f64) * 0.7).cos()).collect();
        let base = HeidelbergModel {
            source: HamiltonianSource::DiagonalLevels(levels),
            couplings: [ChannelCoupling::Fixed(wa.clone()), ChannelCoupling::Fixed(wb.clone())],
            absorption: Absorption::UniformWidth(GammaProfile::constant(1.0)),
            origin_ghz: 0.0,
            spacing_ghz: 1.0,
        };
        let mut flipped = base.clone();
        flipped.couplings[1] = ChannelCoupling::Fixed(wb.iter().map(|x| -x).collect());
        let g = grid(2.0, 30.0, 300);
        let a = simulate_realization(&base, &g, 0, RandomSeed::new(1, 1)).unwrap();
        let b = simulate_realization(&flipped, &g, 0, RandomSeed::new(1, 1)).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            assert!((x[0][0] - y[0][0]).norm() < 1e-12);
            assert!((x[0][1] + y[0][1]).norm() < 1e-12);
            assert!((x[0][1].norm() - y[0][1].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn pole_hits_are_perturbed() {
        let levels = LevelSequence::new((0..10).map(|i| i as f64).collect(), StatKind::Poisson).unwrap();
        let m = HeidelbergModel {
            source: HamiltonianSource::DiagonalLevels(levels),
            couplings: [ChannelCoupling::Fixed(vec![0.1; 10]), ChannelCoupling::Fixed(vec![0.05; 10])],
            absorption: Absorption::None,
            origin_ghz: 0.0,
            spacing_ghz: 1.0,
        };
        let r = simulate_realization(&m, &[3.0, 3.5], 0, RandomSeed::new(0, 0)).unwrap();
        assert_eq!(r.pole_perturbations, 1);
        assert!(r.s.iter().all(|s| unitarity_defect(s) < 1e-8));
    }

    #[test]
    fn coupling_inverse() {
        for t in [0.01, 0.3, 0.9, 1.0] {
            let x = coupling_strength(t).unwrap();
            assert!((4.0 * x / (1.0 + x).powi(2) - t).abs() < 1e-12);
        }
        assert!(coupling_strength(1.5).is_err());
    }

    #[test]
    fn guards() {
        let mut m = model(Absorption::None);
        m.source = HamiltonianSource::Goe { dim: 4 };
        assert!(simulate_realization(&m, &[1.2], 0, RandomSeed::new(0, 0)).is_err());
        let m = model(Absorption::None);
        assert!(simulate_realization(&m, &[100.0], 0, RandomSeed::new(0, 0)).is_err());
        let m = model(Absorption::Parasitic { channels: 1, profile: GammaProfile::constant(3.0) });
        assert!(m.validate().is_err());
    }
}
