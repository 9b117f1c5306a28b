//! Seedable generators of synthetic level sequences.
//!
//! Three families are provided: renewal sequences whose spacings follow the
//! gamma density `η^η s^(η−1) e^(−ηs) / Γ(η)` (Poisson at η = 1, semi-Poisson
//! at η = 2), the decimated-Poisson ("daisy") construction, and GOE spectra
//! unfolded with the semicircle law. All generators are pure functions of
//! their spec and [`RandomSeed`].

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed of a reproducible random stream.
///
/// `master` selects the ChaCha8 key and `stream_id` the ChaCha stream, so two
/// seeds that differ only in `stream_id` produce independent sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSeed {
    pub master: u64,
    pub stream_id: u64,
}

impl RandomSeed {
    pub fn new(master: u64, stream_id: u64) -> Self {
        Self { master, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Seed for the `index`-th sub-task of this stream.
    ///
    /// Depends only on `(self, index)`, so parallel Monte Carlo results do not
    /// depend on scheduling order.
    pub fn derive(&self, index: u64) -> RandomSeed {
        RandomSeed {
            master: self.master,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Statistics tag carried by level sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StatKind {
    Poisson,
    SemiPoisson,
    GammaEta(f64),
    Goe,
    Billiard,
    Ingested,
}

impl StatKind {
    /// Gamma-family shape parameter implied by the tag, if any.
    pub fn eta(&self) -> Option<f64> {
        match *self {
            StatKind::Poisson => Some(1.0),
            StatKind::SemiPoisson => Some(2.0),
            StatKind::GammaEta(eta) => Some(eta),
            _ => None,
        }
    }
}

/// Ordered eigenvalues or resonance frequencies with provenance.
///
/// Levels are strictly increasing, except for [`StatKind::Billiard`] spectra
/// which keep accidental degeneracies of the unperturbed cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSequence {
    levels: Vec<f64>,
    kind: StatKind,
    mean_spacing: f64,
}

impl LevelSequence {
    pub fn new(levels: Vec<f64>, kind: StatKind) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::size(format!(
                "a level sequence needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        if let Some(bad) = levels.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data(format!("level {bad} is not finite")));
        }
        let allow_ties = kind == StatKind::Billiard;
        for (i, w) in levels.windows(2).enumerate() {
            let ok = if allow_ties { w[1] >= w[0] } else { w[1] > w[0] };
            if !ok {
                return Err(Error::Data(format!(
                    "levels must be increasing: level {} ({}) follows {}",
                    i + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        let n = levels.len();
        let mean_spacing = (levels[n - 1] - levels[0]) / (n - 1) as f64;
        if !(mean_spacing > 0.0) {
            return Err(Error::Data("all levels coincide".into()));
        }
        Ok(Self { levels, kind, mean_spacing })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn kind(&self) -> StatKind {
        self.kind
    }

    pub fn mean_spacing(&self) -> f64 {
        self.mean_spacing
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn into_levels(self) -> Vec<f64> {
        self.levels
    }

    /// Nearest-neighbour spacings of the raw levels.
    pub fn spacings(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: StatKind,
    pub count: usize,
    /// Only read for [`StatKind::GammaEta`].
    pub eta: f64,
    /// Only read for [`StatKind::Goe`].
    pub matrix_dim: usize,
}

impl EnsembleSpec {
    pub fn poisson(count: usize) -> Self {
        Self { kind: StatKind::Poisson, count, eta: 1.0, matrix_dim: 0 }
    }

    pub fn semi_poisson(count: usize) -> Self {
        Self { kind: StatKind::SemiPoisson, count, eta: 2.0, matrix_dim: 0 }
    }

    pub fn gamma(eta: f64, count: usize) -> Self {
        Self { kind: StatKind::GammaEta(eta), count, eta, matrix_dim: 0 }
    }

    pub fn goe(matrix_dim: usize) -> Self {
        Self { kind: StatKind::Goe, count: matrix_dim / 2, eta: 0.0, matrix_dim }
    }
}

/// Renewal sequence with unit-mean gamma spacings of shape = rate = η.
///
/// The first level sits at 0. Integer η is sampled as a sum of exponentials;
/// other η use the Marsaglia–Tsang gamma sampler.
pub fn sample_gamma_levels(spec: &EnsembleSpec, seed: RandomSeed) -> Result<LevelSequence> {
    let (eta, kind) = match spec.kind {
        StatKind::Poisson => (1.0, StatKind::Poisson),
        StatKind::SemiPoisson => (2.0, StatKind::SemiPoisson),
        StatKind::GammaEta(eta) => (eta, StatKind::GammaEta(eta)),
        other => {
            return Err(Error::Kind(format!(
                "gamma sampling needs a Poisson, SemiPoisson or GammaEta spec, got {other:?}"
            )))
        }
    };
    if !(eta >= 1.0) || !eta.is_finite() {
        return Err(Error::domain(format!("eta must lie in [1, inf), got {eta}")));
    }
    if spec.count < 2 {
        return Err(Error::size(format!("count must be at least 2, got {}", spec.count)));
    }

    let mut rng = seed.rng();
    let sampler = SpacingSampler::new(eta)?;
    let mut levels = Vec::with_capacity(spec.count);
    let mut x = 0.0;
    levels.push(x);
    for _ in 1..spec.count {
        x += sampler.sample(&mut rng);
        levels.push(x);
    }
    LevelSequence::new(levels, kind)
}

enum SpacingSampler {
    ExpSum { shape: u32, rate: f64 },
    Gamma(Gamma<f64>),
}

impl SpacingSampler {
    fn new(eta: f64) -> Result<Self> {
        if eta.fract() == 0.0 && eta <= 64.0 {
            Ok(SpacingSampler::ExpSum { shape: eta as u32, rate: eta })
        } else {
            Gamma::new(eta, 1.0 / eta)
                .map(SpacingSampler::Gamma)
                .map_err(|e| Error::domain(format!("gamma sampler: {e}")))
        }
    }

    fn sample<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        match self {
            SpacingSampler::ExpSum { shape, rate } => {
                let mut s = 0.0;
                for _ in 0..*shape {
                    let e: f64 = Exp1.sample(rng);
                    s += e;
                }
                // A zero spacing would break strict ordering; its probability is ~2^-53.
                (s / rate).max(f64::MIN_POSITIVE)
            }
            SpacingSampler::Gamma(g) => g.sample(rng).max(f64::MIN_POSITIVE),
        }
    }
}

/// Keeps every `retain_every`-th level of a Poisson sequence and rescales to
/// unit mean spacing.
///
/// With `retain_every = 2` the spacings are sums of two independent unit
/// exponentials, i.e. exactly the semi-Poisson law `4s e^(−2s)` after rescaling.
pub fn daisy_thin(seq: &LevelSequence, retain_every: usize) -> Result<LevelSequence> {
    if seq.kind() != StatKind::Poisson {
        return Err(Error::Kind(format!(
            "daisy thinning needs a Poisson sequence, got {:?}",
            seq.kind()
        )));
    }
    if retain_every < 2 {
        return Err(Error::domain(format!(
            "retain_every must be at least 2 (r >= 1), got {retain_every}"
        )));
    }
    let kept: Vec<f64> = seq
        .levels()
        .iter()
        .skip(retain_every - 1)
        .step_by(retain_every)
        .copied()
        .collect();
    if kept.len() < 2 {
        return Err(Error::size(format!(
            "thinning {} levels by {retain_every} leaves fewer than 2",
            seq.len()
        )));
    }
    let origin = kept[0];
    let mean = (kept[kept.len() - 1] - origin) / (kept.len() - 1) as f64;
    let levels = kept.iter().map(|x| (x - origin) / mean).collect();
    let kind = if retain_every == 2 {
        StatKind::SemiPoisson
    } else {
        StatKind::GammaEta(retain_every as f64)
    };
    LevelSequence::new(levels, kind)
}

/// Dense GOE matrix `(A + Aᵀ)/2` with i.i.d. standard normal `A`: off-diagonal
/// variance 1/2, diagonal variance 1, semicircle radius `sqrt(2 dim)`.
pub fn goe_matrix(dim: usize, seed: RandomSeed) -> DMatrix<f64> {
    let mut rng = seed.rng();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let g: f64 = StandardNormal.sample(&mut rng);
            if i == j {
                h[(i, i)] = g;
            } else {
                let v = g * std::f64::consts::FRAC_1_SQRT_2;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
    }
    h
}

/// Semicircle cumulative level count for a matrix from [`goe_matrix`].
pub fn semicircle_count(energy: f64, dim: usize) -> f64 {
    let radius = (2.0 * dim as f64).sqrt();
    let x = (energy / radius).clamp(-1.0, 1.0);
    let n = dim as f64;
    n * (0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / std::f64::consts::PI)
}

/// Smallest matrix accepted by [`sample_goe_levels`].
pub const MIN_GOE_DIM: usize = 8;

/// Central half of a GOE spectrum, unfolded by the semicircle law.
pub fn sample_goe_levels(spec: &EnsembleSpec, seed: RandomSeed) -> Result<LevelSequence> {
    let dim = spec.matrix_dim;
    if dim < MIN_GOE_DIM {
        return Err(Error::size(format!(
            "GOE matrix dimension must be at least {MIN_GOE_DIM}, got {dim}"
        )));
    }
    let h = goe_matrix(dim, seed);
    let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    let lo = dim / 4;
    let hi = dim - dim / 4;
    let levels = eig[lo..hi].iter().map(|&e| semicircle_count(e, dim)).collect();
    LevelSequence::new(levels, StatKind::Goe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = EnsembleSpec::gamma(1.7, 1000);
        let a = sample_gamma_levels(&spec, RandomSeed::new(7, 3)).unwrap();
        let b = sample_gamma_levels(&spec, RandomSeed::new(7, 3)).unwrap();
        assert_eq!(a, b);
        let c = sample_gamma_levels(&spec, RandomSeed::new(7, 4)).unwrap();
        assert_ne!(a.levels(), c.levels());
    }

    #[test]
    fn eta_below_one_is_rejected() {
        let err = sample_gamma_levels(&EnsembleSpec::gamma(0.5, 100), RandomSeed::new(1, 0));
        assert!(matches!(err, Err(Error::Domain(_))));
        let err = sample_gamma_levels(&EnsembleSpec::poisson(1), RandomSeed::new(1, 0));
        assert!(matches!(err, Err(Error::Size(_))));
    }

    #[test]
    fn mean_spacing_is_near_one() {
        for (i, eta) in [1.0, 1.5, 2.0, 3.3].into_iter().enumerate() {
            let n = 20_000;
            let seq = sample_gamma_levels(&EnsembleSpec::gamma(eta, n), RandomSeed::new(11, i as u64)).unwrap();
            assert!((seq.mean_spacing() - 1.0).abs() < 5.0 / (n as f64).sqrt());
            let direct = (seq.levels()[n - 1] - seq.levels()[0]) / (n - 1) as f64;
            assert!((direct - seq.mean_spacing()).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn semi_poisson_variance_is_one_half() {
        let seq = sample_gamma_levels(&EnsembleSpec::semi_poisson(1_000_001), RandomSeed::new(3, 0)).unwrap();
        let s = seq.spacings();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        // sd of the sample variance for Gamma(2, 2) at 1e6 draws is ~1e-3
        assert!((var - 0.5).abs() < 5e-3, "variance {var}");
    }

    #[test]
    fn daisy_length_and_kind() {
        let seq = sample_gamma_levels(&EnsembleSpec::poisson(1001), RandomSeed::new(5, 0)).unwrap();
        let thin = daisy_thin(&seq, 2).unwrap();
        assert_eq!(thin.len(), 1001 / 2);
        assert_eq!(thin.kind(), StatKind::SemiPoisson);
        assert!((thin.mean_spacing() - 1.0).abs() < 1e-12);
        let semi = sample_gamma_levels(&EnsembleSpec::semi_poisson(100), RandomSeed::new(5, 0)).unwrap();
        assert!(matches!(daisy_thin(&semi, 2), Err(Error::Kind(_))));
        assert!(matches!(daisy_thin(&seq, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn goe_guards_and_unfolding() {
        assert!(matches!(sample_goe_levels(&EnsembleSpec::goe(4), RandomSeed::new(1, 0)), Err(Error::Size(_))));
        let seq = sample_goe_levels(&EnsembleSpec::goe(400), RandomSeed::new(1, 0)).unwrap();
        assert_eq!(seq.len(), 200);
        assert!((seq.mean_spacing() - 1.0).abs() < 0.1, "{}", seq.mean_spacing());
    }

    #[test]
    fn semicircle_count_endpoints() {
        assert_eq!(semicircle_count(-1e9, 100), 0.0);
        assert!((semicircle_count(1e9, 100) - 100.0).abs() < 1e-12);
        assert!((semicircle_count(0.0, 100) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ() {
        let s = RandomSeed::new(1, 0);
        assert_ne!(s.derive(0), s.derive(1));
        assert_eq!(s.derive(5), s.derive(5));
    }
}
