//! Rectangular flat-cavity spectra and their zero-range perturbations.
//!
//! Below the TM₀ cut-off a flat resonator is equivalent to a two-dimensional
//! Dirichlet billiard with modes `ν_mn = (c/2) sqrt((m/L1)² + (n/L2)²)`.
//! Point scatterers (wire antennas) are modelled as zero-range perturbations
//! whose perturbed levels solve a regularised secular equation built from the
//! unperturbed modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensembles::{LevelSequence, StatKind};
use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Length L1 in metres.
    pub length_l1: f64,
    /// Width L2 in metres.
    pub width_l2: f64,
    /// Height d in metres; fixes the TM₀ cut-off.
    pub height_d: f64,
    /// m/s
    pub light_speed: f64,
}

impl CavityGeometry {
    pub fn new(length_l1: f64, width_l2: f64, height_d: f64) -> Result<Self> {
        let g = Self { length_l1, width_l2, height_d, light_speed: SPEED_OF_LIGHT };
        g.validate()?;
        Ok(g)
    }

    /// Brass cavity of width 20.2 cm and height 8 mm with the given length.
    pub fn brass_cavity(length_l1: f64) -> Result<Self> {
        Self::new(length_l1, 0.202, 0.008)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.length_l1, self.width_l2, self.height_d, self.light_speed];
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::domain(format!("cavity dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.length_l1 * self.width_l2
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.length_l1 + self.width_l2)
    }

    /// Speed of light in m·GHz.
    fn c_ghz(&self) -> f64 {
        self.light_speed * 1e-9
    }

    /// TM₀ cut-off c/(2d) in GHz.
    pub fn cutoff_ghz(&self) -> f64 {
        self.c_ghz() / (2.0 * self.height_d)
    }

    /// Frequency (GHz) of mode (m, n).
    pub fn mode_frequency(&self, m: u32, n: u32) -> f64 {
        let a = m as f64 / self.length_l1;
        let b = n as f64 / self.width_l2;
        0.5 * self.c_ghz() * (a * a + b * b).sqrt()
    }

    fn wavenumber_sq(&self, nu_ghz: f64) -> f64 {
        let k = 2.0 * PI * nu_ghz / self.c_ghz();
        k * k
    }

    fn frequency_of(&self, wavenumber_sq: f64) -> f64 {
        wavenumber_sq.sqrt() * self.c_ghz() / (2.0 * PI)
    }
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    m: u32,
    n: u32,
    nu: f64,
}

/// Every Dirichlet mode with frequency ≤ `nu_max`, sorted by frequency.
fn enumerate_modes(geom: &CavityGeometry, nu_max: f64) -> Vec<Mode> {
    let mut modes = Vec::new();
    let mut m = 1;
    while geom.mode_frequency(m, 1) <= nu_max {
        let mut n = 1;
        loop {
            let nu = geom.mode_frequency(m, n);
            if nu > nu_max {
                break;
            }
            modes.push(Mode { m, n, nu });
            n += 1;
        }
        m += 1;
    }
    modes.sort_by(|a, b| a.nu.total_cmp(&b.nu).then(a.m.cmp(&b.m)));
    modes
}

/// Sorted TM₀ mode frequencies (GHz) up to `nu_max`; degeneracies are kept.
pub fn rectangle_eigenfrequencies(geom: &CavityGeometry, nu_max: f64) -> Result<LevelSequence> {
    geom.validate()?;
    if nu_max > geom.cutoff_ghz() {
        return Err(Error::domain(format!(
            "nu_max = {nu_max} GHz exceeds the TM0 cut-off {:.4} GHz",
            geom.cutoff_ghz()
        )));
    }
    let levels: Vec<f64> = enumerate_modes(geom, nu_max).into_iter().map(|m| m.nu).collect();
    LevelSequence::new(levels, StatKind::Billiard)
}

/// Smooth counting function N(ν) = a2·ν² + a1·ν + a0 with ν in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylLaw {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl WeylLaw {
    /// Dirichlet rectangle: area term Aπ/c², perimeter term −P/(2c), corner term 1/4.
    pub fn for_geometry(geom: &CavityGeometry) -> Self {
        let c = geom.c_ghz();
        WeylLaw { a2: geom.area() * PI / (c * c), a1: -geom.perimeter() / (2.0 * c), a0: 0.25 }
    }

    pub fn eval(&self, nu: f64) -> f64 {
        (self.a2 * nu + self.a1) * nu + self.a0
    }

    pub fn derivative(&self, nu: f64) -> f64 {
        2.0 * self.a2 * nu + self.a1
    }

    /// Strictly increasing on [lo, hi]?
    pub fn is_monotone_on(&self, lo: f64, hi: f64) -> bool {
        self.derivative(lo) > 0.0 && self.derivative(hi) > 0.0
    }
}

/// Smooth mode count of the cavity at `nu` GHz.
pub fn weyl_counting(geom: &CavityGeometry, nu: f64) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(Error::domain(format!("frequency must be non-negative, got {nu}")));
    }
    Ok(WeylLaw::for_geometry(geom).eval(nu))
}

/// Zero-range scatterers inside the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererSet {
    /// (x, y) in metres, measured from a corner along L1 and L2.
    pub positions: Vec<(f64, f64)>,
    /// Regularised coupling per scatterer; 0 switches a scatterer off.
    pub strength: Vec<f64>,
}

impl ScattererSet {
    pub fn new(positions: Vec<(f64, f64)>, strength: Vec<f64>) -> Self {
        Self { positions, strength }
    }

    fn validate(&self, geom: &CavityGeometry) -> Result<()> {
        if self.positions.is_empty() || self.positions.len() > 2 {
            return Err(Error::size(format!(
                "one or two scatterers are supported, got {}",
                self.positions.len()
            )));
        }
        if self.strength.len() != self.positions.len() {
            return Err(Error::size("one strength per scatterer is required"));
        }
        if self.strength.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("scatterer strengths must be finite"));
        }
        for &(x, y) in &self.positions {
            if !(x > 0.0 && x < geom.length_l1 && y > 0.0 && y < geom.width_l2) {
                return Err(Error::domain(format!("scatterer ({x}, {y}) is not strictly inside the cavity")));
            }
        }
        if self.positions.len() == 2 && self.positions[0] == self.positions[1] {
            return Err(Error::domain("duplicate scatterer positions"));
        }
        Ok(())
    }
}

/// Perturbed spectrum in a band.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedSpectrum {
    pub levels: LevelSequence,
    /// Set when no mode in the band couples to any scatterer (nodal lines),
    /// in which case `levels` is the unperturbed spectrum.
    pub decoupled: bool,
    /// Number of levels that moved.
    pub shifted: usize,
}

/// Modes beyond this multiple of the band edge are dropped from the mode sum.
const MODE_SUM_FACTOR: f64 = 4.0;
/// Poles closer than this (relative) are treated as one degenerate level.
const DEGENERACY_TOL: f64 = 1e-12;
/// Residues below this fraction of the mean |ψ|² count as nodal.
const NODAL_TOL: f64 = 1e-18;

struct Pole {
    energy: f64,
    multiplicity: usize,
    /// Residue matrix Σ u uᵀ over the degenerate modes, u_i = ψ(r_i).
    residue: [[f64; 2]; 2],
    rank: usize,
}

struct Secular {
    poles: Vec<Pole>,
    inv_strength: [f64; 2],
    dim: usize,
    e_ref: f64,
}

impl Secular {
    /// M(E) = diag(1/strength) − G_reg(E), with
    /// G_reg(E) = Σ_n u_n u_nᵀ [1/(E − E_n) + E_n/(E_n² + E_ref²)].
    fn matrix(&self, e: f64) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for p in &self.poles {
            let w = 1.0 / (e - p.energy) + p.energy / (p.energy * p.energy + self.e_ref * self.e_ref);
            for (gi, ri) in g.iter_mut().zip(&p.residue) {
                for (gij, rij) in gi.iter_mut().zip(ri) {
                    *gij += w * rij;
                }
            }
        }
        let mut m = [[0.0; 2]; 2];
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[i][j] = -g[i][j];
            }
            m[i][i] += self.inv_strength[i];
        }
        m
    }

    /// Ascending eigenvalues of M(E); each is increasing in E between poles.
    fn branches(&self, e: f64) -> [f64; 2] {
        let m = self.matrix(e);
        if self.dim == 1 {
            return [m[0][0], f64::INFINITY];
        }
        let mean = 0.5 * (m[0][0] + m[1][1]);
        let half = 0.5 * (m[0][0] - m[1][1]);
        let r = half.hypot(m[0][1]);
        [mean - r, mean + r]
    }
}

/// Levels of the cavity with one or two point scatterers, inside `band` (GHz).
///
/// Roots of det M(E) are located branch by branch: the eigenvalues of M(E)
/// increase monotonically between consecutive poles, so each branch has at
/// most one root per interval and is bracketed by its sign at the two ends.
pub fn perturb_point_scatterers(
    geom: &CavityGeometry,
    scatterers: &ScattererSet,
    band: (f64, f64),
) -> Result<PerturbedSpectrum> {
    geom.validate()?;
    scatterers.validate(geom)?;
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo && hi < geom.cutoff_ghz()) {
        return Err(Error::domain(format!(
            "band ({lo}, {hi}) GHz must lie inside (0, {:.4}) GHz",
            geom.cutoff_ghz()
        )));
    }

    let modes = enumerate_modes(geom, MODE_SUM_FACTOR * hi);
    let unperturbed: Vec<f64> = modes.iter().filter(|m| m.nu >= lo && m.nu <= hi).map(|m| m.nu).collect();
    if unperturbed.len() < 2 {
        return Err(Error::size(format!("band ({lo}, {hi}) GHz holds fewer than two modes")));
    }

    let active: Vec<((f64, f64), f64)> = scatterers
        .positions
        .iter()
        .copied()
        .zip(scatterers.strength.iter().copied())
        .filter(|&(_, strength)| strength != 0.0)
        .collect();
    let dim = active.len();
    let norm = 2.0 / geom.area().sqrt();
    let amplitude = |mode: &Mode, (x, y): (f64, f64)| {
        norm * (mode.m as f64 * PI * x / geom.length_l1).sin() * (mode.n as f64 * PI * y / geom.width_l2).sin()
    };
    let nodal_floor = NODAL_TOL / geom.area();

    let mut poles: Vec<Pole> = Vec::new();
    for mode in &modes {
        let energy = geom.wavenumber_sq(mode.nu);
        let mut u = [0.0; 2];
        for (ui, &(pos, _)) in u.iter_mut().zip(&active) {
            *ui = amplitude(mode, pos);
        }
        let outer = [[u[0] * u[0], u[0] * u[1]], [u[1] * u[0], u[1] * u[1]]];
        match poles.last_mut() {
            Some(p) if (energy - p.energy).abs() <= DEGENERACY_TOL * energy => {
                p.multiplicity += 1;
                for i in 0..2 {
                    for j in 0..2 {
                        p.residue[i][j] += outer[i][j];
                    }
                }
            }
            _ => poles.push(Pole { energy, multiplicity: 1, residue: outer, rank: 0 }),
        }
    }
    for p in &mut poles {
        p.rank = residue_rank(&p.residue, dim, nodal_floor);
    }

    let mut inv_strength = [0.0; 2];
    for (inv, &(_, strength)) in inv_strength.iter_mut().zip(&active) {
        *inv = 1.0 / strength;
    }
    let e_lo = geom.wavenumber_sq(lo);
    let e_hi = geom.wavenumber_sq(hi);
    let secular = Secular { poles, inv_strength, dim, e_ref: 0.5 * (e_lo + e_hi) };

    let in_band = |e: f64| e >= e_lo && e <= e_hi;
    let mut energies: Vec<f64> = Vec::with_capacity(unperturbed.len());
    let mut shifted = 0usize;

    // Levels that stay put: the part of each degenerate space not seen by the scatterers.
    for p in &secular.poles {
        if in_band(p.energy) {
            for _ in 0..(p.multiplicity - p.rank) {
                energies.push(p.energy);
            }
        }
    }

    let coupled: Vec<&Pole> = secular.poles.iter().filter(|p| p.rank > 0).collect();
    if !coupled.iter().any(|p| in_band(p.energy)) {
        let levels = LevelSequence::new(unperturbed, StatKind::Billiard)?;
        return Ok(PerturbedSpectrum { levels, decoupled: true, shifted: 0 });
    }

    for pair in coupled.windows(2) {
        let (a, b) = (pair[0].energy, pair[1].energy);
        if b < e_lo || a > e_hi {
            continue;
        }
        let offset = 1e-13 * b;
        let (left, right) = (a + offset, b - offset);
        if right <= left {
            continue;
        }
        let at_left = secular.branches(left);
        let at_right = secular.branches(right);
        for branch in 0..dim {
            if at_left[branch] < 0.0 && at_right[branch] > 0.0 {
                let root = bisect_branch(&secular, branch, left, right)?;
                if in_band(root) {
                    energies.push(root);
                    shifted += 1;
                }
            }
        }
    }

    energies.sort_by(|x, y| x.total_cmp(y));
    let levels: Vec<f64> = energies.into_iter().map(|e| geom.frequency_of(e)).collect();
    let levels = LevelSequence::new(levels, StatKind::Billiard)?;
    Ok(PerturbedSpectrum { levels, decoupled: false, shifted })
}

fn residue_rank(r: &[[f64; 2]; 2], dim: usize, floor: f64) -> usize {
    if dim == 1 {
        return usize::from(r[0][0] > floor);
    }
    let trace = r[0][0] + r[1][1];
    if trace <= floor {
        return 0;
    }
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    if det > 1e-10 * trace * trace {
        2
    } else {
        1
    }
}

fn bisect_branch(secular: &Secular, branch: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = secular.branches(mid)[branch];
        if !v.is_finite() {
            return Err(Error::Numerical {
                message: format!("secular function not finite in bracket [{lo}, {hi}]"),
                achieved: hi - lo,
            });
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Numerical {
        message: format!("bisection did not converge in bracket [{lo}, {hi}]"),
        achieved: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_mode_and_cutoff() {
        let g = CavityGeometry::brass_cavity(0.365).unwrap();
        let seq = rectangle_eigenfrequencies(&g, 13.5).unwrap();
        let c = SPEED_OF_LIGHT * 1e-9;
        let expected = 0.5 * c * ((1.0 / 0.365f64).powi(2) + (1.0 / 0.202f64).powi(2)).sqrt();
        assert!((seq.levels()[0] - expected).abs() < 1e-12);
        assert!((seq.levels()[0] - 0.848).abs() < 5e-4);
        assert!((g.cutoff_ghz() - 18.7).abs() < 0.05);
        assert!(matches!(rectangle_eigenfrequencies(&g, 19.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mode_count_brute_force() {
        let g = CavityGeometry::brass_cavity(0.365).unwrap();
        let seq = rectangle_eigenfrequencies(&g, 13.5).unwrap();
        // independent enumeration over a generous square of (m, n)
        let c = SPEED_OF_LIGHT * 1e-9;
        let mut count = 0;
        for m in 1..200u32 {
            for n in 1..200u32 {
                let nu = 0.5 * c * ((m as f64 / 0.365).powi(2) + (n as f64 / 0.202).powi(2)).sqrt();
                if nu <= 13.5 {
                    count += 1;
                }
            }
        }
        assert_eq!(seq.len(), count);
        let area_term = 0.365 * 0.202 * PI * 13.5f64.powi(2) / (c * c);
        assert!((area_term - 470.0).abs() < 1.0, "{area_term}");
        let weyl = weyl_counting(&g, 13.5).unwrap();
        assert!((seq.len() as f64 - weyl).abs() < 3.0 * weyl.sqrt());
    }

    #[test]
    fn square_is_symmetric() {
        let g = CavityGeometry::new(0.3, 0.3, 0.008).unwrap();
        for m in 1..20 {
            for n in 1..20 {
                assert_eq!(g.mode_frequency(m, n), g.mode_frequency(n, m));
            }
        }
        let seq = rectangle_eigenfrequencies(&g, 10.0).unwrap();
        assert!(seq.levels().windows(2).any(|w| w[0] == w[1]));
    }

    #[test]
    fn weyl_coefficients() {
        let g = CavityGeometry::brass_cavity(0.365).unwrap();
        let law = WeylLaw::for_geometry(&g);
        assert_eq!(weyl_counting(&g, 0.0).unwrap(), law.a0);
        let c = SPEED_OF_LIGHT * 1e-9;
        assert!((g.area() - 0.07373).abs() < 1e-9);
        assert!((law.a2 - 0.07373 * PI / (c * c)).abs() < 1e-12);
        assert!(weyl_counting(&g, -1.0).is_err());
        // residual bounded by O(sqrt N) across 1–18 GHz
        let seq = rectangle_eigenfrequencies(&g, 18.0).unwrap();
        for (i, &nu) in seq.levels().iter().enumerate() {
            if nu < 1.0 {
                continue;
            }
            let resid = (i as f64 + 0.5) - law.eval(nu);
            assert!(resid.abs() < 3.0 * law.eval(nu).sqrt() + 3.0, "nu={nu} resid={resid}");
        }
    }

    #[test]
    fn scatterer_validation() {
        let g = CavityGeometry::brass_cavity(0.4).unwrap();
        let outside = ScattererSet::new(vec![(0.5, 0.1)], vec![1.0]);
        assert!(perturb_point_scatterers(&g, &outside, (8.0, 9.0)).is_err());
        let dup = ScattererSet::new(vec![(0.1, 0.1), (0.1, 0.1)], vec![1.0, 1.0]);
        assert!(perturb_point_scatterers(&g, &dup, (8.0, 9.0)).is_err());
        let three = ScattererSet::new(vec![(0.1, 0.1), (0.2, 0.1), (0.3, 0.1)], vec![1.0; 3]);
        assert!(matches!(perturb_point_scatterers(&g, &three, (8.0, 9.0)), Err(Error::Size(_))));
        let ok = ScattererSet::new(vec![(0.1, 0.1)], vec![1.0]);
        assert!(perturb_point_scatterers(&g, &ok, (8.0, 20.0)).is_err());
    }

    #[test]
    fn nodal_scatterer_is_decoupled() {
        // at the centre every mode with an even index vanishes
        let g = CavityGeometry::new(0.4, 0.2, 0.008).unwrap();
        let s = ScattererSet::new(vec![(0.2, 0.1)], vec![5.0]);
        let even = |m: &Mode| m.m % 2 == 0 || m.n % 2 == 0;
        let modes = enumerate_modes(&g, 10.0);
        let pair = modes
            .windows(2)
            .find(|w| even(&w[0]) && even(&w[1]) && w[0].nu < w[1].nu)
            .expect("two consecutive even-index modes");
        let band = (pair[0].nu - 1e-9, pair[1].nu + 1e-9);
        let out = perturb_point_scatterers(&g, &s, band).unwrap();
        assert!(out.decoupled);
        assert_eq!(out.shifted, 0);
        // (4,1) and (2,2) are degenerate here, so the band may hold more than two modes
        let expected: Vec<f64> = modes.iter().filter(|m| m.nu >= band.0 && m.nu <= band.1).map(|m| m.nu).collect();
        assert!(expected.len() >= 2);
        assert_eq!(out.levels.levels(), &expected[..]);
    }
}
