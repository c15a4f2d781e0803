//! Lowest Bloch band of the three-beam triangular optical lattice and the hoppings that
//! reproduce it.
//!
//! The potential is `V(r) = (V0/9) |Σ_j exp(i k_j·r)|²` for three beams 120° apart with
//! `|k_j| = κ = 2π/λ`. Its minima equal `V0` and sit on a triangular lattice of spacing
//! `2λ/3`. Wave vectors are written in reduced coordinates `k = θ1 b1 + θ2 b2` with the
//! reciprocal vectors 60° apart and `|b_i| = √3 κ`; the direct primitive vectors are then
//! 120° apart, which makes `(1,1)` a nearest-neighbour offset.
//!
//! Energies are in recoil units `E_r = κ²/2m`, so the kinetic energy of a plane wave with
//! wave vector `q` is `|q|²/κ²`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{HoppingSet, Offset, Shell};

/// Reciprocal offsets of the potential's first Fourier shell.
pub const POTENTIAL_SHELL: [(i32, i32); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

/// `|b_i|²/κ²` for the triangular lattice.
const RECIPROCAL_NORM_SQ: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPotential {
    v0: f64,
}

impl OpticalPotential {
    /// Red-detuned lattice with potential minima `v0 ≤ 0` (recoil units).
    pub fn new(v0: f64) -> Result<Self> {
        if !v0.is_finite() || v0 > 0.0 {
            return Err(Error::param(
                "V0",
                format!("must be finite and <= 0, got {v0}"),
            ));
        }
        Ok(OpticalPotential { v0 })
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Fourier coefficients `V_G` keyed by reciprocal integer offset.
    pub fn fourier_components(&self) -> BTreeMap<(i32, i32), f64> {
        let mut map = BTreeMap::new();
        map.insert((0, 0), self.v0 / 3.0);
        for g in POTENTIAL_SHELL {
            map.insert(g, self.v0 / 9.0);
        }
        map
    }

    /// Evaluate `V` at the real-space point with fractional coordinates `x` along the
    /// direct primitive vectors, from the Fourier coefficients.
    pub fn value_at(&self, x: [f64; 2]) -> f64 {
        self.fourier_components()
            .iter()
            .map(|(&(g1, g2), &c)| c * (TAU * (f64::from(g1) * x[0] + f64::from(g2) * x[1])).cos())
            .sum()
    }
}

/// Plane waves `(n1, n2)` with `|n1|, |n2| ≤ cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    cutoff: usize,
    waves: Vec<(i32, i32)>,
    index: BTreeMap<(i32, i32), usize>,
}

impl PlaneWaveBasis {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::param("N_c", "plane-wave cutoff must be positive"));
        }
        let c = cutoff as i32;
        let waves: Vec<(i32, i32)> = (-c..=c)
            .flat_map(|a| (-c..=c).map(move |b| (a, b)))
            .collect();
        let index = waves.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        Ok(PlaneWaveBasis {
            cutoff,
            waves,
            index,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.waves.len()
    }

    pub fn waves(&self) -> &[(i32, i32)] {
        &self.waves
    }
}

/// Kinetic energy `|x1 b1 + x2 b2|²/κ²` with `b1·b2 = |b|²/2`.
fn kinetic(x1: f64, x2: f64) -> f64 {
    RECIPROCAL_NORM_SQ * (x1 * x1 + x2 * x2 + x1 * x2)
}

/// Real-symmetric plane-wave Hamiltonian at reduced wave vector `theta ∈ [0,1)²`.
pub fn bloch_matrix(
    potential: &OpticalPotential,
    basis: &PlaneWaveBasis,
    theta: [f64; 2],
) -> Result<DMatrix<f64>> {
    if !theta.iter().all(|t| (0.0..1.0).contains(t)) {
        return Err(Error::param(
            "theta",
            format!("reduced wave vector {theta:?} outside [0,1)"),
        ));
    }
    let d = basis.dim();
    let components = potential.fourier_components();
    let constant = components[&(0, 0)];
    // A truncated basis is not periodic in θ; the centred representative keeps E(-θ) = E(θ).
    let centred = theta.map(|t| if t >= 0.5 { t - 1.0 } else { t });
    let mut h = DMatrix::zeros(d, d);
    for (i, &(n1, n2)) in basis.waves.iter().enumerate() {
        h[(i, i)] = kinetic(centred[0] + f64::from(n1), centred[1] + f64::from(n2)) + constant;
        for g in POTENTIAL_SHELL {
            if let Some(&j) = basis.index.get(&(n1 + g.0, n2 + g.1)) {
                h[(i, j)] = components[&g];
            }
        }
    }
    Ok(h)
}

/// Lowest-band energies on an `M x M` grid of reduced wave vectors `θ = (j1, j2)/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSample {
    size: usize,
    values: Vec<f64>,
}

impl BandSample {
    pub fn from_fn(size: usize, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(size * size);
        for j1 in 0..size {
            for j2 in 0..size {
                values.push(f([j1 as f64 / size as f64, j2 as f64 / size as f64]));
            }
        }
        BandSample { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, j1: usize, j2: usize) -> f64 {
        self.values[(j1 % self.size) * self.size + j2 % self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `theta1 theta2 E` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta1,theta2,E\n");
        for j1 in 0..self.size {
            for j2 in 0..self.size {
                out.push_str(&format!(
                    "{},{},{:e}\n",
                    j1 as f64 / self.size as f64,
                    j2 as f64 / self.size as f64,
                    self.get(j1, j2)
                ));
            }
        }
        out
    }
}

/// Smallest eigenvalue of the Bloch matrix at every grid point.
pub fn lowest_band(
    potential: &OpticalPotential,
    basis: &PlaneWaveBasis,
    size: usize,
) -> Result<BandSample> {
    if size < 8 {
        return Err(Error::param(
            "M",
            format!("band grid must be >= 8, got {size}"),
        ));
    }
    if basis.cutoff() < 3 {
        return Err(Error::param(
            "N_c",
            format!("plane-wave cutoff must be >= 3, got {}", basis.cutoff()),
        ));
    }
    let mut failure = None;
    let band = BandSample::from_fn(size, |theta| {
        let h = bloch_matrix(potential, basis, theta).expect("grid points lie in [0,1)");
        let e = h.symmetric_eigenvalues().min();
        if !e.is_finite() && failure.is_none() {
            failure = Some(theta);
        }
        e
    });
    if let Some(theta) = failure {
        return Err(Error::param(
            "eigensolver",
            format!("non-finite lowest eigenvalue at theta = {theta:?}"),
        ));
    }
    Ok(band)
}

/// Result of inverting a sampled band into hoppings.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub hoppings: HoppingSet,
    /// `J_0 = -<E>`; the band's mean enters only as a global phase.
    pub j0: f64,
    /// Largest `|Im|` of the discrete transform over all requested offsets.
    pub max_imag_residue: f64,
}

/// Largest imaginary residue accepted by [`extract_hoppings`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// `J_m = -(1/M²) Σ_θ E(θ) exp(-2πi θ·m)` restricted to the offsets of `shells`.
pub fn extract_hoppings(band: &BandSample, shells: &[Shell]) -> Result<Extraction> {
    let size = band.size();
    let mut hoppings = HoppingSet::new();
    let mut max_imag: f64 = 0.0;
    for shell in shells {
        for &m in &shell.offsets {
            if 2 * m.m1.unsigned_abs().max(m.m2.unsigned_abs()) as usize >= size {
                return Err(Error::Aliasing {
                    offset: m,
                    grid: size,
                });
            }
            if !m.is_canonical() && shell.offsets.contains(&-m) {
                continue;
            }
            let (re, im) = fourier_coefficient(band, m);
            if im.abs() > IMAG_RESIDUE_TOL {
                return Err(Error::NonRealTransform {
                    offset: m,
                    residue: im.abs(),
                });
            }
            max_imag = max_imag.max(im.abs());
            hoppings.insert_symmetric(m, -re)?;
        }
    }
    Ok(Extraction {
        hoppings,
        j0: -band.mean(),
        max_imag_residue: max_imag,
    })
}

/// `(1/M²) Σ_θ E(θ) exp(-2πi θ·m)` with phases reduced on integers.
fn fourier_coefficient(band: &BandSample, m: Offset) -> (f64, f64) {
    let size = band.size() as i64;
    let table: Vec<(f64, f64)> = (0..size)
        .map(|p| {
            let a = TAU * p as f64 / size as f64;
            (a.cos(), a.sin())
        })
        .collect();
    let (mut re, mut im) = (0.0, 0.0);
    for j1 in 0..size {
        for j2 in 0..size {
            let p = (j1 * i64::from(m.m1) + j2 * i64::from(m.m2)).rem_euclid(size);
            let (c, s) = table[p as usize];
            let e = band.get(j1 as usize, j2 as usize);
            re += e * c;
            im -= e * s;
        }
    }
    let n = (size * size) as f64;
    (re / n, im / n)
}

/// Full pipeline: band of the lattice at `v0`, inverted onto `shells`.
pub fn lattice_hoppings(
    v0: f64,
    cutoff: usize,
    size: usize,
    shells: &[Shell],
) -> Result<(BandSample, Extraction)> {
    let potential = OpticalPotential::new(v0)?;
    let basis = PlaneWaveBasis::new(cutoff)?;
    let band = lowest_band(&potential, &basis, size)?;
    let extraction = extract_hoppings(&band, shells)?;
    Ok((band, extraction))
}

/// Default plane-wave cutoff.
pub const DEFAULT_CUTOFF: usize = 7;
/// Default band grid size.
pub const DEFAULT_GRID: usize = 32;
