use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::WaveVector;

/// Largest probability a packet may leave outside the grid at construction.
pub const MAX_TAIL_MASS: f64 = 1e-8;

/// Amplitudes `ψ_m` on an `L x L` grid of sites `m ∈ [-(L-1)/2, (L-1)/2]²`.
///
/// Storage is row-major with `m1` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacketGrid {
    side: usize,
    amplitudes: Vec<Complex64>,
}

impl WavePacketGrid {
    pub fn zeros(side: usize) -> Result<Self> {
        check_side(side)?;
        Ok(WavePacketGrid {
            side,
            amplitudes: vec![Complex64::new(0.0, 0.0); side * side],
        })
    }

    pub fn from_amplitudes(side: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_side(side)?;
        if amplitudes.len() != side * side {
            return Err(Error::param(
                "amplitudes",
                format!("expected {} values, got {}", side * side, amplitudes.len()),
            ));
        }
        Ok(WavePacketGrid { side, amplitudes })
    }

    /// Unit amplitude on a single site.
    pub fn delta(side: usize, m: (i32, i32)) -> Result<Self> {
        let mut g = Self::zeros(side)?;
        let idx = g
            .index(m)
            .ok_or_else(|| Error::param("m", format!("{m:?} lies outside the grid")))?;
        g.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(g)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn half(&self) -> i32 {
        (self.side / 2) as i32
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn index(&self, (m1, m2): (i32, i32)) -> Option<usize> {
        let h = self.half();
        if m1.abs() > h || m2.abs() > h {
            return None;
        }
        Some((m1 + h) as usize * self.side + (m2 + h) as usize)
    }

    pub fn site(&self, index: usize) -> (i32, i32) {
        let h = self.half();
        (
            (index / self.side) as i32 - h,
            (index % self.side) as i32 - h,
        )
    }

    pub fn get(&self, m: (i32, i32)) -> Complex64 {
        self.index(m)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &WavePacketGrid) -> Complex64 {
        assert_eq!(self.side, other.side, "grids of different size");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `Σ |ψ_m|²`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    /// `Σ m |ψ_m|² / Σ |ψ_m|²`.
    pub fn center_of_mass(&self) -> Result<[f64; 2]> {
        let mut acc = [0.0; 3];
        let h = self.half();
        for (i1, row) in self.amplitudes.chunks_exact(self.side).enumerate() {
            let m1 = f64::from(i1 as i32 - h);
            let mut row_mass = 0.0;
            let mut row_m2 = 0.0;
            for (i2, a) in row.iter().enumerate() {
                let p = a.norm_sqr();
                row_mass += p;
                row_m2 += f64::from(i2 as i32 - h) * p;
            }
            acc[0] += row_mass;
            acc[1] += m1 * row_mass;
            acc[2] += row_m2;
        }
        if !(acc[0] > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok([acc[1] / acc[0], acc[2] / acc[0]])
    }

    /// Probability on sites within `band` sites of any edge.
    pub fn boundary_mass(&self, band: usize) -> f64 {
        let l = self.side;
        let band = band.min(l);
        let mut mass = 0.0;
        for (i1, row) in self.amplitudes.chunks_exact(l).enumerate() {
            if i1 < band || i1 + band >= l {
                mass += row.iter().map(Complex64::norm_sqr).sum::<f64>();
            } else {
                mass += row[..band].iter().map(Complex64::norm_sqr).sum::<f64>();
                mass += row[l - band..].iter().map(Complex64::norm_sqr).sum::<f64>();
            }
        }
        mass
    }
}

fn check_side(side: usize) -> Result<()> {
    if side.is_multiple_of(2) || side < 3 {
        return Err(Error::param(
            "L",
            format!("grid side must be odd and >= 3, got {side}"),
        ));
    }
    Ok(())
}

/// Probability an infinite-lattice packet `exp(-(m1²+m2²)/σ²)` places outside the grid.
pub fn gaussian_tail_mass(side: usize, sigma: f64) -> f64 {
    let h = (side / 2) as i64;
    let w = |m: i64| (-2.0 * (m * m) as f64 / (sigma * sigma)).exp();
    let inside: f64 = w(0) + 2.0 * (1..=h).map(w).sum::<f64>();
    let mut outside = 0.0;
    let mut m = h + 1;
    loop {
        let term = w(m);
        outside += 2.0 * term;
        if term < 1e-300 || term < 1e-20 * outside {
            break;
        }
        m += 1;
    }
    let tail_1d = outside / (inside + outside);
    2.0 * tail_1d - tail_1d * tail_1d
}

/// `ψ_m = A exp(-(m1² + m2²)/σ² + i k0·m)`, normalized on the grid.
pub fn gaussian_packet(side: usize, sigma: f64, k0: WaveVector) -> Result<WavePacketGrid> {
    check_side(side)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let tail = gaussian_tail_mass(side, sigma);
    if tail > MAX_TAIL_MASS {
        return Err(Error::TailMass {
            tail,
            side,
            limit: MAX_TAIL_MASS,
        });
    }
    let h = (side / 2) as i32;
    let mut amplitudes = Vec::with_capacity(side * side);
    for m1 in -h..=h {
        for m2 in -h..=h {
            let (x, y) = (f64::from(m1), f64::from(m2));
            let envelope = (-(x * x + y * y) / (sigma * sigma)).exp();
            amplitudes.push(Complex64::from_polar(envelope, k0.k1 * x + k0.k2 * y));
        }
    }
    let mut grid = WavePacketGrid { side, amplitudes };
    grid.normalize()?;
    Ok(grid)
}
