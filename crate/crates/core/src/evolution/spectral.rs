//! Acceleration-gauge propagator.
//!
//! Every plane wave `k` of the initial state follows `k + F t` and picks up the dynamical
//! phase `Φ(k, t) = ∫₀ᵗ E(k + F s) ds`:
//!
//! ```text
//! ψ_m(t) = e^{i F·m t} Σ_k f(k) e^{-i Φ(k, t)} e^{i k·m}
//! ```
//!
//! In this gauge the torus is a faithful stand-in for the infinite lattice as long as the
//! packet stays away from the edges. `Φ` is a finite sum of closed-form harmonic integrals,
//! so a single transform pair reaches any `t`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::WavePacketGrid;
use crate::error::{Error, Result};
use crate::lattice::{ForceSpec, HoppingSet, Offset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub boundary_band: usize,
    /// Largest edge mass tolerated in the initial and propagated state.
    pub boundary_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            boundary_band: super::rk4::DEFAULT_BOUNDARY_BAND,
            boundary_tol: 1e-8,
        }
    }
}

pub struct SpectralPropagator {
    side: usize,
    spectrum: Vec<Complex64>,
    pairs: Vec<(Offset, f64)>,
    force: ForceSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    options: SpectralOptions,
}

impl SpectralPropagator {
    pub fn new(
        psi0: &WavePacketGrid,
        hoppings: &HoppingSet,
        force: &ForceSpec,
        options: SpectralOptions,
    ) -> Result<Self> {
        let mass = psi0.boundary_mass(options.boundary_band);
        if mass > options.boundary_tol {
            return Err(Error::BoundaryMass {
                mass,
                limit: options.boundary_tol,
            });
        }
        let side = psi0.side();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(side);
        let inverse = planner.plan_fft_inverse(side);
        let h = side / 2;
        // ifftshift: grid index i holds m = i - h, stored at position m mod L
        let mut buf = vec![Complex64::new(0.0, 0.0); side * side];
        for (i1, row) in psi0.amplitudes().chunks_exact(side).enumerate() {
            let p1 = (i1 + side - h) % side;
            for (i2, &a) in row.iter().enumerate() {
                buf[p1 * side + (i2 + side - h) % side] = a;
            }
        }
        transform_2d(&mut buf, side, forward.as_ref());
        Ok(SpectralPropagator {
            side,
            spectrum: buf,
            pairs: hoppings.pairs().collect(),
            force: *force,
            forward,
            inverse,
            options,
        })
    }

    /// `Φ(k, t)` for grid momentum `k = 2π (j1, j2) / L`.
    fn phase(&self, j1: usize, j2: usize, t: f64) -> f64 {
        let l = self.side as i64;
        let mut phi = 0.0;
        for &(m, jm) in &self.pairs {
            let p = (j1 as i64 * i64::from(m.m1) + j2 as i64 * i64::from(m.m2)).rem_euclid(l);
            let a = TAU * p as f64 / l as f64;
            let integral = if self.force.is_perpendicular(m) {
                t * a.cos()
            } else {
                let b = self.force.dot(m);
                let half = 0.5 * b * t;
                2.0 * (a + half).cos() * half.sin() / b
            };
            // the pair {m, -m} contributes twice
            phi -= 2.0 * jm * integral;
        }
        phi
    }

    pub fn at(&self, t: f64) -> Result<WavePacketGrid> {
        let l = self.side;
        let mut buf: Vec<Complex64> = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(idx, &f)| f * Complex64::from_polar(1.0, -self.phase(idx / l, idx % l, t)))
            .collect();
        transform_2d(&mut buf, l, self.inverse.as_ref());
        let scale = 1.0 / (l * l) as f64;
        let h = (l / 2) as i32;
        let mut amps = Vec::with_capacity(l * l);
        for i1 in 0..l {
            let m1 = i1 as i32 - h;
            let p1 = (i1 + l - h as usize) % l;
            for i2 in 0..l {
                let m2 = i2 as i32 - h;
                let p2 = (i2 + l - h as usize) % l;
                let tilt = self.force.dot(Offset::new(m1, m2)) * t;
                amps.push(buf[p1 * l + p2] * scale * Complex64::from_polar(1.0, tilt));
            }
        }
        let out = WavePacketGrid::from_amplitudes(l, amps)?;
        let mass = out.boundary_mass(self.options.boundary_band);
        if mass > self.options.boundary_tol {
            return Err(Error::BoundaryMass {
                mass,
                limit: self.options.boundary_tol,
            });
        }
        Ok(out)
    }

    pub fn forward_plan_len(&self) -> usize {
        self.forward.len()
    }
}

/// In-place 2D transform: rows, then columns.
fn transform_2d(buf: &mut [Complex64], side: usize, fft: &dyn Fft<f64>) {
    for row in buf.chunks_exact_mut(side) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); side];
    for c in 0..side {
        for r in 0..side {
            column[r] = buf[r * side + c];
        }
        fft.process(&mut column);
        for r in 0..side {
            buf[r * side + c] = column[r];
        }
    }
}

/// `ψ(t)` by the acceleration-gauge spectral method with default options.
pub fn spectral_propagate(
    psi0: &WavePacketGrid,
    hoppings: &HoppingSet,
    force: &ForceSpec,
    t: f64,
) -> Result<WavePacketGrid> {
    SpectralPropagator::new(psi0, hoppings, force, SpectralOptions::default())?.at(t)
}
