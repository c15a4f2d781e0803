//! Exact single-particle dynamics on a finite lattice.

mod grid;
mod hamiltonian;
mod rk4;
mod spectral;

pub use grid::{gaussian_packet, gaussian_tail_mass, WavePacketGrid, MAX_TAIL_MASS};
pub use hamiltonian::{apply_hamiltonian, TiltedHamiltonian};
pub use rk4::{
    rk4_evolve, AbortReason, Evolution, EvolutionAbort, EvolutionConfig, EvolutionError,
    TrajectoryRecord, TrajectoryRow, DEFAULT_BOUNDARY_BAND, DEFAULT_BOUNDARY_TOL, DEFAULT_NORM_TOL,
    DT_SAFETY,
};
pub use spectral::{spectral_propagate, SpectralOptions, SpectralPropagator};

/// Observables of a grid state: centre of mass, norm, energy and edge mass.
pub fn observables(
    psi: &WavePacketGrid,
    hamiltonian: &TiltedHamiltonian,
    boundary_band: usize,
) -> crate::Result<TrajectoryRow> {
    let norm = psi.norm();
    Ok(TrajectoryRow {
        t: f64::NAN,
        com: psi.center_of_mass()?,
        norm,
        energy: hamiltonian.expectation(psi).re / norm,
        boundary_mass: psi.boundary_mass(boundary_band),
    })
}
