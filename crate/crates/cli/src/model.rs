//! Resolution of a configuration into a hopping table and concrete forces.

use sha2::{Digest, Sha256};

use bloch_core::band::{lattice_hoppings, BandSample};
use bloch_core::lattice::triangular_shells;
use bloch_core::semiclassics::rationalize_force;
use bloch_core::{ForceSpec, HoppingSet, Offset};

use crate::config::{ForceCase, ModelSource, RunConfig, TableOrigin};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct Model {
    pub hoppings: HoppingSet,
    /// Nearest-neighbour hopping `J_(1,0)`, the unit of forces and of `t_J1`.
    pub j1: f64,
    /// Sampled lowest band when the table was derived from the potential.
    pub band: Option<BandSample>,
    pub sha256: String,
}

impl Model {
    /// Convert a time in `1/J1` to `1/E_r`.
    pub fn to_er(&self, t_j1: f64) -> f64 {
        t_j1 / self.j1.abs()
    }

    pub fn to_j1(&self, t_er: f64) -> f64 {
        t_er * self.j1.abs()
    }
}

pub fn table_hash(hoppings: &HoppingSet) -> String {
    hex::encode(Sha256::digest(hoppings.to_table(&[]).as_bytes()))
}

/// Hopping table of the configured source. Derived tables need a non-zero lattice depth.
pub fn build_model(cfg: &RunConfig) -> Result<Model, CliError> {
    let (hoppings, band) = match &cfg.source {
        ModelSource::Potential { v0, cutoff, grid } => {
            if *v0 == 0.0 {
                return Err(CliError::Config(
                    "potential.V0: V0 = 0 is the free particle, whose band has no short-range \
                     tight-binding truncation"
                        .into(),
                ));
            }
            let (band, extraction) = lattice_hoppings(*v0, *cutoff, *grid, &triangular_shells())
                .map_err(|e| CliError::from_core("band-solver pipeline", e))?;
            (extraction.hoppings, Some(band))
        }
        ModelSource::Table { hoppings, .. } => (hoppings.clone(), None),
    };
    let j1 = hoppings.get(Offset::new(1, 0)).unwrap_or(0.0);
    if !(j1 != 0.0 && j1.is_finite()) {
        return Err(CliError::Config(
            "hoppings: forces and times are measured in J1 = J(1,0), which is missing or zero"
                .into(),
        ));
    }
    let sha256 = table_hash(&hoppings);
    Ok(Model {
        hoppings,
        j1,
        band,
        sha256,
    })
}

#[derive(Debug, Clone)]
pub struct ResolvedForce {
    pub case: ForceCase,
    pub force: ForceSpec,
    /// `|F x (q, r)| / |F|` of a rationalized force before rotation.
    pub residual: Option<f64>,
}

impl ResolvedForce {
    pub fn is_zero(&self) -> bool {
        self.force.f1 == 0.0 && self.force.f2 == 0.0
    }
}

/// Forces in E_r for every case. Without an explicit direction the force is rationalized,
/// keeping its magnitude.
pub fn resolve_forces(cfg: &RunConfig, model: &Model) -> Result<Vec<ResolvedForce>, CliError> {
    cfg.forces
        .iter()
        .map(|case| {
            let f = [case.f_j1[0] * model.j1.abs(), case.f_j1[1] * model.j1.abs()];
            let core = |e| CliError::from_core("force", e);
            let (force, residual) = match case.qr {
                Some((q, r)) => (
                    ForceSpec::commensurate(f[0], f[1], q, r).map_err(core)?,
                    None,
                ),
                None if f == [0.0, 0.0] => (ForceSpec::zero(), None),
                None => {
                    let rf = rationalize_force(f, cfg.q_max).map_err(core)?;
                    (rf.force, Some(rf.residual))
                }
            };
            Ok(ResolvedForce {
                case: case.clone(),
                force,
                residual,
            })
        })
        .collect()
}

/// `# `-prefixed block recording everything needed to repeat a run.
pub fn provenance(command: &str, cfg: &RunConfig, model: Option<&Model>) -> String {
    let mut out = format!("# bloch2d {} {command}\n", env!("CARGO_PKG_VERSION"));
    if let ModelSource::Table {
        origin: TableOrigin::File(path),
        ..
    } = &cfg.source
    {
        out.push_str(&format!("# hopping table read from {}\n", path.display()));
    }
    for line in cfg.to_text().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    if let Some(model) = model {
        out.push_str(&format!("# J1 = {:e}\n", model.j1));
        out.push_str(&format!("# hoppings_sha256 = {}\n", model.sha256));
    }
    out
}
