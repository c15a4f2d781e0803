//! The six pipeline commands. Each writes its files into one output directory and returns
//! what it wrote together with any text meant for standard output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bloch_core::band::{
    extract_hoppings, lowest_band, BandSample, OpticalPotential, PlaneWaveBasis,
};
use bloch_core::evolution::{
    gaussian_packet, rk4_evolve, EvolutionAbort, EvolutionConfig, EvolutionError,
    TiltedHamiltonian, TrajectoryRow,
};
use bloch_core::lattice::Shell;
use bloch_core::semiclassics::{closed_form_displacement, drift_vector, semiclassical_trajectory};
use bloch_core::{HoppingSet, Offset, WaveVector};

use crate::config::{ModelSource, RunConfig};
use crate::model::{build_model, provenance, resolve_forces, Model, ResolvedForce};
use crate::svg::{lattice_map, trajectory_plot, Series};
use crate::CliError;

/// Largest `|m_i|` shown in the `log|J|` summary.
pub const LOG_J_RANGE: i32 = 4;

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub stdout: String,
    /// Validity aborts, one message per affected force case.
    pub aborts: Vec<String>,
}

impl Outcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn case_name(prefix: &str, index: usize, ext: &str) -> String {
    format!("{prefix}_case{}.{ext}", index + 1)
}

/// `theta1,theta2,E` of the lowest band, from the potential or the hopping table.
pub fn cmd_bands(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (band, model) = match &cfg.source {
        ModelSource::Potential { v0, cutoff, grid } => {
            let core = |e| CliError::from_core("band solver", e);
            let potential = OpticalPotential::new(*v0).map_err(core)?;
            let basis = PlaneWaveBasis::new(*cutoff).map_err(core)?;
            (lowest_band(&potential, &basis, *grid).map_err(core)?, None)
        }
        ModelSource::Table { .. } => {
            let model = build_model(cfg)?;
            let band = BandSample::from_fn(bloch_core::band::DEFAULT_GRID, |theta| {
                let k = WaveVector::new(
                    std::f64::consts::TAU * theta[0],
                    std::f64::consts::TAU * theta[1],
                );
                model.hoppings.dispersion_energy(k)
            });
            (band, Some(model))
        }
    };
    let dir = prepare_dir(cfg)?;
    let mut out = Outcome::default();
    let text = provenance("bands", cfg, model.as_ref()) + &band.to_csv();
    out.write(&dir, "bands.csv", &text)?;
    Ok(out)
}

/// `(m1, m2)` with `ln|J_m|`, if any.
type LogGrid = Vec<((i32, i32), Option<f64>)>;

/// `log|J_m|` for every offset with `|m_i| <= LOG_J_RANGE`; `None` where `J_m` is zero or
/// unknown.
fn log_abs_hoppings(model: &Model) -> Result<LogGrid, CliError> {
    let offsets: Vec<Offset> = (-LOG_J_RANGE..=LOG_J_RANGE)
        .flat_map(|m1| (-LOG_J_RANGE..=LOG_J_RANGE).map(move |m2| Offset::new(m1, m2)))
        .collect();
    let full = match &model.band {
        Some(band) => {
            let shells: Vec<Shell> = offsets
                .iter()
                .filter(|m| !m.is_origin() && m.is_canonical())
                .map(|&m| Shell {
                    offsets: vec![m, -m],
                })
                .collect();
            extract_hoppings(band, &shells)
                .map_err(|e| CliError::from_core("hopping summary", e))?
                .hoppings
        }
        None => model.hoppings.clone(),
    };
    Ok(offsets
        .iter()
        .map(|&m| {
            let v = full.get(m).filter(|j| *j != 0.0).map(|j| j.abs().ln());
            ((m.m1, m.m2), v)
        })
        .collect())
}

/// Hopping table plus the `log|J|` summary grid.
pub fn cmd_hoppings(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let dir = prepare_dir(cfg)?;
    let mut out = Outcome::default();
    let header = provenance("hoppings", cfg, Some(&model));
    let mut comments: Vec<String> = header
        .lines()
        .map(|l| l.trim_start_matches("# ").to_string())
        .collect();
    if let ModelSource::Potential { v0, cutoff, grid } = &cfg.source {
        comments.push(format!("V0 = {v0} E_r, N_c = {cutoff}, M = {grid}"));
    }
    out.write(&dir, "hoppings.dat", &model.hoppings.to_table(&comments))?;

    let grid = log_abs_hoppings(&model)?;
    let mut csv = header.clone();
    csv.push_str("m1,m2,log_abs_J\n");
    for ((m1, m2), v) in &grid {
        match v {
            Some(v) => {
                let _ = writeln!(csv, "{m1},{m2},{v}");
            }
            None => {
                let _ = writeln!(csv, "{m1},{m2},");
            }
        }
    }
    out.write(&dir, "log_abs_J.csv", &csv)?;
    if cfg.output.plot {
        out.write(&dir, "log_abs_J.svg", &lattice_map("ln|J_m| (E_r)", &grid))?;
    }
    for (m, j) in model.hoppings.pairs() {
        let _ = writeln!(out.stdout, "J({},{}) = {j:e} E_r", m.m1, m.m2);
    }
    Ok(out)
}

fn fmt_pair(v: [f64; 2]) -> String {
    format!("({:e}, {:e})", v[0], v[1])
}

/// Predicted period, drift and line per force case, printed to standard output.
pub fn cmd_drift(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let forces = resolve_forces(cfg, &model)?;
    let k0 = cfg.packet.k0;
    let mut out = Outcome::default();
    let s = &mut out.stdout;
    let _ = writeln!(s, "J1 = {:e} E_r, k0 = ({}, {})", model.j1, k0.k1, k0.k2);
    for (i, rf) in forces.iter().enumerate() {
        let f = rf.force;
        let _ = writeln!(
            s,
            "case {}: F/J1 = ({}, {}), F = {} E_r",
            i + 1,
            rf.case.f_j1[0],
            rf.case.f_j1[1],
            fmt_pair([f.f1, f.f2])
        );
        if rf.is_zero() {
            let v = model.hoppings.group_velocity(k0);
            let _ = writeln!(
                s,
                "  no force: no Bloch period, ballistic velocity {} sites per 1/E_r",
                fmt_pair(v)
            );
            continue;
        }
        if let Some(res) = rf.residual.filter(|r| *r > 0.0) {
            let (q, r) = f.direction().unwrap_or((0, 0));
            let _ = writeln!(
                s,
                "  rotated onto ({q}, {r}); misalignment |F x (q, r)|/|F| = {res:e}"
            );
        }
        let d =
            drift_vector(&model.hoppings, k0, &f).map_err(|e| CliError::from_core("drift", e))?;
        let (q, r) = f.direction().unwrap_or((0, 0));
        let v = d.velocity();
        let _ = writeln!(s, "  direction (q, r) = ({q}, {r})");
        let _ = writeln!(
            s,
            "  T = {:e} 1/E_r = {:e} 1/J1",
            d.period,
            model.to_j1(d.period)
        );
        let _ = writeln!(s, "  D_T = {} sites", fmt_pair(d.displacement));
        let _ = writeln!(
            s,
            "  velocity = {} sites per 1/E_r = {} sites per 1/J1",
            fmt_pair(v),
            fmt_pair([v[0] / model.j1.abs(), v[1] / model.j1.abs()])
        );
        let offsets: Vec<String> = d
            .contributing
            .iter()
            .map(|m| format!("({},{})", m.m1, m.m2))
            .collect();
        let _ = writeln!(s, "  contributing offsets: {}", offsets.join(" "));
        let _ = writeln!(s, "  drift line: ({}, {})", d.line.0, d.line.1);
    }
    Ok(out)
}

/// Semiclassical centre of mass `t_Er,t_J1,x,y` per force case.
pub fn cmd_semiclassical(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let forces = resolve_forces(cfg, &model)?;
    let dir = prepare_dir(cfg)?;
    let mut out = Outcome::default();
    let header = provenance("semiclassical", cfg, Some(&model));
    for (i, rf) in forces.iter().enumerate() {
        let traj = semiclassical_trajectory(
            &model.hoppings,
            cfg.packet.k0,
            &rf.force,
            model.to_er(cfg.evolution.t_end_j1),
            model.to_er(cfg.evolution.stride_j1),
        )
        .map_err(|e| CliError::from_core("semiclassical", e))?;
        let mut csv = header.clone();
        let _ = writeln!(csv, "# case {}: F/J1 = {}", i + 1, fmt_pair(rf.case.f_j1));
        csv.push_str("t_Er,t_J1,x,y\n");
        for p in &traj.samples {
            let _ = writeln!(
                csv,
                "{},{},{:e},{:e}",
                p.t,
                model.to_j1(p.t),
                p.r[0],
                p.r[1]
            );
        }
        out.write(&dir, &case_name("semiclassical", i, "csv"), &csv)?;
    }
    Ok(out)
}

struct CaseRun {
    rows: Vec<TrajectoryRow>,
    abort: Option<Box<EvolutionAbort>>,
}

fn run_case(cfg: &RunConfig, model: &Model, rf: &ResolvedForce) -> Result<CaseRun, CliError> {
    let p = &cfg.packet;
    let psi =
        gaussian_packet(p.side, p.sigma, p.k0).map_err(|e| CliError::from_core("packet", e))?;
    let h = TiltedHamiltonian::new(&model.hoppings, &rf.force, p.side)
        .map_err(|e| CliError::from_core("hamiltonian", e))?;
    let ev = &cfg.evolution;
    let mut ecfg =
        EvolutionConfig::for_hamiltonian(&h, model.to_er(ev.t_end_j1), model.to_er(ev.stride_j1));
    if let Some(dt) = ev.dt {
        ecfg.dt = dt;
        ecfg.set_sample_interval(model.to_er(ev.stride_j1));
    }
    ecfg.boundary_band = ev.boundary_band;
    ecfg.boundary_tol = ev.boundary_tol;
    match rk4_evolve(&psi, &h, &ecfg) {
        Ok(e) => Ok(CaseRun {
            rows: e.record.rows,
            abort: None,
        }),
        Err(EvolutionError::Aborted(a)) => Ok(CaseRun {
            rows: a.record.rows.clone(),
            abort: Some(a),
        }),
        Err(EvolutionError::Setup(e)) => Err(CliError::from_core("evolution", e)),
    }
}

fn abort_footer(model: &Model, a: &EvolutionAbort) -> String {
    format!(
        "# aborted: {} at t_Er = {} (t_J1 = {}); last valid t_Er = {}\n",
        a.reason,
        a.failed_time,
        model.to_j1(a.failed_time),
        a.last_valid_time
    )
}

/// Exact RK4 trajectory per force case.
pub fn cmd_evolve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let forces = resolve_forces(cfg, &model)?;
    let dir = prepare_dir(cfg)?;
    let mut out = Outcome::default();
    let header = provenance("evolve", cfg, Some(&model));
    for (i, rf) in forces.iter().enumerate() {
        let run = run_case(cfg, &model, rf)?;
        let mut csv = header.clone();
        let _ = writeln!(csv, "# case {}: F/J1 = {}", i + 1, fmt_pair(rf.case.f_j1));
        csv.push_str("t_Er,t_J1,com1,com2,norm,energy,boundary_mass\n");
        for r in &run.rows {
            let _ = writeln!(
                csv,
                "{},{},{:e},{:e},{},{:e},{:e}",
                r.t,
                model.to_j1(r.t),
                r.com[0],
                r.com[1],
                r.norm,
                r.energy,
                r.boundary_mass
            );
        }
        if let Some(a) = &run.abort {
            csv.push_str(&abort_footer(&model, a));
            out.aborts.push(format!("case {}: {a}", i + 1));
        }
        out.write(&dir, &case_name("evolve", i, "csv"), &csv)?;
    }
    Ok(out)
}

/// Offset of the guiding centre from the initial position: the time average of the
/// oscillating terms of the closed-form displacement.
fn guiding_offset(hoppings: &HoppingSet, k0: WaveVector, rf: &ResolvedForce) -> [f64; 2] {
    let mut c = [0.0; 2];
    if rf.is_zero() {
        return c;
    }
    for (m, j) in hoppings.iter() {
        if rf.force.is_perpendicular(m) {
            continue;
        }
        let w = j * m.phase(k0).cos() / rf.force.dot(m);
        c[0] += f64::from(m.m1) * w;
        c[1] += f64::from(m.m2) * w;
    }
    c
}

/// Exact, semiclassical and predicted-line centre of mass per force case, as CSV and SVG.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let forces = resolve_forces(cfg, &model)?;
    let dir = prepare_dir(cfg)?;
    let mut out = Outcome::default();
    let header = provenance("compare", cfg, Some(&model));
    let k0 = cfg.packet.k0;
    for (i, rf) in forces.iter().enumerate() {
        let (velocity, line) = if rf.is_zero() {
            (model.hoppings.group_velocity(k0), None)
        } else {
            let d = drift_vector(&model.hoppings, k0, &rf.force)
                .map_err(|e| CliError::from_core("drift", e))?;
            (d.velocity(), Some(d.line))
        };
        let run = run_case(cfg, &model, rf)?;
        let r0 = run.rows.first().map_or([0.0; 2], |r| r.com);
        let c = guiding_offset(&model.hoppings, k0, rf);

        let mut csv = header.clone();
        let _ = writeln!(csv, "# case {}: F/J1 = {}", i + 1, fmt_pair(rf.case.f_j1));
        match line {
            Some((a, b)) => {
                let _ = writeln!(
                    csv,
                    "# drift line along ({a}, {b}), velocity {} sites per 1/E_r",
                    fmt_pair(velocity)
                );
            }
            None => {
                let _ = writeln!(
                    csv,
                    "# no force: straight line at grad E(k0) = {} sites per 1/E_r",
                    fmt_pair(velocity)
                );
            }
        }
        csv.push_str("t_Er,t_J1,exact_com1,exact_com2,semiclassical_com1,semiclassical_com2,line_com1,line_com2\n");
        let (mut exact, mut semi, mut drift) = (Vec::new(), Vec::new(), Vec::new());
        for r in &run.rows {
            let d = closed_form_displacement(&model.hoppings, k0, &rf.force, r.t);
            let s = [r0[0] + d[0], r0[1] + d[1]];
            let l = [
                r0[0] + c[0] + velocity[0] * r.t,
                r0[1] + c[1] + velocity[1] * r.t,
            ];
            let _ = writeln!(
                csv,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t,
                model.to_j1(r.t),
                r.com[0],
                r.com[1],
                s[0],
                s[1],
                l[0],
                l[1]
            );
            exact.push(r.com);
            semi.push(s);
            drift.push(l);
        }
        if let Some(a) = &run.abort {
            csv.push_str(&abort_footer(&model, a));
            out.aborts.push(format!("case {}: {a}", i + 1));
        }
        out.write(&dir, &case_name("compare", i, "csv"), &csv)?;
        if cfg.output.plot {
            let title = format!("F/J1 = ({}, {})", rf.case.f_j1[0], rf.case.f_j1[1]);
            let svg = trajectory_plot(
                &title,
                "<m1>",
                "<m2>",
                &[
                    Series {
                        label: "exact",
                        color: "black",
                        dashed: false,
                        points: &exact,
                    },
                    Series {
                        label: "semiclassical",
                        color: "#d62728",
                        dashed: true,
                        points: &semi,
                    },
                    Series {
                        label: "drift line",
                        color: "#1f77b4",
                        dashed: false,
                        points: &drift,
                    },
                ],
            );
            out.write(&dir, &case_name("compare", i, "svg"), &svg)?;
        }
    }
    Ok(out)
}
