use thiserror::Error;

use super::grid::WavePacketGrid;
use super::hamiltonian::TiltedHamiltonian;
use crate::error::Error;

/// Default width of the edge strip watched for boundary contamination.
pub const DEFAULT_BOUNDARY_BAND: usize = 2;
/// Default largest probability tolerated in the edge strip.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-4;
/// Default largest tolerated `|norm - norm(0)|`.
pub const DEFAULT_NORM_TOL: f64 = 1e-6;
/// `dt = DT_SAFETY / ρ̂` keeps `|λ| dt` well inside the RK4 stability interval.
pub const DT_SAFETY: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    /// Largest time step; the run uses `t_end / ceil(t_end / dt)`.
    pub dt: f64,
    pub t_end: f64,
    /// Steps between observable rows.
    pub sample_stride: usize,
    pub boundary_band: usize,
    pub boundary_tol: f64,
    pub norm_tol: f64,
}

impl EvolutionConfig {
    /// Defaults for `hamiltonian`: `dt = 0.2 / ρ̂` and rows every `sample_interval`.
    pub fn for_hamiltonian(
        hamiltonian: &TiltedHamiltonian,
        t_end: f64,
        sample_interval: f64,
    ) -> Self {
        let bound = hamiltonian.spectral_bound();
        let dt = if bound > 0.0 {
            DT_SAFETY / bound
        } else {
            t_end.max(1.0)
        };
        let mut cfg = EvolutionConfig {
            dt,
            t_end,
            sample_stride: 1,
            boundary_band: DEFAULT_BOUNDARY_BAND,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
            norm_tol: DEFAULT_NORM_TOL,
        };
        cfg.set_sample_interval(sample_interval);
        cfg
    }

    /// Stride that puts rows `interval` apart (rounded to whole steps).
    pub fn set_sample_interval(&mut self, interval: f64) {
        let step = self.step_size();
        self.sample_stride = if step > 0.0 && interval > 0.0 {
            ((interval / step).round() as usize).max(1)
        } else {
            1
        };
    }

    pub fn steps(&self) -> usize {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }

    /// Step actually taken.
    pub fn step_size(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            n => self.t_end / n as f64,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::param("t_end", "must be non-negative"));
        }
        if self.sample_stride == 0 {
            return Err(Error::param("sample_stride", "must be at least 1"));
        }
        if self.boundary_band == 0 {
            return Err(Error::param("boundary_band", "must be at least 1"));
        }
        if !(self.boundary_tol >= 0.0) || !(self.norm_tol > 0.0) {
            return Err(Error::param(
                "boundary_tol",
                "tolerances must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub com: [f64; 2],
    pub norm: f64,
    pub energy: f64,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn com(&self) -> Vec<[f64; 2]> {
        self.rows.iter().map(|r| r.com).collect()
    }

    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.rows.first().map_or(1.0, |r| r.norm);
        self.rows
            .iter()
            .map(|r| (r.norm - n0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.rows.first().map_or(0.0, |r| r.energy);
        self.rows
            .iter()
            .map(|r| (r.energy - e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_boundary_mass(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.boundary_mass)
            .fold(0.0, f64::max)
    }

    /// Row closest in time to `t`.
    pub fn nearest(&self, t: f64) -> Option<&TrajectoryRow> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbortReason {
    NonFinite,
    NormDrift { norm: f64 },
    BoundaryMass { mass: f64 },
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortReason::NonFinite => write!(f, "state became non-finite (unstable step)"),
            AbortReason::NormDrift { norm } => write!(f, "norm drifted to {norm}"),
            AbortReason::BoundaryMass { mass } => write!(f, "boundary mass reached {mass:e}"),
        }
    }
}

/// A run stopped by a validity monitor. Carries the rows recorded up to the last valid
/// sample.
#[derive(Debug, Clone, Error)]
#[error("evolution aborted at t = {failed_time}: {reason} (last valid t = {last_valid_time})")]
pub struct EvolutionAbort {
    pub reason: AbortReason,
    pub failed_time: f64,
    pub last_valid_time: f64,
    pub record: TrajectoryRecord,
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error(transparent)]
    Aborted(Box<EvolutionAbort>),
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub record: TrajectoryRecord,
    pub state: WavePacketGrid,
    pub steps: usize,
    pub dt: f64,
}

/// Padded state, the RK4 accumulator and two stage buffers; the derivative itself only
/// ever exists one row at a time.
struct Buffers {
    re: Vec<f64>,
    im: Vec<f64>,
    acc_re: Vec<f64>,
    acc_im: Vec<f64>,
    a_re: Vec<f64>,
    a_im: Vec<f64>,
    b_re: Vec<f64>,
    b_im: Vec<f64>,
    rows: [Vec<f64>; 2],
}

/// Classic fourth-order Runge-Kutta for `i dψ/dt = H ψ`.
pub fn rk4_evolve(
    psi0: &WavePacketGrid,
    hamiltonian: &TiltedHamiltonian,
    cfg: &EvolutionConfig,
) -> Result<Evolution, EvolutionError> {
    cfg.validate()?;
    if psi0.side() != hamiltonian.side() {
        return Err(Error::param("L", "state and Hamiltonian grids differ").into());
    }
    let n = hamiltonian.padded_len();
    let mut b = Buffers {
        re: vec![0.0; n],
        im: vec![0.0; n],
        acc_re: vec![0.0; n],
        acc_im: vec![0.0; n],
        a_re: vec![0.0; n],
        a_im: vec![0.0; n],
        b_re: vec![0.0; n],
        b_im: vec![0.0; n],
        rows: [Vec::new(), Vec::new()],
    };
    hamiltonian.pack(psi0, &mut b.re, &mut b.im);
    let steps = cfg.steps();
    let dt = cfg.step_size();
    let norm0 = psi0.norm();
    let mut record = TrajectoryRecord::default();

    let sample = |b: &mut Buffers,
                  t: f64,
                  record: &mut TrajectoryRecord|
     -> Result<(), Box<EvolutionAbort>> {
        let state = hamiltonian.unpack(&b.re, &b.im);
        let norm = state.norm();
        let abort = |reason: AbortReason, record: &TrajectoryRecord| {
            Box::new(EvolutionAbort {
                reason,
                failed_time: t,
                last_valid_time: record.rows.last().map_or(0.0, |r| r.t),
                record: record.clone(),
            })
        };
        if !norm.is_finite() {
            return Err(abort(AbortReason::NonFinite, record));
        }
        if (norm - norm0).abs() > cfg.norm_tol {
            return Err(abort(AbortReason::NormDrift { norm }, record));
        }
        let boundary_mass = state.boundary_mass(cfg.boundary_band);
        if boundary_mass > cfg.boundary_tol {
            return Err(abort(
                AbortReason::BoundaryMass {
                    mass: boundary_mass,
                },
                record,
            ));
        }
        let com = state
            .center_of_mass()
            .map_err(|_| abort(AbortReason::NonFinite, record))?;
        let energy = hamiltonian.energy_padded(&b.re, &b.im, &mut b.acc_re) / norm;
        record.rows.push(TrajectoryRow {
            t,
            com,
            norm,
            energy,
            boundary_mass,
        });
        Ok(())
    };

    sample(&mut b, 0.0, &mut record).map_err(EvolutionError::Aborted)?;
    for step in 1..=steps {
        rk4_step(hamiltonian, &mut b, dt);
        if step % cfg.sample_stride == 0 || step == steps {
            sample(&mut b, step as f64 * dt, &mut record).map_err(EvolutionError::Aborted)?;
        }
    }
    Ok(Evolution {
        record,
        state: hamiltonian.unpack(&b.re, &b.im),
        steps,
        dt,
    })
}

/// `x + c k` written to `stage` and `acc` advanced by `w k`, over one row.
#[inline(always)]
fn update_row(stage: &mut [f64], acc: &mut [f64], x: &[f64], k: &[f64], c: f64, w: f64) {
    for (((s, a), &x), &k) in stage.iter_mut().zip(acc.iter_mut()).zip(x).zip(k) {
        *a += w * k;
        *s = x + c * k;
    }
}

fn rk4_step(h: &TiltedHamiltonian, b: &mut Buffers, dt: f64) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected at runtime.
            unsafe { rk4_step_avx512(h, b, dt) };
            return;
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: as above.
            unsafe { rk4_step_avx2(h, b, dt) };
            return;
        }
    }
    rk4_step_body(h, b, dt);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn rk4_step_avx512(h: &TiltedHamiltonian, b: &mut Buffers, dt: f64) {
    rk4_step_body(h, b, dt);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn rk4_step_avx2(h: &TiltedHamiltonian, b: &mut Buffers, dt: f64) {
    rk4_step_body(h, b, dt);
}

/// One classic RK4 step. Stages alternate between the `a` and `b` buffers because a row
/// cannot be overwritten while later rows still read its neighbours.
///
/// No fused multiply-add is ever emitted, so every instruction-set path gives the same bits.
#[inline(always)]
fn rk4_step_body(h: &TiltedHamiltonian, b: &mut Buffers, dt: f64) {
    let Buffers {
        re,
        im,
        acc_re,
        acc_im,
        a_re,
        a_im,
        b_re,
        b_im,
        rows,
    } = b;
    let (sixth, third, half) = (dt / 6.0, dt / 3.0, 0.5 * dt);

    h.derivative_rows(
        re,
        im,
        rows,
        #[inline(always)]
        |base, k_re, k_im| {
            let r = base..base + k_re.len();
            for (((a, s), &x), &k) in acc_re[r.clone()]
                .iter_mut()
                .zip(&mut b_re[r.clone()])
                .zip(&re[r.clone()])
                .zip(k_re)
            {
                *a = x + sixth * k;
                *s = x + half * k;
            }
            for (((a, s), &x), &k) in acc_im[r.clone()]
                .iter_mut()
                .zip(&mut b_im[r.clone()])
                .zip(&im[r])
                .zip(k_im)
            {
                *a = x + sixth * k;
                *s = x + half * k;
            }
        },
    );
    h.derivative_rows(
        b_re,
        b_im,
        rows,
        #[inline(always)]
        |base, k_re, k_im| {
            let r = base..base + k_re.len();
            update_row(
                &mut a_re[r.clone()],
                &mut acc_re[r.clone()],
                &re[r.clone()],
                k_re,
                half,
                third,
            );
            update_row(
                &mut a_im[r.clone()],
                &mut acc_im[r.clone()],
                &im[r],
                k_im,
                half,
                third,
            );
        },
    );
    h.derivative_rows(
        a_re,
        a_im,
        rows,
        #[inline(always)]
        |base, k_re, k_im| {
            let r = base..base + k_re.len();
            update_row(
                &mut b_re[r.clone()],
                &mut acc_re[r.clone()],
                &re[r.clone()],
                k_re,
                dt,
                third,
            );
            update_row(
                &mut b_im[r.clone()],
                &mut acc_im[r.clone()],
                &im[r],
                k_im,
                dt,
                third,
            );
        },
    );
    h.derivative_rows(
        b_re,
        b_im,
        rows,
        #[inline(always)]
        |base, k_re, k_im| {
            let r = base..base + k_re.len();
            for ((x, &a), &k) in re[r.clone()].iter_mut().zip(&acc_re[r.clone()]).zip(k_re) {
                *x = a + sixth * k;
            }
            for ((x, &a), &k) in im[r.clone()].iter_mut().zip(&acc_im[r]).zip(k_im) {
                *x = a + sixth * k;
            }
        },
    );
}
