//! Semiclassical wave-packet motion under a static force.
//!
//! With `dk/dt = F` and `dr/dt = ∇E(k)`, every hopping `J_m` contributes a term whose time
//! integral is elementary, so displacements are evaluated in closed form:
//!
//! ```text
//! r(t) - r(0) = Σ_m m J_m I_m(t),
//! I_m(t) = t sin(k0·m)                                   if F·m = 0
//!        = [cos(k0·m) - cos(k0·m + F·m t)] / (F·m)       otherwise
//! ```
//!
//! For a commensurate force `F T = 2π (q, r)` the oscillating terms vanish after one period
//! and only offsets perpendicular to `F` survive, which gives the drift per period.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::lattice::{gcd, ForceSpec, HoppingSet, Offset, WaveVector};

/// Bloch period `T` with `F T = 2π (q, r)`.
pub fn bloch_period(force: &ForceSpec) -> Result<f64> {
    let (q, r) = force.direction().ok_or(Error::IncommensurateForce)?;
    let t = if q != 0 {
        TAU * q as f64 / force.f1
    } else {
        TAU * r as f64 / force.f2
    };
    debug_assert!(t > 0.0);
    Ok(t)
}

/// `I_m(t)`, written as `2 sin(a + bt/2) sin(bt/2) / b` to stay accurate for small `b`.
fn phase_integral(a: f64, b: f64, t: f64) -> f64 {
    if b == 0.0 {
        t * a.sin()
    } else {
        let half = 0.5 * b * t;
        2.0 * (a + half).sin() * half.sin() / b
    }
}

/// `F·m`, forced to exactly zero for offsets on the integer perpendicular.
fn force_component(force: &ForceSpec, m: Offset) -> f64 {
    if force.is_perpendicular(m) {
        0.0
    } else {
        force.dot(m)
    }
}

/// `r(t) - r(0)` of a packet starting at `k0`.
pub fn closed_form_displacement(
    hoppings: &HoppingSet,
    k0: WaveVector,
    force: &ForceSpec,
    t: f64,
) -> [f64; 2] {
    let mut d = [0.0; 2];
    for (m, j) in hoppings.iter() {
        let w = j * phase_integral(m.phase(k0), force_component(force, m), t);
        d[0] += f64::from(m.m1) * w;
        d[1] += f64::from(m.m2) * w;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftResult {
    pub period: f64,
    /// Displacement accumulated over one period.
    pub displacement: [f64; 2],
    /// Offsets with `F·m = 0`, the only ones that contribute.
    pub contributing: Vec<Offset>,
    /// Primitive integer direction `(-r, q)` perpendicular to the force.
    pub line: (i64, i64),
}

impl DriftResult {
    pub fn velocity(&self) -> [f64; 2] {
        [
            self.displacement[0] / self.period,
            self.displacement[1] / self.period,
        ]
    }
}

/// Net displacement per Bloch period, `D_T = T Σ_{F·m=0} m J_m sin(m·k0)`.
pub fn drift_vector(
    hoppings: &HoppingSet,
    k0: WaveVector,
    force: &ForceSpec,
) -> Result<DriftResult> {
    let period = bloch_period(force)?;
    let (q, r) = force.direction().ok_or(Error::IncommensurateForce)?;
    let mut sum = [0.0; 2];
    let mut contributing = Vec::new();
    for (m, j) in hoppings.iter() {
        if !force.is_perpendicular(m) {
            continue;
        }
        let s = j * m.phase(k0).sin();
        sum[0] += f64::from(m.m1) * s;
        sum[1] += f64::from(m.m2) * s;
        contributing.push(m);
    }
    Ok(DriftResult {
        period,
        displacement: [period * sum[0], period * sum[1]],
        contributing,
        line: (-r, q),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalizedForce {
    /// The input force.
    pub raw: [f64; 2],
    /// Force rotated onto `(q, r)` with the magnitude preserved; equal to `raw` when the
    /// residual is zero.
    pub force: ForceSpec,
    /// `|F1 r - F2 q| / |F|` for the raw force.
    pub residual: f64,
}

impl RationalizedForce {
    pub fn direction(&self) -> (i64, i64) {
        self.force
            .direction()
            .expect("rationalized forces are commensurate")
    }
}

/// Best coprime direction `(q, r)` with `|q|, |r| ≤ q_max` for a raw force, minimizing
/// `|F1 r - F2 q| / |F|`.
///
/// The larger component is the denominator of a continued-fraction expansion of the
/// component ratio; the last convergent within `q_max` is the optimal approximation.
pub fn rationalize_force(f: [f64; 2], q_max: i64) -> Result<RationalizedForce> {
    let [f1, f2] = f;
    if !(f1.is_finite() && f2.is_finite()) || (f1 == 0.0 && f2 == 0.0) {
        return Err(Error::InvalidForce(format!("cannot rationalize F = {f:?}")));
    }
    if q_max < 1 {
        return Err(Error::param("q_max", "must be at least 1"));
    }
    let (big, small) = if f1.abs() >= f2.abs() {
        (f1, f2)
    } else {
        (f2, f1)
    };
    let (num, den) = best_convergent(small.abs() / big.abs(), q_max);
    let sign = |x: f64| if x < 0.0 { -1 } else { 1 };
    let (q, r) = if f1.abs() >= f2.abs() {
        (sign(f1) * den, sign(f2) * num)
    } else {
        (sign(f1) * num, sign(f2) * den)
    };
    debug_assert_eq!(gcd(q, r), 1);
    let magnitude = f1.hypot(f2);
    let residual = (f1 * r as f64 - f2 * q as f64).abs() / magnitude;
    let force = if residual == 0.0 {
        ForceSpec::commensurate(f1, f2, q, r)?
    } else {
        let scale = magnitude / (q as f64).hypot(r as f64);
        ForceSpec::commensurate(scale * q as f64, scale * r as f64, q, r)?
    };
    Ok(RationalizedForce {
        raw: f,
        force,
        residual,
    })
}

/// Last continued-fraction convergent `num/den` of `x ∈ [0, 1]` with `den ≤ max_den`.
fn best_convergent(x: f64, max_den: i64) -> (i64, i64) {
    let (mut h_prev, mut h) = (0i64, 1i64);
    let (mut k_prev, mut k) = (1i64, 0i64);
    let mut best = (0, 1);
    let mut rem = x;
    loop {
        let a = rem.floor();
        if a > i64::MAX as f64 / 4.0 {
            break;
        }
        let a = a as i64;
        let h_next = a * h + h_prev;
        let k_next = a * k + k_prev;
        if k_next > max_den {
            break;
        }
        best = (h_next, k_next);
        (h_prev, h) = (h, h_next);
        (k_prev, k) = (k, k_next);
        let frac = rem - a as f64;
        if frac <= 1e-14 * rem.max(1.0) {
            break;
        }
        rem = 1.0 / frac;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalSample {
    pub t: f64,
    pub k: WaveVector,
    pub r: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemiclassicalTrajectory {
    pub samples: Vec<SemiclassicalSample>,
}

impl SemiclassicalTrajectory {
    /// `t x y` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for s in &self.samples {
            out.push_str(&format!("{},{:e},{:e}\n", s.t, s.r[0], s.r[1]));
        }
        out
    }
}

/// Samples of the semiclassical orbit at `t = 0, dt, 2dt, ... ≤ t_end`.
pub fn semiclassical_trajectory(
    hoppings: &HoppingSet,
    k0: WaveVector,
    force: &ForceSpec,
    t_end: f64,
    dt_sample: f64,
) -> Result<SemiclassicalTrajectory> {
    if !(dt_sample > 0.0) {
        return Err(Error::param("dt_sample", "must be positive"));
    }
    if !(t_end >= 0.0) {
        return Err(Error::param("t_end", "must be non-negative"));
    }
    let n = (t_end / dt_sample + 1e-9).floor() as usize;
    let samples = (0..=n)
        .map(|i| {
            let t = i as f64 * dt_sample;
            SemiclassicalSample {
                t,
                k: k0.shifted(force, t).canonical(),
                r: closed_form_displacement(hoppings, k0, force, t),
            }
        })
        .collect();
    Ok(SemiclassicalTrajectory { samples })
}

/// Bound on the distance of the orbit from its drift line: every oscillating term moves
/// the packet by at most `2 |m| |J_m| / |F·m|`.
pub fn oscillation_bound(hoppings: &HoppingSet, force: &ForceSpec) -> f64 {
    hoppings
        .iter()
        .filter(|&(m, _)| !force.is_perpendicular(m))
        .map(|(m, j)| 2.0 * m.norm() * j.abs() / force.dot(m).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::QUOTED_TRIANGULAR_HOPPINGS;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const J1: f64 = QUOTED_TRIANGULAR_HOPPINGS[0];

    fn quoted() -> HoppingSet {
        HoppingSet::triangular(QUOTED_TRIANGULAR_HOPPINGS)
    }

    fn k0() -> WaveVector {
        WaveVector::new(0.05, 0.03)
    }

    #[test]
    fn unit_period() {
        let f = ForceSpec::commensurate(TAU, 0.0, 1, 0).unwrap();
        assert_relative_eq!(bloch_period(&f).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn paper_force_periods() {
        let f = ForceSpec::commensurate(0.5 * J1, -0.5 * J1, 1, -1).unwrap();
        let t = bloch_period(&f).unwrap();
        assert_relative_eq!(t, 4.0 * std::f64::consts::PI / J1, max_relative = 1e-14);
        assert!((t - 164.26).abs() < 0.01);
        let f = ForceSpec::commensurate(0.4 * J1, -0.8 * J1, 1, -2).unwrap();
        assert_relative_eq!(
            bloch_period(&f).unwrap(),
            TAU / (0.4 * J1),
            max_relative = 1e-14
        );
        // axis-aligned force along the second component
        let f = ForceSpec::commensurate(0.0, -0.3, 0, -1).unwrap();
        assert_relative_eq!(bloch_period(&f).unwrap(), TAU / 0.3, max_relative = 1e-14);
    }

    #[test]
    fn undeclared_direction_has_no_period() {
        assert!(matches!(
            bloch_period(&ForceSpec::new(0.1, 0.2)),
            Err(Error::IncommensurateForce)
        ));
        assert!(drift_vector(&quoted(), k0(), &ForceSpec::new(0.1, 0.2)).is_err());
    }

    #[test]
    fn no_displacement_at_time_zero() {
        let f = ForceSpec::new(0.03, -0.07);
        assert_eq!(
            closed_form_displacement(&quoted(), k0(), &f, 0.0),
            [0.0, 0.0]
        );
    }

    #[test]
    fn chain_returns_after_one_period() {
        let (j, f1, k) = (0.7, 0.13, 0.4);
        let chain = HoppingSet::symmetric([((1, 0), j)]).unwrap();
        let f = ForceSpec::commensurate(f1, 0.0, 1, 0).unwrap();
        let start = WaveVector::new(k, 0.0);
        for t in [1.0, 7.5, 20.0] {
            let d = closed_form_displacement(&chain, start, &f, t);
            let expected = 2.0 * j / f1 * (k.cos() - (k + f1 * t).cos());
            assert_relative_eq!(d[0], expected, epsilon = 1e-12);
            assert_eq!(d[1], 0.0);
        }
        let d = closed_form_displacement(&chain, start, &f, TAU / f1);
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
    }

    #[test]
    fn zone_centre_does_not_drift() {
        let f = ForceSpec::commensurate(0.4 * J1, -0.8 * J1, 1, -2).unwrap();
        let d = drift_vector(&quoted(), WaveVector::default(), &f).unwrap();
        assert_eq!(d.displacement, [0.0, 0.0]);
    }

    #[test]
    fn case_iii_drifts_along_two_one() {
        let f = ForceSpec::commensurate(0.4 * J1, -0.8 * J1, 1, -2).unwrap();
        let d = drift_vector(&quoted(), k0(), &f).unwrap();
        let mut contributing = d.contributing.clone();
        contributing.sort();
        assert_eq!(contributing, vec![Offset::new(-2, -1), Offset::new(2, 1)]);
        let j2 = QUOTED_TRIANGULAR_HOPPINGS[1];
        let s = 2.0 * j2 * (2.0 * 0.05 + 0.03f64).sin();
        let v = d.velocity();
        assert_relative_eq!(v[0], 2.0 * s, max_relative = 1e-12);
        assert_relative_eq!(v[1], s, max_relative = 1e-12);
        assert_relative_eq!(v[0], -0.00773, epsilon = 1e-5);
        assert_relative_eq!(v[1], -0.00386, epsilon = 1e-5);
        assert_eq!(d.line, (2, 1));
    }

    #[test]
    fn case_i_drifts_along_diagonal() {
        let f = ForceSpec::commensurate(0.5 * J1, -0.5 * J1, 1, -1).unwrap();
        let d = drift_vector(&quoted(), k0(), &f).unwrap();
        assert_eq!(d.contributing.len(), 4);
        let [j1, _, j3] = QUOTED_TRIANGULAR_HOPPINGS;
        let v = 2.0 * (j1 * 0.08f64.sin() + 2.0 * j3 * 0.16f64.sin());
        assert_relative_eq!(d.velocity()[0], v, max_relative = 1e-12);
        assert_relative_eq!(d.velocity()[1], v, max_relative = 1e-12);
        assert_relative_eq!(v, 0.00726, epsilon = 1e-5);
        assert_relative_eq!(d.displacement[0], 1.19, epsilon = 0.01);
    }

    /// Exhaustive search over coprime pairs; the continued-fraction result must match it.
    fn exhaustive(f: [f64; 2], q_max: i64) -> ((i64, i64), f64) {
        let mut best = ((0, 0), f64::INFINITY);
        for q in -q_max..=q_max {
            for r in -q_max..=q_max {
                if gcd(q, r) != 1 || f[0] * q as f64 + f[1] * r as f64 <= 0.0 {
                    continue;
                }
                let res = (f[0] * r as f64 - f[1] * q as f64).abs() / f[0].hypot(f[1]);
                if res < best.1 {
                    best = ((q, r), res);
                }
            }
        }
        best
    }

    #[test]
    fn rationalize_exact_directions() {
        let r = rationalize_force([0.5, -0.5], 10).unwrap();
        assert_eq!(r.direction(), (1, -1));
        assert_eq!(r.residual, 0.0);
        assert_eq!([r.force.f1, r.force.f2], [0.5, -0.5]);
        let r = rationalize_force([0.4, -0.8], 10).unwrap();
        assert_eq!(r.direction(), (1, -2));
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn rationalize_truncated_by_q_max() {
        let raw = [0.5050, -1.0];
        let r = rationalize_force(raw, 10).unwrap();
        let (dir, res) = exhaustive(raw, 10);
        assert_eq!(dir, (1, -2));
        assert_eq!(r.direction(), (1, -2));
        assert_relative_eq!(r.residual, res, max_relative = 1e-12);
        assert!(r.residual > 0.0);
        assert_relative_eq!(
            r.force.magnitude(),
            raw[0].hypot(raw[1]),
            max_relative = 1e-14
        );
        // a larger budget finds the exact direction 101/200
        let r = rationalize_force(raw, 200).unwrap();
        assert_eq!(r.direction(), (101, -200));
    }

    #[test]
    fn rationalize_rejects_zero() {
        assert!(rationalize_force([0.0, 0.0], 5).is_err());
        assert!(rationalize_force([1.0, 0.0], 0).is_err());
    }

    #[test]
    fn free_flight_without_force() {
        let j = quoted();
        let traj = semiclassical_trajectory(&j, k0(), &ForceSpec::zero(), 100.0, 10.0).unwrap();
        let v = j.group_velocity(k0());
        assert_eq!(traj.samples.len(), 11);
        for s in &traj.samples {
            assert_relative_eq!(s.r[0], v[0] * s.t, max_relative = 1e-12, epsilon = 1e-15);
            assert_relative_eq!(s.r[1], v[1] * s.t, max_relative = 1e-12, epsilon = 1e-15);
            assert_eq!(s.k, k0());
        }
    }

    #[test]
    fn orbit_stays_near_drift_line() {
        let j = quoted();
        let f = ForceSpec::commensurate(0.5 * J1, -0.5 * J1, 1, -1).unwrap();
        let drift = drift_vector(&j, k0(), &f).unwrap();
        let v = drift.velocity();
        let bound = oscillation_bound(&j, &f);
        let traj = semiclassical_trajectory(&j, k0(), &f, 5.0 * drift.period, 0.37).unwrap();
        let mut worst: f64 = 0.0;
        for s in &traj.samples {
            let dev = (s.r[0] - v[0] * s.t).hypot(s.r[1] - v[1] * s.t);
            worst = worst.max(dev);
        }
        assert!(worst <= bound, "{worst} > {bound}");
        assert!(worst > 0.1 * bound);
    }

    #[test]
    fn multiples_of_the_period() {
        let j = quoted();
        let f = ForceSpec::commensurate(0.4 * J1, -0.8 * J1, 1, -2).unwrap();
        let drift = drift_vector(&j, k0(), &f).unwrap();
        let traj =
            semiclassical_trajectory(&j, k0(), &f, 4.0 * drift.period, drift.period).unwrap();
        for (n, s) in traj.samples.iter().enumerate() {
            let n = n as f64;
            assert!((s.r[0] - n * drift.displacement[0]).abs() < 1e-11);
            assert!((s.r[1] - n * drift.displacement[1]).abs() < 1e-11);
            assert!((s.k.k1 - k0().k1).abs() < 1e-9 && (s.k.k2 - k0().k2).abs() < 1e-9);
        }
    }

    fn commensurate() -> impl Strategy<Value = ForceSpec> {
        (-4i64..=4, -4i64..=4, 0.01f64..0.2)
            .prop_filter("coprime", |(q, r, _)| gcd(*q, *r) == 1)
            .prop_map(|(q, r, mag)| {
                let s = mag / (q as f64).hypot(r as f64);
                ForceSpec::commensurate(s * q as f64, s * r as f64, q, r).unwrap()
            })
    }

    proptest! {
        #[test]
        fn closed_form_matches_drift_after_one_period(f in commensurate(),
                                                      k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
            let j = quoted();
            let k = WaveVector::new(k1, k2);
            let drift = drift_vector(&j, k, &f).unwrap();
            let d = closed_form_displacement(&j, k, &f, drift.period);
            prop_assert!((d[0] - drift.displacement[0]).abs() < 1e-12);
            prop_assert!((d[1] - drift.displacement[1]).abs() < 1e-12);
            let d3 = closed_form_displacement(&j, k, &f, 3.0 * drift.period);
            prop_assert!((d3[0] - 3.0 * d[0]).abs() < 1e-11);
            prop_assert!((d3[1] - 3.0 * d[1]).abs() < 1e-11);
        }

        #[test]
        fn drift_velocity_is_bounded(f in commensurate(), k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
            let j = quoted();
            let drift = drift_vector(&j, WaveVector::new(k1, k2), &f).unwrap();
            let v = drift.velocity();
            let bound: f64 = drift.contributing.iter().map(|&m| m.norm() * j.get(m).unwrap().abs()).sum();
            prop_assert!(v[0].hypot(v[1]) <= bound + 1e-15);
        }

        #[test]
        fn rationalize_agrees_with_exhaustive(a in -1.0f64..1.0, b in -1.0f64..1.0, q_max in 1i64..12) {
            prop_assume!(a.abs() > 1e-3 || b.abs() > 1e-3);
            let r = rationalize_force([a, b], q_max).unwrap();
            let (_, res) = exhaustive([a, b], q_max);
            prop_assert!((r.residual - res).abs() <= 1e-12, "{} vs {}", r.residual, res);
        }
    }
}
