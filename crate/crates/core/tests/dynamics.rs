//! Tight-binding kinematics, semiclassical closed forms and the two exact propagators.

use std::f64::consts::{PI, TAU};

use bloch_core::evolution::{
    gaussian_packet, rk4_evolve, spectral_propagate, EvolutionConfig, TiltedHamiltonian,
};
use bloch_core::lattice::QUOTED_TRIANGULAR_HOPPINGS;
use bloch_core::semiclassics::{closed_form_displacement, drift_vector, semiclassical_trajectory};
use bloch_core::{ForceSpec, HoppingSet, Offset, WaveVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rustfft::FftPlanner;

fn quoted() -> HoppingSet {
    HoppingSet::triangular(QUOTED_TRIANGULAR_HOPPINGS)
}

fn random_set() -> impl Strategy<Value = HoppingSet> {
    prop::collection::vec(((-3i32..=3, -3i32..=3), -0.2f64..0.2), 1..8).prop_filter_map(
        "needs a non-origin offset",
        |pairs| {
            let pairs: Vec<_> = pairs.into_iter().filter(|(m, _)| *m != (0, 0)).collect();
            if pairs.is_empty() {
                None
            } else {
                HoppingSet::symmetric(pairs).ok()
            }
        },
    )
}

fn coprime() -> impl Strategy<Value = (i64, i64)> {
    (-4i64..=4, -4i64..=4).prop_filter("coprime", |&(q, r)| bloch_core::lattice::gcd(q, r) == 1)
}

/// Composite Simpson rule on `n` (even) panels.
fn simpson(f: impl Fn(f64) -> [f64; 2], a: f64, b: f64, n: usize) -> [f64; 2] {
    let h = (b - a) / n as f64;
    let mut s = [0.0; 2];
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(a + i as f64 * h);
        s[0] += w * v[0];
        s[1] += w * v[1];
    }
    [s[0] * h / 3.0, s[1] * h / 3.0]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn group_velocity_is_the_gradient(set in random_set(), k1 in -PI..PI, k2 in -PI..PI) {
        let h = 1e-5;
        let e = |a: f64, b: f64| set.dispersion_energy(WaveVector::new(a, b));
        let fd = [
            (e(k1 + h, k2) - e(k1 - h, k2)) / (2.0 * h),
            (e(k1, k2 + h) - e(k1, k2 - h)) / (2.0 * h),
        ];
        let v = set.group_velocity(WaveVector::new(k1, k2));
        let scale = set.total_abs().max(1e-3);
        for c in 0..2 {
            prop_assert!((v[c] - fd[c]).abs() < 1e-6 * scale, "{:?} vs {:?}", v, fd);
        }
    }

    #[test]
    fn dispersion_is_even_and_periodic(set in random_set(), k1 in -PI..PI, k2 in -PI..PI, n1 in -3i32..3, n2 in -3i32..3) {
        let e = set.dispersion_energy(WaveVector::new(k1, k2));
        let back = set.dispersion_energy(WaveVector::new(-k1, -k2));
        let shifted = set.dispersion_energy(WaveVector::new(k1 + TAU * f64::from(n1), k2 + TAU * f64::from(n2)));
        prop_assert!((e - back).abs() < 1e-14);
        prop_assert!((e - shifted).abs() < 1e-12);
    }

    #[test]
    fn closed_form_over_a_period_is_the_drift(
        (q, r) in coprime(),
        mag in 0.01f64..0.2,
        k1 in -PI..PI,
        k2 in -PI..PI,
    ) {
        let n = (q as f64).hypot(r as f64);
        let force = ForceSpec::commensurate(mag * q as f64 / n, mag * r as f64 / n, q, r).unwrap();
        let k0 = WaveVector::new(k1, k2);
        let d = drift_vector(&quoted(), k0, &force).unwrap();
        let c = closed_form_displacement(&quoted(), k0, &force, d.period);
        for i in 0..2 {
            prop_assert!((c[i] - d.displacement[i]).abs() < 1e-9 * (1.0 + d.displacement[i].abs()), "{:?} vs {:?}", c, d.displacement);
        }
        // The drift always lies along the integer line perpendicular to the force.
        let cross = d.displacement[0] * d.line.1 as f64 - d.displacement[1] * d.line.0 as f64;
        prop_assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn closed_form_integrates_the_group_velocity(
        f1 in -0.2f64..0.2,
        f2 in -0.2f64..0.2,
        k1 in -PI..PI,
        k2 in -PI..PI,
        t in 0.0f64..300.0,
    ) {
        let force = ForceSpec::new(f1, f2);
        let k0 = WaveVector::new(k1, k2);
        let set = quoted();
        let exact = closed_form_displacement(&set, k0, &force, t);
        let quad = simpson(|s| set.group_velocity(k0.shifted(&force, s)), 0.0, t, 40_000);
        for i in 0..2 {
            prop_assert!((exact[i] - quad[i]).abs() < 1e-7, "{:?} vs {:?}", exact, quad);
        }
    }
}

#[test]
fn semiclassical_samples_follow_the_closed_form() {
    let force = ForceSpec::commensurate(0.4 * 0.0765, -0.8 * 0.0765, 1, -2).unwrap();
    let k0 = WaveVector::new(0.05, 0.03);
    let traj = semiclassical_trajectory(&quoted(), k0, &force, 400.0, 2.5).unwrap();
    assert_eq!(traj.samples.len(), 161);
    for s in &traj.samples {
        assert_eq!(s.r, closed_form_displacement(&quoted(), k0, &force, s.t));
        let k = k0.shifted(&force, s.t);
        for (a, b) in [(s.k.k1, k.k1), (s.k.k2, k.k2)] {
            assert!((-PI..PI).contains(&a));
            assert!(((a - b) / TAU - ((a - b) / TAU).round()).abs() < 1e-12);
        }
    }
}

#[test]
fn packet_spectrum_peaks_at_the_nearest_grid_momentum() {
    let side = 61;
    for k0 in [
        WaveVector::new(0.05, 0.03),
        WaveVector::new(0.9, -1.3),
        WaveVector::new(-2.0, 2.5),
    ] {
        let psi = gaussian_packet(side, 8.0, k0).unwrap();
        let mut rows: Vec<Complex64> = psi.amplitudes().to_vec();
        let fft = FftPlanner::new().plan_fft_forward(side);
        for row in rows.chunks_mut(side) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); side];
        for c in 0..side {
            for r in 0..side {
                col[r] = rows[r * side + c];
            }
            fft.process(&mut col);
            for r in 0..side {
                rows[r * side + c] = col[r];
            }
        }
        let (peak, _) = rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .unwrap();
        // A forward transform maps exp(i k m) to the bin k L / 2π, independent of where
        // the grid starts.
        let nearest =
            |k: f64| ((k * side as f64 / TAU).round() as i64).rem_euclid(side as i64) as usize;
        assert_eq!(
            (peak / side, peak % side),
            (nearest(k0.k1), nearest(k0.k2)),
            "k0 = {k0:?}"
        );
    }
}

#[test]
fn propagators_agree_on_a_small_grid() {
    let (side, sigma) = (61, 5.0);
    let k0 = WaveVector::new(0.05, 0.03);
    let set = quoted();
    let force = ForceSpec::commensurate(0.5 * 0.0765, -0.5 * 0.0765, 1, -1).unwrap();
    let psi = gaussian_packet(side, sigma, k0).unwrap();
    let h = TiltedHamiltonian::new(&set, &force, side).unwrap();
    let t = 60.0;
    let cfg = EvolutionConfig::for_hamiltonian(&h, t, 10.0);
    let rk4 = rk4_evolve(&psi, &h, &cfg).unwrap();
    let exact = spectral_propagate(&psi, &set, &force, t).unwrap();
    let overlap = rk4.state.inner(&exact).norm();
    assert!(overlap > 1.0 - 1e-8, "overlap {overlap}");
    let (a, b) = (
        rk4.state.center_of_mass().unwrap(),
        exact.center_of_mass().unwrap(),
    );
    assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-6);
    assert!(
        rk4.record.max_norm_drift() < 1e-8,
        "{}",
        rk4.record.max_norm_drift()
    );
    assert!(
        rk4.record.max_energy_drift() < 1e-8,
        "{}",
        rk4.record.max_energy_drift()
    );
}

#[test]
fn static_lattice_has_no_drift_along_one_axis() {
    // A single chain along (1,0) with a force along it: Bloch oscillation returns the packet.
    let chain = HoppingSet::symmetric([(Offset::new(1, 0), 0.1)]).unwrap();
    let force = ForceSpec::commensurate(0.03, 0.0, 1, 0).unwrap();
    for k in [0.0, 0.4, -1.1, 2.9] {
        let d = drift_vector(&chain, WaveVector::new(k, 0.3), &force).unwrap();
        assert_eq!(d.displacement, [0.0, 0.0]);
        assert!(d.contributing.is_empty());
    }
}
