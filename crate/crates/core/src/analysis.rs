//! Post-processing of sampled trajectories.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Mean of a piecewise-linear signal over `[a, b]`.
fn window_mean(times: &[f64], values: &[f64], a: f64, b: f64) -> Result<f64> {
    if !(b > a) || times.len() < 2 || a < times[0] || b > times[times.len() - 1] {
        return Err(Error::param(
            "window",
            format!("[{a}, {b}] is not covered by the samples"),
        ));
    }
    let lerp = |t: f64| -> f64 {
        let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
        let (t0, t1) = (times[i - 1], times[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        values[i - 1] + w * (values[i] - values[i - 1])
    };
    let mut knots = vec![a];
    knots.extend(times.iter().copied().filter(|&t| t > a && t < b));
    knots.push(b);
    let area: f64 = knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (lerp(w[0]) + lerp(w[1])))
        .sum();
    Ok(area / (b - a))
}

/// Drift velocity from the centre of mass averaged over one period at each end of
/// `[t_start, t_stop]`.
///
/// Averaging over a full period removes the oscillating part, so the result is the
/// slope of the guiding centre.
pub fn period_averaged_velocity(
    times: &[f64],
    com: &[[f64; 2]],
    t_start: f64,
    t_stop: f64,
    period: f64,
) -> Result<[f64; 2]> {
    if times.len() != com.len() {
        return Err(Error::param("com", "length differs from times"));
    }
    if !(period > 0.0) || t_stop - t_start <= period {
        return Err(Error::param(
            "period",
            format!("{period} does not fit twice into [{t_start}, {t_stop}]"),
        ));
    }
    let span = t_stop - t_start - period;
    let mut v = [0.0; 2];
    for (c, vc) in v.iter_mut().enumerate() {
        let series: Vec<f64> = com.iter().map(|p| p[c]).collect();
        let head = window_mean(times, &series, t_start, t_start + period)?;
        let tail = window_mean(times, &series, t_stop - period, t_stop)?;
        *vc = (tail - head) / span;
    }
    Ok(v)
}

/// Least-squares line `(intercept, slope)`.
pub fn linear_fit(times: &[f64], values: &[f64]) -> (f64, f64) {
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let vm = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&t, &v) in times.iter().zip(values) {
        sxy += (t - tm) * (v - vm);
        sxx += (t - tm) * (t - tm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (vm - slope * tm, slope)
}

pub fn detrend(times: &[f64], values: &[f64]) -> Vec<f64> {
    let (c, s) = linear_fit(times, values);
    times
        .iter()
        .zip(values)
        .map(|(&t, &v)| v - c - s * t)
        .collect()
}

fn windowed_power(times: &[f64], values: &[f64], weights: &[f64], omega: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for ((&t, &v), &w) in times.iter().zip(values).zip(weights) {
        let (s, c) = (omega * t).sin_cos();
        re += w * v * c;
        im += w * v * s;
    }
    re * re + im * im
}

/// Period of the strongest oscillation in a detrended, Hann-windowed signal.
///
/// Periods shorter than `min_period` are ignored. The coarse scan has a resolution of a
/// quarter of the natural frequency spacing, and the peak is refined by golden-section search.
pub fn dominant_period(times: &[f64], values: &[f64], min_period: f64) -> Result<f64> {
    if times.len() < 8 || times.len() != values.len() {
        return Err(Error::param("values", "need at least 8 samples"));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    if !(span > 0.0) || !(min_period > 0.0) {
        return Err(Error::param("times", "need a positive time span"));
    }
    let signal = detrend(times, values);
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if signal.iter().all(|s| s.abs() <= 1e-12 * scale) {
        return Err(Error::param(
            "values",
            "signal has no oscillating component",
        ));
    }
    let weights: Vec<f64> = times
        .iter()
        .map(|&t| 0.5 - 0.5 * (TAU * (t - t0) / span).cos())
        .collect();
    let shifted: Vec<f64> = times.iter().map(|&t| t - t0).collect();
    let power = |w: f64| windowed_power(&shifted, &signal, &weights, w);

    let lo = TAU / span;
    let hi = TAU / min_period;
    let step = 0.25 * TAU / span;
    let mut best = (lo, power(lo));
    let mut w = lo;
    while w <= hi {
        let p = power(w);
        if p > best.1 {
            best = (w, p);
        }
        w += step;
    }
    if !(best.1 > 0.0) {
        return Err(Error::param(
            "values",
            "signal has no oscillating component",
        ));
    }
    let (mut a, mut b) = ((best.0 - step).max(0.5 * lo), best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut pc, mut pd) = (power(c), power(d));
    for _ in 0..80 {
        if pc > pd {
            b = d;
            d = c;
            pd = pc;
            c = b - g * (b - a);
            pc = power(c);
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + g * (b - a);
            pd = power(d);
        }
    }
    Ok(TAU / (0.5 * (a + b)))
}

pub fn peak_to_peak(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Angle in degrees between a vector and an undirected line, in `[0, 90]`.
pub fn angle_to_line(v: [f64; 2], line: [f64; 2]) -> f64 {
    let cross = v[0] * line[1] - v[1] * line[0];
    let dot = v[0] * line[0] + v[1] * line[1];
    let a = cross.abs().atan2(dot.abs());
    a * 180.0 / PI
}

/// Largest Euclidean distance between matched points of two paths.
pub fn max_deviation(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(0.0, f64::max)
}
