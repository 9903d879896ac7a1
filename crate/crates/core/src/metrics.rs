//! Transient-response metrics over logged time series.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseTime {
    pub seconds: f64,
    /// False when the 90 % level was never reached; `seconds` is then the horizon.
    pub reached: bool,
}

/// Largest excursion past `reference` on the side opposite the initial
/// error, in degrees. Zero if the series never crosses.
pub fn metric_overshoot(values: &[f64], reference: f64) -> f64 {
    let Some(direction) = values
        .iter()
        .map(|v| v - reference)
        .find(|e| *e != 0.0)
        .map(f64::signum)
    else {
        return 0.0;
    };
    let beyond = values
        .iter()
        .map(|v| direction * (reference - v))
        .fold(0.0, f64::max);
    beyond.to_degrees()
}

/// Time to go from 10 % to 90 % of the initial gap to `reference`, with
/// linear interpolation between samples.
pub fn metric_rise_time(times: &[f64], values: &[f64], reference: f64, horizon: f64) -> RiseTime {
    assert_eq!(times.len(), values.len(), "misaligned series");
    let Some(&x0) = values.first() else {
        return RiseTime {
            seconds: horizon,
            reached: false,
        };
    };
    let gap = x0 - reference;
    if gap == 0.0 {
        return RiseTime {
            seconds: 0.0,
            reached: true,
        };
    }
    let progress = |i: usize| (x0 - values[i]) / gap;
    let crossing = |level: f64| -> Option<f64> {
        let i = (0..values.len()).find(|&i| progress(i) >= level)?;
        if i == 0 {
            return Some(times[0]);
        }
        let (p0, p1) = (progress(i - 1), progress(i));
        let frac = (level - p0) / (p1 - p0);
        Some(times[i - 1] + frac * (times[i] - times[i - 1]))
    };
    match (crossing(0.1), crossing(0.9)) {
        (Some(lo), Some(hi)) => RiseTime {
            seconds: hi - lo,
            reached: true,
        },
        _ => RiseTime {
            seconds: horizon,
            reached: false,
        },
    }
}

/// Earliest sample time after which the series stays within `band` of
/// `reference`. A series that is outside the band at its last sample
/// reports that sample's time.
pub fn metric_settling_time(times: &[f64], values: &[f64], reference: f64, band: f64) -> f64 {
    assert_eq!(times.len(), values.len(), "misaligned series");
    match values.iter().rposition(|v| (v - reference).abs() > band) {
        None => times.first().copied().unwrap_or(0.0),
        Some(i) if i + 1 == values.len() => times[i],
        Some(i) => times[i + 1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyMode {
    /// Integral of the absolute mechanical power of each joint.
    #[default]
    Absolute,
    /// Net mechanical work.
    Signed,
}

/// Trapezoidal integral of joint mechanical power over uniformly spaced samples.
pub fn metric_energy(tau: &[[f64; 3]], qdot: &[[f64; 3]], dt: f64, mode: EnergyMode) -> f64 {
    assert_eq!(tau.len(), qdot.len(), "misaligned series");
    let power: Vec<f64> = tau
        .iter()
        .zip(qdot)
        .map(|(t, v)| {
            (0..3)
                .map(|j| match mode {
                    EnergyMode::Absolute => (t[j] * v[j]).abs(),
                    EnergyMode::Signed => t[j] * v[j],
                })
                .sum()
        })
        .collect();
    power.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
}

/// Largest perpendicular distance of a planar path from the chord joining
/// its first and last points.
pub fn max_chord_deviation(points: &[[f64; 2]]) -> f64 {
    signed_chord_offsets(points)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

/// Signed perpendicular offsets of each point from the start-end chord.
/// Degenerate chords fall back to the distance from the start point.
pub fn signed_chord_offsets(points: &[[f64; 2]]) -> Vec<f64> {
    let (Some(a), Some(b)) = (points.first(), points.last()) else {
        return Vec::new();
    };
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    points
        .iter()
        .map(|p| {
            let (px, py) = (p[0] - a[0], p[1] - a[1]);
            if len == 0.0 {
                px.hypot(py)
            } else {
                (dx * py - dy * px) / len
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn overshoot_cases() {
        let monotone: Vec<f64> = (0..100).map(|i| 1.0 - i as f64 / 100.0).collect();
        assert_eq!(metric_overshoot(&monotone, 0.0), 0.0);
        assert_eq!(metric_overshoot(&[0.0; 10], 0.0), 0.0);
        let peak = 2.5118_f64.to_radians();
        let crossing = [0.1, 0.05, 0.0, -peak / 2.0, -peak, -peak / 3.0, 0.0];
        assert_abs_diff_eq!(metric_overshoot(&crossing, 0.0), 2.5118, epsilon = 1e-12);
        // negative initial error overshoots upward
        assert_abs_diff_eq!(
            metric_overshoot(&[-0.2, 0.0, 0.01], 0.0),
            0.01f64.to_degrees(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rise_time_of_a_ramp() {
        let t = grid(101, 0.01);
        let v: Vec<f64> = t.iter().map(|&t| 1.0 - t).collect();
        let r = metric_rise_time(&t, &v, 0.0, 1.0);
        assert!(r.reached);
        assert_abs_diff_eq!(r.seconds, 0.8, epsilon = 1e-9);
    }

    #[test]
    fn rise_time_of_a_step() {
        let t = grid(50, 0.01);
        let mut v = vec![0.0; 50];
        v[0] = 1.0;
        let r = metric_rise_time(&t, &v, 0.0, 0.5);
        assert!(r.reached && r.seconds < 0.01);
    }

    #[test]
    fn rise_time_unreached_is_flagged() {
        let t = grid(10, 0.1);
        let v: Vec<f64> = t.iter().map(|&t| 1.0 - 0.5 * t).collect();
        let r = metric_rise_time(&t, &v, 0.0, 10.0);
        assert!(!r.reached);
        assert_eq!(r.seconds, 10.0);
    }

    #[test]
    fn settling_cases() {
        let t = grid(1000, 0.01);
        let never: Vec<f64> = t.iter().map(|&t| (t * 3.0).sin()).collect();
        assert_abs_diff_eq!(
            metric_settling_time(&t, &never, 0.0, 0.5f64.to_radians()),
            9.99,
            epsilon = 1e-12
        );
        assert_eq!(metric_settling_time(&t, &vec![0.0; 1000], 0.0, 0.01), 0.0);
        let enters: Vec<f64> = t
            .iter()
            .map(|&t| if t < 3.0 - 1e-9 { 1.0 } else { 0.0 })
            .collect();
        assert_abs_diff_eq!(
            metric_settling_time(&t, &enters, 0.0, 0.01),
            3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn energy_cases() {
        let n = 2001;
        let tau = vec![[1.0, 0.0, 0.0]; n];
        let qdot = vec![[1.0, 0.0, 0.0]; n];
        assert_abs_diff_eq!(
            metric_energy(&tau, &qdot, 1e-3, EnergyMode::Absolute),
            2.0,
            epsilon = 1e-9
        );
        assert_eq!(
            metric_energy(&tau, &vec![[0.0; 3]; n], 1e-3, EnergyMode::Absolute),
            0.0
        );
        let neg: Vec<_> = tau.iter().map(|t| t.map(|x| -x)).collect();
        assert_eq!(
            metric_energy(&neg, &qdot, 1e-3, EnergyMode::Absolute),
            metric_energy(&tau, &qdot, 1e-3, EnergyMode::Absolute)
        );
        assert_abs_diff_eq!(
            metric_energy(&neg, &qdot, 1e-3, EnergyMode::Signed),
            -2.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn chord_deviation() {
        let straight = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]];
        assert_abs_diff_eq!(max_chord_deviation(&straight), 0.0, epsilon = 1e-15);
        let bent = [[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]];
        assert_abs_diff_eq!(max_chord_deviation(&bent), 0.5, epsilon = 1e-15);
        let offs = signed_chord_offsets(&[[0.0, 0.0], [0.5, 0.2], [0.7, -0.1], [1.0, 0.0]]);
        assert!(offs[1] > 0.0 && offs[2] < 0.0);
    }
}
