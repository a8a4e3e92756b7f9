//! Step-response and steady-state metrics of a closed-loop trajectory.

use super::Trajectory;
use crate::error::{Error, Result};

/// Shortest trajectory the metrics are defined for (s).
pub const MIN_SPAN: f64 = 8.0;
/// Length of the steady-state window at the end of the trajectory (s).
pub const SETTLE_WINDOW: f64 = 4.0;
/// Fraction of `u_max` counted as saturated.
pub const SATURATION_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub z_ref: f64,
    pub u_max: f64,
    pub settle_window: f64,
}

impl MetricsConfig {
    pub fn new(z_ref: f64, u_max: f64) -> Self {
        MetricsConfig {
            z_ref,
            u_max,
            settle_window: SETTLE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// 10 % → 90 % of `z_ref`; `None` when 90 % is never reached.
    pub rise_time: Option<f64>,
    /// Peak excess over `z_ref` as a fraction of `z_ref`.
    pub overshoot: f64,
    /// RMS of `z − z_ref` over the settle window.
    pub settle_rms_pos: f64,
    /// RMS of `ż` over the settle window.
    pub settle_rms_vel: f64,
    /// Half the peak-to-peak range of `z` over the settle window.
    pub settle_amplitude: f64,
    /// Sign flips between consecutive actions per second, over the settle window.
    pub action_sign_change_rate: f64,
    /// Fraction of settle-window steps with `|u| ≥ 0.99 u_max`.
    pub saturation_duty: f64,
    /// Mean spacing of `z = z_ref` crossings in the settle window, or
    /// infinity with fewer than two crossings.
    pub dominant_period: f64,
}

impl StepMetrics {
    pub const KEYS: [&'static str; 8] = [
        "rise_time",
        "overshoot",
        "settle_rms_pos",
        "settle_rms_vel",
        "settle_amplitude",
        "action_sign_change_rate",
        "saturation_duty",
        "dominant_period",
    ];

    /// Values in [`StepMetrics::KEYS`] order; an unreached rise time is NaN.
    pub fn values(&self) -> [f64; 8] {
        [
            self.rise_time.unwrap_or(f64::NAN),
            self.overshoot,
            self.settle_rms_pos,
            self.settle_rms_vel,
            self.settle_amplitude,
            self.action_sign_change_rate,
            self.saturation_duty,
            self.dominant_period,
        ]
    }
}

/// First time the linearly interpolated signal reaches `level` from below.
fn first_crossing(t: &[f64], z: &[f64], level: f64) -> Option<f64> {
    if z.first().is_some_and(|&z0| z0 >= level) {
        return t.first().copied();
    }
    z.windows(2).zip(t.windows(2)).find_map(|(zw, tw)| {
        (zw[0] < level && zw[1] >= level).then(|| tw[0] + (level - zw[0]) / (zw[1] - zw[0]) * (tw[1] - tw[0]))
    })
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Checks sampling and span, returning the sample period.
fn check_uniform(traj: &Trajectory) -> Result<f64> {
    let rows = &traj.rows;
    if rows.len() < 2 {
        return Err(Error::TooShort {
            span: 0.0,
            required: MIN_SPAN,
        });
    }
    let span = rows[rows.len() - 1].time - rows[0].time;
    let dt = span / (rows.len() - 1) as f64;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("trajectory", "time must increase"));
    }
    for (k, w) in rows.windows(2).enumerate() {
        if ((w[1].time - w[0].time) - dt).abs() > 1e-6 * dt {
            return Err(Error::invalid(
                "trajectory",
                format!("non-uniform sampling at row {}", k + 1),
            ));
        }
    }
    if span < MIN_SPAN - 1e-9 {
        return Err(Error::TooShort {
            span,
            required: MIN_SPAN,
        });
    }
    Ok(dt)
}

pub fn compute_metrics(traj: &Trajectory, cfg: &MetricsConfig) -> Result<StepMetrics> {
    check_uniform(traj)?;
    if !(cfg.z_ref.is_finite() && cfg.z_ref != 0.0) {
        return Err(Error::invalid("z_ref", "must be finite and non-zero"));
    }
    crate::lti::positive("u_max", cfg.u_max)?;
    crate::lti::positive("settle_window", cfg.settle_window)?;
    let rows = &traj.rows;
    let t: Vec<f64> = rows.iter().map(|r| r.time - rows[0].time).collect();
    // Normalise so the step is upward regardless of the sign of z_ref.
    let zn: Vec<f64> = rows.iter().map(|r| r.z / cfg.z_ref).collect();

    let t10 = first_crossing(&t, &zn, 0.1);
    let t90 = first_crossing(&t, &zn, 0.9);
    let rise_time = match (t10, t90) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let overshoot = (zn.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0).max(0.0);

    let t_end = *t.last().expect("at least two rows");
    let start = t.partition_point(|&ti| ti < t_end - cfg.settle_window - 1e-9);
    let window = &rows[start..];
    let tw = &t[start..];
    let duration = tw[tw.len() - 1] - tw[0];

    let settle_rms_pos = rms(window.iter().map(|r| r.z - cfg.z_ref));
    let settle_rms_vel = rms(window.iter().map(|r| r.z_dot));
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.z), hi.max(r.z)));
    let settle_amplitude = (hi - lo) / 2.0;

    let flips = window.windows(2).filter(|w| w[0].u * w[1].u < 0.0).count();
    let action_sign_change_rate = if duration > 0.0 { flips as f64 / duration } else { 0.0 };
    let saturated = window
        .iter()
        .filter(|r| r.u.abs() >= SATURATION_FRACTION * cfg.u_max)
        .count();
    let saturation_duty = saturated as f64 / window.len() as f64;

    let crossings: Vec<f64> = window
        .windows(2)
        .zip(tw.windows(2))
        .filter_map(|(w, tt)| {
            let (a, b) = (w[0].z - cfg.z_ref, w[1].z - cfg.z_ref);
            ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)).then(|| tt[0] + a / (a - b) * (tt[1] - tt[0]))
        })
        .collect();
    let dominant_period = if crossings.len() < 2 {
        f64::INFINITY
    } else {
        (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
    };

    Ok(StepMetrics {
        rise_time,
        overshoot,
        settle_rms_pos,
        settle_rms_vel,
        settle_amplitude,
        action_sign_change_rate,
        saturation_duty,
        dominant_period,
    })
}
