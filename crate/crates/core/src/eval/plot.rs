//! Self-contained SVG of position, velocity and action traces.

use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, Trajectory};
use crate::error::Result;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 160.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 24.0;
const GAP: f64 = 36.0;
const TICKS: usize = 5;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Panel<'a> {
    label: &'a str,
    values: Vec<f64>,
}

/// Renders the plot. Coordinates are printed with fixed precision so the
/// same trajectory always yields the same bytes.
pub fn render_svg(traj: &Trajectory) -> String {
    let time: Vec<f64> = traj.rows.iter().map(|r| r.time).collect();
    let (t0, t1) = match (time.first(), time.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let panels = [
        Panel {
            label: "z (m)",
            values: traj.rows.iter().map(|r| r.z).collect(),
        },
        Panel {
            label: "z_dot (m/s)",
            values: traj.rows.iter().map(|r| r.z_dot).collect(),
        },
        Panel {
            label: "u",
            values: traj.rows.iter().map(|r| r.u).collect(),
        },
    ];
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + GAP) + 8.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        let top = MARGIN_TOP + i as f64 * (PANEL_HEIGHT + GAP);
        let (lo, hi) = range(panel.values.iter().copied());
        let x = |t: f64| MARGIN_LEFT + (t - t0) / (t1 - t0) * plot_w;
        let y = |v: f64| top + (hi - v) / (hi - lo) * PANEL_HEIGHT;
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_LEFT:.2}" y="{top:.2}" width="{plot_w:.2}" height="{PANEL_HEIGHT:.2}" fill="none" stroke="#888"/>"##
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, MARGIN_LEFT, top - 6.0, panel.label);
        for k in 0..=TICKS {
            let v = lo + (hi - lo) * k as f64 / TICKS as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
                MARGIN_LEFT - 4.0,
                y(v) + 4.0,
                v
            );
            let t = t0 + (t1 - t0) * k as f64 / TICKS as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#,
                x(t),
                top + PANEL_HEIGHT + 14.0,
                t
            );
        }
        let mut points = String::new();
        for (t, v) in time.iter().zip(&panel.values) {
            let _ = write!(points, "{:.2},{:.2} ", x(*t), y(*v));
        }
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1" points="{}"/>"##,
            points.trim_end()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        height - 4.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(traj: &Trajectory, path: &Path) -> Result<()> {
    write_atomic(path, render_svg(traj).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::TrajectoryRow;

    fn flat(n: usize, dt: f64) -> Trajectory {
        Trajectory {
            rows: (0..n)
                .map(|k| TrajectoryRow {
                    time: k as f64 * dt,
                    z: 0.0,
                    z_dot: 0.0,
                    z_ddot: 0.0,
                    u: 0.0,
                    reward: -100.0,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_trajectory_plots_and_is_stable() {
        let t = flat(211, 0.06);
        let a = render_svg(&t);
        assert_eq!(a, render_svg(&t));
        assert_eq!(a.matches("<polyline").count(), 3);
        assert!(a.contains(">12.60</text>"), "x axis must end at the final time");
        assert!(a.contains(">0.00</text>"));
    }
}
