//! Noiseless rollouts, trajectory files, metrics, reports and plots.

mod metrics;
mod plot;
mod report;

use std::path::{Path, PathBuf};

pub use metrics::{compute_metrics, MetricsConfig, StepMetrics, MIN_SPAN, SATURATION_FRACTION, SETTLE_WINDOW};
pub use plot::{emit_plot, render_svg};
pub use report::{compare_cases, CaseReport, Comparison, ReportRecord};

use crate::ddpg::{load_agent, AgentBundle};
use crate::env::{make_env, CaseId, EnvConfig, Environment, PlantKind};
use crate::error::{Error, Result};
use crate::sim::Sample;

pub const TRAJECTORY_HEADER: [&str; 6] = ["time", "z", "z_dot", "z_ddot", "u", "reward"];

/// One sample of a closed-loop or open-loop run. `u` is the input the plant
/// received over the interval ending at `time`; `reward` is evaluated at the
/// row's true state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub z: f64,
    pub z_dot: f64,
    pub z_ddot: f64,
    pub u: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    /// Simulator samples as rows; the measured state is recorded and the
    /// reward is left at zero.
    pub fn from_samples(samples: &[Sample]) -> Self {
        Trajectory {
            rows: samples
                .iter()
                .map(|s| TrajectoryRow {
                    time: s.time,
                    z: s.measured[0],
                    z_dot: s.measured[1],
                    z_ddot: s.measured[2],
                    u: s.applied,
                    reward: 0.0,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRAJECTORY_HEADER).expect("in-memory write");
        for r in &self.rows {
            let cells = [r.time, r.z, r.z_dot, r.z_ddot, r.u, r.reward].map(|v| format!("{v:?}"));
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rd
            .headers()
            .map_err(|e| Error::format(path, "header", e.to_string()))?
            .clone();
        if header.iter().ne(TRAJECTORY_HEADER) {
            return Err(Error::format(
                path,
                "header",
                format!("expected `{}`", TRAJECTORY_HEADER.join(",")),
            ));
        }
        let mut rows = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, format!("row {}", k + 1), e.to_string()))?;
            let mut v = [0.0; 6];
            for (i, cell) in rec.iter().enumerate() {
                v[i] = cell.parse().map_err(|e| {
                    Error::format(path, format!("row {} {}", k + 1, TRAJECTORY_HEADER[i]), format!("{e}"))
                })?;
            }
            rows.push(TrajectoryRow {
                time: v[0],
                z: v[1],
                z_dot: v[2],
                z_ddot: v[3],
                u: v[4],
                reward: v[5],
            });
        }
        Ok(Trajectory { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Trajectory::parse_csv(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Runs one episode with the deterministic policy, recording the true plant
/// state at every agent step.
pub fn rollout(agent: &AgentBundle, env: &mut Environment) -> Result<Trajectory> {
    if env.obs_width() != agent.obs_width {
        return Err(Error::WidthMismatch {
            expected: agent.obs_width,
            actual: env.obs_width(),
        });
    }
    let z_ref = env.config().z_ref;
    let row = |env: &Environment, u: f64| {
        let x = env.plant_state();
        TrajectoryRow {
            time: env.time(),
            z: x[0],
            z_dot: x[1],
            z_ddot: x[2],
            u,
            reward: crate::env::reward(x[0], x[1], z_ref),
        }
    };
    let mut obs = env.reset()?;
    let mut rows = vec![row(env, 0.0)];
    loop {
        let action = agent.policy(&obs)?;
        let step = env.step(action)?;
        rows.push(row(env, env.u_prev()));
        obs = step.observation;
        if step.done {
            break;
        }
    }
    Ok(Trajectory { rows })
}

/// Output locations for [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvalOutputs {
    pub report: PathBuf,
    pub trajectory: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Loads an agent, runs one noiseless episode of `case` on `plant`, writes
/// the trajectory (and optional plot) and the report.
pub fn evaluate(
    agent_path: &Path,
    env_config: EnvConfig,
    plant: PlantKind,
    out: &EvalOutputs,
) -> Result<CaseReport> {
    let agent = load_agent(agent_path)?;
    evaluate_agent(&agent, Some(agent_path), env_config, plant, out)
}

pub fn evaluate_agent(
    agent: &AgentBundle,
    agent_path: Option<&Path>,
    env_config: EnvConfig,
    plant: PlantKind,
    out: &EvalOutputs,
) -> Result<CaseReport> {
    let case: CaseId = env_config.case;
    let seed = env_config.seed;
    let metrics_cfg = MetricsConfig::new(env_config.z_ref, env_config.params.u_max);
    let mut env = make_env(env_config)?;
    let traj = rollout(agent, &mut env)?;
    let metrics = compute_metrics(&traj, &metrics_cfg)?;
    traj.save(&out.trajectory)?;
    if let Some(plot) = &out.plot {
        emit_plot(&traj, plot)?;
    }
    let report = CaseReport {
        case,
        eval_plant: plant,
        seed,
        agent_seed: agent.seed,
        metrics,
        trajectory_path: out.trajectory.clone(),
        agent_path: agent_path.map(Path::to_path_buf),
    };
    write_atomic(&out.report, report.to_text().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let t = Trajectory {
            rows: vec![
                TrajectoryRow {
                    time: 0.0,
                    z: 0.1 + 0.2,
                    z_dot: -1e-300,
                    z_ddot: 3.5,
                    u: 6.57,
                    reward: -100.0,
                },
                TrajectoryRow {
                    time: 0.06,
                    z: 1.0 / 3.0,
                    z_dot: 0.0,
                    z_ddot: -0.0,
                    u: -6.57,
                    reward: -66.0,
                },
            ],
        };
        let text = t.to_csv();
        assert!(text.starts_with("time,z,z_dot,z_ddot,u,reward\n"));
        let back = Trajectory::parse_csv(&text, Path::new("t.csv")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn bad_header_rejected() {
        let err = Trajectory::parse_csv("t,z\n0,1\n", Path::new("t.csv")).unwrap_err();
        assert!(matches!(&err, Error::Format { field, .. } if field == "header"));
    }
}
