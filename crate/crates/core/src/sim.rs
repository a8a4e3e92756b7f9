//! Fixed-step simulator of the delayed, saturated altitude plant.
//!
//! The plant advances on a 0.5 ms base step using the exact per-step
//! discretization, with the commanded input saturated and then delayed
//! through a ring buffer, and the measurement taken from a ring buffer of
//! past states.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lti::{build_continuous, positive, PlantParams, StateVec};
use nalgebra::{Matrix3, Vector3};

pub const DEFAULT_BASE_STEP: f64 = 0.0005;
pub const DEFAULT_EPISODE_LENGTH: f64 = 12.6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub base_step: f64,
    pub params: PlantParams,
    pub episode_length: f64,
    pub initial_state: StateVec,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            base_step: DEFAULT_BASE_STEP,
            params: PlantParams::nominal(),
            episode_length: DEFAULT_EPISODE_LENGTH,
            initial_state: StateVec::zeros(),
        }
    }
}

impl SimulatorConfig {
    pub fn with_params(params: PlantParams) -> Self {
        SimulatorConfig {
            params,
            ..Default::default()
        }
    }
}

/// Number of whole base steps in `duration`, or an alignment error.
pub fn steps_in(what: &'static str, duration: f64, base_step: f64) -> Result<usize> {
    let n = (duration / base_step).round();
    if !duration.is_finite() || n < 0.0 || (n * base_step - duration).abs() > 1e-9 * base_step.max(duration) {
        return Err(Error::Misaligned {
            what,
            value: duration,
            step: base_step,
        });
    }
    Ok(n as usize)
}

/// One base-step sample of an open-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// True plant state.
    pub state: StateVec,
    /// Measurement, delayed by `τₒ`.
    pub measured: StateVec,
    /// Input the plant received over the preceding base step (0 at `t = 0`).
    pub applied: f64,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimulatorConfig,
    phi: Matrix3<f64>,
    gamma: Vector3<f64>,
    x: StateVec,
    /// Saturated commands awaiting delivery, oldest first.
    input_buffer: VecDeque<f64>,
    /// Past states, oldest first.
    output_buffer: VecDeque<StateVec>,
    ticks: u64,
    last_applied: f64,
}

impl Simulator {
    /// Plant at `initial_state`, buffers filled with zeros, clock at 0.
    pub fn reset(config: &SimulatorConfig) -> Result<Self> {
        config.params.validate()?;
        positive("base_step", config.base_step)?;
        positive("episode_length", config.episode_length)?;
        let n_in = steps_in("tau_i", config.params.tau_i, config.base_step)?;
        let n_out = steps_in("tau_o", config.params.tau_o, config.base_step)?;
        let (phi, gamma) = build_continuous(&config.params)?.transition(config.base_step)?;
        Ok(Simulator {
            config: config.clone(),
            phi,
            gamma,
            x: config.initial_state,
            input_buffer: VecDeque::from(vec![0.0; n_in]),
            output_buffer: VecDeque::from(vec![StateVec::zeros(); n_out]),
            ticks: 0,
            last_applied: 0.0,
        })
    }

    pub fn config(&self) -> &SimulatorConfig {
        &self.config
    }

    pub fn state(&self) -> StateVec {
        self.x
    }

    pub fn clock(&self) -> f64 {
        self.ticks as f64 * self.config.base_step
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn input_buffer_len(&self) -> usize {
        self.input_buffer.len()
    }

    pub fn output_buffer_len(&self) -> usize {
        self.output_buffer.len()
    }

    pub fn last_applied(&self) -> f64 {
        self.last_applied
    }

    /// `x(t − τₒ)`.
    pub fn measured(&self) -> StateVec {
        self.output_buffer.front().copied().unwrap_or(self.x)
    }

    /// State `lag` base steps in the past, for `lag ≤ τₒ / base_step`.
    pub fn past_state(&self, lag: usize) -> Option<StateVec> {
        if lag == 0 {
            return Some(self.x);
        }
        let len = self.output_buffer.len();
        (lag <= len).then(|| self.output_buffer[len - lag])
    }

    pub fn saturate(&self, u: f64) -> f64 {
        let limit = self.config.params.u_max;
        u.clamp(-limit, limit)
    }

    fn tick(&mut self, command: f64) {
        let applied = if self.input_buffer.is_empty() {
            command
        } else {
            let out = self.input_buffer.pop_front().unwrap_or(0.0);
            self.input_buffer.push_back(command);
            out
        };
        if !self.output_buffer.is_empty() {
            self.output_buffer.pop_front();
            self.output_buffer.push_back(self.x);
        }
        self.x = self.phi * self.x + self.gamma * applied;
        self.last_applied = applied;
        self.ticks += 1;
    }

    /// Holds `commanded_input` for `hold_duration` and returns the delayed
    /// measurement at the end of the hold.
    pub fn step(&mut self, commanded_input: f64, hold_duration: f64) -> Result<StateVec> {
        let n = steps_in("hold_duration", hold_duration, self.config.base_step)?;
        if n == 0 {
            return Err(Error::invalid("hold_duration", "must be at least one base step"));
        }
        let command = self.saturate(commanded_input);
        for _ in 0..n {
            self.tick(command);
        }
        Ok(self.measured())
    }

    fn sample(&self) -> Sample {
        Sample {
            time: self.clock(),
            state: self.x,
            measured: self.measured(),
            applied: self.last_applied,
        }
    }
}

/// Drives the plant through `(input, duration)` segments and records every
/// base step, starting with the initial sample.
pub fn run_open_loop(config: &SimulatorConfig, schedule: &[(f64, f64)]) -> Result<Vec<Sample>> {
    let mut sim = Simulator::reset(config)?;
    let mut out = vec![sim.sample()];
    for &(input, duration) in schedule {
        let n = steps_in("schedule duration", duration, config.base_step)?;
        let command = sim.saturate(input);
        for _ in 0..n {
            sim.tick(command);
            out.push(sim.sample());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(tau_i: f64, tau_o: f64) -> SimulatorConfig {
        SimulatorConfig::with_params(PlantParams::nominal().with_delays(tau_i, tau_o))
    }

    #[test]
    fn reset_fills_buffers() {
        let sim = Simulator::reset(&SimulatorConfig::default()).unwrap();
        assert_eq!(sim.measured(), StateVec::zeros());
        assert_eq!(sim.clock(), 0.0);

        let sim = Simulator::reset(&config(0.0, 0.05)).unwrap();
        assert_eq!(sim.output_buffer_len(), 100);
        assert_eq!(sim.input_buffer_len(), 0);

        let err = Simulator::reset(&config(0.0, 0.0503)).unwrap_err();
        assert!(matches!(err, Error::Misaligned { what: "tau_o", .. }), "{err}");
    }

    #[test]
    fn zero_input_keeps_rest() {
        let mut sim = Simulator::reset(&config(0.01, 0.05)).unwrap();
        for _ in 0..20 {
            assert_eq!(sim.step(0.0, 0.06).unwrap(), StateVec::zeros());
        }
        assert_eq!(sim.state(), StateVec::zeros());
    }

    #[test]
    fn hold_equals_closed_form() {
        let x0 = StateVec::new(0.2, -0.4, 1.0);
        let cfg = SimulatorConfig {
            initial_state: x0,
            ..Default::default()
        };
        let mut sim = Simulator::reset(&cfg).unwrap();
        sim.step(1.7, 0.06).unwrap();
        let cont = build_continuous(&cfg.params).unwrap();
        let exact = cont.phi(0.06).unwrap() * x0 + cont.gamma(0.06).unwrap() * 1.7;
        assert!((sim.state() - exact).amax() <= 1e-10);
    }

    #[test]
    fn command_is_saturated() {
        let mut sim = Simulator::reset(&SimulatorConfig::default()).unwrap();
        sim.step(10.0, 0.0005).unwrap();
        assert_eq!(sim.last_applied(), 6.57);
        sim.step(-10.0, 0.0005).unwrap();
        assert_eq!(sim.last_applied(), -6.57);
    }

    #[test]
    fn misaligned_hold_rejected() {
        let mut sim = Simulator::reset(&SimulatorConfig::default()).unwrap();
        assert!(sim.step(1.0, 0.0007).is_err());
        assert!(sim.step(1.0, 0.0).is_err());
    }

    #[test]
    fn one_hold_equals_many_base_steps() {
        let cfg = config(0.01, 0.025);
        let mut a = Simulator::reset(&cfg).unwrap();
        let mut b = Simulator::reset(&cfg).unwrap();
        for (k, u) in [0.5, -2.0, 8.0, 1.0].into_iter().enumerate() {
            let ya = a.step(u, 0.06).unwrap();
            let mut yb = StateVec::zeros();
            for _ in 0..120 {
                yb = b.step(u, 0.0005).unwrap();
            }
            assert_eq!(ya, yb, "hold {k}");
            assert_eq!(a.state(), b.state());
        }
    }

    #[test]
    fn open_loop_examples() {
        let out = run_open_loop(&SimulatorConfig::default(), &[]).unwrap();
        assert_eq!(out.len(), 1);

        let out = run_open_loop(&SimulatorConfig::default(), &[(1.0, 6.0)]).unwrap();
        let v = out.last().unwrap().state[1];
        assert!((v / 0.84 - 1.0).abs() < 0.02, "velocity {v}");
    }

    #[test]
    fn output_delay_shifts_measurement_only() {
        let schedule = [(1.0, 0.1), (-3.0, 0.25), (2.0, 0.4)];
        let free = run_open_loop(&config(0.0, 0.0), &schedule).unwrap();
        let delayed = run_open_loop(&config(0.0, 0.05), &schedule).unwrap();
        for (k, (f, d)) in free.iter().zip(&delayed).enumerate() {
            assert_eq!(f.state, d.state);
            let expect = if k >= 100 { free[k - 100].state } else { StateVec::zeros() };
            assert_eq!(d.measured, expect);
        }
    }

    #[test]
    fn input_delay_equals_shifted_schedule() {
        let schedule = [(1.0, 0.1), (-3.0, 0.25), (2.0, 0.4)];
        let delayed = run_open_loop(&config(0.025, 0.0), &schedule).unwrap();
        let mut shifted = vec![(0.0, 0.025)];
        shifted.extend_from_slice(&schedule);
        let reference = run_open_loop(&config(0.0, 0.0), &shifted).unwrap();
        for (d, r) in delayed.iter().zip(&reference) {
            assert!((d.measured - r.measured).amax() <= 1e-12);
        }
    }

    #[test]
    fn saturation_bounds_every_base_step() {
        let schedule = [(100.0, 0.05), (-50.0, 0.05), (3.0, 0.05)];
        for s in run_open_loop(&config(0.01, 0.0), &schedule).unwrap() {
            assert!(s.applied.abs() <= 6.57);
        }
    }

    #[test]
    fn position_held_without_input() {
        let cfg = SimulatorConfig {
            initial_state: StateVec::new(2.5, 0.0, 0.0),
            ..Default::default()
        };
        for s in run_open_loop(&cfg, &[(0.0, 1.0)]).unwrap() {
            assert!((s.state - StateVec::new(2.5, 0.0, 0.0)).amax() <= 1e-12);
        }
    }
}
