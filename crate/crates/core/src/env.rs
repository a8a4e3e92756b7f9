//! Step-following episodes over the simulator, one observation regime per case.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use nalgebra::DVector;

use crate::augment::{build_for, BlockKind, DiscreteAugmentedSystem};
use crate::error::{Error, Result};
use crate::lti::{decompose_delay, positive, PlantParams, StateVec};
use crate::sim::{steps_in, Simulator, SimulatorConfig, DEFAULT_BASE_STEP, DEFAULT_EPISODE_LENGTH};

/// Reward scaling coefficient.
pub const REWARD_SCALE: f64 = 100.0;
/// Weight of velocity in the cost vector.
pub const VELOCITY_WEIGHT: f64 = 0.1;
/// Fine sampling period of the delay-free case (s).
pub const FINE_PERIOD: f64 = 0.005;
/// Coarse sampling period, longer than the loop delay (s).
pub const COARSE_PERIOD: f64 = 0.06;
/// Loop delay of the delayed cases (s).
pub const LOOP_DELAY: f64 = 0.05;

/// `r = −c‖[z − z_ref, α ż]‖₂`.
pub fn reward(z: f64, z_dot: f64, z_ref: f64) -> f64 {
    -REWARD_SCALE * (z - z_ref).hypot(VELOCITY_WEIGHT * z_dot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    /// Delay-free plant, fine sampling, full state.
    CaseI,
    /// Output-delayed plant, coarse sampling, delayed measurement only.
    CaseII,
    /// Output-delayed plant, coarse sampling, delayed measurement and last input.
    CaseIII,
    /// Input-delayed plant, coarse sampling, measurement and last input.
    CaseIV,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::CaseI, CaseId::CaseII, CaseId::CaseIII, CaseId::CaseIV];

    pub fn sampling_period(self) -> f64 {
        match self {
            CaseId::CaseI => FINE_PERIOD,
            _ => COARSE_PERIOD,
        }
    }

    /// `(τᵢ, τₒ)` of the plant the case trains on.
    pub fn training_delays(self) -> (f64, f64) {
        match self {
            CaseId::CaseI => (0.0, 0.0),
            CaseId::CaseII | CaseId::CaseIII => (0.0, LOOP_DELAY),
            CaseId::CaseIV => (LOOP_DELAY, 0.0),
        }
    }

    /// `(τᵢ, τₒ)` of the delayed evaluation plant. Delay-free training
    /// assumes the whole loop delay sits on the output.
    pub fn delayed_plant(self) -> (f64, f64) {
        match self {
            CaseId::CaseI => (0.0, LOOP_DELAY),
            other => other.training_delays(),
        }
    }

    pub fn observes_last_input(self) -> bool {
        matches!(self, CaseId::CaseIII | CaseId::CaseIV)
    }

    pub fn obs_width(self) -> usize {
        if self.observes_last_input() {
            4
        } else {
            3
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            CaseId::CaseI => "i",
            CaseId::CaseII => "ii",
            CaseId::CaseIII => "iii",
            CaseId::CaseIV => "iv",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case_{}", self.short_name())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("case_").unwrap_or(&key);
        match key {
            "i" | "1" => Ok(CaseId::CaseI),
            "ii" | "2" => Ok(CaseId::CaseII),
            "iii" | "3" => Ok(CaseId::CaseIII),
            "iv" | "4" => Ok(CaseId::CaseIV),
            _ => Err(Error::invalid("case", format!("unknown case `{s}`"))),
        }
    }
}

/// Which plant an episode runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlantKind {
    /// The plant the case trains on.
    Training,
    DelayFree,
    Delayed,
}

impl PlantKind {
    pub fn delays(self, case: CaseId) -> (f64, f64) {
        match self {
            PlantKind::Training => case.training_delays(),
            PlantKind::DelayFree => (0.0, 0.0),
            PlantKind::Delayed => case.delayed_plant(),
        }
    }
}

impl FromStr for PlantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "training" => Ok(PlantKind::Training),
            "delay-free" | "delayfree" => Ok(PlantKind::DelayFree),
            "delayed" => Ok(PlantKind::Delayed),
            _ => Err(Error::invalid("plant", format!("unknown plant `{s}`"))),
        }
    }
}

impl fmt::Display for PlantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlantKind::Training => "training",
            PlantKind::DelayFree => "delay_free",
            PlantKind::Delayed => "delayed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub case: CaseId,
    /// Plant constants and delays; `for_case` fills the delays.
    pub params: PlantParams,
    pub z_ref: f64,
    pub episode_length: f64,
    pub seed: u64,
    pub base_step: f64,
    /// Observe `z − z_ref` instead of `z`.
    pub error_coordinates: bool,
}

impl EnvConfig {
    pub fn for_case(case: CaseId) -> Self {
        Self::on_plant(case, PlantKind::Training)
    }

    pub fn on_plant(case: CaseId, plant: PlantKind) -> Self {
        let (tau_i, tau_o) = plant.delays(case);
        EnvConfig {
            case,
            params: PlantParams::nominal().with_delays(tau_i, tau_o),
            z_ref: 1.0,
            episode_length: DEFAULT_EPISODE_LENGTH,
            seed: 0,
            base_step: DEFAULT_BASE_STEP,
            error_coordinates: false,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EnvConfig { seed, ..self }
    }

    pub fn sampling_period(&self) -> f64 {
        self.case.sampling_period()
    }
}

/// Agent-facing observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    sim: Simulator,
    period: f64,
    steps_per_episode: usize,
    step_index: usize,
    /// Saturated agent inputs, oldest first.
    input_history: VecDeque<f64>,
}

/// Validates the configuration and builds the environment.
pub fn make_env(config: EnvConfig) -> Result<Environment> {
    config.params.validate()?;
    positive("episode_length", config.episode_length)?;
    if !config.z_ref.is_finite() {
        return Err(Error::invalid("z_ref", "must be finite"));
    }
    let period = config.sampling_period();
    if config.case != CaseId::CaseI && period <= config.params.total_delay() {
        return Err(Error::invalid(
            "sampling_period",
            format!(
                "{} s must exceed the loop delay {} s for {}",
                period,
                config.params.total_delay(),
                config.case
            ),
        ));
    }
    steps_in("sampling period", period, config.base_step)?;
    let steps_per_episode = (config.episode_length / period).round() as usize;
    if steps_per_episode == 0 {
        return Err(Error::invalid("episode_length", "shorter than one sampling period"));
    }
    let sim_config = SimulatorConfig {
        base_step: config.base_step,
        params: config.params,
        episode_length: config.episode_length,
        initial_state: StateVec::zeros(),
    };
    let sim = Simulator::reset(&sim_config)?;
    let d_i = decompose_delay(config.params.tau_i, period)?.d;
    Ok(Environment {
        config,
        sim,
        period,
        steps_per_episode,
        step_index: 0,
        input_history: VecDeque::from(vec![0.0; d_i]),
    })
}

impl Environment {
    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn case(&self) -> CaseId {
        self.config.case
    }

    pub fn obs_width(&self) -> usize {
        self.config.case.obs_width()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn steps_per_episode(&self) -> usize {
        self.steps_per_episode
    }

    pub fn u_max(&self) -> f64 {
        self.config.params.u_max
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.period
    }

    /// True plant state.
    pub fn plant_state(&self) -> StateVec {
        self.sim.state()
    }

    /// Saturated input applied over the previous agent period.
    pub fn u_prev(&self) -> f64 {
        *self.input_history.back().unwrap_or(&0.0)
    }

    pub fn reset(&mut self) -> Result<Observation> {
        self.sim = Simulator::reset(self.sim.config())?;
        self.step_index = 0;
        self.input_history.iter_mut().for_each(|u| *u = 0.0);
        Ok(self.observe())
    }

    pub fn step(&mut self, action: f64) -> Result<StepResult> {
        if !action.is_finite() {
            return Err(Error::invalid("action", format!("must be finite, got {action}")));
        }
        let applied = self.sim.saturate(action);
        self.sim.step(action, self.period)?;
        self.input_history.pop_front();
        self.input_history.push_back(applied);
        self.step_index += 1;
        let x = self.sim.state();
        Ok(StepResult {
            observation: self.observe(),
            reward: reward(x[0], x[1], self.config.z_ref),
            done: self.step_index >= self.steps_per_episode,
        })
    }

    fn observe(&self) -> Observation {
        let y = self.sim.measured();
        let z = if self.config.error_coordinates {
            y[0] - self.config.z_ref
        } else {
            y[0]
        };
        let mut values = vec![z, y[1], y[2]];
        if self.config.case.observes_last_input() {
            values.push(self.u_prev());
        }
        Observation(values)
    }

    /// Discrete model of this environment's plant at its sampling period.
    pub fn model(&self) -> Result<DiscreteAugmentedSystem> {
        build_for(&self.config.params, self.period)
    }

    /// Current extended state laid out as in [`Environment::model`], read from
    /// the simulator's internals.
    pub fn extended_state(&self, model: &DiscreteAugmentedSystem) -> Result<DVector<f64>> {
        let base = self.config.base_step;
        let mut x_e = DVector::zeros(model.dim());
        for block in &model.layout.blocks {
            match block.kind {
                BlockKind::PlantState => {
                    x_e.rows_mut(block.offset, 3).copy_from(&self.sim.state());
                }
                BlockKind::DelayedOutputSnapshot | BlockKind::OutputHistory => {
                    let frac = model.output_delay()?.tau_frac;
                    let back = block.lag as f64 * self.period + frac;
                    let lag = steps_in("snapshot offset", back, base)?;
                    let past = self.sim.past_state(lag).ok_or_else(|| {
                        Error::Unsupported(format!("snapshot {lag} base steps back is not buffered"))
                    })?;
                    x_e.rows_mut(block.offset, 3).copy_from(&past);
                }
                BlockKind::InputHistory => {
                    let len = self.input_history.len();
                    x_e[block.offset] = if block.lag <= len {
                        self.input_history[len - block.lag]
                    } else {
                        0.0
                    };
                }
            }
        }
        Ok(x_e)
    }
}
