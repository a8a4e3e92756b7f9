//! C ABI over the delayrl toolkit.
//!
//! Every function returns a [`DrlStatus`]; objects are opaque heap handles
//! released with their `_free` function. When a call fails, a description is
//! kept per thread and can be read with [`drl_last_error_message`]. Matrices
//! are exchanged row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use delayrl::augment::{build_for, DiscreteAugmentedSystem};
use delayrl::ddpg::{init_agent, load_agent, save_agent, AgentBundle, HyperParams};
use delayrl::env::{make_env, reward, CaseId, EnvConfig, Environment, PlantKind};
use delayrl::lti::{build_continuous, PlantParams};
use delayrl::sim::{Simulator, SimulatorConfig};
use delayrl::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Misaligned = 3,
    WidthMismatch = 4,
    InsufficientBuffer = 5,
    Format = 6,
    TooShort = 7,
    Unsupported = 8,
    Io = 9,
    /// The caller's output array is too small.
    BufferTooSmall = 10,
    Panic = 11,
}

/// Plant constants, delays (s) and actuator limit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrlPlantParams {
    pub t_p: f64,
    pub t_q: f64,
    pub k_z: f64,
    pub tau_i: f64,
    pub tau_o: f64,
    pub u_max: f64,
}

impl From<DrlPlantParams> for PlantParams {
    fn from(p: DrlPlantParams) -> Self {
        PlantParams {
            t_p: p.t_p,
            t_q: p.t_q,
            k_z: p.k_z,
            tau_i: p.tau_i,
            tau_o: p.tau_o,
            u_max: p.u_max,
        }
    }
}

impl From<PlantParams> for DrlPlantParams {
    fn from(p: PlantParams) -> Self {
        DrlPlantParams {
            t_p: p.t_p,
            t_q: p.t_q,
            k_z: p.k_z,
            tau_i: p.tau_i,
            tau_o: p.tau_o,
            u_max: p.u_max,
        }
    }
}

/// Opaque discrete augmented model.
pub struct DrlModel(DiscreteAugmentedSystem);
/// Opaque base-step simulator.
pub struct DrlSimulator(Simulator);
/// Opaque episodic environment.
pub struct DrlEnv(Environment);
/// Opaque agent.
pub struct DrlAgent(AgentBundle);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    TooSmall { what: &'static str, need: usize, got: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> DrlStatus {
    match e {
        Error::InvalidParameter { .. } => DrlStatus::InvalidParameter,
        Error::Misaligned { .. } => DrlStatus::Misaligned,
        Error::WidthMismatch { .. } => DrlStatus::WidthMismatch,
        Error::InsufficientBuffer { .. } => DrlStatus::InsufficientBuffer,
        Error::Format { .. } => DrlStatus::Format,
        Error::TooShort { .. } => DrlStatus::TooShort,
        Error::Unsupported(_) => DrlStatus::Unsupported,
        Error::Io { .. } => DrlStatus::Io,
    }
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DrlStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DrlStatus::NullPointer
        }
        Ok(Err(Failure::TooSmall { what, need, got })) => {
            set_error(format!("{what}: need {need} elements, got {got}"));
            DrlStatus::BufferTooSmall
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("panic: {msg}"));
            DrlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    if len < need {
        return Err(Failure::TooSmall { what, need, got: len });
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidParameter {
            name: "path",
            reason: "not valid UTF-8".into(),
        }))?;
    Ok(PathBuf::from(s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length
/// excluding the terminator. Passing a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn drl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static, NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn drl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn drl_plant_params_nominal() -> DrlPlantParams {
    PlantParams::nominal().into()
}

/// Step reward for position `z`, velocity `z_dot` and reference `z_ref`.
#[no_mangle]
pub extern "C" fn drl_reward(z: f64, z_dot: f64, z_ref: f64) -> f64 {
    reward(z, z_dot, z_ref)
}

/// Zero-order-hold transition over `t` seconds: `phi_out` receives the 3×3
/// state matrix, `gamma_out` the 3-vector input matrix.
///
/// # Safety
/// `params` must point to a valid struct; `phi_out` and `gamma_out` must be
/// valid for 9 and 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn drl_transition(
    params: *const DrlPlantParams,
    t: f64,
    phi_out: *mut f64,
    gamma_out: *mut f64,
) -> DrlStatus {
    guard(|| {
        let p: PlantParams = (*deref(params, "params")?).into();
        let (phi, gamma) = build_continuous(&p)?.transition(t)?;
        let phi_out = out_slice(phi_out, 9, 9, "phi_out")?;
        let gamma_out = out_slice(gamma_out, 3, 3, "gamma_out")?;
        for r in 0..3 {
            for c in 0..3 {
                phi_out[r * 3 + c] = phi[(r, c)];
            }
            gamma_out[r] = gamma[r];
        }
        Ok(())
    })
}

/// Builds the augmented model of `params` sampled at `h`.
///
/// # Safety
/// `params` must be valid; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn drl_model_build(params: *const DrlPlantParams, h: f64, out: *mut *mut DrlModel) -> DrlStatus {
    guard(|| {
        let p: PlantParams = (*deref(params, "params")?).into();
        store(out, DrlModel(build_for(&p, h)?))
    })
}

/// State dimension `n` and number of output rows `p` of `C_e`.
///
/// # Safety
/// `model` must come from `drl_model_build`; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn drl_model_dims(model: *const DrlModel, n: *mut usize, p: *mut usize) -> DrlStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        *deref_mut(n, "n")? = m.dim();
        *deref_mut(p, "p")? = m.c_e.nrows();
        Ok(())
    })
}

/// Copies `A_e` (n×n), `B_e` (n) and `C_e` (p×n) row-major. Any output
/// pointer may be null to skip it.
///
/// # Safety
/// Non-null outputs must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn drl_model_matrices(
    model: *const DrlModel,
    a_out: *mut f64,
    a_len: usize,
    b_out: *mut f64,
    b_len: usize,
    c_out: *mut f64,
    c_len: usize,
) -> DrlStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let n = m.dim();
        if !a_out.is_null() {
            let a = out_slice(a_out, a_len, n * n, "a_out")?;
            for r in 0..n {
                for c in 0..n {
                    a[r * n + c] = m.a_e[(r, c)];
                }
            }
        }
        if !b_out.is_null() {
            out_slice(b_out, b_len, n, "b_out")?.copy_from_slice(m.b_e.as_slice());
        }
        if !c_out.is_null() {
            let p = m.c_e.nrows();
            let c_slice = out_slice(c_out, c_len, p * n, "c_out")?;
            for r in 0..p {
                for c in 0..n {
                    c_slice[r * n + c] = m.c_e[(r, c)];
                }
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from `drl_model_build`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drl_model_free(model: *mut DrlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Simulator at rest with zero-filled delay lines. `base_step <= 0` selects
/// the default 0.5 ms.
///
/// # Safety
/// `params` must be valid; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn drl_simulator_new(
    params: *const DrlPlantParams,
    base_step: f64,
    out: *mut *mut DrlSimulator,
) -> DrlStatus {
    guard(|| {
        let mut cfg = SimulatorConfig::with_params((*deref(params, "params")?).into());
        if base_step > 0.0 {
            cfg.base_step = base_step;
        }
        store(out, DrlSimulator(Simulator::reset(&cfg)?))
    })
}

/// Holds `input` for `hold` seconds and writes the delayed measurement.
///
/// # Safety
/// `sim` must be valid; `measured_out` must be valid for 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn drl_simulator_step(
    sim: *mut DrlSimulator,
    input: f64,
    hold: f64,
    measured_out: *mut f64,
) -> DrlStatus {
    guard(|| {
        let sim = &mut deref_mut(sim, "sim")?.0;
        let out = out_slice(measured_out, 3, 3, "measured_out")?;
        let y = sim.step(input, hold)?;
        out.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// True plant state and clock.
///
/// # Safety
/// `sim` must be valid; `state_out` valid for 3 doubles; `clock` valid or null.
#[no_mangle]
pub unsafe extern "C" fn drl_simulator_state(sim: *const DrlSimulator, state_out: *mut f64, clock: *mut f64) -> DrlStatus {
    guard(|| {
        let sim = &deref(sim, "sim")?.0;
        out_slice(state_out, 3, 3, "state_out")?.copy_from_slice(sim.state().as_slice());
        if !clock.is_null() {
            *clock = sim.clock();
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or come from `drl_simulator_new`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drl_simulator_free(sim: *mut DrlSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Environment for `case` (1-4) on `plant` (0 training, 1 delay-free,
/// 2 delayed) with default settings.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn drl_env_new(case: u32, plant: u32, seed: u64, out: *mut *mut DrlEnv) -> DrlStatus {
    guard(|| {
        let case: CaseId = case.to_string().parse()?;
        let plant = match plant {
            0 => PlantKind::Training,
            1 => PlantKind::DelayFree,
            2 => PlantKind::Delayed,
            other => {
                return Err(Error::InvalidParameter {
                    name: "plant",
                    reason: format!("unknown plant code {other}"),
                }
                .into())
            }
        };
        let env = make_env(EnvConfig::on_plant(case, plant).with_seed(seed))?;
        store(out, DrlEnv(env))
    })
}

/// # Safety
/// `env` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drl_env_obs_width(env: *const DrlEnv, width: *mut usize) -> DrlStatus {
    guard(|| {
        *deref_mut(width, "width")? = deref(env, "env")?.0.obs_width();
        Ok(())
    })
}

/// # Safety
/// `env` must be valid; `obs_out` valid for `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn drl_env_reset(env: *mut DrlEnv, obs_out: *mut f64, obs_len: usize) -> DrlStatus {
    guard(|| {
        let env = &mut deref_mut(env, "env")?.0;
        let out = out_slice(obs_out, obs_len, env.obs_width(), "obs_out")?;
        out.copy_from_slice(&env.reset()?);
        Ok(())
    })
}

/// # Safety
/// `env` must be valid; `obs_out` valid for `obs_len` doubles; `reward_out`
/// and `done_out` valid.
#[no_mangle]
pub unsafe extern "C" fn drl_env_step(
    env: *mut DrlEnv,
    action: f64,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut bool,
) -> DrlStatus {
    guard(|| {
        let env = &mut deref_mut(env, "env")?.0;
        let out = out_slice(obs_out, obs_len, env.obs_width(), "obs_out")?;
        let reward_out = deref_mut(reward_out, "reward_out")?;
        let done_out = deref_mut(done_out, "done_out")?;
        let step = env.step(action)?;
        out.copy_from_slice(&step.observation);
        *reward_out = step.reward;
        *done_out = step.done;
        Ok(())
    })
}

/// # Safety
/// `env` must be null or come from `drl_env_new`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drl_env_free(env: *mut DrlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Freshly initialised agent with default hyperparameters.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn drl_agent_new(obs_width: usize, u_max: f64, seed: u64, out: *mut *mut DrlAgent) -> DrlStatus {
    guard(|| {
        let agent = init_agent(obs_width, u_max, HyperParams::for_action_scale(u_max), seed)?;
        store(out, DrlAgent(agent))
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn drl_agent_load(path: *const c_char, out: *mut *mut DrlAgent) -> DrlStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        store(out, DrlAgent(load_agent(&path)?))
    })
}

/// # Safety
/// `agent` must be valid; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn drl_agent_save(agent: *const DrlAgent, path: *const c_char) -> DrlStatus {
    guard(|| {
        let agent = &deref(agent, "agent")?.0;
        save_agent(agent, &path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `agent` and `width` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drl_agent_obs_width(agent: *const DrlAgent, width: *mut usize) -> DrlStatus {
    guard(|| {
        *deref_mut(width, "width")? = deref(agent, "agent")?.0.obs_width;
        Ok(())
    })
}

/// Deterministic action for `obs`.
///
/// # Safety
/// `agent` must be valid; `obs` valid for `obs_len` doubles; `action` valid.
#[no_mangle]
pub unsafe extern "C" fn drl_agent_act(
    agent: *const DrlAgent,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
) -> DrlStatus {
    guard(|| {
        let agent = &deref(agent, "agent")?.0;
        if obs.is_null() {
            return Err(Failure::Null("obs"));
        }
        let obs = std::slice::from_raw_parts(obs, obs_len);
        *deref_mut(action, "action")? = agent.policy(obs)?;
        Ok(())
    })
}

/// # Safety
/// `agent` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drl_agent_free(agent: *mut DrlAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}
