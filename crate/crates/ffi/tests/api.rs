use std::ffi::{c_char, CString};
use std::ptr;

use delayrl_ffi::*;

fn last_error() -> String {
    let len = unsafe { drl_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; len + 1];
    unsafe { drl_last_error_message(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(len);
    String::from_utf8(buf).unwrap()
}

#[test]
fn transition_at_zero_is_identity() {
    let p = drl_plant_params_nominal();
    let mut phi = [0.0; 9];
    let mut gamma = [1.0; 3];
    let s = unsafe { drl_transition(&p, 0.0, phi.as_mut_ptr(), gamma.as_mut_ptr()) };
    assert_eq!(s, DrlStatus::Ok);
    for r in 0..3 {
        for c in 0..3 {
            assert!((phi[r * 3 + c] - if r == c { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
        assert!(gamma[r].abs() < 1e-14);
    }
}

#[test]
fn model_dimensions_and_matrices() {
    let p = DrlPlantParams {
        tau_i: 0.04,
        tau_o: 0.05,
        ..drl_plant_params_nominal()
    };
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { drl_model_build(&p, 0.03, &mut model) }, DrlStatus::Ok);
    let (mut n, mut rows) = (0usize, 0usize);
    assert_eq!(unsafe { drl_model_dims(model, &mut n, &mut rows) }, DrlStatus::Ok);
    assert_eq!(n, 11);

    let mut a = vec![f64::NAN; n * n];
    let mut b = vec![f64::NAN; n];
    let mut c = vec![f64::NAN; rows * n];
    let s = unsafe {
        drl_model_matrices(model, a.as_mut_ptr(), a.len(), b.as_mut_ptr(), b.len(), c.as_mut_ptr(), c.len())
    };
    assert_eq!(s, DrlStatus::Ok);
    assert!(a.iter().chain(&b).chain(&c).all(|v| v.is_finite()));

    let mut short = vec![0.0; n];
    let s = unsafe { drl_model_matrices(model, short.as_mut_ptr(), short.len(), ptr::null_mut(), 0, ptr::null_mut(), 0) };
    assert_eq!(s, DrlStatus::BufferTooSmall);
    assert!(last_error().contains("a_out"));
    unsafe { drl_model_free(model) };
}

#[test]
fn bad_parameters_map_to_status_codes() {
    let mut p = drl_plant_params_nominal();
    p.t_p = -1.0;
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { drl_model_build(&p, 0.03, &mut model) }, DrlStatus::InvalidParameter);
    assert!(model.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { drl_model_build(ptr::null(), 0.03, &mut model) }, DrlStatus::NullPointer);

    let p = DrlPlantParams {
        tau_o: 0.0502,
        ..drl_plant_params_nominal()
    };
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { drl_simulator_new(&p, 0.0, &mut sim) }, DrlStatus::Misaligned);

    let mut env = ptr::null_mut();
    assert_eq!(unsafe { drl_env_new(7, 0, 0, &mut env) }, DrlStatus::InvalidParameter);
    assert_eq!(unsafe { drl_env_new(1, 9, 0, &mut env) }, DrlStatus::InvalidParameter);
}

#[test]
fn simulator_holds_and_advances_clock() {
    let p = drl_plant_params_nominal();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { drl_simulator_new(&p, 0.0, &mut sim) }, DrlStatus::Ok);
    let mut y = [0.0; 3];
    assert_eq!(unsafe { drl_simulator_step(sim, 1.0, 0.5, y.as_mut_ptr()) }, DrlStatus::Ok);
    let mut x = [0.0; 3];
    let mut clock = 0.0;
    assert_eq!(unsafe { drl_simulator_state(sim, x.as_mut_ptr(), &mut clock) }, DrlStatus::Ok);
    assert!((clock - 0.5).abs() < 1e-12);
    assert_eq!(x, y);
    assert!(x[0] > 0.0);
    unsafe { drl_simulator_free(sim) };
}

#[test]
fn env_and_agent_round_trip() {
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { drl_env_new(3, 0, 5, &mut env) }, DrlStatus::Ok);
    let mut width = 0usize;
    assert_eq!(unsafe { drl_env_obs_width(env, &mut width) }, DrlStatus::Ok);
    assert_eq!(width, 4);
    let mut obs = vec![0.0; width];
    assert_eq!(unsafe { drl_env_reset(env, obs.as_mut_ptr(), obs.len()) }, DrlStatus::Ok);

    let p = drl_plant_params_nominal();
    let mut agent = ptr::null_mut();
    assert_eq!(unsafe { drl_agent_new(width, p.u_max, 11, &mut agent) }, DrlStatus::Ok);
    let mut action = 0.0;
    assert_eq!(unsafe { drl_agent_act(agent, obs.as_ptr(), obs.len(), &mut action) }, DrlStatus::Ok);
    assert!(action.abs() <= p.u_max);
    assert_eq!(unsafe { drl_agent_act(agent, obs.as_ptr(), 3, &mut action) }, DrlStatus::WidthMismatch);

    let (mut reward, mut done) = (0.0, true);
    let s = unsafe { drl_env_step(env, action, obs.as_mut_ptr(), obs.len(), &mut reward, &mut done) };
    assert_eq!(s, DrlStatus::Ok);
    assert!(reward <= 0.0);
    assert!(!done);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.agent").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { drl_agent_save(agent, path.as_ptr()) }, DrlStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { drl_agent_load(path.as_ptr(), &mut loaded) }, DrlStatus::Ok);
    let mut again = 0.0;
    unsafe { drl_agent_act(agent, obs.as_ptr(), obs.len(), &mut action) };
    unsafe { drl_agent_act(loaded, obs.as_ptr(), obs.len(), &mut again) };
    assert_eq!(action.to_bits(), again.to_bits());

    let missing = CString::new(dir.path().join("none.agent").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { drl_agent_load(missing.as_ptr(), &mut none) }, DrlStatus::Io);

    unsafe {
        drl_agent_free(agent);
        drl_agent_free(loaded);
        drl_env_free(env);
        drl_agent_free(ptr::null_mut());
    }
}

#[test]
fn error_message_truncates() {
    let mut model = ptr::null_mut();
    unsafe { drl_model_build(ptr::null(), 0.03, &mut model) };
    let full = last_error();
    let mut buf = [0x7fu8; 5];
    let len = unsafe { drl_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    assert_eq!(len, full.len());
    assert_eq!(&buf[..4], &full.as_bytes()[..4]);
    assert_eq!(buf[4], 0);
}

#[test]
fn reward_and_version() {
    assert_eq!(drl_reward(0.0, 0.0, 1.0), -100.0);
    let v = unsafe { std::ffi::CStr::from_ptr(drl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
