//! Flat `key = value` configuration with `DELAYRL_*` environment overrides.
//!
//! Keys are the field names of the plant, simulator, environment and
//! hyperparameter types (`t_p`, `tau_o`, `base_step`, `z_ref`, `lr_actor`,
//! `actor_hidden`, ...). Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ddpg::HyperParams;
use crate::env::{CaseId, EnvConfig, PlantKind};
use crate::error::{Error, Result};
use crate::lti::{PlantParams, StateVec};
use crate::sim::SimulatorConfig;

pub const ENV_PREFIX: &str = "DELAYRL_";

const PLANT_KEYS: &[&str] = &["t_p", "t_q", "k_z", "tau_i", "tau_o", "u_max"];
const SIM_KEYS: &[&str] = &["base_step", "episode_length", "initial_state"];
const ENV_KEYS: &[&str] = &["case", "plant", "z_ref", "seed", "error_coordinates"];
const HYPER_KEYS: &[&str] = &[
    "polyak",
    "discount",
    "lr_actor",
    "lr_critic",
    "buffer_capacity",
    "batch_size",
    "ou_theta",
    "ou_sigma",
    "ou_dt",
    "episodes",
    "actor_hidden",
    "critic_state_hidden",
    "critic_action_hidden",
    "critic_trunk_hidden",
];

pub fn known_keys() -> impl Iterator<Item = &'static str> {
    PLANT_KEYS
        .iter()
        .chain(SIM_KEYS)
        .chain(ENV_KEYS)
        .chain(HYPER_KEYS)
        .copied()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Where each value came from, for error messages.
    origin: BTreeMap<String, PathBuf>,
}

impl Config {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(source, format!("line {}", n + 1), "expected `key = value`"))?;
            let key = key.trim().to_ascii_lowercase();
            if !known_keys().any(|k| k == key) {
                return Err(Error::format(source, key, "unknown key"));
            }
            cfg.values.insert(key.clone(), value.trim().to_string());
            cfg.origin.insert(key, source.to_path_buf());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text, path)
    }

    /// Overlays `DELAYRL_<KEY>` variables from the process environment.
    pub fn with_env_overrides(self) -> Self {
        self.with_overrides(|name| std::env::var(name).ok())
    }

    pub fn with_overrides(mut self, lookup: impl Fn(&str) -> Option<String>) -> Self {
        for key in known_keys() {
            let var = format!("{ENV_PREFIX}{}", key.to_ascii_uppercase());
            if let Some(v) = lookup(&var) {
                self.values.insert(key.to_string(), v.trim().to_string());
                self.origin.insert(key.to_string(), PathBuf::from(format!("${var}")));
            }
        }
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
        self.origin.insert(key.to_string(), PathBuf::from("<cli>"));
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn err(&self, key: &str, reason: String) -> Error {
        let origin = self.origin.get(key).cloned().unwrap_or_default();
        Error::format(origin, key, reason)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get_raw(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| self.err(key, format!("cannot parse `{raw}`: {e}")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get_raw(key)
            .map(|raw| {
                raw.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| self.err(key, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn widths(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get_raw(key)
            .map(|raw| {
                if raw.trim() == "-" {
                    return Ok(Vec::new());
                }
                raw.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|e| self.err(key, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn apply_plant(&self, p: &mut PlantParams) -> Result<()> {
        let fields: [(&str, &mut f64); 6] = [
            ("t_p", &mut p.t_p),
            ("t_q", &mut p.t_q),
            ("k_z", &mut p.k_z),
            ("tau_i", &mut p.tau_i),
            ("tau_o", &mut p.tau_o),
            ("u_max", &mut p.u_max),
        ];
        for (key, slot) in fields {
            if let Some(v) = self.get(key)? {
                *slot = v;
            }
        }
        Ok(())
    }

    pub fn simulator(&self) -> Result<SimulatorConfig> {
        let mut cfg = SimulatorConfig::default();
        self.apply_plant(&mut cfg.params)?;
        if let Some(v) = self.get("base_step")? {
            cfg.base_step = v;
        }
        if let Some(v) = self.get("episode_length")? {
            cfg.episode_length = v;
        }
        if let Some(v) = self.list("initial_state")? {
            if v.len() != 3 {
                return Err(self.err("initial_state", format!("needs 3 values, got {}", v.len())));
            }
            cfg.initial_state = StateVec::new(v[0], v[1], v[2]);
        }
        Ok(cfg)
    }

    pub fn case(&self) -> Result<Option<CaseId>> {
        self.get("case")
    }

    pub fn plant(&self) -> Result<Option<PlantKind>> {
        self.get("plant")
    }

    /// Environment for `case` on `plant`: delays come from the case, other
    /// plant constants and episode settings from the configuration. Explicit
    /// `tau_i`/`tau_o` keys override the case delays.
    pub fn environment(&self, case: CaseId, plant: PlantKind) -> Result<EnvConfig> {
        let mut cfg = EnvConfig::on_plant(case, plant);
        self.apply_plant(&mut cfg.params)?;
        if let Some(v) = self.get("base_step")? {
            cfg.base_step = v;
        }
        if let Some(v) = self.get("episode_length")? {
            cfg.episode_length = v;
        }
        if let Some(v) = self.get("z_ref")? {
            cfg.z_ref = v;
        }
        if let Some(v) = self.get("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = self.get("error_coordinates")? {
            cfg.error_coordinates = v;
        }
        Ok(cfg)
    }

    pub fn hyper(&self, u_max: f64) -> Result<HyperParams> {
        let mut h = HyperParams::for_action_scale(u_max);
        macro_rules! scalar {
            ($($field:ident),*) => {
                $(if let Some(v) = self.get(stringify!($field))? { h.$field = v; })*
            };
        }
        scalar!(
            polyak,
            discount,
            lr_actor,
            lr_critic,
            buffer_capacity,
            batch_size,
            ou_theta,
            ou_sigma,
            ou_dt,
            episodes
        );
        macro_rules! widths {
            ($($field:ident),*) => {
                $(if let Some(v) = self.widths(stringify!($field))? { h.$field = v; })*
            };
        }
        widths!(actor_hidden, critic_state_hidden, critic_action_hidden, critic_trunk_hidden);
        h.validate()?;
        Ok(h)
    }
}
