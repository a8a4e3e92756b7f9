//! Text container for trained agents.
//!
//! ```text
//! delayrl-agent 1
//! obs_width 4
//! hyper.polyak 0.005
//! ...
//! net actor relu,relu,tanh
//! adam actor_opt 0.001 0.9 0.999 1e-7 42
//! array actor.0.weight 256 4
//! <one matrix row per line, whitespace separated>
//! ```
//!
//! Scalars use Rust's shortest round-trip decimal form, so reading a file
//! back and writing it again reproduces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::mlp::{Activation, Critic, Dense, Mlp, Params};
use super::noise::OuNoise;
use super::{AgentBundle, HyperParams};
use crate::error::{Error, Result};

const MAGIC: &str = "delayrl-agent 1";

fn put_array(out: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]) {
    debug_assert_eq!(rows * cols, data.len());
    let _ = writeln!(out, "array {name} {rows} {cols}");
    for row in data.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

fn put_mlp(out: &mut String, name: &str, net: &Mlp) {
    let acts: Vec<String> = net.layers.iter().map(|l| l.activation.to_string()).collect();
    let _ = writeln!(out, "net {name} {} {}", net.inputs(), acts.join(","));
    for (i, l) in net.layers.iter().enumerate() {
        put_array(out, &format!("{name}.{i}.weight"), l.outputs, l.inputs, &l.weight);
        put_array(out, &format!("{name}.{i}.bias"), 1, l.outputs, &l.bias);
    }
}

fn put_critic(out: &mut String, name: &str, c: &Critic) {
    put_mlp(out, &format!("{name}.state"), &c.state_branch);
    put_mlp(out, &format!("{name}.action"), &c.action_branch);
    put_mlp(out, &format!("{name}.trunk"), &c.trunk);
}

fn put_adam(out: &mut String, name: &str, opt: &Adam) {
    let _ = writeln!(
        out,
        "adam {name} {:?} {:?} {:?} {:?} {}",
        opt.lr, opt.beta1, opt.beta2, opt.epsilon, opt.step
    );
    for (i, (m, v)) in opt.m.iter().zip(&opt.v).enumerate() {
        put_array(out, &format!("{name}.m.{i}"), 1, m.len(), m);
        put_array(out, &format!("{name}.v.{i}"), 1, v.len(), v);
    }
}

fn widths(v: &[usize]) -> String {
    if v.is_empty() {
        "-".to_string()
    } else {
        v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Serialises the agent to the text container format.
pub fn encode_agent(agent: &AgentBundle) -> String {
    let h = &agent.hyper;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "obs_width {}", agent.obs_width);
    let _ = writeln!(out, "action_scale {:?}", agent.action_scale);
    let _ = writeln!(out, "seed {}", agent.seed);
    let _ = writeln!(out, "hyper.polyak {:?}", h.polyak);
    let _ = writeln!(out, "hyper.discount {:?}", h.discount);
    let _ = writeln!(out, "hyper.lr_actor {:?}", h.lr_actor);
    let _ = writeln!(out, "hyper.lr_critic {:?}", h.lr_critic);
    let _ = writeln!(out, "hyper.buffer_capacity {}", h.buffer_capacity);
    let _ = writeln!(out, "hyper.batch_size {}", h.batch_size);
    let _ = writeln!(out, "hyper.ou_theta {:?}", h.ou_theta);
    let _ = writeln!(out, "hyper.ou_sigma {:?}", h.ou_sigma);
    let _ = writeln!(out, "hyper.ou_dt {:?}", h.ou_dt);
    let _ = writeln!(out, "hyper.episodes {}", h.episodes);
    let _ = writeln!(out, "hyper.actor_hidden {}", widths(&h.actor_hidden));
    let _ = writeln!(out, "hyper.critic_state_hidden {}", widths(&h.critic_state_hidden));
    let _ = writeln!(out, "hyper.critic_action_hidden {}", widths(&h.critic_action_hidden));
    let _ = writeln!(out, "hyper.critic_trunk_hidden {}", widths(&h.critic_trunk_hidden));
    let _ = writeln!(out, "noise.theta {:?}", agent.noise.theta);
    let _ = writeln!(out, "noise.sigma {:?}", agent.noise.sigma);
    let _ = writeln!(out, "noise.dt {:?}", agent.noise.dt);
    let _ = writeln!(out, "noise.state {:?}", agent.noise.state);
    let seed_hex: String = agent.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    let _ = writeln!(out, "rng.seed {seed_hex}");
    let _ = writeln!(out, "rng.stream {}", agent.rng.get_stream());
    let _ = writeln!(out, "rng.word_pos {}", agent.rng.get_word_pos());
    put_mlp(&mut out, "actor", &agent.actor);
    put_mlp(&mut out, "actor_target", &agent.actor_target);
    put_critic(&mut out, "critic", &agent.critic);
    put_critic(&mut out, "critic_target", &agent.critic_target);
    put_adam(&mut out, "actor_opt", &agent.actor_opt);
    put_adam(&mut out, "critic_opt", &agent.critic_opt);
    out
}

/// Writes the agent atomically: a temporary file in the target directory is
/// renamed over `path` once complete.
pub fn save_agent(agent: &AgentBundle, path: &Path) -> Result<()> {
    let text = encode_agent(agent);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_agent(path: &Path) -> Result<AgentBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_agent(&text, path)
}

struct Array {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

struct Parsed<'a> {
    path: PathBuf,
    scalars: BTreeMap<&'a str, &'a str>,
    nets: BTreeMap<&'a str, (usize, Vec<Activation>)>,
    adams: BTreeMap<&'a str, Vec<&'a str>>,
    arrays: BTreeMap<&'a str, Array>,
}

impl<'a> Parsed<'a> {
    fn err(&self, field: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::format(&self.path, field, reason)
    }

    fn raw(&self, key: &str) -> Result<&'a str> {
        self.scalars.get(key).copied().ok_or_else(|| self.err(key, "missing"))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e| self.err(key, format!("cannot parse `{raw}`: {e}")))
    }

    fn list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.raw(key)?;
        if raw == "-" {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.parse().map_err(|e| self.err(key, format!("cannot parse `{s}`: {e}"))))
            .collect()
    }

    fn array(&self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let a = self.arrays.get(name).ok_or_else(|| self.err(name, "missing array"))?;
        if a.rows != rows || a.cols != cols {
            return Err(self.err(
                name,
                format!("shape {}x{} where {rows}x{cols} was expected", a.rows, a.cols),
            ));
        }
        Ok(a.data.clone())
    }

    fn mlp(&self, name: &str) -> Result<Mlp> {
        let (inputs, acts) = self.nets.get(name).ok_or_else(|| self.err(name, "missing network"))?;
        let mut layers = Vec::with_capacity(acts.len());
        let mut fan_in = *inputs;
        for (i, &activation) in acts.iter().enumerate() {
            let wname = format!("{name}.{i}.weight");
            let outputs = self
                .arrays
                .get(wname.as_str())
                .ok_or_else(|| self.err(&wname, "missing array"))?
                .rows;
            let weight = self.array(&wname, outputs, fan_in)?;
            let bias = self.array(&format!("{name}.{i}.bias"), 1, outputs)?;
            layers.push(Dense {
                inputs: fan_in,
                outputs,
                weight,
                bias,
                activation,
            });
            fan_in = outputs;
        }
        if layers.is_empty() {
            return Err(self.err(name, "network has no layers"));
        }
        Ok(Mlp { layers })
    }

    fn critic(&self, name: &str) -> Result<Critic> {
        let c = Critic {
            state_branch: self.mlp(&format!("{name}.state"))?,
            action_branch: self.mlp(&format!("{name}.action"))?,
            trunk: self.mlp(&format!("{name}.trunk"))?,
        };
        if c.action_branch.inputs() != 1 {
            return Err(self.err(format!("{name}.action"), "action branch must take one input"));
        }
        if c.trunk.inputs() != c.state_branch.outputs() + c.action_branch.outputs() || c.trunk.outputs() != 1 {
            return Err(self.err(format!("{name}.trunk"), "trunk shape does not match the branches"));
        }
        Ok(c)
    }

    fn adam<P: Params>(&self, name: &str, params: &P) -> Result<Adam> {
        let f = self.adams.get(name).ok_or_else(|| self.err(name, "missing optimizer"))?;
        let parse = |i: usize| -> Result<f64> {
            f[i].parse().map_err(|e| self.err(name, format!("cannot parse `{}`: {e}", f[i])))
        };
        let step = f[4]
            .parse()
            .map_err(|e| self.err(name, format!("cannot parse step `{}`: {e}", f[4])))?;
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (i, t) in params.tensors().iter().enumerate() {
            m.push(self.array(&format!("{name}.m.{i}"), 1, t.len())?);
            v.push(self.array(&format!("{name}.v.{i}"), 1, t.len())?);
        }
        Ok(Adam {
            lr: parse(0)?,
            beta1: parse(1)?,
            beta2: parse(2)?,
            epsilon: parse(3)?,
            step,
            m,
            v,
        })
    }
}

fn parse<'a>(text: &'a str, path: &Path) -> Result<Parsed<'a>> {
    let mut p = Parsed {
        path: path.to_path_buf(),
        scalars: BTreeMap::new(),
        nets: BTreeMap::new(),
        adams: BTreeMap::new(),
        arrays: BTreeMap::new(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(p.err("header", format!("expected `{MAGIC}`"))),
    }
    while let Some((lineno, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "net" => {
                if fields.len() != 4 {
                    return Err(p.err(format!("line {}", lineno + 1), "net line needs name, inputs, activations"));
                }
                let inputs = fields[2]
                    .parse()
                    .map_err(|e| p.err(fields[1], format!("bad input width: {e}")))?;
                let acts = fields[3]
                    .split(',')
                    .map(|a| a.parse::<Activation>().map_err(|e| p.err(fields[1], e)))
                    .collect::<Result<Vec<_>>>()?;
                p.nets.insert(fields[1], (inputs, acts));
            }
            "adam" => {
                if fields.len() != 7 {
                    return Err(p.err(format!("line {}", lineno + 1), "adam line needs name and 5 values"));
                }
                p.adams.insert(fields[1], fields[2..].to_vec());
            }
            "array" => {
                if fields.len() != 4 {
                    return Err(p.err(format!("line {}", lineno + 1), "array line needs name, rows, cols"));
                }
                let name = fields[1];
                let rows: usize = fields[2].parse().map_err(|e| p.err(name, format!("bad rows: {e}")))?;
                let cols: usize = fields[3].parse().map_err(|e| p.err(name, format!("bad cols: {e}")))?;
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    let (_, row) = lines
                        .next()
                        .ok_or_else(|| p.err(name, format!("truncated at row {r}")))?;
                    for tok in row.split_whitespace() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|e| p.err(name, format!("row {r}: cannot parse `{tok}`: {e}")))?;
                        if !v.is_finite() {
                            return Err(p.err(name, format!("row {r}: non-finite value")));
                        }
                        data.push(v);
                    }
                    if data.len() != (r + 1) * cols {
                        return Err(p.err(name, format!("row {r} does not have {cols} entries")));
                    }
                }
                p.arrays.insert(name, Array { rows, cols, data });
            }
            key if fields.len() == 2 => {
                p.scalars.insert(key, fields[1]);
            }
            key => return Err(p.err(key, format!("malformed line {}", lineno + 1))),
        }
    }
    Ok(p)
}

pub fn decode_agent(text: &str, path: &Path) -> Result<AgentBundle> {
    let p = parse(text, path)?;
    let hyper = HyperParams {
        polyak: p.num("hyper.polyak")?,
        discount: p.num("hyper.discount")?,
        lr_actor: p.num("hyper.lr_actor")?,
        lr_critic: p.num("hyper.lr_critic")?,
        buffer_capacity: p.num("hyper.buffer_capacity")?,
        batch_size: p.num("hyper.batch_size")?,
        ou_theta: p.num("hyper.ou_theta")?,
        ou_sigma: p.num("hyper.ou_sigma")?,
        ou_dt: p.num("hyper.ou_dt")?,
        episodes: p.num("hyper.episodes")?,
        actor_hidden: p.list("hyper.actor_hidden")?,
        critic_state_hidden: p.list("hyper.critic_state_hidden")?,
        critic_action_hidden: p.list("hyper.critic_action_hidden")?,
        critic_trunk_hidden: p.list("hyper.critic_trunk_hidden")?,
    };
    hyper
        .validate()
        .map_err(|e| p.err("hyper", e.to_string()))?;
    let obs_width: usize = p.num("obs_width")?;

    let actor = p.mlp("actor")?;
    let actor_target = p.mlp("actor_target")?;
    let critic = p.critic("critic")?;
    let critic_target = p.critic("critic_target")?;
    for (name, w) in [
        ("actor", actor.inputs()),
        ("actor_target", actor_target.inputs()),
        ("critic", critic.obs_width()),
        ("critic_target", critic_target.obs_width()),
    ] {
        if w != obs_width {
            return Err(p.err(name, format!("input width {w} disagrees with obs_width {obs_width}")));
        }
    }
    if actor.outputs() != 1 || actor.layers.last().map(|l| l.activation) != Some(Activation::Tanh) {
        return Err(p.err("actor", "output layer must be a single tanh unit"));
    }
    let same_shape = |a: &Mlp, b: &Mlp| {
        a.layers.len() == b.layers.len()
            && a.layers
                .iter()
                .zip(&b.layers)
                .all(|(x, y)| x.inputs == y.inputs && x.outputs == y.outputs && x.activation == y.activation)
    };
    if !same_shape(&actor, &actor_target) {
        return Err(p.err("actor_target", "shape differs from actor"));
    }
    if !(same_shape(&critic.state_branch, &critic_target.state_branch)
        && same_shape(&critic.action_branch, &critic_target.action_branch)
        && same_shape(&critic.trunk, &critic_target.trunk))
    {
        return Err(p.err("critic_target", "shape differs from critic"));
    }

    let seed_hex = p.raw("rng.seed")?;
    if seed_hex.len() != 64 {
        return Err(p.err("rng.seed", "expected 64 hex digits"));
    }
    let mut rng_seed = [0u8; 32];
    for (i, b) in rng_seed.iter_mut().enumerate() {
        *b = u8::from_str_radix(&seed_hex[2 * i..2 * i + 2], 16)
            .map_err(|e| p.err("rng.seed", e.to_string()))?;
    }
    let mut rng = ChaCha8Rng::from_seed(rng_seed);
    rng.set_stream(p.num("rng.stream")?);
    rng.set_word_pos(p.num("rng.word_pos")?);

    Ok(AgentBundle {
        obs_width,
        action_scale: p.num("action_scale")?,
        actor_opt: p.adam("actor_opt", &actor)?,
        critic_opt: p.adam("critic_opt", &critic)?,
        actor,
        critic,
        actor_target,
        critic_target,
        noise: OuNoise {
            theta: p.num("noise.theta")?,
            sigma: p.num("noise.sigma")?,
            dt: p.num("noise.dt")?,
            state: p.num("noise.state")?,
        },
        seed: p.num("seed")?,
        hyper,
        rng,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::init_agent;

    fn small() -> AgentBundle {
        let hyper = HyperParams {
            actor_hidden: vec![5, 3],
            critic_state_hidden: vec![2, 3],
            critic_action_hidden: vec![2],
            critic_trunk_hidden: vec![4],
            batch_size: 8,
            buffer_capacity: 64,
            ..HyperParams::default()
        };
        init_agent(4, 6.57, hyper, 21).unwrap()
    }

    #[test]
    fn encode_decode_encode_is_stable() {
        let mut agent = small();
        agent.noise.state = 0.123456789;
        agent.select_action(&[0.1, 0.2, 0.3, 0.4], true).unwrap();
        let text = encode_agent(&agent);
        let back = decode_agent(&text, Path::new("mem")).unwrap();
        assert_eq!(encode_agent(&back), text);
        assert_eq!(back.actor, agent.actor);
        assert_eq!(back.critic_target, agent.critic_target);
        assert_eq!(back.hyper, agent.hyper);
        assert_eq!(back.rng, agent.rng);
    }

    #[test]
    fn missing_field_is_named() {
        let text = encode_agent(&small()).replace("hyper.discount 0.99\n", "");
        let err = decode_agent(&text, Path::new("a.agent")).unwrap_err();
        assert!(matches!(&err, Error::Format { field, .. } if field == "hyper.discount"), "{err}");
    }

    #[test]
    fn corrupt_array_is_named() {
        let text = encode_agent(&small());
        let start = text.find("array actor.1.bias").unwrap();
        let line_end = start + text[start..].find('\n').unwrap() + 1;
        let row_end = line_end + text[line_end..].find('\n').unwrap();
        let mut broken = text.clone();
        broken.replace_range(line_end..row_end, "0.5 oops 1.0");
        let err = decode_agent(&broken, Path::new("a.agent")).unwrap_err();
        assert!(matches!(&err, Error::Format { field, .. } if field == "actor.1.bias"), "{err}");
    }

    #[test]
    fn bad_header_rejected() {
        let err = decode_agent("something else\n", Path::new("x")).unwrap_err();
        assert!(matches!(&err, Error::Format { field, .. } if field == "header"));
    }
}
