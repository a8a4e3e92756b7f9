//! Dense networks with batched forward and manual backward passes.
//!
//! Activations are stored row-major, one sample per row. Weights are stored
//! `outputs × inputs`, row-major, so a layer computes `Y = X Wᵀ + b`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, v: &mut [f64]) {
        match self {
            Activation::Linear => {}
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the layer output.
    fn backprop(self, out: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Linear => {}
            Activation::Relu => grad
                .iter_mut()
                .zip(out)
                .for_each(|(g, &y)| if y <= 0.0 { *g = 0.0 }),
            Activation::Tanh => grad.iter_mut().zip(out).for_each(|(g, &y)| *g *= 1.0 - y * y),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// `C = op(A)·op(B) + beta·C` for row-major buffers addressed by strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len(), "gemm: A out of bounds");
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len(), "gemm: B out of bounds");
    assert!(m * n <= c.len(), "gemm: C out of bounds");
    // SAFETY: every index reachable from the strides was bounds-checked above
    // and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Weights and biases uniform in `±limit`.
    pub fn uniform<R: Rng>(inputs: usize, outputs: usize, activation: Activation, limit: f64, rng: &mut R) -> Self {
        let mut layer = Dense::zeros(inputs, outputs, activation);
        for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }

    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            y.extend_from_slice(&self.bias);
        }
        gemm(
            batch,
            self.inputs,
            self.outputs,
            x,
            (self.inputs, 1),
            &self.weight,
            (1, self.inputs),
            1.0,
            &mut y,
        );
        self.activation.apply(&mut y);
        y
    }
}

/// Per-layer inputs and outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape holds the input at least")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Hidden layers initialised in `±1/√fan_in`, output layer in
    /// `±output_limit` (or the same fan-in rule when `None`).
    pub fn init<R: Rng>(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        output_limit: Option<f64>,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = inputs;
        for &width in hidden {
            layers.push(Dense::uniform(fan_in, width, hidden_activation, fan_limit(fan_in), rng));
            fan_in = width;
        }
        let limit = output_limit.unwrap_or_else(|| fan_limit(fan_in));
        layers.push(Dense::uniform(fan_in, outputs, output_activation, limit, rng));
        Mlp { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs, l.activation))
                .collect(),
        }
    }

    pub fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        assert_eq!(x.len(), batch * self.inputs(), "input shape");
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur, batch);
        }
        cur
    }

    pub fn forward_tape(&self, x: &[f64], batch: usize) -> Tape {
        assert_eq!(x.len(), batch * self.inputs(), "input shape");
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("nonempty"), batch);
            activations.push(next);
        }
        Tape { batch, activations }
    }

    /// Backpropagates `d_out` (gradient w.r.t. the network output). Parameter
    /// gradients are accumulated into `grads` when given; the gradient w.r.t.
    /// the input is returned when `want_input` is set.
    pub fn backward(&self, tape: &Tape, d_out: &[f64], mut grads: Option<&mut Mlp>, want_input: bool) -> Option<Vec<f64>> {
        let batch = tape.batch;
        let mut delta = d_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.activations[i];
            let y = &tape.activations[i + 1];
            layer.activation.backprop(y, &mut delta);
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[i];
                // dW += δᵀ X
                gemm(
                    layer.outputs,
                    batch,
                    layer.inputs,
                    &delta,
                    (1, layer.outputs),
                    x,
                    (layer.inputs, 1),
                    1.0,
                    &mut gl.weight,
                );
                for row in delta.chunks_exact(layer.outputs) {
                    gl.bias.iter_mut().zip(row).for_each(|(b, d)| *b += d);
                }
            }
            if i == 0 && !want_input {
                return None;
            }
            // dX = δ W
            let mut dx = vec![0.0; batch * layer.inputs];
            gemm(
                batch,
                layer.outputs,
                layer.inputs,
                &delta,
                (layer.outputs, 1),
                &layer.weight,
                (layer.inputs, 1),
                0.0,
                &mut dx,
            );
            delta = dx;
        }
        Some(delta)
    }
}

fn fan_limit(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

/// Critic `Q(s, a)`: separate state and action branches, concatenated and
/// passed through a shared trunk with a linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub state_branch: Mlp,
    pub action_branch: Mlp,
    pub trunk: Mlp,
}

#[derive(Debug, Clone)]
pub struct CriticTape {
    state: Tape,
    action: Tape,
    trunk: Tape,
}

impl CriticTape {
    pub fn q(&self) -> &[f64] {
        self.trunk.output()
    }
}

impl Critic {
    pub fn init<R: Rng>(
        obs_width: usize,
        state_hidden: &[usize],
        action_hidden: &[usize],
        trunk_hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let (s_last, s_hidden) = state_hidden.split_last().expect("state branch needs a layer");
        let (a_last, a_hidden) = action_hidden.split_last().expect("action branch needs a layer");
        let state_branch = Mlp::init(obs_width, s_hidden, *s_last, Activation::Relu, Activation::Relu, None, rng);
        let action_branch = Mlp::init(1, a_hidden, *a_last, Activation::Relu, Activation::Relu, None, rng);
        let trunk = Mlp::init(s_last + a_last, trunk_hidden, 1, Activation::Relu, Activation::Linear, None, rng);
        Critic {
            state_branch,
            action_branch,
            trunk,
        }
    }

    pub fn obs_width(&self) -> usize {
        self.state_branch.inputs()
    }

    pub fn zeros_like(&self) -> Self {
        Critic {
            state_branch: self.state_branch.zeros_like(),
            action_branch: self.action_branch.zeros_like(),
            trunk: self.trunk.zeros_like(),
        }
    }

    fn concat(&self, s: &[f64], a: &[f64], batch: usize) -> Vec<f64> {
        let (ws, wa) = (self.state_branch.outputs(), self.action_branch.outputs());
        let mut joined = Vec::with_capacity(batch * (ws + wa));
        for (rs, ra) in s.chunks_exact(ws).zip(a.chunks_exact(wa)) {
            joined.extend_from_slice(rs);
            joined.extend_from_slice(ra);
        }
        joined
    }

    pub fn forward(&self, obs: &[f64], actions: &[f64], batch: usize) -> Vec<f64> {
        let s = self.state_branch.forward(obs, batch);
        let a = self.action_branch.forward(actions, batch);
        self.trunk.forward(&self.concat(&s, &a, batch), batch)
    }

    pub fn forward_tape(&self, obs: &[f64], actions: &[f64], batch: usize) -> CriticTape {
        let state = self.state_branch.forward_tape(obs, batch);
        let action = self.action_branch.forward_tape(actions, batch);
        let joined = self.concat(state.output(), action.output(), batch);
        let trunk = self.trunk.forward_tape(&joined, batch);
        CriticTape { state, action, trunk }
    }

    /// Backpropagates `d_q`; returns the gradient w.r.t. the action input when
    /// `want_action` is set.
    pub fn backward(&self, tape: &CriticTape, d_q: &[f64], mut grads: Option<&mut Critic>, want_action: bool) -> Option<Vec<f64>> {
        let batch = tape.trunk.batch;
        let d_joined = self
            .trunk
            .backward(&tape.trunk, d_q, grads.as_deref_mut().map(|g| &mut g.trunk), true)
            .expect("input gradient requested");
        let (ws, wa) = (self.state_branch.outputs(), self.action_branch.outputs());
        let mut d_s = Vec::with_capacity(batch * ws);
        let mut d_a = Vec::with_capacity(batch * wa);
        for row in d_joined.chunks_exact(ws + wa) {
            d_s.extend_from_slice(&row[..ws]);
            d_a.extend_from_slice(&row[ws..]);
        }
        let d_action = self.action_branch.backward(
            &tape.action,
            &d_a,
            grads.as_deref_mut().map(|g| &mut g.action_branch),
            want_action,
        );
        if let Some(g) = grads {
            self.state_branch
                .backward(&tape.state, &d_s, Some(&mut g.state_branch), false);
        }
        d_action
    }
}

/// Flat view over every trainable tensor, in a fixed order.
pub trait Params {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Params for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Params for Critic {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.state_branch.tensors();
        t.extend(self.action_branch.tensors());
        t.extend(self.trunk.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.state_branch.tensors_mut();
        t.extend(self.action_branch.tensors_mut());
        t.extend(self.trunk.tensors_mut());
        t
    }
}

/// `target ← ρ·online + (1 − ρ)·target`.
pub fn polyak_update<P: Params>(target: &mut P, online: &P, rho: f64) {
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        t.iter_mut().zip(o).for_each(|(t, &o)| *t = rho * o + (1.0 - rho) * *t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_forward_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = Dense::uniform(5, 3, Activation::Linear, 1.0, &mut rng);
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1 - 0.4).collect();
        let y = layer.forward(&x, 2);
        for b in 0..2 {
            for o in 0..3 {
                let mut acc = layer.bias[o];
                for i in 0..5 {
                    acc += layer.weight[o * 5 + i] * x[b * 5 + i];
                }
                assert!((y[b * 3 + o] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tanh_output_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::init(3, &[8, 8], 1, Activation::Relu, Activation::Tanh, Some(3e-3), &mut rng);
        let x: Vec<f64> = (0..300).map(|i| (i as f64 - 150.0) * 10.0).collect();
        assert!(net.forward(&x, 100).iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn polyak_with_unit_rate_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let online = Mlp::init(3, &[4], 1, Activation::Relu, Activation::Tanh, None, &mut rng);
        let mut target = Mlp::init(3, &[4], 1, Activation::Relu, Activation::Tanh, None, &mut rng);
        assert_ne!(online, target);
        polyak_update(&mut target, &online, 1.0);
        assert_eq!(online, target);
    }
}
