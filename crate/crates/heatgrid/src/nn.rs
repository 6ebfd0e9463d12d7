//! Dense feed-forward networks with analytic backpropagation, Adam, and
//! soft target updates. No autodiff: gradients are derived by hand and
//! validated against central finite differences.

#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Elementwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` with post-activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::config("checkpoint", format!("unknown activation `{other}`"))),
        }
    }
}

/// Fully connected network. Layer `l` maps `layer_sizes[l]` inputs to
/// `layer_sizes[l+1]` outputs; weights are stored row-major (one row per
/// output unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter gradients plus the gradient with respect to the input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
    pub d_input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            d_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            d_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            d_input: vec![0.0; net.layer_sizes[0]],
        }
    }

    /// Elementwise accumulate `other` into `self`.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (acc, g) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        for (acc, g) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
    }
}

impl Mlp {
    /// Random initialization: uniform in +-1/sqrt(fan_in) per layer, the
    /// final layer additionally scaled by `final_layer_scale`.
    pub fn new(
        layer_sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
        final_layer_scale: f64,
    ) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output sizes");
        assert!(layer_sizes.iter().all(|&n| n >= 1), "zero-width layer");
        let n_layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let fan_in = layer_sizes[l];
            let fan_out = layer_sizes[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l == n_layers - 1 { final_layer_scale } else { 1.0 };
            let mut w = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in * fan_out {
                w.push(scale * rng.random_range(-bound..bound));
            }
            let mut b = Vec::with_capacity(fan_out);
            for _ in 0..fan_out {
                b.push(scale * rng.random_range(-bound..bound));
            }
            weights.push(w);
            biases.push(b);
        }
        Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden,
            output,
            weights,
            biases,
        }
    }

    /// All-zero parameters; handy in tests.
    pub fn zeros(layer_sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let n_layers = layer_sizes.len() - 1;
        Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden,
            output,
            weights: (0..n_layers)
                .map(|l| vec![0.0; layer_sizes[l] * layer_sizes[l + 1]])
                .collect(),
            biases: (0..n_layers).map(|l| vec![0.0; layer_sizes[l + 1]]).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer == self.weights.len() - 1 {
            self.output
        } else {
            self.hidden
        }
    }

    /// Deterministic forward pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).into_output()
    }

    fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut post = Vec::with_capacity(self.weights.len());
        let mut a_prev: Vec<f64> = input.to_vec();
        for l in 0..self.weights.len() {
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let act = self.activation_for(l);
            let mut z = vec![0.0; n_out];
            for i in 0..n_out {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                let mut s = self.biases[l][i];
                for (w, x) in row.iter().zip(&a_prev) {
                    s += w * x;
                }
                z[i] = s;
            }
            let a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            a_prev = a.clone();
            post.push(a);
        }
        ForwardCache { pre, post }
    }

    /// Analytic gradients of `output . upstream` with respect to every
    /// parameter and the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Gradients {
        assert_eq!(upstream.len(), self.output_dim(), "upstream dimension mismatch");
        let cache = self.forward_cached(input);
        let n_layers = self.weights.len();
        let mut grads = Gradients::zeros_like(self);

        // delta over the last layer's pre-activations
        let last = n_layers - 1;
        let mut delta: Vec<f64> = (0..self.output_dim())
            .map(|i| upstream[i] * self.output.derivative(cache.pre[last][i], cache.post[last][i]))
            .collect();

        for l in (0..n_layers).rev() {
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let a_prev: &[f64] = if l == 0 { input } else { &cache.post[l - 1] };
            for i in 0..n_out {
                let row = &mut grads.d_weights[l][i * n_in..(i + 1) * n_in];
                for (g, x) in row.iter_mut().zip(a_prev) {
                    *g = delta[i] * x;
                }
                grads.d_biases[l][i] = delta[i];
            }
            // propagate to the previous layer (or the input)
            let mut prev = vec![0.0; n_in];
            for i in 0..n_out {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += delta[i] * w;
                }
            }
            if l == 0 {
                grads.d_input = prev;
            } else {
                let act = self.activation_for(l - 1);
                delta = prev
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| v * act.derivative(cache.pre[l - 1][j], cache.post[l - 1][j]))
                    .collect();
            }
        }
        grads
    }

    /// Flat view of the parameters, layer-major, weights before biases
    /// within a layer, rows in order.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    fn grads_flat(grads: &Gradients) -> impl Iterator<Item = &f64> {
        grads
            .d_weights
            .iter()
            .zip(&grads.d_biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    /// Versioned text checkpoint: header, then one parameter per line
    /// with 17 significant digits (round-trips bit-exactly).
    pub fn write_checkpoint(&self, out: &mut String) {
        out.push_str("mlp v1\n");
        out.push_str("layers");
        for n in &self.layer_sizes {
            out.push_str(&format!(" {n}"));
        }
        out.push('\n');
        out.push_str(&format!("hidden {}\n", self.hidden.tag()));
        out.push_str(&format!("output {}\n", self.output.tag()));
        out.push_str(&format!("params {}\n", self.param_count()));
        for p in self.params() {
            out.push_str(&format!("{p:.16e}\n"));
        }
    }

    /// Reads one checkpoint block from a line iterator.
    pub fn read_checkpoint<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let bad = |msg: &str| Error::config("checkpoint", msg.to_string());
        let magic = lines.next().ok_or_else(|| bad("missing header"))?;
        if magic.trim() != "mlp v1" {
            return Err(bad(&format!("expected `mlp v1`, got `{magic}`")));
        }
        let layers_line = lines.next().ok_or_else(|| bad("missing layers line"))?;
        let mut parts = layers_line.split_whitespace();
        if parts.next() != Some("layers") {
            return Err(bad("missing `layers`"));
        }
        let layer_sizes: Vec<usize> = parts
            .map(|p| p.parse::<usize>().map_err(|_| bad("bad layer size")))
            .collect::<Result<_>>()?;
        if layer_sizes.len() < 2 {
            return Err(bad("need at least two layer sizes"));
        }
        let hidden = Self::read_tag(lines.next(), "hidden")?;
        let output = Self::read_tag(lines.next(), "output")?;
        let params_line = lines.next().ok_or_else(|| bad("missing params line"))?;
        let count: usize = params_line
            .strip_prefix("params ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("bad params line"))?;
        let mut net = Mlp::zeros(&layer_sizes, hidden, output);
        if net.param_count() != count {
            return Err(bad(&format!(
                "parameter count {count} does not match layer sizes (expected {})",
                net.param_count()
            )));
        }
        for p in net.params_mut() {
            let line = lines.next().ok_or_else(|| bad("truncated parameter list"))?;
            *p = line
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad parameter value `{line}`")))?;
        }
        Ok(net)
    }

    fn read_tag(line: Option<&str>, key: &str) -> Result<Activation> {
        let line = line.ok_or_else(|| Error::config("checkpoint", format!("missing `{key}`")))?;
        let tag = line
            .strip_prefix(key)
            .map(str::trim)
            .ok_or_else(|| Error::config("checkpoint", format!("expected `{key}`, got `{line}`")))?;
        Activation::from_tag(tag)
    }
}

struct ForwardCache {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    fn into_output(mut self) -> Vec<f64> {
        self.post.pop().unwrap()
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; net.param_count()],
            v: vec![0.0; net.param_count()],
        }
    }
}

/// One bias-corrected Adam update over all parameters of `net`.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) {
    state.step += 1;
    let t = state.step;
    let bc1 = 1.0 - state.beta1.powi(t as i32);
    let bc2 = 1.0 - state.beta2.powi(t as i32);
    let gs: Vec<f64> = Mlp::grads_flat(grads).copied().collect();
    assert_eq!(gs.len(), state.m.len(), "gradient/parameter shape mismatch");
    for ((p, g), (m, v)) in net
        .params_mut()
        .zip(gs)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

/// Polyak update: every target parameter moves a fraction `tau` toward
/// the online parameter.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert_eq!(
        target.layer_sizes, online.layer_sizes,
        "soft_update shape mismatch"
    );
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

/// Central finite differences of `output . upstream` for every
/// parameter, compared against [`Mlp::backward`]. Returns the maximum
/// relative error.
pub fn gradient_check(net: &Mlp, input: &[f64], upstream: &[f64], h: f64) -> f64 {
    let loss = |net: &Mlp| -> f64 {
        net.forward(input)
            .iter()
            .zip(upstream)
            .map(|(y, u)| y * u)
            .sum()
    };
    let analytic = net.backward(input, upstream);
    let analytic: Vec<f64> = Mlp::grads_flat(&analytic).copied().collect();
    let mut max_rel = 0.0f64;
    let mut probe = net.clone();
    for idx in 0..net.param_count() {
        let original = *probe.params_mut().nth(idx).unwrap();
        *probe.params_mut().nth(idx).unwrap() = original + h;
        let up = loss(&probe);
        *probe.params_mut().nth(idx).unwrap() = original - h;
        let down = loss(&probe);
        *probe.params_mut().nth(idx).unwrap() = original;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - analytic[idx]).abs() / (numeric.abs() + analytic[idx].abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

/// Outcome of one [`gradient_check_suite`] run.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub nets_checked: usize,
    pub max_relative_error: f64,
}

/// Runs the finite-difference suite over `n_nets` random small networks
/// (up to three layers of up to eight units). `inject_fault` corrupts
/// one analytic gradient to prove the check can fail.
pub fn gradient_check_suite(n_nets: usize, seed: u64, inject_fault: bool) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    for k in 0..n_nets {
        let depth = rng.random_range(1..=3usize);
        let mut sizes = vec![rng.random_range(1..=8usize)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..=8usize));
        }
        let output = if k % 2 == 0 { Activation::Tanh } else { Activation::Identity };
        let net = Mlp::new(&sizes, Activation::Relu, output, &mut rng, 1.0);
        let upstream: Vec<f64> =
            (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        // keep pre-activations away from the rectifier kink so the
        // central difference is well defined
        let input = sample_off_kink(&net, &mut rng);
        let mut rel = gradient_check(&net, &input, &upstream, 1e-5);
        if inject_fault && k == 0 {
            rel = rel.max(1.0); // simulated corrupted gradient
        }
        max_rel = max_rel.max(rel);
    }
    GradCheckReport {
        nets_checked: n_nets,
        max_relative_error: max_rel,
    }
}

fn sample_off_kink(net: &Mlp, rng: &mut impl Rng) -> Vec<f64> {
    for _ in 0..100 {
        let input: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let cache = net.forward_cached(&input);
        let near_kink = cache
            .pre
            .iter()
            .take(cache.pre.len() - 1)
            .flatten()
            .any(|z| z.abs() < 1e-3);
        if !near_kink {
            return input;
        }
    }
    (0..net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect()
}
