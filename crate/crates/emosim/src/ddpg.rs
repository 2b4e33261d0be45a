//! Deterministic policy-gradient controller for the face actuators.
//!
//! An actor maps the agent's composite state to the four control values
//! through batch-normalized ReLU layers and a sigmoid output; a critic
//! scores (state, action) pairs with the action joining the state at the
//! input. Both keep slow-moving target copies blended after every update,
//! and experience is replayed uniformly with replacement from a fixed-size
//! first-in-first-out buffer. Exploration adds temporally correlated
//! Ornstein-Uhlenbeck noise to the actor's output.

use std::collections::VecDeque;

use rand::RngExt;
use rand_chacha::ChaCha12Rng;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::nn::{
    build, sample_standard_normal, AdamParams, AdamState, Layer, LayerSpec, Mode, ParamBlock,
};
use crate::tensor::Tensor;

pub const ACTION_DIM: usize = 4;

/// One-step bootstrapped value target.
pub fn td_target(reward: f64, gamma: f64, q_next: f64) -> f64 {
    reward + gamma * q_next
}

/// In-place soft update `dst = zeta * src + (1 - zeta) * dst`, elementwise.
/// Every target-network parameter and normalization statistic moves through
/// this one function, so the geometric convergence law of target tracking
/// can be verified against it directly.
pub fn soft_blend(dst: &mut [f64], src: &[f64], zeta: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = zeta * s + (1.0 - zeta) * *d;
    }
}

/// Flat composite state: current view and affect beside predicted view and
/// affect, images downsampled to `ddpg.state_side` and affect unit-scaled.
pub fn state_dim(cfg: &Config) -> usize {
    2 * cfg.ddpg.state_side * cfg.ddpg.state_side + 2 * 2
}

/// Temporally correlated exploration noise with mean reversion to zero.
pub struct OuNoise {
    x: [f64; ACTION_DIM],
    theta: f64,
    sigma: f64,
    dt: f64,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64, dt: f64) -> OuNoise {
        OuNoise { x: [0.0; ACTION_DIM], theta, sigma, dt }
    }

    pub fn step(&mut self, rng: &mut ChaCha12Rng) -> [f64; ACTION_DIM] {
        let root_dt = self.dt.sqrt();
        for xi in &mut self.x {
            let eps = sample_standard_normal(rng);
            *xi += self.theta * (0.0 - *xi) * self.dt + self.sigma * root_dt * eps;
        }
        self.x
    }

    pub fn state(&self) -> [f64; ACTION_DIM] {
        self.x
    }

    pub fn set_state(&mut self, x: [f64; ACTION_DIM]) {
        self.x = x;
    }
}

pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity FIFO of transitions, sampled uniformly with replacement.
pub struct ReplayBuffer {
    cap: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(cap: usize) -> ReplayBuffer {
        ReplayBuffer { cap, items: VecDeque::with_capacity(cap) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.cap {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Uniform with replacement over the stored transitions.
    pub fn sample_indices(&self, rng: &mut ChaCha12Rng, n: usize) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}

/// A plain layer stack with batch-first dense tensors.
struct Net {
    layers: Vec<Layer>,
}

impl Net {
    fn mlp(input: usize, hidden: &[usize], output: usize, sigmoid_out: bool) -> Net {
        let mut layers = Vec::new();
        let mut d = input;
        for &h in hidden {
            layers.push(build(&LayerSpec::Dense { input: d, output: h }));
            layers.push(build(&LayerSpec::BatchNorm { features: h }));
            layers.push(build(&LayerSpec::Relu));
            d = h;
        }
        layers.push(build(&LayerSpec::Dense { input: d, output }));
        if sigmoid_out {
            layers.push(build(&LayerSpec::Sigmoid));
        }
        Net { layers }
    }

    fn init(&mut self, rng: &mut impl rand::Rng) {
        for l in &mut self.layers {
            l.init(rng);
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut cur = x.clone();
        for l in &mut self.layers {
            cur = l.forward(&cur, mode)?;
        }
        Ok(cur)
    }

    /// Forward that also returns the output of layer index `tap`.
    fn forward_tapped(&mut self, x: &Tensor, mode: Mode, tap: usize) -> Result<(Tensor, Tensor)> {
        let mut cur = x.clone();
        let mut tapped = None;
        for (i, l) in self.layers.iter_mut().enumerate() {
            cur = l.forward(&cur, mode)?;
            if i == tap {
                tapped = Some(cur.clone());
            }
        }
        let tapped = tapped.ok_or_else(|| Error::state("tap index beyond layer stack"))?;
        Ok((cur, tapped))
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let mut cur = dy.clone();
        for l in self.layers.iter_mut().rev() {
            cur = l.backward(&cur)?;
        }
        Ok(cur)
    }

    fn param_blocks(&mut self) -> Vec<ParamBlock<'_>> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            for mut b in l.param_blocks() {
                b.name = format!("{i}.{}", b.name);
                out.push(b);
            }
        }
        out
    }

    fn state_blocks(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (name, values) in l.state_blocks() {
                out.push((format!("{i}.{name}"), values));
            }
        }
        out
    }

    fn param_lens(&mut self) -> Vec<usize> {
        self.param_blocks().iter().map(|b| b.values.len()).collect()
    }

    fn zero_grads(&mut self) {
        for l in &mut self.layers {
            l.zero_grads();
        }
    }

    /// Parameter and state values in visitation order.
    fn values_snapshot(&mut self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> =
            self.param_blocks().iter().map(|b| b.values.to_vec()).collect();
        out.extend(self.state_blocks().iter().map(|(_, v)| v.to_vec()));
        out
    }

    /// theta' = zeta * src + (1 - zeta) * theta', over parameters and
    /// batch-norm running statistics alike. `zeta = 1` copies.
    fn blend_from(&mut self, src: &[Vec<f64>], zeta: f64) -> Result<()> {
        let mut k = 0usize;
        let mut apply = |dst: &mut [f64]| -> Result<()> {
            let s = src
                .get(k)
                .ok_or_else(|| Error::state("blend source has fewer blocks than target"))?;
            if s.len() != dst.len() {
                return Err(Error::state("blend source block length mismatch"));
            }
            soft_blend(dst, s, zeta);
            k += 1;
            Ok(())
        };
        for b in self.param_blocks() {
            apply(b.values)?;
        }
        for (_, v) in self.state_blocks() {
            apply(v)?;
        }
        if k != src.len() {
            return Err(Error::state("blend source has more blocks than target"));
        }
        Ok(())
    }

    fn save_into(&mut self, ck: &mut Checkpoint, prefix: &str) -> Result<()> {
        for b in self.param_blocks() {
            ck.put_f64(&format!("{prefix}.{}", b.name), &[b.values.len()], b.values.to_vec())?;
        }
        for (name, v) in self.state_blocks() {
            ck.put_f64(&format!("{prefix}.{name}"), &[v.len()], v.to_vec())?;
        }
        Ok(())
    }

    fn load_from(&mut self, ck: &Checkpoint, prefix: &str) -> Result<()> {
        for b in self.param_blocks() {
            let name = format!("{prefix}.{}", b.name);
            let (_, data) = ck.f64s(&name)?;
            if data.len() != b.values.len() {
                return Err(Error::Checkpoint(format!(
                    "`{name}` holds {} values, expected {}",
                    data.len(),
                    b.values.len()
                )));
            }
            b.values.copy_from_slice(data);
        }
        for (name, v) in self.state_blocks() {
            let name = format!("{prefix}.{name}");
            let (_, data) = ck.f64s(&name)?;
            if data.len() != v.len() {
                return Err(Error::Checkpoint(format!(
                    "`{name}` holds {} values, expected {}",
                    data.len(),
                    v.len()
                )));
            }
            v.copy_from_slice(data);
        }
        Ok(())
    }
}

/// Diagnostics of one update: the critic's regression loss and the mean
/// critic value of the actor's current actions before the update.
#[derive(Debug, Clone, Copy)]
pub struct UpdateReport {
    pub critic_loss: f64,
    pub actor_value: f64,
}

pub struct DdpgAgent {
    state_dim: usize,
    middle_tap: usize,
    gamma: f64,
    zeta: f64,
    batch: usize,
    warmup: usize,
    actor: Net,
    actor_target: Net,
    critic: Net,
    critic_target: Net,
    actor_adam: AdamState,
    critic_adam: AdamState,
    buffer: ReplayBuffer,
    ou: OuNoise,
}

impl DdpgAgent {
    pub fn from_config(cfg: &Config) -> DdpgAgent {
        let sd = state_dim(cfg);
        let ah = &cfg.ddpg.actor_hidden;
        let chid = &cfg.ddpg.critic_hidden;
        let mut actor = Net::mlp(sd, ah, ACTION_DIM, true);
        let actor_target = Net::mlp(sd, ah, ACTION_DIM, true);
        let mut critic = Net::mlp(sd + ACTION_DIM, chid, 1, false);
        let critic_target = Net::mlp(sd + ACTION_DIM, chid, 1, false);
        let actor_adam =
            AdamState::new(AdamParams::with_alpha(cfg.ddpg.actor_alpha), &actor.param_lens());
        let critic_adam =
            AdamState::new(AdamParams::with_alpha(cfg.ddpg.critic_alpha), &critic.param_lens());
        // Each hidden block is dense, batch norm, relu; the tap sits on the
        // relu of the middle hidden block.
        let middle_tap = 3 * (ah.len() / 2) + 2;
        DdpgAgent {
            state_dim: sd,
            middle_tap,
            gamma: cfg.ddpg.gamma,
            zeta: cfg.ddpg.zeta,
            batch: cfg.ddpg.batch,
            warmup: cfg.ddpg.warmup,
            actor,
            actor_target,
            critic,
            critic_target,
            actor_adam,
            critic_adam,
            buffer: ReplayBuffer::new(cfg.ddpg.capacity),
            ou: OuNoise::new(cfg.ddpg.ou_theta, cfg.ddpg.ou_sigma, cfg.ddpg.ou_dt),
        }
    }

    pub fn init(&mut self, rng: &mut ChaCha12Rng) -> Result<()> {
        self.actor.init(rng);
        self.critic.init(rng);
        let a = self.actor.values_snapshot();
        self.actor_target.blend_from(&a, 1.0)?;
        let c = self.critic.values_snapshot();
        self.critic_target.blend_from(&c, 1.0)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn noise(&self) -> &OuNoise {
        &self.ou
    }

    pub fn record(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
            return Err(Error::invalid("transition state length mismatch"));
        }
        self.buffer.push(t);
        Ok(())
    }

    /// Deterministic policy action for one state.
    pub fn act(&mut self, state: &[f64]) -> Result<[f64; ACTION_DIM]> {
        let x = Tensor::from_vec(&[1, self.state_dim], state.to_vec())?;
        let a = self.actor.forward(&x, Mode::Eval)?;
        let mut out = [0.0; ACTION_DIM];
        out.copy_from_slice(a.data());
        Ok(out)
    }

    /// Policy action plus exploration noise, clamped to the control range.
    pub fn act_noisy(&mut self, state: &[f64], rng: &mut ChaCha12Rng) -> Result<[f64; ACTION_DIM]> {
        let mut a = self.act(state)?;
        let n = self.ou.step(rng);
        for (av, nv) in a.iter_mut().zip(n) {
            *av = (*av + nv).clamp(0.0, 1.0);
        }
        Ok(a)
    }

    /// Post-activation output of the actor's middle hidden layer in eval
    /// mode, recorded for downstream structure analysis.
    pub fn actor_middle_activations(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        let x = Tensor::from_vec(&[1, self.state_dim], state.to_vec())?;
        let (_, mid) = self.actor.forward_tapped(&x, Mode::Eval, self.middle_tap)?;
        Ok(mid.data().to_vec())
    }

    /// One replayed update of critic, actor and both targets. Returns None
    /// until the buffer has grown past the warm-up size.
    pub fn update(&mut self, rng: &mut ChaCha12Rng) -> Result<Option<UpdateReport>> {
        if self.buffer.len() < self.warmup {
            return Ok(None);
        }
        let n = self.batch;
        let idx = self.buffer.sample_indices(rng, n);
        let mut states = Vec::with_capacity(n * self.state_dim);
        let mut actions = Vec::with_capacity(n * ACTION_DIM);
        let mut rewards = Vec::with_capacity(n);
        let mut next_states = Vec::with_capacity(n * self.state_dim);
        for &i in &idx {
            let t = self.buffer.get(i);
            states.extend_from_slice(&t.state);
            actions.extend_from_slice(&t.action);
            rewards.push(t.reward);
            next_states.extend_from_slice(&t.next_state);
        }
        let states = Tensor::from_vec(&[n, self.state_dim], states)?;
        let actions = Tensor::from_vec(&[n, ACTION_DIM], actions)?;
        let next_states = Tensor::from_vec(&[n, self.state_dim], next_states)?;

        // Bootstrapped targets from the slow copies.
        let next_actions = self.actor_target.forward(&next_states, Mode::Eval)?;
        let next_q = self.critic_target.forward(&concat_rows(&next_states, &next_actions)?, Mode::Eval)?;
        let y: Vec<f64> =
            rewards.iter().zip(next_q.data()).map(|(&r, &q)| td_target(r, self.gamma, q)).collect();

        // Critic regression toward y.
        let q = self.critic.forward(&concat_rows(&states, &actions)?, Mode::Train)?;
        let inv_n = 1.0 / n as f64;
        let mut critic_loss = 0.0;
        let mut dq = Tensor::zeros(&[n, 1]);
        for i in 0..n {
            let diff = q.data()[i] - y[i];
            critic_loss += diff * diff * inv_n;
            dq.data_mut()[i] = 2.0 * diff * inv_n;
        }
        self.critic.zero_grads();
        self.critic.backward(&dq)?;
        self.critic_adam.step(&mut self.critic.param_blocks())?;

        // Actor ascent on the critic's score. The critic runs in eval mode
        // here so its batch statistics are not dragged by the actor pass;
        // its gradients from this pass are discarded.
        let mu = self.actor.forward(&states, Mode::Train)?;
        let q_mu = self.critic.forward(&concat_rows(&states, &mu)?, Mode::Eval)?;
        let actor_value = q_mu.data().iter().sum::<f64>() * inv_n;
        let dq_mu = Tensor::full(&[n, 1], -inv_n);
        self.critic.zero_grads();
        let dinput = self.critic.backward(&dq_mu)?;
        let da = slice_cols(&dinput, self.state_dim, self.state_dim + ACTION_DIM)?;
        self.actor.zero_grads();
        self.actor.backward(&da)?;
        self.actor_adam.step(&mut self.actor.param_blocks())?;
        self.critic.zero_grads();

        let a = self.actor.values_snapshot();
        self.actor_target.blend_from(&a, self.zeta)?;
        let c = self.critic.values_snapshot();
        self.critic_target.blend_from(&c, self.zeta)?;
        Ok(Some(UpdateReport { critic_loss, actor_value }))
    }

    pub fn save_into(&mut self, ck: &mut Checkpoint, prefix: &str) -> Result<()> {
        self.actor.save_into(ck, &format!("{prefix}.actor"))?;
        self.actor_target.save_into(ck, &format!("{prefix}.actor_target"))?;
        self.critic.save_into(ck, &format!("{prefix}.critic"))?;
        self.critic_target.save_into(ck, &format!("{prefix}.critic_target"))?;
        self.actor_adam.save_into(ck, &format!("{prefix}.actor_adam"))?;
        self.critic_adam.save_into(ck, &format!("{prefix}.critic_adam"))?;
        ck.put_f64(&format!("{prefix}.ou.x"), &[ACTION_DIM], self.ou.x.to_vec())?;
        let n = self.buffer.len();
        ck.put_u64(&format!("{prefix}.buffer.len"), vec![n as u64])?;
        if n > 0 {
            let mut states = Vec::with_capacity(n * self.state_dim);
            let mut actions = Vec::with_capacity(n * ACTION_DIM);
            let mut rewards = Vec::with_capacity(n);
            let mut next_states = Vec::with_capacity(n * self.state_dim);
            for t in &self.buffer.items {
                states.extend_from_slice(&t.state);
                actions.extend_from_slice(&t.action);
                rewards.push(t.reward);
                next_states.extend_from_slice(&t.next_state);
            }
            ck.put_f64(&format!("{prefix}.buffer.states"), &[n, self.state_dim], states)?;
            ck.put_f64(&format!("{prefix}.buffer.actions"), &[n, ACTION_DIM], actions)?;
            ck.put_f64(&format!("{prefix}.buffer.rewards"), &[n], rewards)?;
            ck.put_f64(&format!("{prefix}.buffer.next_states"), &[n, self.state_dim], next_states)?;
        }
        Ok(())
    }

    pub fn load_from(&mut self, ck: &Checkpoint, prefix: &str) -> Result<()> {
        self.actor.load_from(ck, &format!("{prefix}.actor"))?;
        self.actor_target.load_from(ck, &format!("{prefix}.actor_target"))?;
        self.critic.load_from(ck, &format!("{prefix}.critic"))?;
        self.critic_target.load_from(ck, &format!("{prefix}.critic_target"))?;
        self.actor_adam.load_from(ck, &format!("{prefix}.actor_adam"))?;
        self.critic_adam.load_from(ck, &format!("{prefix}.critic_adam"))?;
        let (_, x) = ck.f64s(&format!("{prefix}.ou.x"))?;
        if x.len() != ACTION_DIM {
            return Err(Error::Checkpoint("noise state length mismatch".into()));
        }
        self.ou.x.copy_from_slice(x);
        let n_block = ck.u64s(&format!("{prefix}.buffer.len"))?;
        if n_block.len() != 1 {
            return Err(Error::Checkpoint(format!("`{prefix}.buffer.len` must hold one value")));
        }
        let n = n_block[0] as usize;
        self.buffer.items.clear();
        if n > 0 {
            let (_, states) = ck.f64s(&format!("{prefix}.buffer.states"))?;
            let (_, actions) = ck.f64s(&format!("{prefix}.buffer.actions"))?;
            let (_, rewards) = ck.f64s(&format!("{prefix}.buffer.rewards"))?;
            let (_, next_states) = ck.f64s(&format!("{prefix}.buffer.next_states"))?;
            if states.len() != n * self.state_dim
                || actions.len() != n * ACTION_DIM
                || rewards.len() != n
                || next_states.len() != n * self.state_dim
            {
                return Err(Error::Checkpoint(format!(
                    "`{prefix}.buffer` blocks do not match {n} transitions"
                )));
            }
            for i in 0..n {
                let mut action = [0.0; ACTION_DIM];
                action.copy_from_slice(&actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
                self.buffer.push(Transition {
                    state: states[i * self.state_dim..(i + 1) * self.state_dim].to_vec(),
                    action,
                    reward: rewards[i],
                    next_state: next_states[i * self.state_dim..(i + 1) * self.state_dim].to_vec(),
                });
            }
        }
        Ok(())
    }

    #[cfg(test)]
    fn actor_net(&mut self) -> &mut Net {
        &mut self.actor
    }
}

/// Gradient-checks a freshly initialized actor and critic against central
/// finite differences on small random batches. Returns (actor, critic)
/// reports with per-block worst errors; the check only drives forward
/// passes, so it verifies every backward independently.
pub fn gradient_check(
    cfg: &Config,
    rng: &mut ChaCha12Rng,
) -> Result<(crate::nn::FdReport, crate::nn::FdReport)> {
    use crate::nn::finite_difference_check;

    let mut agent = DdpgAgent::from_config(cfg);
    agent.init(rng)?;
    let n = 3usize;
    let sd = agent.state_dim;

    // Critic under a squared-error regression toward random targets.
    let input_dim = sd + ACTION_DIM;
    let input = Tensor::from_vec(
        &[n, input_dim],
        (0..n * input_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    agent.critic.zero_grads();
    let q = agent.critic.forward(&input, Mode::Train)?;
    let mut dq = Tensor::zeros(&[n, 1]);
    for i in 0..n {
        dq.data_mut()[i] = 2.0 * (q.data()[i] - y[i]) / n as f64;
    }
    agent.critic.backward(&dq)?;
    let critic_report = finite_difference_check(
        &mut agent.critic,
        |net| {
            let q = net.forward(&input, Mode::Train).unwrap();
            q.data().iter().zip(&y).map(|(q, y)| (q - y) * (q - y)).sum::<f64>() / n as f64
        },
        |net, f| {
            for b in net.param_blocks() {
                f(b);
            }
        },
        1e-5,
    );

    // Actor under a fixed linear projection of its action batch.
    let states =
        Tensor::from_vec(&[n, sd], (0..n * sd).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let u: Vec<f64> = (0..n * ACTION_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    agent.actor.zero_grads();
    agent.actor.forward(&states, Mode::Train)?;
    let da = Tensor::from_vec(&[n, ACTION_DIM], u.clone())?;
    agent.actor.backward(&da)?;
    let actor_report = finite_difference_check(
        &mut agent.actor,
        |net| {
            let a = net.forward(&states, Mode::Train).unwrap();
            a.data().iter().zip(&u).map(|(a, u)| a * u).sum::<f64>()
        },
        |net, f| {
            for b in net.param_blocks() {
                f(b);
            }
        },
        1e-5,
    );
    Ok((actor_report, critic_report))
}

/// [n, a] and [n, b] side by side into [n, a + b].
fn concat_rows(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, da) = (a.shape()[0], a.shape()[1]);
    let db = b.shape()[1];
    if b.shape()[0] != n {
        return Err(Error::ShapeMismatch { expected: vec![n, db], got: b.shape().to_vec() });
    }
    let mut data = Vec::with_capacity(n * (da + db));
    for i in 0..n {
        data.extend_from_slice(&a.data()[i * da..(i + 1) * da]);
        data.extend_from_slice(&b.data()[i * db..(i + 1) * db]);
    }
    Tensor::from_vec(&[n, da + db], data)
}

/// Column slice [from, to) of a [n, d] tensor.
fn slice_cols(t: &Tensor, from: usize, to: usize) -> Result<Tensor> {
    let (n, d) = (t.shape()[0], t.shape()[1]);
    if to > d || from > to {
        return Err(Error::invalid("column slice out of range"));
    }
    let mut data = Vec::with_capacity(n * (to - from));
    for i in 0..n {
        data.extend_from_slice(&t.data()[i * d + from..i * d + to]);
    }
    Tensor::from_vec(&[n, to - from], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn test_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.ddpg.state_side = 2;
        cfg.ddpg.actor_hidden = vec![16, 12, 8];
        cfg.ddpg.critic_hidden = vec![16, 8];
        cfg.ddpg.capacity = 200;
        cfg.ddpg.batch = 40;
        cfg.ddpg.warmup = 50;
        cfg
    }

    #[test]
    fn td_target_matches_hand_values() {
        let y = td_target(1.25, 0.99, -3.7);
        assert!((y - (1.25 + 0.99 * -3.7)).abs() < 1e-15);
        let y = td_target(-0.5, 0.99, 12.25);
        assert!((y - 11.6275).abs() < 1e-12);
        assert_eq!(td_target(3.5, 0.0, 100.0), 3.5);
    }

    #[test]
    fn buffer_keeps_newest_at_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for k in 0..5 {
            buf.push(Transition {
                state: vec![k as f64],
                action: [0.0; 4],
                reward: k as f64,
                next_state: vec![0.0],
            });
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).reward, 2.0);
        assert_eq!(buf.get(2).reward, 4.0);
        let mut rng = derive_stream(1, "buffer");
        let idx = buf.sample_indices(&mut rng, 64);
        assert_eq!(idx.len(), 64);
        assert!(idx.iter().all(|&i| i < 3));
        // With replacement: 64 draws from 3 items must repeat.
        assert!(idx.iter().filter(|&&i| i == idx[0]).count() > 1);
    }

    #[test]
    fn sampling_is_uniform_over_a_full_buffer() {
        let mut buf = ReplayBuffer::new(500);
        for k in 0..500 {
            buf.push(Transition {
                state: vec![k as f64],
                action: [0.0; 4],
                reward: 0.0,
                next_state: vec![0.0],
            });
        }
        let mut rng = derive_stream(9, "uniform");
        let mut counts = [0u32; 500];
        for _ in 0..50 {
            for i in buf.sample_indices(&mut rng, 200) {
                counts[i] += 1;
            }
        }
        // 10000 draws over 500 bins: Pearson statistic against the uniform
        // expectation of 20 per bin, compared to the 99th percentile of
        // chi-square with 499 degrees of freedom.
        let stat: f64 = counts.iter().map(|&c| (c as f64 - 20.0).powi(2) / 20.0).sum();
        assert!(stat < 575.4191950454931, "chi-square statistic {stat}");
    }

    #[test]
    fn ou_noise_reverts_to_mean() {
        let mut rng = derive_stream(2, "ou");
        let mut ou = OuNoise::new(0.15, 0.2, 1.0);
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let x = ou.step(&mut rng);
            acc += x[0];
            acc2 += x[0] * x[0];
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean * mean;
        // Stationary variance of the discretized process:
        // sigma^2 / (theta * (2 - theta)) with dt = 1.
        let expected = 0.2 * 0.2 / (0.15 * (2.0 - 0.15));
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - expected).abs() < 0.01, "var {var} vs {expected}");
    }

    #[test]
    fn soft_updates_follow_geometric_law() {
        let mut rng = derive_stream(3, "soft");
        let cfg = test_cfg();
        let mut agent = DdpgAgent::from_config(&cfg);
        agent.init(&mut rng).unwrap();
        // Displace the target, then blend repeatedly with the actor frozen.
        let frozen = agent.actor.values_snapshot();
        let mut displaced = frozen.clone();
        for b in &mut displaced {
            for v in b.iter_mut() {
                *v += 0.37;
            }
        }
        agent.actor_target.blend_from(&displaced, 1.0).unwrap();
        let zeta = 0.01;
        let n = 50;
        for _ in 0..n {
            agent.actor_target.blend_from(&frozen, zeta).unwrap();
        }
        let got = agent.actor_target.values_snapshot();
        let shrink = (1.0 - zeta).powi(n);
        for (gb, fb) in got.iter().zip(&frozen) {
            for (g, f) in gb.iter().zip(fb) {
                let want = f + 0.37 * shrink;
                assert!((g - want).abs() <= 1e-12 * want.abs().max(1.0), "{g} vs {want}");
            }
        }
    }

    #[test]
    fn actor_and_critic_gradients_match_finite_differences() {
        let mut rng = derive_stream(4, "ddpg-fd");
        let (actor, critic) = gradient_check(&test_cfg(), &mut rng).unwrap();
        assert!(actor.passes(1e-4), "actor worst {} at {}", actor.worst_block, actor.max_rel_err);
        assert!(
            critic.passes(1e-4),
            "critic worst {} at {}",
            critic.worst_block,
            critic.max_rel_err
        );
    }

    #[test]
    fn update_moves_actions_toward_rewarded_region() {
        let mut rng = derive_stream(6, "ddpg-train");
        let mut cfg = test_cfg();
        // One-step episodes: no bootstrapping, faster optimizers.
        cfg.ddpg.gamma = 0.0;
        cfg.ddpg.actor_alpha = 0.02;
        cfg.ddpg.critic_alpha = 0.02;
        let mut agent = DdpgAgent::from_config(&cfg);
        agent.init(&mut rng).unwrap();
        let sd = agent.state_dim();
        let state: Vec<f64> = (0..sd).map(|i| (i as f64 / sd as f64) - 0.5).collect();
        let target = [0.7; ACTION_DIM];
        for _ in 0..cfg.ddpg.capacity {
            let action: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
            let reward: f64 =
                -action.iter().zip(&target).map(|(a, t)| (a - t) * (a - t)).sum::<f64>();
            agent
                .record(Transition {
                    state: state.clone(),
                    action,
                    reward,
                    next_state: state.clone(),
                })
                .unwrap();
        }
        for _ in 0..2500 {
            agent.update(&mut rng).unwrap().unwrap();
        }
        let a = agent.act(&state).unwrap();
        for v in a {
            assert!((v - 0.7).abs() < 0.15, "action {a:?}");
        }
    }

    #[test]
    fn update_waits_for_warmup() {
        let mut rng = derive_stream(7, "warmup");
        let cfg = test_cfg();
        let mut agent = DdpgAgent::from_config(&cfg);
        agent.init(&mut rng).unwrap();
        let sd = agent.state_dim();
        for k in 0..cfg.ddpg.warmup {
            assert!(agent.update(&mut rng).unwrap().is_none(), "update before warmup at {k}");
            agent
                .record(Transition {
                    state: vec![0.1; sd],
                    action: [0.5; 4],
                    reward: 0.0,
                    next_state: vec![0.1; sd],
                })
                .unwrap();
        }
        assert!(agent.update(&mut rng).unwrap().is_some());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = derive_stream(8, "ddpg-ck");
        let cfg = test_cfg();
        let mut a = DdpgAgent::from_config(&cfg);
        a.init(&mut rng).unwrap();
        let sd = a.state_dim();
        for _ in 0..60 {
            let state: Vec<f64> = (0..sd).map(|_| rng.random_range(-1.0..1.0)).collect();
            let action = a.act_noisy(&state, &mut rng).unwrap();
            let next: Vec<f64> = (0..sd).map(|_| rng.random_range(-1.0..1.0)).collect();
            a.record(Transition { state, action, reward: rng.random_range(-1.0..1.0), next_state: next })
                .unwrap();
        }
        a.update(&mut rng).unwrap().unwrap();

        let mut ck = Checkpoint::new();
        a.save_into(&mut ck, "ddpg").unwrap();
        let ck2 = Checkpoint::from_slice(&ck.to_vec()).unwrap();
        let mut b = DdpgAgent::from_config(&cfg);
        b.load_from(&ck2, "ddpg").unwrap();

        let state = vec![0.25; sd];
        let pa = a.act(&state).unwrap();
        let pb = b.act(&state).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // Same rng stream from here: updates must stay bit-identical.
        let mut ra = derive_stream(9, "after");
        let mut rb = derive_stream(9, "after");
        let ua = a.update(&mut ra).unwrap().unwrap();
        let ub = b.update(&mut rb).unwrap().unwrap();
        assert_eq!(ua.critic_loss.to_bits(), ub.critic_loss.to_bits());
        assert_eq!(ua.actor_value.to_bits(), ub.actor_value.to_bits());
        let na = a.act_noisy(&state, &mut ra).unwrap();
        let nb = b.act_noisy(&state, &mut rb).unwrap();
        for (x, y) in na.iter().zip(&nb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn middle_activations_have_the_middle_width() {
        let mut rng = derive_stream(10, "mid");
        let cfg = test_cfg();
        let mut agent = DdpgAgent::from_config(&cfg);
        agent.init(&mut rng).unwrap();
        let state = vec![0.1; agent.state_dim()];
        let mid = agent.actor_middle_activations(&state).unwrap();
        assert_eq!(mid.len(), 12);
        assert!(mid.iter().all(|v| *v >= 0.0), "relu output expected");
        let _ = agent.actor_net();
    }
}
