//! Environment interface, targets, training step and episode driver.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax, clip_global_norm, explore, Adam, EpsilonSchedule, Features, QError, ReplayBuffer, ValueNetwork};

/// One successor of the current state, as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub features: Features,
    /// Successor reward, already discounted by the time remaining.
    pub reward: f64,
    /// The successor sits at the horizon; no value beyond its reward.
    pub terminal: bool,
}

/// A deterministic finite-horizon MDP whose actions are identified by the
/// successor they lead to.
pub trait Environment {
    type State: Clone;

    fn horizon(&self) -> usize;

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Self::State, QError>;

    /// Successors of a non-terminal state, in a fixed order.
    fn candidates(&mut self, state: &Self::State) -> Result<Vec<Candidate>, QError>;

    /// The successor at `index` of [`Environment::candidates`].
    fn step(&mut self, state: &Self::State, index: usize) -> Result<Self::State, QError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub successor: S,
    pub features: Features,
    pub reward: f64,
    pub terminal: bool,
    /// Bit `i` set when head `i` trains on this transition.
    pub mask: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub heads: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    /// Environment steps between gradient steps.
    pub train_every: usize,
    /// Gradient steps between target-network copies.
    pub target_sync: usize,
    pub grad_clip: f64,
    pub bootstrap_prob: f64,
    pub schedule: EpsilonSchedule,
    pub episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![1024, 512, 128, 32],
            heads: 10,
            learning_rate: 1e-4,
            batch_size: 128,
            replay_capacity: 100_000,
            warmup: 500,
            train_every: 1,
            target_sync: 500,
            grad_clip: 10.0,
            bootstrap_prob: 0.5,
            schedule: EpsilonSchedule::linear(2500),
            episodes: 5000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), QError> {
        let bad = |m: String| Err(QError::InvalidConfig(m));
        if !(1..=64).contains(&self.heads) {
            return bad(format!("heads must be 1..=64, got {}", self.heads));
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer of width 0".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.train_every == 0 || self.target_sync == 0 {
            return bad("batch_size, train_every and target_sync must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay capacity smaller than batch size".into());
        }
        if !(self.grad_clip > 0.0) {
            return bad(format!("grad_clip {}", self.grad_clip));
        }
        if !(self.bootstrap_prob > 0.0 && self.bootstrap_prob <= 1.0) {
            return bad(format!("bootstrap_prob {} outside (0, 1]", self.bootstrap_prob));
        }
        Ok(())
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(self.heads);
        dims
    }
}

fn non_terminal<'a>(cands: &'a [Candidate]) -> Vec<&'a Features> {
    cands.iter().filter(|c| !c.terminal).map(|c| &c.features).collect()
}

/// `Q = r(s') + V_head(s')` per candidate, `r(s')` for terminal successors.
pub fn action_values(net: &ValueNetwork, head: usize, cands: &[Candidate]) -> Result<Vec<f64>, QError> {
    if head >= net.heads() {
        return Err(QError::HeadOutOfRange {
            head,
            heads: net.heads(),
        });
    }
    let v = net.forward_batch(&non_terminal(cands))?;
    let mut row = 0;
    Ok(cands
        .iter()
        .map(|c| {
            if c.terminal {
                c.reward
            } else {
                row += 1;
                c.reward + v[[row - 1, head]]
            }
        })
        .collect())
}

/// Action values with `V` averaged over all heads.
pub fn head_mean_values(net: &ValueNetwork, cands: &[Candidate]) -> Result<Vec<f64>, QError> {
    let v = net.forward_batch(&non_terminal(cands))?;
    let mut rows = v.rows().into_iter();
    Ok(cands
        .iter()
        .map(|c| {
            if c.terminal {
                c.reward
            } else {
                c.reward + rows.next().expect("one row per non-terminal").mean().expect("heads > 0")
            }
        })
        .collect())
}

/// Per-head double-Q targets for a batch: the online network picks the best
/// successor action by head-mean value, the target network scores it head by
/// head. Terminal transitions get `y = r`.
fn batch_targets<E: Environment>(
    batch: &[&Transition<E::State>],
    env: &mut E,
    online: &ValueNetwork,
    target: &ValueNetwork,
) -> Result<Array2<f64>, QError> {
    let heads = online.heads();
    let mut y = Array2::<f64>::zeros((batch.len(), heads));
    let mut sets: Vec<(usize, Vec<Candidate>)> = Vec::new();
    for (j, t) in batch.iter().enumerate() {
        if t.terminal {
            y.row_mut(j).fill(t.reward);
        } else {
            let cands = env.candidates(&t.successor)?;
            if cands.is_empty() {
                return Err(QError::EmptyActionSet);
            }
            sets.push((j, cands));
        }
    }
    if sets.is_empty() {
        return Ok(y);
    }

    let all: Vec<&Features> = sets.iter().flat_map(|(_, c)| non_terminal(c)).collect();
    let v = online.forward_batch(&all)?;
    let mut row = 0;
    let mut chosen: Vec<(usize, &Candidate)> = Vec::with_capacity(sets.len());
    for (j, cands) in &sets {
        let q: Vec<f64> = cands
            .iter()
            .map(|c| {
                if c.terminal {
                    c.reward
                } else {
                    row += 1;
                    c.reward + v.row(row - 1).mean().expect("heads > 0")
                }
            })
            .collect();
        chosen.push((*j, &cands[argmax(&q).expect("non-empty")]));
    }

    let evaluated: Vec<&Features> = chosen.iter().filter(|(_, c)| !c.terminal).map(|(_, c)| &c.features).collect();
    let vt = target.forward_batch(&evaluated)?;
    let mut row = 0;
    for (j, c) in chosen {
        let base = batch[j].reward + c.reward;
        if c.terminal {
            y.row_mut(j).fill(base);
        } else {
            for i in 0..heads {
                y[[j, i]] = base + vt[[row, i]];
            }
            row += 1;
        }
    }
    Ok(y)
}

/// Per-head bootstrap targets of one transition.
pub fn td_target<E: Environment>(
    transition: &Transition<E::State>,
    env: &mut E,
    online: &ValueNetwork,
    target: &ValueNetwork,
) -> Result<Vec<f64>, QError> {
    Ok(batch_targets(&[transition], env, online, target)?.row(0).to_vec())
}

/// One gradient step on a uniform batch. Head `i` trains on sample `j` only
/// when bit `i` of its mask is set; the loss is the masked mean Huber error
/// between each head's target and `Q_head` of the chosen successor.
#[allow(clippy::too_many_arguments)]
pub fn train_step<E: Environment>(
    online: &mut ValueNetwork,
    target: &ValueNetwork,
    buffer: &ReplayBuffer<Transition<E::State>>,
    batch_size: usize,
    adam: &mut Adam,
    grad_clip: f64,
    env: &mut E,
    rng: &mut ChaCha8Rng,
) -> Result<f64, QError> {
    if buffer.len() < batch_size || batch_size == 0 {
        return Err(QError::InsufficientData {
            available: buffer.len(),
            required: batch_size.max(1),
        });
    }
    let batch: Vec<&Transition<E::State>> = buffer
        .sample_indices(batch_size, rng)
        .into_iter()
        .map(|i| buffer.get(i).expect("sampled index in range"))
        .collect();
    let y = batch_targets(&batch, env, online, target)?;

    let heads = online.heads();
    let mut denom = 0.0;
    let mut rows = Vec::new();
    let mut value_targets = Vec::new();
    let mut weights = Vec::new();
    for (j, t) in batch.iter().enumerate() {
        let bits = (0..heads).filter(|&i| t.mask >> i & 1 == 1).count();
        denom += bits as f64;
        // terminal transitions have Q = y = r: zero residual, zero gradient
        if t.terminal {
            continue;
        }
        rows.push(&t.features);
        for i in 0..heads {
            value_targets.push(y[[j, i]] - t.reward);
            weights.push((t.mask >> i & 1) as f64);
        }
    }
    let n = rows.len();
    let value_targets = Array2::from_shape_vec((n, heads), value_targets).expect("shape");
    let weights = Array2::from_shape_vec((n, heads), weights).expect("shape");
    let mut grad = vec![0.0; online.param_count()];
    let loss = online.loss_and_grad(&rows, value_targets.view(), weights.view(), denom.max(1.0), &mut grad)?;
    clip_global_norm(&mut grad, grad_clip);
    adam.update(online.params_mut(), &grad);
    Ok(loss)
}

/// Which head drives greedy choices in a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadChoice {
    Head(usize),
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord<S> {
    pub episode: usize,
    pub head: Option<usize>,
    pub epsilon: f64,
    /// Initial state followed by one state per step.
    pub states: Vec<S>,
    /// Discounted reward of each step's successor.
    pub rewards: Vec<f64>,
    /// Losses of the gradient steps taken during the episode.
    pub losses: Vec<f64>,
}

impl<S> EpisodeRecord<S> {
    pub fn terminal(&self) -> &S {
        self.states.last().expect("initial state always present")
    }

    pub fn discounted_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

fn choose(
    net: &ValueNetwork,
    head: HeadChoice,
    cands: &[Candidate],
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize, QError> {
    if cands.is_empty() {
        return Err(QError::EmptyActionSet);
    }
    if let Some(i) = explore(cands.len(), epsilon, rng) {
        return Ok(i);
    }
    let q = match head {
        HeadChoice::Head(h) => action_values(net, h, cands)?,
        HeadChoice::Mean => head_mean_values(net, cands)?,
    };
    Ok(argmax(&q).expect("non-empty"))
}

/// Rolls one episode without learning.
pub fn rollout<E: Environment>(
    net: &ValueNetwork,
    env: &mut E,
    epsilon: f64,
    head: HeadChoice,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord<E::State>, QError> {
    let mut state = env.reset(rng)?;
    let mut states = vec![state.clone()];
    let mut rewards = Vec::new();
    for _ in 0..env.horizon() {
        let cands = env.candidates(&state)?;
        let idx = choose(net, head, &cands, epsilon, rng)?;
        state = env.step(&state, idx)?;
        states.push(state.clone());
        rewards.push(cands[idx].reward);
        if cands[idx].terminal {
            break;
        }
    }
    Ok(EpisodeRecord {
        episode: 0,
        head: match head {
            HeadChoice::Head(h) => Some(h),
            HeadChoice::Mean => None,
        },
        epsilon,
        states,
        rewards,
        losses: Vec::new(),
    })
}

/// Online and target networks, optimizer, replay memory and RNG stream.
#[derive(Debug, Clone)]
pub struct Agent<S> {
    pub config: TrainConfig,
    pub online: ValueNetwork,
    pub target: ValueNetwork,
    pub adam: Adam,
    pub buffer: ReplayBuffer<Transition<S>>,
    rng: ChaCha8Rng,
    env_steps: u64,
    grad_steps: u64,
}

impl<S: Clone> Agent<S> {
    pub fn new(config: TrainConfig, input_dim: usize, seed: u64) -> Result<Self, QError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = ValueNetwork::new(&config.layer_dims(input_dim), &mut rng);
        let adam = Adam::new(online.param_count(), config.learning_rate);
        Agent::assemble(config, online, adam, rng)
    }

    /// Resumes from saved parameters and optimizer state.
    pub fn from_parts(config: TrainConfig, online: ValueNetwork, adam: Adam, seed: u64) -> Result<Self, QError> {
        config.validate()?;
        let expected = config.layer_dims(online.input_dim());
        if online.dims() != expected.as_slice() {
            return Err(QError::ArchitectureMismatch {
                expected,
                found: online.dims().to_vec(),
            });
        }
        let mut adam = adam;
        adam.lr = config.learning_rate;
        Agent::assemble(config, online, adam, ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(config: TrainConfig, online: ValueNetwork, adam: Adam, rng: ChaCha8Rng) -> Result<Self, QError> {
        if adam.m.len() != online.param_count() {
            return Err(QError::ArchitectureMismatch {
                expected: vec![online.param_count()],
                found: vec![adam.m.len()],
            });
        }
        Ok(Agent {
            target: online.clone(),
            buffer: ReplayBuffer::new(config.replay_capacity),
            config,
            online,
            adam,
            rng,
            env_steps: 0,
            grad_steps: 0,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online).expect("same architecture");
    }

    /// Bernoulli bootstrap mask with at least one bit set.
    fn sample_mask(&mut self) -> u64 {
        loop {
            let mut mask = 0u64;
            for i in 0..self.config.heads {
                if self.rng.gen_bool(self.config.bootstrap_prob) {
                    mask |= 1 << i;
                }
            }
            if mask != 0 {
                return mask;
            }
        }
    }

    pub fn train_step<E: Environment<State = S>>(&mut self, env: &mut E) -> Result<f64, QError> {
        let loss = train_step(
            &mut self.online,
            &self.target,
            &self.buffer,
            self.config.batch_size,
            &mut self.adam,
            self.config.grad_clip,
            env,
            &mut self.rng,
        )?;
        self.grad_steps += 1;
        if self.grad_steps % self.config.target_sync as u64 == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    /// One training episode: a uniformly drawn head acts ε-greedily for the
    /// whole episode; every step is stored and, once warm, trained on.
    pub fn run_episode<E: Environment<State = S>>(
        &mut self,
        env: &mut E,
        episode: usize,
    ) -> Result<EpisodeRecord<S>, QError> {
        let epsilon = self.config.schedule.value(episode);
        let head = self.rng.gen_range(0..self.config.heads);
        let mut state = env.reset(&mut self.rng)?;
        let mut states = vec![state.clone()];
        let mut rewards = Vec::new();
        let mut losses = Vec::new();
        let warm = self.config.warmup.max(self.config.batch_size);
        for _ in 0..env.horizon() {
            let cands = env.candidates(&state)?;
            let idx = choose(&self.online, HeadChoice::Head(head), &cands, epsilon, &mut self.rng)?;
            let next = env.step(&state, idx)?;
            let chosen = &cands[idx];
            let mask = self.sample_mask();
            self.buffer.push(Transition {
                successor: next.clone(),
                features: chosen.features.clone(),
                reward: chosen.reward,
                terminal: chosen.terminal,
                mask,
            });
            rewards.push(chosen.reward);
            self.env_steps += 1;
            if self.buffer.len() >= warm && self.env_steps % self.config.train_every as u64 == 0 {
                losses.push(self.train_step(env)?);
            }
            state = next;
            states.push(state.clone());
            if chosen.terminal {
                break;
            }
        }
        Ok(EpisodeRecord {
            episode,
            head: Some(head),
            epsilon,
            states,
            rewards,
            losses,
        })
    }
}
