//! Value learning: a multi-head fully connected network trained with
//! bootstrapped double Q-learning.
//!
//! Action values follow the successor-state convention of a deterministic
//! MDP: `Q(s, a) = r(s') + V(s')`, where `r` is already discounted by the
//! time remaining. Terminal successors take `Q = r(s')`.

mod adam;
mod agent;
mod checkpoint;
mod network;
mod replay;
mod schedule;

use std::sync::Arc;

use rand::Rng;
use smallvec::SmallVec;
use thiserror::Error;

pub use adam::{clip_global_norm, Adam};
pub use agent::{
    action_values, head_mean_values, rollout, td_target, train_step, Agent, Candidate, EpisodeRecord, Environment,
    HeadChoice, TrainConfig, Transition,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, FORMAT_VERSION, MAGIC};
pub use network::ValueNetwork;
pub use replay::ReplayBuffer;
pub use schedule::EpsilonSchedule;

#[derive(Debug, Error)]
pub enum QError {
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("head {head} out of range for {heads} heads")]
    HeadOutOfRange { head: usize, heads: usize },
    #[error("empty action set")]
    EmptyActionSet,
    #[error("replay buffer holds {available} transitions, batch needs {required}")]
    InsufficientData { available: usize, required: usize },
    #[error("architecture mismatch: expected {expected:?}, found {found:?}")]
    ArchitectureMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint format version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("environment error: {0}")]
    Environment(Box<dyn std::error::Error + Send + Sync>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparse network input: indices set to 1.0 plus a few real-valued entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Features {
    pub ones: Arc<[u32]>,
    pub extra: SmallVec<[(u32, f64); 1]>,
}

impl Features {
    pub fn new(ones: Arc<[u32]>, extra: impl IntoIterator<Item = (u32, f64)>) -> Self {
        Features {
            ones,
            extra: extra.into_iter().collect(),
        }
    }

    /// Sparse view of a dense vector (non-zero entries only).
    pub fn from_dense(x: &[f64]) -> Self {
        Features {
            ones: Arc::from(Vec::new()),
            extra: x
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for &i in self.ones.iter() {
            x[i as usize] += 1.0;
        }
        for &(i, v) in &self.extra {
            x[i as usize] += v;
        }
        x
    }

    fn max_index(&self) -> Option<u32> {
        self.ones.iter().chain(self.extra.iter().map(|(i, _)| i)).copied().max()
    }
}

pub fn huber(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

/// Derivative of [`huber`].
pub fn huber_grad(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// The exploration branch of ε-greedy: `Some(uniform index)` with
/// probability `epsilon`, `None` when the greedy branch is taken.
pub fn explore(n: usize, epsilon: f64, rng: &mut impl Rng) -> Option<usize> {
    if rng.gen::<f64>() < epsilon {
        Some(rng.gen_range(0..n))
    } else {
        None
    }
}

pub fn select_action(values: &[f64], epsilon: f64, rng: &mut impl Rng) -> Result<usize, QError> {
    if values.is_empty() {
        return Err(QError::EmptyActionSet);
    }
    Ok(explore(values.len(), epsilon, rng).unwrap_or_else(|| argmax(values).expect("non-empty")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huber_values() {
        assert_eq!(huber(0.0), 0.0);
        assert_eq!(huber(0.5), 0.125);
        assert_eq!(huber(2.0), 1.5);
        assert_eq!(huber(-2.0), 1.5);
        assert_eq!(huber_grad(-3.0), -1.0);
        assert_eq!(huber_grad(0.25), 0.25);
    }

    #[test]
    fn greedy_selection_breaks_ties_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[1.0, 1.0, 1.0], 0.0, &mut rng).unwrap(), 0);
        assert_eq!(select_action(&[0.0, 3.0, 3.0, 1.0], 0.0, &mut rng).unwrap(), 1);
        assert!(matches!(select_action(&[], 0.5, &mut rng), Err(QError::EmptyActionSet)));
    }

    #[test]
    fn features_dense_round_trip() {
        let f = Features::new(Arc::from(vec![1, 4]), [(5, 0.25)]);
        let x = f.to_dense(6);
        assert_eq!(x, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.25]);
        assert_eq!(Features::from_dense(&x).to_dense(6), x);
    }
}
