use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, compute_reward, ddqn_target, decay_epsilon, dqn_target, mask_padded, select_action, target_centroid,
    AlgoVariant, Episode, ReplayBuffer, StateVector, Transition,
};
use crate::neural::{NetworkParams, TrainSample};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub epochs: usize,
    /// Epochs between online → target copies.
    pub save_interval: usize,
    pub batch_size: usize,
    pub penalty: f64,
    pub seed: u64,
    /// Step size inside the DQN target; 1 gives the plain Bellman target.
    pub target_alpha: f64,
    pub buffer_capacity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.9,
            learning_rate: 0.001,
            epsilon: 1.0,
            epsilon_min: 0.1,
            epsilon_decay: 0.995,
            epochs: 100,
            save_interval: 10,
            batch_size: 32,
            penalty: 10.0,
            seed: 0,
            target_alpha: 1.0,
            buffer_capacity: ReplayBuffer::<Transition>::DEFAULT_CAPACITY,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("epsilon_min", self.epsilon_min),
            ("epsilon_decay", self.epsilon_decay),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1]")));
            }
        }
        if self.epsilon_min > self.epsilon {
            return bad("epsilon_min exceeds epsilon");
        }
        if self.save_interval == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("save_interval, batch_size and buffer capacity must be positive");
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return bad("penalty must be non-negative");
        }
        if !(self.target_alpha > 0.0 && self.target_alpha.is_finite()) {
            return bad("target alpha must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: NetworkParams,
    /// Per-epoch mean squared distance between the target network's masked
    /// choice and the highest-gain centroid, averaged over both coordinates.
    pub mse: Vec<f64>,
    /// Per-epoch mean Q-regression loss of the gradient steps.
    pub loss: Vec<f64>,
    pub final_epsilon: f64,
}

/// Offline training over recorded exploration runs.
///
/// Every epoch walks all recorded states in order. For each one the online
/// network picks a slot epsilon-greedily, the reward scores that slot against
/// the highest-gain centroid, the transition enters the replay buffer, and one
/// gradient step is taken on a uniformly sampled batch. The target network is
/// refreshed from the online one every `save_interval` epochs.
pub fn train(dataset: &[Episode], cfg: &TrainConfig, variant: AlgoVariant) -> Result<TrainReport> {
    cfg.validate()?;
    let recorded: Vec<&Transition> = dataset.iter().flat_map(|e| &e.transitions).collect();
    if recorded.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut online = NetworkParams::init(variant.topology(), &mut rng);
    let mut target = TargetNet::new(online.clone(), recorded.len());
    // Items carry the index of their recorded transition for the target cache.
    let mut buffer: ReplayBuffer<(usize, Transition)> = ReplayBuffer::new(cfg.buffer_capacity);
    let mut epsilon = cfg.epsilon;
    let mut mse = Vec::with_capacity(cfg.epochs);
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut sq_err = 0.0;
        let mut loss_sum = 0.0;
        for (idx, rec) in recorded.iter().enumerate() {
            let record = rec.state.record();
            let action = select_action(&online, &rec.state, &record, epsilon, cfg.penalty, &mut rng)?;
            let goal = target_centroid(&record);
            let reward = compute_reward(record.centroids[action], goal, cfg.penalty);
            buffer.push((
                idx,
                Transition {
                    state: rec.state,
                    action,
                    reward,
                    next_state: rec.next_state,
                    done: rec.done,
                },
            ));

            let batch = buffer.sample(&mut rng, cfg.batch_size)?;
            let targets = td_targets(&batch, &online, &mut target, cfg, variant)?;
            let samples: Vec<TrainSample<'_>> = batch
                .iter()
                .zip(&targets)
                .map(|((_, t), &y)| TrainSample {
                    state: t.state.as_slice(),
                    action: t.action,
                    target: y,
                })
                .collect();
            loss_sum += online
                .backward_and_step(&samples, cfg.learning_rate)
                .map_err(|e| Error::Divergence(format!("epoch {epoch}: {e}")))?;
            epsilon = decay_epsilon(epsilon, cfg.epsilon_min, cfg.epsilon_decay);

            let mut q = target.state_q(idx, &rec.state)?.to_vec();
            mask_padded(&mut q, &record, cfg.penalty);
            let predicted = record.centroids[argmax(&q)];
            sq_err += ((predicted.0 - goal.0).powi(2) + (predicted.1 - goal.1).powi(2)) / 2.0;
        }
        let n = recorded.len() as f64;
        let epoch_loss = loss_sum / n;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence(format!("epoch {epoch}: loss {epoch_loss}")));
        }
        mse.push(sq_err / n);
        losses.push(epoch_loss);
        if epoch % cfg.save_interval == 0 {
            target.sync(&online);
        }
    }
    Ok(TrainReport {
        params: online,
        mse,
        loss: losses,
        final_epsilon: epsilon,
    })
}

/// The target network with its outputs memoized per recorded transition;
/// they stay valid until the next sync because recorded states never change.
struct TargetNet {
    params: NetworkParams,
    state_q: Vec<Option<Vec<f64>>>,
    next_q: Vec<Option<Vec<f64>>>,
}

impl TargetNet {
    fn new(params: NetworkParams, n: usize) -> Self {
        TargetNet {
            params,
            state_q: vec![None; n],
            next_q: vec![None; n],
        }
    }

    fn sync(&mut self, online: &NetworkParams) {
        self.params = online.clone();
        self.state_q.iter_mut().for_each(|q| *q = None);
        self.next_q.iter_mut().for_each(|q| *q = None);
    }

    fn state_q(&mut self, idx: usize, state: &StateVector) -> Result<&[f64]> {
        if self.state_q[idx].is_none() {
            self.state_q[idx] = Some(self.params.q_values(state.as_slice())?);
        }
        Ok(self.state_q[idx].as_deref().expect("filled above"))
    }

    fn next_q(&mut self, idx: usize, next_state: &StateVector) -> Result<Vec<f64>> {
        if self.next_q[idx].is_none() {
            self.next_q[idx] = Some(self.params.q_values(next_state.as_slice())?);
        }
        Ok(self.next_q[idx].clone().expect("filled above"))
    }
}

fn td_targets(
    batch: &[&(usize, Transition)],
    online: &NetworkParams,
    target: &mut TargetNet,
    cfg: &TrainConfig,
    variant: AlgoVariant,
) -> Result<Vec<f64>> {
    let next_states: Vec<&[f64]> = batch.iter().map(|(_, t)| t.next_state.as_slice()).collect();
    let online_next = if variant.is_double() {
        Some(online.q_values_batch(&next_states)?)
    } else {
        None
    };
    // alpha = 1 zeroes the q_sa term exactly, so the online pass is skipped.
    let online_now = if !variant.is_double() && cfg.target_alpha != 1.0 {
        let states: Vec<&[f64]> = batch.iter().map(|(_, t)| t.state.as_slice()).collect();
        Some(online.q_values_batch(&states)?)
    } else {
        None
    };
    batch
        .iter()
        .enumerate()
        .map(|(k, (idx, t))| {
            let next_record = t.next_state.record();
            let mut q_target_next = target.next_q(*idx, &t.next_state)?;
            mask_padded(&mut q_target_next, &next_record, cfg.penalty);
            Ok(match &online_next {
                Some(q_online) => {
                    let mut q_online_next = q_online[k].clone();
                    mask_padded(&mut q_online_next, &next_record, cfg.penalty);
                    ddqn_target(t.reward, cfg.gamma, t.done, &q_target_next, &q_online_next)
                }
                None => {
                    let max_next = q_target_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let q_sa = online_now.as_ref().map_or(0.0, |q| q[k][t.action]);
                    dqn_target(q_sa, t.reward, cfg.gamma, cfg.target_alpha, max_next)
                }
            })
        })
        .collect()
}
