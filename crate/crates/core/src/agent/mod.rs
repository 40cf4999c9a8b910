//! The four DQN variants and the pieces they share: state encoding,
//! epsilon-greedy selection with zero-centroid masking, rewards, and the
//! DQN / double-DQN targets.

mod dataset;
mod replay;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use dataset::{parse_dataset, write_dataset, Episode};
pub use replay::ReplayBuffer;
pub use train::{train, TrainConfig, TrainReport};

use crate::frontier::{CentroidRecord, MAX_CENTROIDS};
use crate::gridworld::RobotPose;
use crate::neural::{checkpoint, NetworkParams, Topology, NUM_ACTIONS, STATE_DIM};
use crate::{Error, Result};

/// `[x, y, qx, qy, qz, qw, c0x, c0y, …, c9x, c9y, g0, …, g9]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

const CENTROID_OFFSET: usize = 6;
const GAIN_OFFSET: usize = CENTROID_OFFSET + 2 * MAX_CENTROIDS;

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; STATE_DIM] = values.try_into().map_err(|_| Error::LengthMismatch {
            left: values.len(),
            right: STATE_DIM,
        })?;
        Ok(StateVector(arr))
    }

    /// The centroid record embedded in the state.
    pub fn record(&self) -> CentroidRecord {
        let mut record = CentroidRecord::default();
        for i in 0..MAX_CENTROIDS {
            record.centroids[i] = (self.0[CENTROID_OFFSET + 2 * i], self.0[CENTROID_OFFSET + 2 * i + 1]);
            record.gains[i] = self.0[GAIN_OFFSET + i];
        }
        record
    }
}

/// Concatenates the normalized position, orientation, centroids, and gains.
///
/// `dims` is the grid `(width, height)` used to normalize the position.
pub fn prepare_input(pose: &RobotPose, record: &CentroidRecord, dims: (usize, usize)) -> StateVector {
    let norm = |v: f64, extent: usize| if extent > 1 { v / (extent - 1) as f64 } else { 0.0 };
    let mut s = [0.0; STATE_DIM];
    s[0] = norm(pose.x, dims.0);
    s[1] = norm(pose.y, dims.1);
    s[2..6].copy_from_slice(&pose.orientation.to_array());
    for (i, &(x, y)) in record.centroids.iter().enumerate() {
        s[CENTROID_OFFSET + 2 * i] = x;
        s[CENTROID_OFFSET + 2 * i + 1] = y;
    }
    s[GAIN_OFFSET..].copy_from_slice(&record.gains);
    StateVector(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: usize,
    pub reward: f64,
    pub next_state: StateVector,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoVariant {
    Dqn,
    Ddqn,
    DuelingDqn,
    DuelingDdqn,
}

impl AlgoVariant {
    pub const ALL: [AlgoVariant; 4] = [
        AlgoVariant::Dqn,
        AlgoVariant::Ddqn,
        AlgoVariant::DuelingDqn,
        AlgoVariant::DuelingDdqn,
    ];

    pub fn topology(self) -> Topology {
        match self {
            AlgoVariant::Dqn | AlgoVariant::Ddqn => Topology::Standard,
            AlgoVariant::DuelingDqn | AlgoVariant::DuelingDdqn => Topology::Dueling,
        }
    }

    /// Whether targets use the online-select / target-evaluate rule.
    pub fn is_double(self) -> bool {
        matches!(self, AlgoVariant::Ddqn | AlgoVariant::DuelingDdqn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlgoVariant::Dqn => "dqn",
            AlgoVariant::Ddqn => "ddqn",
            AlgoVariant::DuelingDqn => "dueling_dqn",
            AlgoVariant::DuelingDdqn => "dueling_ddqn",
        }
    }
}

impl fmt::Display for AlgoVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgoVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algo {s:?}")))
    }
}

pub fn save_checkpoint(params: &NetworkParams, variant: AlgoVariant) -> String {
    checkpoint::write_checkpoint(params, variant.as_str())
}

/// Loads a checkpoint and checks that its arrays fit the declared algorithm.
pub fn load_checkpoint(text: &str) -> Result<(AlgoVariant, NetworkParams)> {
    let (label, params) = checkpoint::read_checkpoint(text, |label| {
        label
            .parse::<AlgoVariant>()
            .map(AlgoVariant::topology)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    })?;
    Ok((label.parse()?, params))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Overwrites the Q-value of every zero-centroid slot with `-penalty`.
pub fn mask_padded(q: &mut [f64], record: &CentroidRecord, penalty: f64) {
    for slot in record.padded_slots() {
        q[slot] = -penalty;
    }
}

/// Epsilon-greedy choice of a centroid slot.
///
/// The exploration branch is uniform over all ten slots, padded or not; the
/// exploitation branch masks padded slots before taking the argmax.
pub fn select_action<R: Rng + ?Sized>(
    net: &NetworkParams,
    state: &StateVector,
    record: &CentroidRecord,
    epsilon: f64,
    penalty: f64,
    rng: &mut R,
) -> Result<usize> {
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..NUM_ACTIONS));
    }
    greedy_action(net, state, record, penalty)
}

pub fn greedy_action(net: &NetworkParams, state: &StateVector, record: &CentroidRecord, penalty: f64) -> Result<usize> {
    let mut q = net.q_values(state.as_slice())?;
    mask_padded(&mut q, record, penalty);
    Ok(argmax(&q))
}

pub fn decay_epsilon(epsilon: f64, epsilon_min: f64, epsilon_decay: f64) -> f64 {
    if epsilon > epsilon_min {
        (epsilon * epsilon_decay).max(epsilon_min)
    } else {
        epsilon
    }
}

/// `-penalty` for the zero centroid, `1` for a match with the target, else `0`.
pub fn compute_reward(predicted: (f64, f64), target: (f64, f64), penalty: f64) -> f64 {
    if predicted == (0.0, 0.0) {
        -penalty
    } else if predicted == target {
        1.0
    } else {
        0.0
    }
}

/// Centroid chosen by `target_net` after masking padded slots.
pub fn predicted_centroid(
    target_net: &NetworkParams,
    state: &StateVector,
    record: &CentroidRecord,
    penalty: f64,
) -> Result<(f64, f64)> {
    Ok(record.centroids[greedy_action(target_net, state, record, penalty)?])
}

/// Slot with the highest gain (lowest index on ties).
pub fn target_slot(record: &CentroidRecord) -> usize {
    argmax(&record.gains)
}

pub fn target_centroid(record: &CentroidRecord) -> (f64, f64) {
    record.centroids[target_slot(record)]
}

/// `q_sa + alpha · (reward + gamma · max_q_next − q_sa)`.
///
/// Evaluated as `(1 − alpha) · q_sa + alpha · bellman` so that `alpha = 1`
/// yields `reward + gamma · max_q_next` bit for bit.
pub fn dqn_target(q_sa: f64, reward: f64, gamma: f64, alpha: f64, max_q_next: f64) -> f64 {
    (1.0 - alpha) * q_sa + alpha * (reward + gamma * max_q_next)
}

/// `reward + gamma · q_target_next[a*] · (1 − done)` with `a*` the online argmax.
pub fn ddqn_target(reward: f64, gamma: f64, done: bool, q_target_next: &[f64], q_online_next: &[f64]) -> f64 {
    let best = argmax(q_online_next);
    let not_done = if done { 0.0 } else { 1.0 };
    reward + gamma * q_target_next[best] * not_done
}
