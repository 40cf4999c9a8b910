//! Exploration episodes, experiment metrics, and map-similarity scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    compute_reward, greedy_action, prepare_input, target_centroid, target_slot, AlgoVariant, Episode, Transition,
};
use crate::frontier::{build_record, cluster, detect_frontiers, MAX_CENTROIDS};
use crate::gridworld::{Cell, CellState, Environment, OccupancyGrid, RobotPose};
use crate::neural::NetworkParams;
use crate::planner::{dispatch_goal, DispatchOutcome};
use crate::{Error, Result};

/// Similarity at or above this score counts as the same map.
pub const SIMILARITY_GATE: f64 = 0.75;

/// `(pool, stride)` pairs of the feature pyramid.
pub const POOL_SCHEDULE: [(usize, usize); 3] = [(2, 2), (4, 4), (8, 8)];

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Always the highest-gain centroid.
    GreedyBaseline,
    Trained {
        params: &'a NetworkParams,
        variant: AlgoVariant,
    },
}

impl Policy<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::GreedyBaseline => "greedy",
            Policy::Trained { .. } => "trained",
        }
    }

    pub fn variant_label(&self) -> &'static str {
        match self {
            Policy::GreedyBaseline => "baseline",
            Policy::Trained { variant, .. } => variant.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub budget: usize,
    pub threshold: f64,
    /// Radius of the information-gain disc, in cells.
    pub gain_radius: usize,
    pub penalty: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            budget: 2000,
            threshold: 0.95,
            gain_radius: 6,
            penalty: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub policy: String,
    pub variant: String,
    pub ticks: usize,
    pub coverage: f64,
    pub completed: bool,
    pub cumulative_reward: f64,
    pub centroids_visited: usize,
    /// Decisions where more than ten clusters competed for the record.
    pub truncated_records: usize,
    pub unreachable_goals: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub metrics: EpisodeMetrics,
    pub episode: Episode,
    pub final_map: OccupancyGrid,
}

/// A start pose drawn from the free cells reachable from `anchor`.
pub fn seeded_start(truth: &OccupancyGrid, anchor: Cell, seed: u64) -> Result<RobotPose> {
    let reachable = truth.reachable_from(anchor);
    let cells: Vec<Cell> = truth
        .coords()
        .filter(|c| reachable[c.y * truth.width() + c.x])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = cells
        .choose(&mut rng)
        .ok_or_else(|| Error::InvalidArgument("anchor cell is not free".into()))?;
    Ok(RobotPose::at(*cell))
}

/// Explores until no frontier is left or the tick budget runs out.
///
/// Each decision rebuilds the centroid record from the robot map, lets the
/// policy pick a slot, and drives to it. A goal that turns out unreachable is
/// removed from the frontier set before clustering, so the rest of its cluster
/// regroups around another member, until the robot next makes progress.
pub fn run_episode(env: &mut Environment, policy: Policy<'_>, cfg: &EpisodeConfig, seed: u64) -> Result<EpisodeRun> {
    if cfg.budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let dims = env.map().dims();
    env.sense();
    let mut blacklist: BTreeSet<Cell> = BTreeSet::new();
    let mut transitions: Vec<Transition> = Vec::new();
    let mut pending: Option<(crate::agent::StateVector, usize, f64)> = None;
    let mut metrics = EpisodeMetrics {
        seed,
        policy: policy.label().to_string(),
        variant: policy.variant_label().to_string(),
        ticks: 0,
        coverage: 0.0,
        completed: false,
        cumulative_reward: 0.0,
        centroids_visited: 0,
        truncated_records: 0,
        unreachable_goals: 0,
    };
    // Every iteration either moves the robot or blacklists a goal.
    let max_decisions = cfg.budget + dims.0 * dims.1 + 1;

    for _ in 0..max_decisions {
        let mut frontiers = detect_frontiers(env.map());
        frontiers.retain(|c| !blacklist.contains(c));
        let clusters = cluster(&frontiers);
        if clusters.len() > MAX_CENTROIDS {
            metrics.truncated_records += 1;
        }
        let record = build_record(&clusters, env.map(), cfg.gain_radius);
        let state = prepare_input(env.pose(), &record, dims);
        if let Some((prev, action, reward)) = pending.take() {
            transitions.push(Transition {
                state: prev,
                action,
                reward,
                next_state: state,
                done: false,
            });
        }
        if record.valid_count() == 0 || env.ticks() >= cfg.budget {
            break;
        }

        let action = match policy {
            Policy::GreedyBaseline => target_slot(&record),
            Policy::Trained { params, .. } => greedy_action(params, &state, &record, cfg.penalty)?,
        };
        let reward = compute_reward(record.centroids[action], target_centroid(&record), cfg.penalty);
        metrics.cumulative_reward += reward;
        pending = Some((state, action, reward));
        if record.is_padded(action) {
            continue;
        }

        let goal = record.cell(action, dims);
        let origin = (env.pose().x, env.pose().y);
        let remaining = cfg.budget - env.ticks();
        match dispatch_goal(env, goal, origin, remaining)? {
            DispatchOutcome::Reached { ticks } | DispatchOutcome::Resent { ticks } => {
                metrics.centroids_visited += 1;
                if ticks == 0 {
                    blacklist.insert(goal);
                } else {
                    blacklist.clear();
                }
            }
            DispatchOutcome::Unreachable { .. } => {
                metrics.unreachable_goals += 1;
                blacklist.insert(goal);
            }
            DispatchOutcome::Interrupted { .. } => {}
        }
    }
    if let Some(last) = transitions.last_mut() {
        last.done = true;
    }
    metrics.ticks = env.ticks();
    metrics.coverage = env.coverage();
    metrics.completed = metrics.coverage >= cfg.threshold;
    Ok(EpisodeRun {
        metrics,
        episode: Episode { transitions },
        final_map: env.map().clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStats {
    pub first: f64,
    pub last: f64,
    pub mean: f64,
    /// Least-squares slope against the epoch index.
    pub slope: f64,
}

pub fn mse_series_stats(series: &[f64]) -> Result<SeriesStats> {
    let (&first, &last) = series.first().zip(series.last()).ok_or(Error::Empty("mse series"))?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let x_mean = (n - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in series.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - mean);
        sxx += dx * dx;
    }
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    Ok(SeriesStats {
        first,
        last,
        mean,
        slope,
    })
}

/// Number of windows a pooling pass produces along one axis.
pub fn pool_output_size(input: usize, pool: usize, stride: usize) -> Result<usize> {
    if pool == 0 || stride == 0 {
        return Err(Error::InvalidArgument("pool and stride must be positive".into()));
    }
    if pool > input {
        return Err(Error::InvalidArgument(format!("pool {pool} exceeds input {input}")));
    }
    Ok((input - pool) / stride + 1)
}

/// Average pooling over a row-major `width × height` image.
pub fn average_pool(values: &[f64], width: usize, height: usize, pool: usize, stride: usize) -> Result<Vec<f64>> {
    if values.len() != width * height {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: width * height,
        });
    }
    let out_w = pool_output_size(width, pool, stride)?;
    let out_h = pool_output_size(height, pool, stride)?;
    let area = (pool * pool) as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (x0, y0) = (ox * stride, oy * stride);
            let sum: f64 = (y0..y0 + pool)
                .flat_map(|y| values[y * width + x0..y * width + x0 + pool].iter())
                .sum();
            out.push(sum / area);
        }
    }
    Ok(out)
}

/// Cell intensity used by the feature extractor.
pub fn encode_cell(state: CellState) -> f64 {
    match state {
        CellState::Unknown => 0.5,
        CellState::Free => 1.0,
        CellState::Occupied => -1.0,
    }
}

/// Multi-scale average-pooled intensities, concatenated coarse-to-fine order
/// of [`POOL_SCHEDULE`]. Scales larger than the grid are skipped; a grid too
/// small for any scale yields its raw intensities.
pub fn extract_features(map: &OccupancyGrid) -> Vec<f64> {
    let (w, h) = map.dims();
    let encoded: Vec<f64> = map.cells().iter().map(|&c| encode_cell(c)).collect();
    let mut features = Vec::new();
    for &(pool, stride) in &POOL_SCHEDULE {
        if pool <= w && pool <= h {
            features.extend(average_pool(&encoded, w, h, pool, stride).expect("scale fits the grid"));
        }
    }
    if features.is_empty() {
        features = encoded;
    }
    features
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn magnitude(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let ab = dot(a, b)?;
    let aa = dot(a, a)?;
    let bb = dot(b, b)?;
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroMagnitude);
    }
    // sqrt(aa·bb) rather than sqrt(aa)·sqrt(bb): exact 1.0 for a == b.
    Ok((ab / (aa * bb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub score: f64,
    pub pass: bool,
}

pub fn map_similarity(reference: &OccupancyGrid, candidate: &OccupancyGrid) -> Result<Similarity> {
    if reference.dims() != candidate.dims() {
        return Err(Error::DimensionMismatch {
            left: reference.dims(),
            right: candidate.dims(),
        });
    }
    let (mut a, mut b) = (extract_features(reference), extract_features(candidate));
    // Walls and free space can cancel to an all-zero pooled vector; raw cells never do.
    if magnitude(&a) == 0.0 || magnitude(&b) == 0.0 {
        a = reference.cells().iter().map(|&c| encode_cell(c)).collect();
        b = candidate.cells().iter().map(|&c| encode_cell(c)).collect();
    }
    let score = cosine_similarity(&a, &b)?;
    Ok(Similarity {
        score,
        pass: score >= SIMILARITY_GATE,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub policy: String,
    pub variant: String,
    pub runs: usize,
    pub avg_ticks: f64,
    pub avg_coverage: f64,
    pub completed: usize,
    pub not_completed: usize,
}

/// Per-(policy, variant) means and completion counts, baseline first.
pub fn aggregate(runs: &[EpisodeMetrics]) -> Result<Vec<GroupSummary>> {
    if runs.is_empty() {
        return Err(Error::Empty("run list"));
    }
    let order = |variant: &str| {
        std::iter::once("baseline")
            .chain(AlgoVariant::ALL.iter().map(|v| v.as_str()))
            .position(|v| v == variant)
            .unwrap_or(usize::MAX)
    };
    let mut groups: BTreeMap<(usize, String, String), Vec<&EpisodeMetrics>> = BTreeMap::new();
    for m in runs {
        groups
            .entry((order(&m.variant), m.variant.clone(), m.policy.clone()))
            .or_default()
            .push(m);
    }
    Ok(groups
        .into_iter()
        .map(|((_, variant, policy), members)| {
            let n = members.len() as f64;
            let completed = members.iter().filter(|m| m.completed).count();
            GroupSummary {
                policy,
                variant,
                runs: members.len(),
                avg_ticks: members.iter().map(|m| m.ticks as f64).sum::<f64>() / n,
                avg_coverage: members.iter().map(|m| m.coverage).sum::<f64>() / n,
                completed,
                not_completed: members.len() - completed,
            }
        })
        .collect())
}

pub const METRICS_HEADER: &str =
    "episode,seed,policy,variant,ticks,coverage,completed,cumulative_reward,centroids_visited";

pub fn metrics_csv(runs: &[EpisodeMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for (i, m) in runs.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{:.6},{},{:.6},{}",
            m.seed, m.policy, m.variant, m.ticks, m.coverage, m.completed, m.cumulative_reward, m.centroids_visited
        )
        .unwrap();
    }
    out
}

pub fn mse_csv(series: &[f64]) -> String {
    let mut out = String::from("epoch,mse\n");
    for (i, v) in series.iter().enumerate() {
        writeln!(out, "{},{v:.6}", i + 1).unwrap();
    }
    out
}

pub fn summary_table(groups: &[GroupSummary]) -> String {
    let mut out = format!(
        "{:<8} {:<13} {:>5} {:>10} {:>9} {:>9} {:>13}\n",
        "policy", "variant", "runs", "avg_ticks", "coverage", "completed", "not_completed"
    );
    for g in groups {
        writeln!(
            out,
            "{:<8} {:<13} {:>5} {:>10.1} {:>9.3} {:>9} {:>13}",
            g.policy, g.variant, g.runs, g.avg_ticks, g.avg_coverage, g.completed, g.not_completed
        )
        .unwrap();
    }
    out
}
