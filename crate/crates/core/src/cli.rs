//! The `fdqn` command line: collect, train, test, similarity.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::agent::{load_checkpoint, parse_dataset, save_checkpoint, train, write_dataset, AlgoVariant, TrainConfig};
use crate::evaluation::{
    aggregate, map_similarity, metrics_csv, mse_csv, mse_series_stats, run_episode, seeded_start, summary_table,
    EpisodeConfig, EpisodeRun, Policy,
};
use crate::gridworld::{load_map, Environment, OccupancyGrid, RobotPose, SensorConfig};
use crate::neural::NetworkParams;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fdqn", version, about = "Deep-Q frontier selection for grid exploration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the greedy baseline and record its transitions as a training dataset.
    Collect(ExperimentConfig),
    /// Train one network variant offline on a recorded dataset.
    Train(TrainArgs),
    /// Run a trained policy (or the baseline) and write metrics and final maps.
    Test(TestArgs),
    /// Score two maps with the pooled-feature cosine similarity.
    Similarity(SimilarityArgs),
}

/// Options shared by every command that runs exploration episodes.
#[derive(Debug, Clone, Args)]
pub struct ExperimentConfig {
    /// World file (`#` wall, `.` free, `S` start).
    #[arg(long)]
    pub map: PathBuf,
    /// Number of episodes; episode i uses seed + i.
    #[arg(long = "repeat-count", visible_aliases = ["runs", "episodes"], default_value_t = 1)]
    pub repeat_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tick budget per episode.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    /// Coverage at which a map counts as completed.
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, default_value_t = 6)]
    pub sensor_range: usize,
    /// Worker threads for episodes; output order does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_algo)]
    pub algo: AlgoVariant,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_min: f64,
    #[arg(long, default_value_t = 0.995)]
    pub epsilon_decay: f64,
    #[arg(long, default_value_t = 10)]
    pub save_interval: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10.0)]
    pub penalty: f64,
    #[arg(long, default_value_t = 1.0)]
    pub target_alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `<algo>.ckpt` and `<algo>_mse.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            epsilon: self.epsilon,
            epsilon_min: self.epsilon_min,
            epsilon_decay: self.epsilon_decay,
            epochs: self.epochs,
            save_interval: self.save_interval,
            batch_size: self.batch_size,
            penalty: self.penalty,
            seed: self.seed,
            target_alpha: self.target_alpha,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Checkpoint to run; omit together with `--baseline`.
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub model: Option<PathBuf>,
    /// Run the greedy baseline instead of a network.
    #[arg(long)]
    pub baseline: bool,
    /// Reject checkpoints trained for a different variant.
    #[arg(long, value_parser = parse_algo)]
    pub algo: Option<AlgoVariant>,
    #[arg(long, default_value_t = 10.0)]
    pub penalty: f64,
    #[command(flatten)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, Args)]
pub struct SimilarityArgs {
    /// Reference map (PGM or map file).
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long = "cand")]
    pub candidate: PathBuf,
}

fn parse_algo(s: &str) -> std::result::Result<AlgoVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ExperimentConfig {
    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            budget: self.budget,
            threshold: self.threshold,
            gain_radius: self.sensor_range,
            ..EpisodeConfig::default()
        }
    }

    fn sensor(&self) -> SensorConfig {
        SensorConfig {
            range: self.sensor_range,
            ..SensorConfig::default()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Loads a closed world so that seeded starts never leave the grid.
pub fn load_world(path: &Path) -> Result<(OccupancyGrid, RobotPose)> {
    let (truth, pose) = load_map(&read(path)?)?;
    if !truth.has_closed_border() {
        return Err(Error::OpenBorder);
    }
    Ok((truth, pose))
}

/// Runs episodes with seeds `seed..seed + repeat_count` in seed order.
pub fn run_episodes(
    truth: &OccupancyGrid,
    anchor: &RobotPose,
    policy: Policy<'_>,
    cfg: &ExperimentConfig,
    episode_cfg: &EpisodeConfig,
) -> Result<Vec<EpisodeRun>> {
    let one = |i: usize| -> Result<EpisodeRun> {
        let seed = cfg.seed.wrapping_add(i as u64);
        let start = seeded_start(truth, anchor.cell(), seed)?;
        let mut env = Environment::new(truth.clone(), start, cfg.sensor())?;
        run_episode(&mut env, policy, episode_cfg, seed)
    };
    if cfg.parallel <= 1 {
        return (0..cfg.repeat_count).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| (0..cfg.repeat_count).into_par_iter().map(one).collect())
}

pub fn cmd_collect(cfg: &ExperimentConfig) -> Result<()> {
    let (truth, anchor) = load_world(&cfg.map)?;
    let runs = run_episodes(&truth, &anchor, Policy::GreedyBaseline, cfg, &cfg.episode_config())?;
    create_dir(&cfg.out)?;
    let header = format!(
        "greedy baseline on {}\nseeds {}..{}",
        cfg.map.display(),
        cfg.seed,
        cfg.seed.wrapping_add(cfg.repeat_count as u64)
    );
    write(
        &cfg.out.join("dataset.txt"),
        &write_dataset(runs.iter().map(|r| &r.episode), &header),
    )?;
    let transitions: usize = runs.iter().map(|r| r.episode.transitions.len()).sum();
    let metrics: Vec<_> = runs.into_iter().map(|r| r.metrics).collect();
    write(&cfg.out.join("metrics.csv"), &metrics_csv(&metrics))?;
    println!("collected {} episodes, {transitions} transitions", metrics.len());
    if let Ok(groups) = aggregate(&metrics) {
        print!("{}", summary_table(&groups));
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let dataset = parse_dataset(&read(&args.dataset)?)?;
    let report = train(&dataset, &args.config(), args.algo)?;
    create_dir(&args.out)?;
    let name = args.algo.as_str();
    write(
        &args.out.join(format!("{name}.ckpt")),
        &save_checkpoint(&report.params, args.algo),
    )?;
    write(&args.out.join(format!("{name}_mse.csv")), &mse_csv(&report.mse))?;
    match mse_series_stats(&report.mse) {
        Ok(s) => println!(
            "{name}: first mse {:.6}, last mse {:.6}, mean {:.6}",
            s.first, s.last, s.mean
        ),
        Err(_) => println!("{name}: no epochs run"),
    }
    Ok(())
}

pub fn cmd_test(args: &TestArgs) -> Result<()> {
    let cfg = &args.experiment;
    let loaded: Option<(AlgoVariant, NetworkParams)> = match &args.model {
        Some(path) => Some(load_checkpoint(&read(path)?)?),
        None => None,
    };
    if let (Some(want), Some((got, _))) = (args.algo, &loaded) {
        if want != *got {
            return Err(Error::Checkpoint(format!("checkpoint is {got}, expected {want}")));
        }
    }
    let policy = match &loaded {
        Some((variant, params)) => Policy::Trained {
            params,
            variant: *variant,
        },
        None => Policy::GreedyBaseline,
    };
    let (truth, anchor) = load_world(&cfg.map)?;
    let mut episode_cfg = cfg.episode_config();
    episode_cfg.penalty = args.penalty;
    let runs = run_episodes(&truth, &anchor, policy, cfg, &episode_cfg)?;
    create_dir(&cfg.out)?;
    for (i, run) in runs.iter().enumerate() {
        write(&cfg.out.join(format!("episode_{i}.pgm")), &run.final_map.to_pgm())?;
    }
    let metrics: Vec<_> = runs.into_iter().map(|r| r.metrics).collect();
    write(&cfg.out.join("metrics.csv"), &metrics_csv(&metrics))?;
    if let Ok(groups) = aggregate(&metrics) {
        print!("{}", summary_table(&groups));
    }
    Ok(())
}

/// Reads a PGM (`P2`) or map file.
pub fn load_grid(path: &Path) -> Result<OccupancyGrid> {
    let text = read(path)?;
    if text.trim_start().starts_with("P2") {
        OccupancyGrid::from_pgm(&text)
    } else {
        Ok(load_map(&text)?.0)
    }
}

/// Returns whether the pair passes the similarity gate.
pub fn cmd_similarity(args: &SimilarityArgs) -> Result<bool> {
    let s = map_similarity(&load_grid(&args.reference)?, &load_grid(&args.candidate)?)?;
    println!("similarity={:.6} pass={}", s.score, s.pass);
    Ok(s.pass)
}

/// Exit codes: 0 success or similarity pass, 1 usage or runtime error, 2 similarity fail.
pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Collect(cfg) => cmd_collect(cfg).map(|()| true),
        Command::Train(args) => cmd_train(args).map(|()| true),
        Command::Test(args) => cmd_test(args).map(|()| true),
        Command::Similarity(args) => cmd_similarity(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Parses `argv`; usage errors exit 1 and help/version exit 0.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
