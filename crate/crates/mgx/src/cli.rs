//! Command-line front end: game generation, exact solving, training runs,
//! envelope audits, and a small parallel benchmark sweep.
//!
//! Exit codes: 0 on success (including `--help`/`--version`), 1 for usage,
//! configuration, and I/O problems, 2 for solver and learner failures.

use crate::error::{Error, Result};
use crate::exec;
use crate::explore::ExplorationConfig;
use crate::game::exact_nash;
use crate::harness::{
    gen_random_game, gen_turn_based_game, load_game, run_experiment, save_game, Algorithm,
    ExperimentConfig,
};
use crate::mirror::StepSize;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "mgx",
    version,
    about = "Self-play learners for finite-horizon zero-sum Markov games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded game and write it as JSON.
    Gen(GenArgs),
    /// Solve a game exactly and print the value of every initial state.
    Solve(SolveArgs),
    /// Run a learner and write its episode log as CSV.
    Train(TrainArgs),
    /// Run the optimistic planner and log its envelope validity per episode.
    Audit(AuditArgs),
    /// Time a sweep of training runs; `MGX_THREADS` caps the parallelism.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Random,
    TurnBased,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = GenKind::Random)]
    kind: GenKind,
    #[arg(long, default_value_t = 3)]
    horizon: usize,
    /// States per stage.
    #[arg(long, default_value_t = 3)]
    states: usize,
    /// Max-player actions per stage.
    #[arg(long, default_value_t = 2)]
    a: usize,
    /// Min-player actions per stage.
    #[arg(long, default_value_t = 2)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Turn-based only: seeded coin-flip stage ownership instead of strict
    /// alternation.
    #[arg(long, default_value_t = false)]
    random_turns: bool,
    /// Output path for the game JSON.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Game JSON path.
    game: PathBuf,
    /// Matrix-solver tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Optional output path for the Nash policy pair as JSON.
    #[arg(long)]
    policies: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Adaptive,
    Fixed,
}

#[derive(Args)]
struct TrainArgs {
    /// Game JSON path.
    game: PathBuf,
    /// One of vi-ulcb, vi-explore, md-1step, md-2step-tb.
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV run-log output path.
    #[arg(short, long)]
    out: PathBuf,
    /// Episodes between exact evaluations.
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    /// Bonus scale for vi-ulcb.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 0.05)]
    failure_prob: f64,
    /// vi-explore: reachability episodes per (stage, state) target.
    #[arg(long, default_value_t = 500)]
    n0: usize,
    /// vi-explore: collection episodes drawn from the cover.
    #[arg(long, default_value_t = 20000)]
    n_collect: usize,
    /// vi-explore: reachability bonus scale.
    #[arg(long, default_value_t = 0.5)]
    explore_c: f64,
    /// vi-explore: nominal accuracy recorded with the run.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Mirror-descent step schedule; `fixed` commits to the episode budget.
    #[arg(long, value_enum, default_value_t = ScheduleArg::Adaptive)]
    step_schedule: ScheduleArg,
    #[arg(long, default_value_t = 0)]
    initial_state: usize,
    /// Final policy pair path; defaults to the run log with `.policy.json`.
    #[arg(long)]
    policy_out: Option<PathBuf>,
    /// vi-explore: write the exploration trajectories as JSON lines.
    #[arg(long)]
    trajectories_out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Game JSON path.
    game: PathBuf,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bonus scale.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 0.05)]
    failure_prob: f64,
    #[arg(long, default_value_t = 0)]
    initial_state: usize,
    /// CSV output path with columns `k,audit_fraction`.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Number of generated games in the sweep.
    #[arg(long, default_value_t = 4)]
    games: usize,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `argv` and executes the selected subcommand, returning the process
/// exit code instead of exiting, so tests can drive it in-process.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

/// Solver and learner failures are distinguished from usage problems.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_)
        | Error::NotPlanned
        | Error::ZeroPlayedProbability
        | Error::SupportGuard { .. } => 2,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Train(args) => cmd_train(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let game = match args.kind {
        GenKind::Random => {
            gen_random_game(args.horizon, args.states, args.a, args.b, args.seed)?
        }
        GenKind::TurnBased => gen_turn_based_game(
            args.horizon,
            args.states,
            args.a,
            args.b,
            args.seed,
            !args.random_turns,
        )?,
    };
    save_game(&args.out, &game)?;
    println!(
        "wrote {} (horizon {}, {} states/stage, {}x{} actions)",
        args.out.display(),
        game.horizon,
        args.states,
        args.a,
        args.b
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let (pair, values) = exact_nash(&game, args.tol)?;
    for (s, v) in values.v[0].iter().enumerate() {
        println!("state {s}: {v}");
    }
    if let Some(path) = args.policies {
        save_json(&path, &pair)?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let mut config = ExperimentConfig::new(args.algo, args.episodes, args.seed);
    config.eval_every = args.eval_every;
    config.bonus_c = args.c;
    config.failure_prob = args.failure_prob;
    config.exploration = ExplorationConfig {
        n0: args.n0,
        n_collect: args.n_collect,
        epsilon: args.epsilon,
        failure_prob: args.failure_prob,
        bonus_c: args.explore_c,
    };
    config.step_schedule = match args.step_schedule {
        ScheduleArg::Adaptive => StepSize::Adaptive,
        ScheduleArg::Fixed => StepSize::Fixed { total_episodes: args.episodes },
    };
    config.initial_state = args.initial_state;
    let log = run_experiment(&game, &config)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    log.write_csv(&mut csv)?;
    csv.flush()?;
    let policy_path =
        args.policy_out.unwrap_or_else(|| args.out.with_extension("policy.json"));
    save_json(&policy_path, &log.final_pair)?;
    if let Some(path) = args.trajectories_out {
        match &log.dataset {
            Some(dataset) => {
                let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                dataset.write_jsonl(&mut file)?;
                file.flush()?;
            }
            None => {
                return Err(Error::Config(
                    "trajectories are only produced by vi-explore".into(),
                ))
            }
        }
    }
    println!("episodes {}  final regret {}", log.records.len(), log.final_regret());
    Ok(())
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let mut config = ExperimentConfig::new(Algorithm::ViUlcb, args.episodes, args.seed);
    config.bonus_c = args.c;
    config.failure_prob = args.failure_prob;
    config.initial_state = args.initial_state;
    config.audit = true;
    // The audit is per-episode anyway; exact evals stay at the endpoints.
    config.eval_every = args.episodes;
    let log = run_experiment(&game, &config)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    writeln!(csv, "k,audit_fraction")?;
    let mut total = 0.0;
    for rec in &log.records {
        let frac = rec.audit_fraction.expect("auditing was enabled");
        writeln!(csv, "{},{}", rec.k, frac)?;
        total += frac;
    }
    csv.flush()?;
    println!("mean audit fraction {}", total / log.records.len() as f64);
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if args.games == 0 {
        return Err(Error::Config("bench needs at least one game".into()));
    }
    let threads = std::env::var("MGX_THREADS").ok().and_then(|v| v.parse().ok());
    let start = Instant::now();
    let results = exec::with_thread_cap(threads, || {
        exec::map_n(args.games, |i| {
            let seed = args.seed + i as u64;
            let game = gen_random_game(3, 3, 2, 2, seed)?;
            let config = ExperimentConfig::new(Algorithm::ViUlcb, args.episodes, seed);
            run_experiment(&game, &config).map(|log| log.final_regret())
        })
    });
    for (i, result) in results.into_iter().enumerate() {
        println!("game {i}: final regret {}", result?);
    }
    println!("elapsed {:.3?} over {} games", start.elapsed(), args.games);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MarkovGame;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("mgx-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).expect("temp dir");
        dir
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(["mgx", "--help"]), 0);
        assert_eq!(run(["mgx", "--version"]), 0);
        assert_eq!(run(["mgx", "train", "--help"]), 0);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["mgx"]), 1, "a subcommand is required");
        assert_eq!(run(["mgx", "frobnicate"]), 1, "unknown subcommand");
        assert_eq!(run(["mgx", "gen", "--kind", "nope", "-o", "x.json"]), 1);
        assert_eq!(run(["mgx", "solve", "/no/such/game.json"]), 1, "missing input file");
    }

    #[test]
    fn gen_solve_train_pipeline_round_trips() {
        let dir = tmp_dir("pipeline");
        let game_path = dir.join("game.json");
        let game_arg = game_path.to_str().expect("utf-8 path");
        assert_eq!(
            run(["mgx", "gen", "--kind", "random", "--horizon", "2", "--states", "2",
                 "--seed", "5", "-o", game_arg]),
            0
        );
        let game = load_game(&game_path).expect("generated game loads");
        assert_eq!(game.horizon, 2);

        assert_eq!(run(["mgx", "solve", game_arg]), 0);

        let csv_path = dir.join("run.csv");
        assert_eq!(
            run(["mgx", "train", game_arg, "--algo", "vi-ulcb", "--episodes", "25",
                 "--eval-every", "5", "--seed", "1", "-o",
                 csv_path.to_str().expect("utf-8 path")]),
            0
        );
        let csv = std::fs::read_to_string(&csv_path).expect("run log exists");
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("k,v_up_root,v_low_root,regret_increment,cumulative_regret,eval_flag")
        );
        assert_eq!(lines.count(), 25, "one row per episode");
        let policy_path = dir.join("run.policy.json");
        assert!(policy_path.exists(), "default policy path derives from the log path");

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn train_rejects_algorithm_game_mismatches() {
        let dir = tmp_dir("mismatch");
        let game_path = dir.join("game.json");
        let game_arg = game_path.to_str().expect("utf-8 path");
        assert_eq!(
            run(["mgx", "gen", "--horizon", "3", "--seed", "2", "-o", game_arg]),
            0
        );
        let out = dir.join("run.csv");
        assert_eq!(
            run(["mgx", "train", game_arg, "--algo", "md-1step", "--episodes", "10",
                 "-o", out.to_str().expect("utf-8 path")]),
            1,
            "configuration mismatches are usage errors"
        );
        assert_eq!(
            run(["mgx", "train", game_arg, "--algo", "not-an-algo", "--episodes", "1",
                 "-o", out.to_str().expect("utf-8 path")]),
            1
        );
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn audit_writes_per_episode_fractions() {
        let dir = tmp_dir("audit");
        let game_path = dir.join("game.json");
        let game_arg = game_path.to_str().expect("utf-8 path");
        assert_eq!(
            run(["mgx", "gen", "--horizon", "1", "--states", "1", "--seed", "3",
                 "-o", game_arg]),
            0
        );
        let out = dir.join("audit.csv");
        assert_eq!(
            run(["mgx", "audit", game_arg, "--episodes", "12", "-o",
                 out.to_str().expect("utf-8 path")]),
            0
        );
        let csv = std::fs::read_to_string(&out).expect("audit log exists");
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,audit_fraction"));
        assert_eq!(lines.count(), 12);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn invalid_game_files_exit_one() {
        let dir = tmp_dir("badgame");
        let path = dir.join("bad.json");
        std::fs::write(&path, "{\"horizon\": 1}").expect("writes");
        assert_eq!(run(["mgx", "solve", path.to_str().expect("utf-8 path")]), 1);
        // Structurally valid JSON but a non-stochastic transition row.
        let mut game: MarkovGame =
            crate::harness::gen_random_game(1, 2, 2, 2, 0).expect("valid dims");
        game.transition[0][0][0][0] = vec![0.7, 0.7];
        let text = serde_json::to_string(&game).expect("serializes");
        std::fs::write(&path, text).expect("writes");
        assert_eq!(run(["mgx", "solve", path.to_str().expect("utf-8 path")]), 1);
        std::fs::remove_dir_all(&dir).ok();
    }
}
