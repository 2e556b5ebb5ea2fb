//! Experiment orchestration: seeded game generators, a unified episode loop
//! with exact best-response regret accounting, CSV run logs, and
//! online-to-batch conversion of deployed-policy histories.
//!
//! Evaluations are pure functions of the learner state and never touch the
//! run's random streams, so changing the eval cadence cannot change what the
//! learner plays.

use crate::error::{Error, Result};
use crate::explore::{
    build_cover, build_empirical_model, collect, plan_and_exploit, ExplorationConfig,
    ExplorationDataset,
};
use crate::game::{duality_gap_at, MarkovGame, PolicyPair, TurnPartition};
use crate::mirror::{OneStepLearner, StepSize, TwoStepTurnBasedLearner};
use crate::sample::{sample_index, substream};
use crate::ulcb::{BonusParams, UlcbLearner};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

/// Stream for environment transitions; learners draw actions from
/// `LEARNER_STREAM`. The cover builder claims the `1000 + i` / `2000 + i`
/// bands per reachability target, so run-level streams stay below 1000.
const ENV_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;
const COLLECT_STREAM: u64 = 3;

/// Tolerance handed to the exact planner when `vi-explore` exploits.
const PLAN_TOL: f64 = 1e-9;

/// Seed pinning the shared benchmark instance.
pub const BENCHMARK_SEED: u64 = 7;

/// Which learner the episode loop drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    ViUlcb,
    ViExplore,
    Md1Step,
    Md2StepTb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::ViUlcb, Algorithm::ViExplore, Algorithm::Md1Step, Algorithm::Md2StepTb];

    /// Canonical kebab-case name, as accepted on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ViUlcb => "vi-ulcb",
            Algorithm::ViExplore => "vi-explore",
            Algorithm::Md1Step => "md-1step",
            Algorithm::Md2StepTb => "md-2step-tb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.iter().copied().find(|a| a.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm {s:?}; expected vi-ulcb, vi-explore, md-1step, or md-2step-tb"
            ))
        })
    }
}

/// Everything the episode loop needs besides the game itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub seed: u64,
    /// Exact evaluations run at episodes `1, 1 + e, 1 + 2e, ...` and always
    /// at the final episode.
    pub eval_every: usize,
    /// Bonus scale for `vi-ulcb`.
    pub bonus_c: f64,
    /// Confidence level shared by the bonus definitions.
    pub failure_prob: f64,
    /// Phase budgets for `vi-explore`.
    pub exploration: ExplorationConfig,
    /// Step-size schedule for the mirror-descent learners.
    pub step_schedule: StepSize,
    pub initial_state: usize,
    /// When set, `vi-ulcb` records its envelope validity audit per episode.
    pub audit: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, episodes: usize, seed: u64) -> Self {
        ExperimentConfig {
            algorithm,
            episodes,
            seed,
            eval_every: 10,
            bonus_c: 2.0,
            failure_prob: 0.05,
            exploration: ExplorationConfig::new(500, 20_000),
            step_schedule: StepSize::Adaptive,
            initial_state: 0,
            audit: false,
        }
    }

    /// Checks internal consistency and the algorithm/game structure match.
    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        game.validate()?;
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.initial_state >= game.states_per_stage[0] {
            return Err(Error::Config(format!(
                "initial state {} out of range for {} first-stage states",
                self.initial_state, game.states_per_stage[0]
            )));
        }
        match self.algorithm {
            Algorithm::ViUlcb => {
                BonusParams::new(self.bonus_c, &game.dims(), self.episodes, self.failure_prob)
                    .map(|_| ())
            }
            Algorithm::ViExplore => self.exploration.validate(game.horizon),
            Algorithm::Md1Step => OneStepLearner::new(&game.dims(), self.step_schedule).map(|_| ()),
            Algorithm::Md2StepTb => {
                TwoStepTurnBasedLearner::new(game, self.step_schedule).map(|_| ())
            }
        }
    }
}

/// One episode of a run. Diagnostics absent for an algorithm (or away from
/// eval episodes) stay `None` and serialize to empty CSV cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// 1-based episode index.
    pub k: usize,
    pub v_up_root: Option<f64>,
    pub v_low_root: Option<f64>,
    /// Raw duality gap of the deployed pair, recorded only at evals.
    pub regret_increment: Option<f64>,
    /// Running sum of per-episode gaps under piecewise-constant
    /// interpolation between evals, each clamped at zero before accrual.
    pub cumulative_regret: f64,
    pub eval_flag: bool,
    /// `k` times the gap of the running behavioural-average pair (eval only).
    pub weak_regret: Option<f64>,
    /// Transition-noise residual of the envelope width (`vi-ulcb` only).
    pub xi: Option<f64>,
    /// Action-noise residual of the envelope width (`vi-ulcb` only).
    pub zeta: Option<f64>,
    /// Envelope validity fraction when auditing (`vi-ulcb` only).
    pub audit_fraction: Option<f64>,
}

/// Complete output of one `run_experiment` call.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
    /// Policy pair deployed at each episode, in order.
    pub deployed: Vec<PolicyPair>,
    /// The pair the run would deploy from here on.
    pub final_pair: PolicyPair,
    /// Collected exploration experience (`vi-explore` only).
    pub dataset: Option<ExplorationDataset>,
}

fn csv_cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl RunLog {
    /// Writes the fixed six-column CSV: a header line, then one row per
    /// episode with empty cells for absent values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,v_up_root,v_low_root,regret_increment,cumulative_regret,eval_flag")?;
        for rec in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                rec.k,
                csv_cell(rec.v_up_root),
                csv_cell(rec.v_low_root),
                csv_cell(rec.regret_increment),
                rec.cumulative_regret,
                u8::from(rec.eval_flag),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV write cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Cumulative regret at the final episode.
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_regret)
    }
}

fn check_gen_args(horizon: usize, states: usize, a: usize, b: usize) -> Result<()> {
    if horizon == 0 || states == 0 || a == 0 || b == 0 {
        return Err(Error::Config(format!(
            "generator dimensions must be positive, got horizon={horizon}, states={states}, \
             actions=({a}, {b})"
        )));
    }
    Ok(())
}

/// Uniform simplex point via normalised unit exponentials.
fn simplex_row<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return vec![1.0 / len as f64; len];
    }
    raw.into_iter().map(|x| x / sum).collect()
}

fn fill_tensors<R: Rng>(
    states: usize,
    actions_max_per_stage: &[usize],
    actions_min_per_stage: &[usize],
    rng: &mut R,
) -> (Vec<Vec<Vec<Vec<Vec<f64>>>>>, Vec<Vec<Vec<Vec<f64>>>>) {
    let horizon = actions_max_per_stage.len();
    let mut transition = Vec::with_capacity(horizon);
    let mut reward = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut t_h = Vec::with_capacity(states);
        let mut r_h = Vec::with_capacity(states);
        for _ in 0..states {
            let mut t_s = Vec::new();
            let mut r_s = Vec::new();
            for _ in 0..actions_max_per_stage[h] {
                let mut t_a = Vec::new();
                let mut r_a = Vec::new();
                for _ in 0..actions_min_per_stage[h] {
                    r_a.push(rng.gen::<f64>());
                    t_a.push(simplex_row(states, rng));
                }
                t_s.push(t_a);
                r_s.push(r_a);
            }
            t_h.push(t_s);
            r_h.push(r_s);
        }
        transition.push(t_h);
        reward.push(r_h);
    }
    (transition, reward)
}

/// Seeded dense game: uniform-simplex transition rows and uniform rewards,
/// with the same state and action counts at every stage. The same arguments
/// always produce the identical game.
pub fn gen_random_game(
    horizon: usize,
    states: usize,
    actions_max: usize,
    actions_min: usize,
    seed: u64,
) -> Result<MarkovGame> {
    check_gen_args(horizon, states, actions_max, actions_min)?;
    let mut rng = substream(seed, 0);
    let (transition, reward) =
        fill_tensors(states, &vec![actions_max; horizon], &vec![actions_min; horizon], &mut rng);
    let game = MarkovGame {
        horizon,
        states_per_stage: vec![states; horizon + 1],
        actions_max_per_stage: vec![actions_max; horizon],
        actions_min_per_stage: vec![actions_min; horizon],
        transition,
        reward,
        turn_partition: None,
    };
    game.validate()?;
    Ok(game)
}

/// Seeded turn-based game: whoever does not own a stage is reduced to a
/// single dummy action there. `alternating` gives the max player the odd
/// stages (1-based); otherwise ownership is a seeded coin flip per stage.
pub fn gen_turn_based_game(
    horizon: usize,
    states: usize,
    actions_max: usize,
    actions_min: usize,
    seed: u64,
    alternating: bool,
) -> Result<MarkovGame> {
    check_gen_args(horizon, states, actions_max, actions_min)?;
    let mut rng = substream(seed, 0);
    let mut partition = TurnPartition { max: Vec::new(), min: Vec::new() };
    let mut a_per_stage = Vec::with_capacity(horizon);
    let mut b_per_stage = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let max_owns = if alternating { h % 2 == 0 } else { rng.gen_bool(0.5) };
        if max_owns {
            partition.max.push(h + 1);
            a_per_stage.push(actions_max);
            b_per_stage.push(1);
        } else {
            partition.min.push(h + 1);
            a_per_stage.push(1);
            b_per_stage.push(actions_min);
        }
    }
    let (transition, reward) = fill_tensors(states, &a_per_stage, &b_per_stage, &mut rng);
    let game = MarkovGame {
        horizon,
        states_per_stage: vec![states; horizon + 1],
        actions_max_per_stage: a_per_stage,
        actions_min_per_stage: b_per_stage,
        transition,
        reward,
        turn_partition: Some(partition),
    };
    game.validate()?;
    Ok(game)
}

/// The shared evaluation instance: three stages, three states per stage, two
/// actions per side, pinned seed.
pub fn benchmark_game() -> MarkovGame {
    gen_random_game(3, 3, 2, 2, BENCHMARK_SEED).expect("benchmark dimensions are valid")
}

/// Samples one environment transition; the reward is read off the table.
fn step_env<R: Rng>(
    game: &MarkovGame,
    h: usize,
    s: usize,
    a: usize,
    b: usize,
    rng: &mut R,
) -> (f64, usize) {
    let reward = game.reward[h][s][a][b];
    let next = sample_index(&game.transition[h][s][a][b], rng);
    (reward, next)
}

/// Per-episode diagnostics a runner may attach to its record.
#[derive(Debug, Default)]
struct Diag {
    v_up_root: Option<f64>,
    v_low_root: Option<f64>,
    xi: Option<f64>,
    zeta: Option<f64>,
    audit_fraction: Option<f64>,
}

/// Shared bookkeeping: exact evals on the configured cadence,
/// piecewise-constant regret accrual between them, and the running
/// behavioural average behind the weak-regret curve.
struct Accounting<'a> {
    game: &'a MarkovGame,
    initial_state: usize,
    episodes: usize,
    eval_every: usize,
    records: Vec<RunRecord>,
    deployed: Vec<PolicyPair>,
    cumulative: f64,
    carried: f64,
    mu_sum: Vec<Vec<Vec<f64>>>,
    nu_sum: Vec<Vec<Vec<f64>>>,
}

impl<'a> Accounting<'a> {
    fn new(game: &'a MarkovGame, config: &ExperimentConfig) -> Self {
        let mut zeroed = game.dims().uniform_pair();
        for table in [&mut zeroed.mu, &mut zeroed.nu] {
            for stage in table.iter_mut() {
                for row in stage.iter_mut() {
                    row.iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
        Accounting {
            game,
            initial_state: config.initial_state,
            episodes: config.episodes,
            eval_every: config.eval_every,
            records: Vec::with_capacity(config.episodes),
            deployed: Vec::with_capacity(config.episodes),
            cumulative: 0.0,
            carried: 0.0,
            mu_sum: zeroed.mu,
            nu_sum: zeroed.nu,
        }
    }

    fn average_pair(&self, k: usize) -> PolicyPair {
        let scale = 1.0 / k as f64;
        let scaled = |table: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<Vec<f64>>> {
            table
                .iter()
                .map(|stage| {
                    stage.iter().map(|row| row.iter().map(|x| x * scale).collect()).collect()
                })
                .collect()
        };
        PolicyPair { mu: scaled(&self.mu_sum), nu: scaled(&self.nu_sum) }
    }

    fn on_episode(&mut self, pair: PolicyPair, diag: Diag) -> Result<()> {
        let k = self.deployed.len() + 1;
        for (sum, table) in
            [(&mut self.mu_sum, &pair.mu), (&mut self.nu_sum, &pair.nu)]
        {
            for (s_stage, p_stage) in sum.iter_mut().zip(table) {
                for (s_row, p_row) in s_stage.iter_mut().zip(p_stage) {
                    for (acc, p) in s_row.iter_mut().zip(p_row) {
                        *acc += p;
                    }
                }
            }
        }
        let is_eval = (k - 1) % self.eval_every == 0 || k == self.episodes;
        let mut increment = None;
        let mut weak = None;
        if is_eval {
            let gap = duality_gap_at(self.game, &pair, self.initial_state)?;
            debug_assert!(gap >= -1e-9, "duality gap must be non-negative, got {gap}");
            self.carried = gap;
            increment = Some(gap);
            let avg = self.average_pair(k);
            weak = Some(k as f64 * duality_gap_at(self.game, &avg, self.initial_state)?);
        }
        self.cumulative += self.carried.max(0.0);
        self.records.push(RunRecord {
            k,
            v_up_root: diag.v_up_root,
            v_low_root: diag.v_low_root,
            regret_increment: increment,
            cumulative_regret: self.cumulative,
            eval_flag: is_eval,
            weak_regret: weak,
            xi: diag.xi,
            zeta: diag.zeta,
            audit_fraction: diag.audit_fraction,
        });
        self.deployed.push(pair);
        Ok(())
    }
}

/// Runs the configured learner for `episodes` episodes and returns the full
/// log. Identical configurations produce identical logs.
pub fn run_experiment(game: &MarkovGame, config: &ExperimentConfig) -> Result<RunLog> {
    config.validate(game)?;
    let mut acct = Accounting::new(game, config);
    let mut dataset = None;
    let final_pair = match config.algorithm {
        Algorithm::ViUlcb => run_vi_ulcb(game, config, &mut acct)?,
        Algorithm::ViExplore => {
            let (pair, data) = run_vi_explore(game, config, &mut acct)?;
            dataset = Some(data);
            pair
        }
        Algorithm::Md1Step => run_md_one_step(game, config, &mut acct)?,
        Algorithm::Md2StepTb => run_md_two_step(game, config, &mut acct)?,
    };
    Ok(RunLog { records: acct.records, deployed: acct.deployed, final_pair, dataset })
}

fn run_vi_ulcb(
    game: &MarkovGame,
    config: &ExperimentConfig,
    acct: &mut Accounting,
) -> Result<PolicyPair> {
    let dims = game.dims();
    let params = BonusParams::new(config.bonus_c, &dims, config.episodes, config.failure_prob)?;
    let mut learner = UlcbLearner::new(&dims);
    let mut env_rng = substream(config.seed, ENV_STREAM);
    let mut act_rng = substream(config.seed, LEARNER_STREAM);
    for _ in 0..config.episodes {
        learner.plan(&params)?;
        let pair = learner.pair.clone();
        let audit_fraction =
            if config.audit { Some(learner.validity_audit(game)?) } else { None };
        let mut s = config.initial_state;
        let mut xi = 0.0;
        let mut zeta = 0.0;
        for h in 0..game.horizon {
            let (a, b) = learner.act(h, s, &mut act_rng)?;
            // Width of the envelope at a cell; the residuals below measure
            // how much of this step's width came from sampling noise rather
            // than the policy-mean / transition-mean widths.
            let width = |ai: usize, bi: usize| learner.q_up[h][s][ai][bi] - learner.q_low[h][s][ai][bi];
            let mut mean_width = 0.0;
            for (ai, pa) in pair.mu[h][s].iter().enumerate() {
                for (bi, pb) in pair.nu[h][s].iter().enumerate() {
                    mean_width += pa * pb * width(ai, bi);
                }
            }
            zeta += mean_width - width(a, b);
            let (reward, next) = step_env(game, h, s, a, b, &mut env_rng);
            let next_width = |sp: usize| learner.v_up[h + 1][sp] - learner.v_low[h + 1][sp];
            let mut mean_next = 0.0;
            for (sp, p) in game.transition[h][s][a][b].iter().enumerate() {
                mean_next += p * next_width(sp);
            }
            xi += mean_next - next_width(next);
            learner.update(h, s, a, b, reward, next)?;
            s = next;
        }
        acct.on_episode(
            pair,
            Diag {
                v_up_root: Some(learner.v_up[0][config.initial_state]),
                v_low_root: Some(learner.v_low[0][config.initial_state]),
                xi: Some(xi),
                zeta: Some(zeta),
                audit_fraction,
            },
        )?;
    }
    Ok(learner.pair.clone())
}

fn run_vi_explore(
    game: &MarkovGame,
    config: &ExperimentConfig,
    acct: &mut Accounting,
) -> Result<(PolicyPair, ExplorationDataset)> {
    let dims = game.dims();
    let build =
        build_cover(game, &config.exploration, config.seed, config.initial_state, Some(config.episodes))?;
    for pair in &build.executed {
        acct.on_episode(pair.clone(), Diag::default())?;
    }
    let used = build.executed.len();
    let n_collect = config.exploration.n_collect.min(config.episodes - used);
    let mut collect_rng = substream(config.seed, COLLECT_STREAM);
    let (dataset, drawn) =
        collect(game, &build.cover, n_collect, config.initial_state, &mut collect_rng)?;
    for &idx in &drawn {
        acct.on_episode(build.cover.members[idx].as_pair(&dims), Diag::default())?;
    }
    // One empirical model, one exact solve; the exploit phase never replans.
    // Playing a fixed pair draws nothing the log depends on, so the
    // remaining episodes are accounted without simulation.
    let (empirical, _) = build_empirical_model(&dataset, &dims);
    let (pair, _) = plan_and_exploit(&empirical, PLAN_TOL)?;
    let mut k = used + drawn.len();
    while k < config.episodes {
        acct.on_episode(pair.clone(), Diag::default())?;
        k += 1;
    }
    Ok((pair, dataset))
}

fn run_md_one_step(
    game: &MarkovGame,
    config: &ExperimentConfig,
    acct: &mut Accounting,
) -> Result<PolicyPair> {
    let dims = game.dims();
    let mut learner = OneStepLearner::new(&dims, config.step_schedule)?;
    // Horizon-1 games have no mid-episode transition, so the environment
    // stream goes untouched.
    let mut act_rng = substream(config.seed, LEARNER_STREAM);
    let s = config.initial_state;
    for _ in 0..config.episodes {
        let pair = learner.pair();
        let (a, b) = learner.act(s, &mut act_rng);
        learner.update(s, a, b, game.reward[0][s][a][b])?;
        acct.on_episode(pair, Diag::default())?;
    }
    Ok(learner.pair())
}

fn run_md_two_step(
    game: &MarkovGame,
    config: &ExperimentConfig,
    acct: &mut Accounting,
) -> Result<PolicyPair> {
    let mut learner = TwoStepTurnBasedLearner::new(game, config.step_schedule)?;
    let mut env_rng = substream(config.seed, ENV_STREAM);
    let mut act_rng = substream(config.seed, LEARNER_STREAM);
    let s1 = config.initial_state;
    for _ in 0..config.episodes {
        let pair = learner.pair();
        let a = learner.act_stage1(s1, &mut act_rng);
        let (r1, s2) = step_env(game, 0, s1, a, 0, &mut env_rng);
        let b = learner.act_stage2(s2, &mut act_rng);
        let r2 = game.reward[1][s2][0][b];
        learner.update(s1, a, r1, s2, b, r2)?;
        acct.on_episode(pair, Diag::default())?;
    }
    Ok(learner.pair())
}

/// Uniform mixture over a deployed-policy history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMixture {
    pub pairs: Vec<PolicyPair>,
}

/// Online-to-batch conversion: the uniform mixture over the deployed pairs.
pub fn online_to_batch(history: &[PolicyPair]) -> Result<PolicyMixture> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    Ok(PolicyMixture { pairs: history.to_vec() })
}

impl PolicyMixture {
    /// Mean duality gap of the constituent pairs at `initial_state`. This is
    /// the certificate online-to-batch conversion provides; it upper-bounds
    /// the exploitability of playing a freshly drawn pair each episode.
    pub fn expected_gap(&self, game: &MarkovGame, initial_state: usize) -> Result<f64> {
        let mut total = 0.0;
        for pair in &self.pairs {
            total += duality_gap_at(game, pair, initial_state)?;
        }
        Ok(total / self.pairs.len() as f64)
    }
}

/// Reads and validates a game from JSON.
pub fn load_game(path: &Path) -> Result<MarkovGame> {
    let file = std::fs::File::open(path)?;
    let game: MarkovGame = serde_json::from_reader(std::io::BufReader::new(file))?;
    game.validate()?;
    Ok(game)
}

/// Writes a game as pretty-printed JSON with a trailing newline.
pub fn save_game(path: &Path, game: &MarkovGame) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, game)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}
