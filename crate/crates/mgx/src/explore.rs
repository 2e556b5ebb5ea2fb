//! Reward-free exploration followed by Nash planning on the learned model.
//!
//! The explore-then-exploit pipeline has four steps. First, for every
//! (stage, state) target, an optimistic single-agent learner over the joint
//! action space maximises the probability of standing at the target; every
//! executed greedy policy — with the target stage overwritten to the uniform
//! joint distribution — joins the policy cover. Second, data-collection
//! episodes sample policies uniformly from the cover. Third, the trajectories
//! are distilled into an empirical game (mean rewards, ratio transitions,
//! uniform rows where nothing was observed). Fourth, backward induction with
//! the zero-sum matrix solver on the empirical game yields the policy pair
//! played for all remaining episodes.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::game::{GameDims, MarkovGame, PolicyPair, ValueTables};
use crate::matrix::argmax;
use crate::sample::{sample_index, substream};
use crate::ulcb::BonusParams;

/// Exploration budget knobs. `epsilon` records the nominal target accuracy
/// the budgets were chosen for; nothing switches on it internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    /// Episodes spent per (stage, state) reachability target.
    pub n0: usize,
    /// Data-collection episodes sampling from the finished cover.
    pub n_collect: usize,
    pub epsilon: f64,
    pub failure_prob: f64,
    /// Bonus constant of the reachability learner. The objective's value
    /// range is [0, 1], so a constant well below the planner's default keeps
    /// optimism from saturating the whole budget.
    pub bonus_c: f64,
}

impl ExplorationConfig {
    pub fn new(n0: usize, n_collect: usize) -> Self {
        ExplorationConfig { n0, n_collect, epsilon: 1.0, failure_prob: 0.05, bonus_c: 0.5 }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.n0 == 0 || self.n_collect == 0 {
            return Err(Error::Config("n0 and n_collect must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= horizon as f64) {
            return Err(Error::Config(format!(
                "epsilon = {} must lie in (0, {horizon}]",
                self.epsilon
            )));
        }
        if !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return Err(Error::Config("failure probability must lie in (0, 1)".into()));
        }
        if !(self.bonus_c.is_finite() && self.bonus_c >= 0.0) {
            return Err(Error::Config("bonus constant must be >= 0".into()));
        }
        Ok(())
    }
}

/// A policy over the joint action space, tagged by the reachability target
/// that produced it. Rows are distributions over `c = a * B_h + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverPolicy {
    /// Stage index (0-based) of the target.
    pub target_stage: usize,
    pub target_state: usize,
    /// `table[h][s][c]` — distribution over joint actions.
    pub table: Vec<Vec<Vec<f64>>>,
}

impl CoverPolicy {
    /// Per-player marginals. Every row this module produces is either
    /// one-hot or uniform over the product space, so the marginal pair
    /// represents the joint policy exactly.
    pub fn as_pair(&self, dims: &GameDims) -> PolicyPair {
        joint_marginals(&self.table, dims)
    }
}

/// Marginalizes a joint-action policy table into a per-player pair.
pub fn joint_marginals(table: &[Vec<Vec<f64>>], dims: &GameDims) -> PolicyPair {
    let mut pair = dims.uniform_pair();
    for h in 0..dims.horizon {
        let nb = dims.actions_min_per_stage[h];
        for s in 0..dims.states_per_stage[h] {
            let row = &table[h][s];
            let mut mu = vec![0.0; dims.actions_max_per_stage[h]];
            let mut nu = vec![0.0; nb];
            for (c, &p) in row.iter().enumerate() {
                mu[c / nb] += p;
                nu[c % nb] += p;
            }
            pair.mu[h][s] = mu;
            pair.nu[h][s] = nu;
        }
    }
    pair
}

/// The union of reachability policies over all targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCover {
    pub members: Vec<CoverPolicy>,
}

/// One episode of raw experience: `H + 1` states, `H` joint actions, `H`
/// rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<(usize, usize)>,
    pub rewards: Vec<f64>,
}

/// Collected exploration experience; one trajectory per episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplorationDataset {
    pub trajectories: Vec<Trajectory>,
}

impl ExplorationDataset {
    /// Writes one JSON object per line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut trajectories = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            trajectories.push(serde_json::from_str(&line)?);
        }
        Ok(ExplorationDataset { trajectories })
    }
}

fn uniform_row(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Confidence bonus of the reachability objective: the planner's bonus form
/// with the value bound of this objective (a probability, so 1) in place of
/// the horizon factor. Keeping the full horizon factor would leave every
/// estimate clipped for most of a desk-scale budget.
fn reach_bonus(t: u64, params: &BonusParams) -> f64 {
    params.c * (params.state_bound as f64 * params.iota / t as f64).sqrt()
}

/// Optimistic value iteration for one reachability target: the known reward
/// is the indicator of standing at the target, transitions are estimated,
/// and the continuation past the target stage is identically zero.
struct ReachabilityLearner {
    dims: GameDims,
    target_stage: usize,
    target_state: usize,
    counts: Vec<Vec<Vec<u64>>>,
    successors: Vec<Vec<Vec<Vec<u64>>>>,
    /// Optimistic reach probability per (h, s, c), h < target_stage.
    q: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<f64>>,
}

impl ReachabilityLearner {
    fn new(dims: &GameDims, target_stage: usize, target_state: usize) -> Self {
        let joint = |h: usize| dims.actions_max_per_stage[h] * dims.actions_min_per_stage[h];
        let counts =
            (0..dims.horizon).map(|h| vec![vec![0; joint(h)]; dims.states_per_stage[h]]).collect();
        let successors = (0..dims.horizon)
            .map(|h| {
                vec![vec![vec![0; dims.states_per_stage[h + 1]]; joint(h)]; dims.states_per_stage[h]]
            })
            .collect();
        let q = (0..dims.horizon)
            .map(|h| vec![vec![1.0; joint(h)]; dims.states_per_stage[h]])
            .collect();
        let v = (0..=dims.horizon).map(|h| vec![0.0; dims.states_per_stage[h]]).collect();
        ReachabilityLearner {
            dims: dims.clone(),
            target_stage,
            target_state,
            counts,
            successors,
            q,
            v,
        }
    }

    /// Greedy joint action with ties broken by least visits, then lowest
    /// index. Under clipped optimism whole rows tie at 1, and the visit-count
    /// tie-break turns that into systematic round-robin exploration.
    fn greedy(&self, h: usize, s: usize) -> usize {
        let row = &self.q[h][s];
        let top = row[argmax(row)];
        let mut best = usize::MAX;
        let mut best_count = u64::MAX;
        for (c, &value) in row.iter().enumerate() {
            if value >= top - 1e-12 && self.counts[h][s][c] < best_count {
                best = c;
                best_count = self.counts[h][s][c];
            }
        }
        best
    }

    /// Backward pass over stages before the target, then a fresh greedy
    /// policy. Stages at and after the target do not affect the objective;
    /// the executed policy plays uniformly there (the target stage itself is
    /// greedy when executed, uniform in the stored cover member).
    fn plan(&mut self, params: &BonusParams) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
        let dims = &self.dims;
        for (s, v) in self.v[self.target_stage].iter_mut().enumerate() {
            *v = if s == self.target_state { 1.0 } else { 0.0 };
        }
        for h in (0..self.target_stage).rev() {
            for s in 0..dims.states_per_stage[h] {
                for c in 0..self.q[h][s].len() {
                    let t = self.counts[h][s][c];
                    if t == 0 {
                        self.q[h][s][c] = 1.0;
                        continue;
                    }
                    let mut reach = 0.0;
                    for (next, &n) in self.successors[h][s][c].iter().enumerate() {
                        if n > 0 {
                            reach += n as f64 / t as f64 * self.v[h + 1][next];
                        }
                    }
                    self.q[h][s][c] = (reach + reach_bonus(t, params)).min(1.0);
                }
                let row = &self.q[h][s];
                self.v[h][s] = row[argmax(row)];
            }
        }
        let mut executed = Vec::with_capacity(dims.horizon);
        let mut stored = Vec::with_capacity(dims.horizon);
        for h in 0..dims.horizon {
            let joint = self.q[h][0].len();
            let mut exe = Vec::with_capacity(dims.states_per_stage[h]);
            let mut sto = Vec::with_capacity(dims.states_per_stage[h]);
            for s in 0..dims.states_per_stage[h] {
                if h > self.target_stage {
                    exe.push(uniform_row(joint));
                    sto.push(uniform_row(joint));
                } else if h == self.target_stage {
                    let mut one_hot = vec![0.0; joint];
                    one_hot[self.greedy(h, s)] = 1.0;
                    exe.push(one_hot);
                    sto.push(uniform_row(joint));
                } else {
                    let mut one_hot = vec![0.0; joint];
                    one_hot[self.greedy(h, s)] = 1.0;
                    exe.push(one_hot.clone());
                    sto.push(one_hot);
                }
            }
            executed.push(exe);
            stored.push(sto);
        }
        (executed, stored)
    }

    fn update(&mut self, h: usize, s: usize, c: usize, next: usize) {
        self.counts[h][s][c] += 1;
        self.successors[h][s][c][next] += 1;
    }
}

/// Plays one episode of `policy` from `initial_state`, returning the
/// trajectory.
pub fn play_joint_policy(
    game: &MarkovGame,
    policy: &[Vec<Vec<f64>>],
    initial_state: usize,
    rng: &mut ChaCha20Rng,
) -> Trajectory {
    let mut states = vec![initial_state];
    let mut actions = Vec::with_capacity(game.horizon);
    let mut rewards = Vec::with_capacity(game.horizon);
    let mut s = initial_state;
    for h in 0..game.horizon {
        let nb = game.actions_min_per_stage[h];
        let c = sample_index(&policy[h][s], rng);
        let (a, b) = (c / nb, c % nb);
        actions.push((a, b));
        rewards.push(game.reward[h][s][a][b]);
        s = sample_index(&game.transition[h][s][a][b], rng);
        states.push(s);
    }
    Trajectory { states, actions, rewards }
}

/// All reachability episodes of one target: the stored cover members plus,
/// per episode, the executed policy's marginal pair (for regret accounting).
pub fn reachability_learner(
    game: &MarkovGame,
    target_stage: usize,
    target_state: usize,
    episodes: usize,
    config: &ExplorationConfig,
    initial_state: usize,
    env_rng: &mut ChaCha20Rng,
    act_rng: &mut ChaCha20Rng,
) -> Result<(Vec<CoverPolicy>, Vec<PolicyPair>)> {
    let dims = game.dims();
    if target_stage >= dims.horizon || target_state >= dims.states_per_stage[target_stage] {
        return Err(Error::Dimension(format!(
            "reachability target (stage {target_stage}, state {target_state}) out of range"
        )));
    }
    if episodes == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let params = BonusParams::new(config.bonus_c, &dims, episodes, config.failure_prob)?;
    let mut learner = ReachabilityLearner::new(&dims, target_stage, target_state);
    let mut members = Vec::with_capacity(episodes);
    let mut executed_pairs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (executed, stored) = learner.plan(&params);
        let member = CoverPolicy { target_stage, target_state, table: stored };
        executed_pairs.push(joint_marginals(&executed, &dims));
        let mut s = initial_state;
        for h in 0..game.horizon {
            let nb = game.actions_min_per_stage[h];
            let c = if executed[h][s].iter().filter(|&&p| p > 0.0).count() == 1 {
                argmax(&executed[h][s])
            } else {
                sample_index(&executed[h][s], act_rng)
            };
            let (a, b) = (c / nb, c % nb);
            let next = sample_index(&game.transition[h][s][a][b], env_rng);
            learner.update(h, s, c, next);
            s = next;
        }
        members.push(member);
    }
    Ok((members, executed_pairs))
}

/// The cover plus the per-episode executed marginal pairs, in the canonical
/// episode order (targets by stage then state, `n0` episodes each).
pub struct CoverBuild {
    pub cover: PolicyCover,
    pub executed: Vec<PolicyPair>,
}

/// Runs the reachability learner for every (stage, state) target and unions
/// the results. `episode_budget` truncates the build after that many
/// episodes (partial covers are valid; later targets are skipped).
///
/// Targets use independent seeded substreams, so the result is identical
/// whether they run sequentially or data-parallel.
pub fn build_cover(
    game: &MarkovGame,
    config: &ExplorationConfig,
    seed: u64,
    initial_state: usize,
    episode_budget: Option<usize>,
) -> Result<CoverBuild> {
    config.validate(game.horizon)?;
    let dims = game.dims();
    let mut targets = Vec::new();
    for h in 0..dims.horizon {
        for s in 0..dims.states_per_stage[h] {
            targets.push((h, s));
        }
    }
    let results = exec::map_n(targets.len(), |i| {
        let (h, s) = targets[i];
        let start = i * config.n0;
        let episodes = match episode_budget {
            Some(budget) => config.n0.min(budget.saturating_sub(start)),
            None => config.n0,
        };
        reachability_learner(
            game,
            h,
            s,
            episodes,
            config,
            initial_state,
            &mut substream(seed, 1_000 + i as u64),
            &mut substream(seed, 2_000 + i as u64),
        )
    });
    let mut cover = PolicyCover { members: Vec::new() };
    let mut executed = Vec::new();
    for result in results {
        let (members, pairs) = result?;
        cover.members.extend(members);
        executed.extend(pairs);
    }
    Ok(CoverBuild { cover, executed })
}

/// Collection phase: each episode samples a cover member uniformly and plays
/// it once. Returns the dataset and the drawn member index per episode.
pub fn collect(
    game: &MarkovGame,
    cover: &PolicyCover,
    n_collect: usize,
    initial_state: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(ExplorationDataset, Vec<usize>)> {
    if n_collect > 0 && cover.members.is_empty() {
        return Err(Error::Config("cannot collect from an empty cover".into()));
    }
    let mut dataset = ExplorationDataset::default();
    let mut drawn = Vec::with_capacity(n_collect);
    for _ in 0..n_collect {
        let i = rng.gen_range(0..cover.members.len());
        drawn.push(i);
        dataset
            .trajectories
            .push(play_joint_policy(game, &cover.members[i].table, initial_state, rng));
    }
    Ok((dataset, drawn))
}

/// Distils a dataset into an empirical game with the true game's shape:
/// mean rewards and ratio transitions where visited, reward 0 and a uniform
/// transition row where not. Also returns the per-cell visit counts.
pub fn build_empirical_model(
    dataset: &ExplorationDataset,
    dims: &GameDims,
) -> (MarkovGame, Vec<Vec<Vec<Vec<u64>>>>) {
    let hz = dims.horizon;
    let mut counts: Vec<Vec<Vec<Vec<u64>>>> = (0..hz)
        .map(|h| {
            vec![
                vec![vec![0; dims.actions_min_per_stage[h]]; dims.actions_max_per_stage[h]];
                dims.states_per_stage[h]
            ]
        })
        .collect();
    let mut reward_sum: Vec<Vec<Vec<Vec<f64>>>> = (0..hz)
        .map(|h| {
            vec![
                vec![vec![0.0; dims.actions_min_per_stage[h]]; dims.actions_max_per_stage[h]];
                dims.states_per_stage[h]
            ]
        })
        .collect();
    let mut succ: Vec<Vec<Vec<Vec<Vec<u64>>>>> = (0..hz)
        .map(|h| {
            vec![
                vec![
                    vec![vec![0; dims.states_per_stage[h + 1]]; dims.actions_min_per_stage[h]];
                    dims.actions_max_per_stage[h]
                ];
                dims.states_per_stage[h]
            ]
        })
        .collect();
    for t in &dataset.trajectories {
        for h in 0..hz {
            let s = t.states[h];
            let (a, b) = t.actions[h];
            counts[h][s][a][b] += 1;
            reward_sum[h][s][a][b] += t.rewards[h];
            succ[h][s][a][b][t.states[h + 1]] += 1;
        }
    }
    let mut transition = Vec::with_capacity(hz);
    let mut reward = Vec::with_capacity(hz);
    for h in 0..hz {
        let mut t_slab = Vec::with_capacity(dims.states_per_stage[h]);
        let mut r_slab = Vec::with_capacity(dims.states_per_stage[h]);
        for s in 0..dims.states_per_stage[h] {
            let mut t_rows = Vec::with_capacity(dims.actions_max_per_stage[h]);
            let mut r_rows = Vec::with_capacity(dims.actions_max_per_stage[h]);
            for a in 0..dims.actions_max_per_stage[h] {
                let mut t_row = Vec::with_capacity(dims.actions_min_per_stage[h]);
                let mut r_row = Vec::with_capacity(dims.actions_min_per_stage[h]);
                for b in 0..dims.actions_min_per_stage[h] {
                    let n = counts[h][s][a][b];
                    if n == 0 {
                        t_row.push(uniform_row(dims.states_per_stage[h + 1]));
                        r_row.push(0.0);
                    } else {
                        t_row.push(
                            succ[h][s][a][b].iter().map(|&k| k as f64 / n as f64).collect(),
                        );
                        r_row.push(reward_sum[h][s][a][b] / n as f64);
                    }
                }
                t_rows.push(t_row);
                r_rows.push(r_row);
            }
            t_slab.push(t_rows);
            r_slab.push(r_rows);
        }
        transition.push(t_slab);
        reward.push(r_slab);
    }
    let game = MarkovGame {
        horizon: hz,
        states_per_stage: dims.states_per_stage.clone(),
        actions_max_per_stage: dims.actions_max_per_stage.clone(),
        actions_min_per_stage: dims.actions_min_per_stage.clone(),
        transition,
        reward,
        turn_partition: None,
    };
    (game, counts)
}

/// Backward induction on the empirical game; the returned pair is what the
/// exploit phase plays unchanged for every remaining episode.
pub fn plan_and_exploit(empirical: &MarkovGame, tol: f64) -> Result<(PolicyPair, ValueTables)> {
    crate::game::exact_nash(empirical, tol)
}
