//! Exponential-weights (mirror-descent) learners for short-horizon games
//! under bandit feedback.
//!
//! Two learners share the machinery: a one-step simultaneous learner that
//! treats each initial state as an independent matrix game, and a two-step
//! turn-based learner where the max player owns stage 1 and the min player
//! owns stage 2. Both run multiplicative weights on importance-weighted
//! value estimates whose entries are capped almost surely — non-played
//! actions sit exactly at the cap, so the update only ever moves the played
//! action's weight.
//!
//! Orientation matters for stability. When a context *ascends* an estimate
//! that is capped from above (with non-played entries at the cap), the
//! played action's relative multiplier is `exp(η·(est − cap)) ≤ 1`, so no
//! single round can blow up the distribution. The one-step learner uses
//! this safe orientation for both players by handing the min player the
//! complemented reward `1 − r` as its own payoff. The two-step learner's
//! stage-2 update instead descends its raw-reward estimate, whose played
//! multiplier `exp(η·(1 − r₂)/ν)` is unbounded as ν shrinks; without an
//! exploration-mixing term that variant has no per-run stability guarantee
//! and is kept only because its construction is fixed explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameDims, MarkovGame, PolicyPair, Turn};
use crate::sample::sample_index;

/// Which player a context belongs to: the max player ascends its estimates,
/// the min player descends them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Max,
    Min,
}

/// Exponential-weights state for one (stage, state, player) context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3Context {
    /// Strictly positive weights; read through [`Exp3Context::distribution`].
    pub weights: Vec<f64>,
    /// Episodes in which this context was visited and updated.
    pub visit_count: u64,
    pub role: Role,
}

impl Exp3Context {
    pub fn new(action_count: usize, role: Role) -> Self {
        Exp3Context { weights: vec![1.0; action_count], visit_count: 0, role }
    }

    /// The normalized distribution over actions.
    pub fn distribution(&self) -> Vec<f64> {
        let sum: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / sum).collect()
    }
}

/// An importance-weighted value estimate with its almost-sure cap. Entries
/// for actions other than the played one equal `bound` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEstimate {
    pub values: Vec<f64>,
    pub bound: f64,
}

fn capped_estimate(
    played: usize,
    observed: f64,
    prob_of_played: f64,
    action_count: usize,
    bound: f64,
) -> Result<LossEstimate> {
    if prob_of_played <= 0.0 || !prob_of_played.is_finite() {
        return Err(Error::ZeroPlayedProbability);
    }
    if played >= action_count {
        return Err(Error::BadPolicy(format!(
            "played action {played} out of range {action_count}"
        )));
    }
    if !(observed >= 0.0 && observed <= bound) {
        return Err(Error::Config(format!("observed value {observed} outside [0, {bound}]")));
    }
    let mut values = vec![bound; action_count];
    values[played] = bound - (bound - observed) / prob_of_played;
    Ok(LossEstimate { values, bound })
}

/// One-step estimate: the played entry is `1 − (1 − r)/μ(played)`, every
/// other entry is exactly 1.
pub fn estimate_one_step(
    played: usize,
    reward: f64,
    prob_of_played: f64,
    action_count: usize,
) -> Result<LossEstimate> {
    capped_estimate(played, reward, prob_of_played, action_count, 1.0)
}

/// Stage-1 estimate of a two-step run, built from the episode's total reward
/// `r1 + r2 ∈ [0, 2]`; cap 2.
pub fn estimate_q1(
    played: usize,
    reward_sum: f64,
    prob_of_played: f64,
    action_count: usize,
) -> Result<LossEstimate> {
    capped_estimate(played, reward_sum, prob_of_played, action_count, 2.0)
}

/// Stage-2 estimate from the second-step reward alone; cap 1.
pub fn estimate_q2(
    played: usize,
    reward: f64,
    prob_of_played: f64,
    action_count: usize,
) -> Result<LossEstimate> {
    capped_estimate(played, reward, prob_of_played, action_count, 1.0)
}

/// Multiplicative-weights step: weights scale by `exp(+η·est)` for the max
/// player and `exp(−η·est)` for the min player, stabilized by subtracting
/// the largest exponent before exponentiating.
pub fn exp3_update(ctx: &mut Exp3Context, estimate: &LossEstimate, eta: f64) -> Result<()> {
    if estimate.values.len() != ctx.weights.len() {
        return Err(Error::Dimension(format!(
            "estimate length {} vs context arity {}",
            estimate.values.len(),
            ctx.weights.len()
        )));
    }
    if estimate.values.iter().any(|v| !v.is_finite()) || !eta.is_finite() || eta < 0.0 {
        return Err(Error::Config("non-finite estimate or step size".into()));
    }
    let sign = match ctx.role {
        Role::Max => 1.0,
        Role::Min => -1.0,
    };
    let exponents: Vec<f64> = ctx
        .weights
        .iter()
        .zip(&estimate.values)
        .map(|(w, v)| w.ln() + sign * eta * v)
        .collect();
    let top = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (w, e) in ctx.weights.iter_mut().zip(&exponents) {
        *w = (e - top).exp();
    }
    Ok(())
}

/// Step-size schedule: adaptive shrinks per context as its visits grow; the
/// fixed variant commits to the episode budget up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepSize {
    Adaptive,
    Fixed { total_episodes: usize },
}

/// `√(ln(action_count) / (action_count · n))`; 0 for single-action contexts,
/// which have nothing to learn.
pub fn step_size(n: u64, action_count: usize) -> f64 {
    assert!(n >= 1, "step size is defined after the first visit");
    if action_count < 2 {
        return 0.0;
    }
    ((action_count as f64).ln() / (action_count as f64 * n as f64)).sqrt()
}

fn schedule_eta(schedule: StepSize, visits: u64, action_count: usize) -> f64 {
    match schedule {
        StepSize::Adaptive => step_size(visits, action_count),
        StepSize::Fixed { total_episodes } => step_size(total_episodes.max(1) as u64, action_count),
    }
}

/// Simultaneous one-step learner: one max and one min context per initial
/// state, each treated as an independent matrix game.
#[derive(Debug, Clone)]
pub struct OneStepLearner {
    dims: GameDims,
    schedule: StepSize,
    max_contexts: Vec<Exp3Context>,
    min_contexts: Vec<Exp3Context>,
}

impl OneStepLearner {
    pub fn new(dims: &GameDims, schedule: StepSize) -> Result<Self> {
        if dims.horizon != 1 {
            return Err(Error::Config(format!(
                "one-step learner requires horizon 1, got {}",
                dims.horizon
            )));
        }
        let states = dims.states_per_stage[0];
        // Both contexts ascend: the min player is a maximizer of the
        // complemented reward, which keeps its update multipliers bounded
        // (see the module docs on orientation).
        Ok(OneStepLearner {
            dims: dims.clone(),
            schedule,
            max_contexts: (0..states)
                .map(|_| Exp3Context::new(dims.actions_max_per_stage[0], Role::Max))
                .collect(),
            min_contexts: (0..states)
                .map(|_| Exp3Context::new(dims.actions_min_per_stage[0], Role::Max))
                .collect(),
        })
    }

    /// Current action distributions at initial state `s`.
    pub fn policies(&self, s: usize) -> (Vec<f64>, Vec<f64>) {
        (self.max_contexts[s].distribution(), self.min_contexts[s].distribution())
    }

    pub fn act<R: rand::Rng>(&self, s: usize, rng: &mut R) -> (usize, usize) {
        let (mu, nu) = self.policies(s);
        (sample_index(&mu, rng), sample_index(&nu, rng))
    }

    /// One bandit round at initial state `s`: both contexts update from the
    /// single observed reward. The min player runs the identical algorithm
    /// on its own payoff `1 − r`, so both players ascend estimates capped
    /// from above and neither can inflate a rarely-played action.
    pub fn update(&mut self, s: usize, a: usize, b: usize, reward: f64) -> Result<()> {
        let (mu, nu) = self.policies(s);
        let est_max =
            estimate_one_step(a, reward, mu[a], self.dims.actions_max_per_stage[0])?;
        let est_min =
            estimate_one_step(b, 1.0 - reward, nu[b], self.dims.actions_min_per_stage[0])?;
        let ctx = &mut self.max_contexts[s];
        ctx.visit_count += 1;
        let eta = schedule_eta(self.schedule, ctx.visit_count, ctx.weights.len());
        exp3_update(ctx, &est_max, eta)?;
        let ctx = &mut self.min_contexts[s];
        ctx.visit_count += 1;
        let eta = schedule_eta(self.schedule, ctx.visit_count, ctx.weights.len());
        exp3_update(ctx, &est_min, eta)?;
        Ok(())
    }

    /// Full policy pair over the (single-stage) game; never-visited states
    /// are still well-defined (uniform weights).
    pub fn pair(&self) -> PolicyPair {
        let mut pair = self.dims.uniform_pair();
        for s in 0..self.dims.states_per_stage[0] {
            let (mu, nu) = self.policies(s);
            pair.mu[0][s] = mu;
            pair.nu[0][s] = nu;
        }
        pair
    }
}

/// Two-step turn-based learner: the max player owns stage 1, the min player
/// owns stage 2 (dummy opponents elsewhere). Stage-1 contexts learn from the
/// episode's total reward, stage-2 contexts from the second reward alone;
/// contexts not visited in an episode are left untouched.
#[derive(Debug, Clone)]
pub struct TwoStepTurnBasedLearner {
    dims: GameDims,
    schedule: StepSize,
    max_contexts: Vec<Exp3Context>,
    min_contexts: Vec<Exp3Context>,
}

impl TwoStepTurnBasedLearner {
    pub fn new(game: &MarkovGame, schedule: StepSize) -> Result<Self> {
        let dims = game.dims();
        let structure_ok = game.horizon == 2
            && game.turn_of(0) == Some(Turn::Max)
            && game.turn_of(1) == Some(Turn::Min);
        if !structure_ok {
            return Err(Error::Config(
                "two-step learner requires a turn-based game with the max player at stage 1 \
                 and the min player at stage 2"
                    .into(),
            ));
        }
        Ok(TwoStepTurnBasedLearner {
            schedule,
            max_contexts: (0..dims.states_per_stage[0])
                .map(|_| Exp3Context::new(dims.actions_max_per_stage[0], Role::Max))
                .collect(),
            min_contexts: (0..dims.states_per_stage[1])
                .map(|_| Exp3Context::new(dims.actions_min_per_stage[1], Role::Min))
                .collect(),
            dims,
        })
    }

    pub fn act_stage1<R: rand::Rng>(&self, s1: usize, rng: &mut R) -> usize {
        sample_index(&self.max_contexts[s1].distribution(), rng)
    }

    pub fn act_stage2<R: rand::Rng>(&self, s2: usize, rng: &mut R) -> usize {
        sample_index(&self.min_contexts[s2].distribution(), rng)
    }

    /// End-of-episode update from the realized `(s1, a, r1, s2, b, r2)`.
    pub fn update(
        &mut self,
        s1: usize,
        a: usize,
        r1: f64,
        s2: usize,
        b: usize,
        r2: f64,
    ) -> Result<()> {
        let mu = self.max_contexts[s1].distribution();
        let est1 = estimate_q1(a, r1 + r2, mu[a], self.dims.actions_max_per_stage[0])?;
        let ctx = &mut self.max_contexts[s1];
        ctx.visit_count += 1;
        let eta = schedule_eta(self.schedule, ctx.visit_count, ctx.weights.len());
        exp3_update(ctx, &est1, eta)?;

        let nu = self.min_contexts[s2].distribution();
        let est2 = estimate_q2(b, r2, nu[b], self.dims.actions_min_per_stage[1])?;
        let ctx = &mut self.min_contexts[s2];
        ctx.visit_count += 1;
        let eta = schedule_eta(self.schedule, ctx.visit_count, ctx.weights.len());
        exp3_update(ctx, &est2, eta)?;
        Ok(())
    }

    /// Full policy pair; dummy-action stages stay at their one-action
    /// distribution and unvisited contexts at uniform.
    pub fn pair(&self) -> PolicyPair {
        let mut pair = self.dims.uniform_pair();
        for (s, ctx) in self.max_contexts.iter().enumerate() {
            pair.mu[0][s] = ctx.distribution();
        }
        for (s, ctx) in self.min_contexts.iter().enumerate() {
            pair.nu[1][s] = ctx.distribution();
        }
        pair
    }
}
