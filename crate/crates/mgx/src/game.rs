//! Finite-horizon two-player zero-sum Markov games: data model, validation,
//! and exact planning.
//!
//! A game runs for `horizon` stages. Stage `h` (0-based internally) has its
//! own state set, action sets for the max and min player, deterministic
//! reward `reward[h][s][a][b]` in `[0, 1]` paid by the min player to the max
//! player, and transition kernel `transition[h][s][a][b][s']` onto the states
//! of stage `h + 1`. Values satisfy the terminal condition `V_{H+1} = 0`.
//!
//! Everything here is exact dynamic programming on a known game; learners
//! live elsewhere and are measured against these routines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::matrix;

/// Per-stage, per-state action distribution: `table[h][s][action]`.
pub type PolicyTable = Vec<Vec<Vec<f64>>>;

/// Which player controls a stage of a turn-based game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Max,
    Min,
}

/// Stage ownership for turn-based games; stage indices are 1-based in the
/// serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnPartition {
    pub max: Vec<usize>,
    pub min: Vec<usize>,
}

/// A tabular finite-horizon two-player zero-sum Markov game.
///
/// The serialized JSON uses exactly these field names; `transition` is
/// indexed `[h][s][a][b][s']` and `reward` is `[h][s][a][b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovGame {
    pub horizon: usize,
    /// `horizon + 1` entries; the last stage is terminal.
    pub states_per_stage: Vec<usize>,
    pub actions_max_per_stage: Vec<usize>,
    pub actions_min_per_stage: Vec<usize>,
    pub transition: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    pub reward: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_partition: Option<TurnPartition>,
}

/// Shape of a game without its numbers; what learners need to size tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameDims {
    pub horizon: usize,
    pub states_per_stage: Vec<usize>,
    pub actions_max_per_stage: Vec<usize>,
    pub actions_min_per_stage: Vec<usize>,
}

impl GameDims {
    pub fn max_states(&self) -> usize {
        self.states_per_stage.iter().copied().max().unwrap_or(0)
    }

    pub fn max_actions(&self) -> usize {
        self.actions_max_per_stage.iter().copied().max().unwrap_or(0)
    }

    pub fn min_actions(&self) -> usize {
        self.actions_min_per_stage.iter().copied().max().unwrap_or(0)
    }

    /// Uniform policy tables for both players.
    pub fn uniform_pair(&self) -> PolicyPair {
        let build = |counts: &[usize]| -> PolicyTable {
            (0..self.horizon)
                .map(|h| {
                    (0..self.states_per_stage[h])
                        .map(|_| vec![1.0 / counts[h] as f64; counts[h]])
                        .collect()
                })
                .collect()
        };
        PolicyPair {
            mu: build(&self.actions_max_per_stage),
            nu: build(&self.actions_min_per_stage),
        }
    }
}

/// A pair of stochastic stage policies, serialized as `{"mu": ..., "nu": ...}`
/// with indices `[h][s][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPair {
    pub mu: PolicyTable,
    pub nu: PolicyTable,
}

/// Stage values and action values from a planning or evaluation pass.
///
/// `v` has `horizon + 1` rows with the terminal row identically zero;
/// `q[h][s][a][b]` covers the `horizon` acting stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    pub v: Vec<Vec<f64>>,
    pub q: Vec<Vec<Vec<Vec<f64>>>>,
}

impl MarkovGame {
    pub fn dims(&self) -> GameDims {
        GameDims {
            horizon: self.horizon,
            states_per_stage: self.states_per_stage.clone(),
            actions_max_per_stage: self.actions_max_per_stage.clone(),
            actions_min_per_stage: self.actions_min_per_stage.clone(),
        }
    }

    /// Who owns stage `h` (0-based), if the game declares a turn partition.
    pub fn turn_of(&self, h: usize) -> Option<Turn> {
        let tp = self.turn_partition.as_ref()?;
        if tp.max.contains(&(h + 1)) {
            Some(Turn::Max)
        } else if tp.min.contains(&(h + 1)) {
            Some(Turn::Min)
        } else {
            None
        }
    }

    /// Checks every structural invariant of the serialized form.
    ///
    /// Shapes must match the declared per-stage dimensions, each transition
    /// row must be a probability distribution summing to one within `1e-12`,
    /// rewards must lie in `[0, 1]`, and a declared turn partition must cover
    /// the stages disjointly with the passive player holding exactly one
    /// (dummy) action. All other operations assume a validated game.
    pub fn validate(&self) -> Result<()> {
        let hz = self.horizon;
        if hz == 0 {
            return Err(Error::Dimension("horizon must be at least 1".into()));
        }
        if self.states_per_stage.len() != hz + 1 {
            return Err(Error::Dimension(format!(
                "states_per_stage has {} entries, expected {}",
                self.states_per_stage.len(),
                hz + 1
            )));
        }
        for (name, v) in [
            ("actions_max_per_stage", &self.actions_max_per_stage),
            ("actions_min_per_stage", &self.actions_min_per_stage),
        ] {
            if v.len() != hz {
                return Err(Error::Dimension(format!(
                    "{name} has {} entries, expected {hz}",
                    v.len()
                )));
            }
        }
        for stage_size in self
            .states_per_stage
            .iter()
            .chain(&self.actions_max_per_stage)
            .chain(&self.actions_min_per_stage)
        {
            if *stage_size == 0 {
                return Err(Error::Dimension("every stage needs at least one state and one action per player".into()));
            }
        }
        if self.transition.len() != hz || self.reward.len() != hz {
            return Err(Error::Dimension(format!(
                "transition/reward have {}/{} stages, expected {hz}",
                self.transition.len(),
                self.reward.len()
            )));
        }
        for h in 0..hz {
            let (ns, na, nb, nn) = (
                self.states_per_stage[h],
                self.actions_max_per_stage[h],
                self.actions_min_per_stage[h],
                self.states_per_stage[h + 1],
            );
            if self.transition[h].len() != ns || self.reward[h].len() != ns {
                return Err(Error::Dimension(format!("stage {h} state count mismatch")));
            }
            for s in 0..ns {
                if self.transition[h][s].len() != na || self.reward[h][s].len() != na {
                    return Err(Error::Dimension(format!("stage {h} state {s} max-action count mismatch")));
                }
                for a in 0..na {
                    if self.transition[h][s][a].len() != nb || self.reward[h][s][a].len() != nb {
                        return Err(Error::Dimension(format!(
                            "stage {h} state {s} action {a} min-action count mismatch"
                        )));
                    }
                    for b in 0..nb {
                        let r = self.reward[h][s][a][b];
                        if !r.is_finite() || !(0.0..=1.0).contains(&r) {
                            return Err(Error::RewardOutOfRange { h, s, a, b, value: r });
                        }
                        let row = &self.transition[h][s][a][b];
                        if row.len() != nn {
                            return Err(Error::Dimension(format!(
                                "transition row at (h={h}, s={s}, a={a}, b={b}) has {} entries, expected {nn}",
                                row.len()
                            )));
                        }
                        let mut sum = 0.0;
                        for (next, &pr) in row.iter().enumerate() {
                            if !pr.is_finite() || pr < 0.0 {
                                return Err(Error::InvalidTransition { h, s, a, b, next, value: pr });
                            }
                            sum += pr;
                        }
                        if (sum - 1.0).abs() > 1e-12 {
                            return Err(Error::NonStochasticRow { h, s, a, b, sum });
                        }
                    }
                }
            }
        }
        if let Some(tp) = &self.turn_partition {
            let mut owner = vec![None; hz];
            for (&stage, turn) in tp
                .max
                .iter()
                .map(|s| (s, Turn::Max))
                .chain(tp.min.iter().map(|s| (s, Turn::Min)))
            {
                if stage == 0 || stage > hz {
                    return Err(Error::TurnPartition(format!(
                        "stage {stage} outside 1..={hz}"
                    )));
                }
                if owner[stage - 1].is_some() {
                    return Err(Error::TurnPartition(format!("stage {stage} assigned twice")));
                }
                owner[stage - 1] = Some(turn);
            }
            for (h, turn) in owner.iter().enumerate() {
                match turn {
                    None => {
                        return Err(Error::TurnPartition(format!("stage {} unassigned", h + 1)))
                    }
                    Some(Turn::Max) if self.actions_min_per_stage[h] != 1 => {
                        return Err(Error::TurnPartition(format!(
                            "stage {} belongs to the max player but the min player has {} actions",
                            h + 1,
                            self.actions_min_per_stage[h]
                        )))
                    }
                    Some(Turn::Min) if self.actions_max_per_stage[h] != 1 => {
                        return Err(Error::TurnPartition(format!(
                            "stage {} belongs to the min player but the max player has {} actions",
                            h + 1,
                            self.actions_max_per_stage[h]
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Checks a single policy table against the game shape for one player.
fn check_policy(dims: &GameDims, table: &PolicyTable, counts: &[usize], who: &str) -> Result<()> {
    if table.len() != dims.horizon {
        return Err(Error::BadPolicy(format!(
            "{who} covers {} stages, expected {}",
            table.len(),
            dims.horizon
        )));
    }
    for (h, stage) in table.iter().enumerate() {
        if stage.len() != dims.states_per_stage[h] {
            return Err(Error::BadPolicy(format!("{who} stage {h} state count mismatch")));
        }
        for (s, dist) in stage.iter().enumerate() {
            if dist.len() != counts[h] {
                return Err(Error::BadPolicy(format!(
                    "{who} at (h={h}, s={s}) has {} actions, expected {}",
                    dist.len(),
                    counts[h]
                )));
            }
            let mut sum = 0.0;
            for &p in dist {
                if !p.is_finite() || p < -1e-12 {
                    return Err(Error::BadPolicy(format!(
                        "{who} at (h={h}, s={s}) has invalid mass {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::BadPolicy(format!(
                    "{who} at (h={h}, s={s}) sums to {sum}"
                )));
            }
        }
    }
    Ok(())
}

/// Validates a policy pair against the game's dimensions.
pub fn check_pair(game: &MarkovGame, pair: &PolicyPair) -> Result<()> {
    let dims = game.dims();
    check_policy(&dims, &pair.mu, &dims.actions_max_per_stage, "mu")?;
    check_policy(&dims, &pair.nu, &dims.actions_min_per_stage, "nu")
}

/// One Bellman backup: `Q_h(s, a, b) = r_h(s, a, b) + sum_{s'} P_h(s'|s,a,b) V_{h+1}(s')`.
///
/// `v_next` must cover the states of stage `h + 1`; the returned slab is
/// indexed `[s][a][b]`.
pub fn bellman_backup(game: &MarkovGame, h: usize, v_next: &[f64]) -> Vec<Vec<Vec<f64>>> {
    debug_assert_eq!(v_next.len(), game.states_per_stage[h + 1]);
    game.reward[h]
        .iter()
        .zip(&game.transition[h])
        .map(|(r_s, p_s)| {
            r_s.iter()
                .zip(p_s)
                .map(|(r_a, p_a)| {
                    r_a.iter()
                        .zip(p_a)
                        .map(|(r, row)| {
                            r + row.iter().zip(v_next).map(|(pr, v)| pr * v).sum::<f64>()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Exact value of a fixed policy pair by backward induction.
pub fn policy_value(game: &MarkovGame, pair: &PolicyPair) -> Result<ValueTables> {
    check_pair(game, pair)?;
    let hz = game.horizon;
    let mut v = vec![Vec::new(); hz + 1];
    v[hz] = vec![0.0; game.states_per_stage[hz]];
    let mut q = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let slab = bellman_backup(game, h, &v[h + 1]);
        v[h] = slab
            .iter()
            .enumerate()
            .map(|(s, q_s)| {
                let mu = &pair.mu[h][s];
                let nu = &pair.nu[h][s];
                q_s.iter()
                    .zip(mu)
                    .map(|(q_a, m)| m * q_a.iter().zip(nu).map(|(qv, n)| qv * n).sum::<f64>())
                    .sum()
            })
            .collect();
        q[h] = slab;
    }
    Ok(ValueTables { v, q })
}

/// The min player's exact best response to `mu`.
///
/// Returns the deterministic responder as a one-hot policy table (ties break
/// to the lowest action index) together with the value tables of the
/// resulting pair: `V_h(s) = min_b sum_a mu_h(a|s) Q_h(s, a, b)`.
pub fn best_response_min(game: &MarkovGame, mu: &PolicyTable) -> Result<(PolicyTable, ValueTables)> {
    let dims = game.dims();
    check_policy(&dims, mu, &dims.actions_max_per_stage, "mu")?;
    let hz = game.horizon;
    let mut v = vec![Vec::new(); hz + 1];
    v[hz] = vec![0.0; game.states_per_stage[hz]];
    let mut q = vec![Vec::new(); hz];
    let mut nu = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let slab = bellman_backup(game, h, &v[h + 1]);
        let nb = game.actions_min_per_stage[h];
        let mut v_h = Vec::with_capacity(slab.len());
        let mut nu_h = Vec::with_capacity(slab.len());
        for (s, q_s) in slab.iter().enumerate() {
            let col_vals: Vec<f64> = (0..nb)
                .map(|b| q_s.iter().zip(&mu[h][s]).map(|(q_a, m)| m * q_a[b]).sum())
                .collect();
            let best = matrix::argmin(&col_vals);
            v_h.push(col_vals[best]);
            let mut dist = vec![0.0; nb];
            dist[best] = 1.0;
            nu_h.push(dist);
        }
        v[h] = v_h;
        nu[h] = nu_h;
        q[h] = slab;
    }
    Ok((nu, ValueTables { v, q }))
}

/// The max player's exact best response to `nu`; mirror of
/// [`best_response_min`] with `V_h(s) = max_a sum_b nu_h(b|s) Q_h(s, a, b)`.
pub fn best_response_max(game: &MarkovGame, nu: &PolicyTable) -> Result<(PolicyTable, ValueTables)> {
    let dims = game.dims();
    check_policy(&dims, nu, &dims.actions_min_per_stage, "nu")?;
    let hz = game.horizon;
    let mut v = vec![Vec::new(); hz + 1];
    v[hz] = vec![0.0; game.states_per_stage[hz]];
    let mut q = vec![Vec::new(); hz];
    let mut mu = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let slab = bellman_backup(game, h, &v[h + 1]);
        let na = game.actions_max_per_stage[h];
        let mut v_h = Vec::with_capacity(slab.len());
        let mut mu_h = Vec::with_capacity(slab.len());
        for (s, q_s) in slab.iter().enumerate() {
            let row_vals: Vec<f64> = (0..na)
                .map(|a| q_s[a].iter().zip(&nu[h][s]).map(|(qv, n)| qv * n).sum())
                .collect();
            let best = matrix::argmax(&row_vals);
            v_h.push(row_vals[best]);
            let mut dist = vec![0.0; na];
            dist[best] = 1.0;
            mu_h.push(dist);
        }
        v[h] = v_h;
        mu[h] = mu_h;
        q[h] = slab;
    }
    Ok((mu, ValueTables { v, q }))
}

/// Exact Nash equilibrium of the game by backward induction, solving the
/// zero-sum stage matrix game at every `(h, s)` with exploitability at most
/// `tol` per state.
///
/// For turn-based games every stage game is a vector game, so the returned
/// policies are deterministic (one-hot). The root duality gap of the
/// returned pair is at most `tol * horizon`.
pub fn exact_nash(game: &MarkovGame, tol: f64) -> Result<(PolicyPair, ValueTables)> {
    let hz = game.horizon;
    let mut v = vec![Vec::new(); hz + 1];
    v[hz] = vec![0.0; game.states_per_stage[hz]];
    let mut q = vec![Vec::new(); hz];
    let mut mu = vec![Vec::new(); hz];
    let mut nu = vec![Vec::new(); hz];
    for h in (0..hz).rev() {
        let slab = bellman_backup(game, h, &v[h + 1]);
        let solved: Vec<Result<matrix::BimatrixSolution>> =
            exec::map_n(slab.len(), |s| matrix::nash_zero_sum(&slab[s], tol));
        let mut v_h = Vec::with_capacity(slab.len());
        let mut mu_h = Vec::with_capacity(slab.len());
        let mut nu_h = Vec::with_capacity(slab.len());
        for sol in solved {
            let sol = sol?;
            v_h.push(sol.value_max);
            mu_h.push(sol.phi);
            nu_h.push(sol.psi);
        }
        v[h] = v_h;
        mu[h] = mu_h;
        nu[h] = nu_h;
        q[h] = slab;
    }
    Ok((PolicyPair { mu, nu }, ValueTables { v, q }))
}

/// Duality gap of a policy pair at a given stage-1 state:
/// `V^{best,nu}_1(s1) - V^{mu,best}_1(s1)`.
///
/// Non-negative up to floating-point noise (at worst about `-1e-9`).
pub fn duality_gap_at(game: &MarkovGame, pair: &PolicyPair, s1: usize) -> Result<f64> {
    if s1 >= game.states_per_stage[0] {
        return Err(Error::Dimension(format!(
            "initial state {s1} out of range (stage 1 has {} states)",
            game.states_per_stage[0]
        )));
    }
    let (_, up) = best_response_max(game, &pair.nu)?;
    let (_, low) = best_response_min(game, &pair.mu)?;
    Ok(up.v[0][s1] - low.v[0][s1])
}

/// [`duality_gap_at`] at the default initial state (stage-1 state 0).
pub fn duality_gap(game: &MarkovGame, pair: &PolicyPair) -> Result<f64> {
    duality_gap_at(game, pair, 0)
}

#[cfg(test)]
pub(crate) mod test_games {
    use super::*;

    /// H=1, one state, matching-pennies rewards.
    pub fn pennies_one_step() -> MarkovGame {
        MarkovGame {
            horizon: 1,
            states_per_stage: vec![1, 1],
            actions_max_per_stage: vec![2],
            actions_min_per_stage: vec![2],
            transition: vec![vec![vec![vec![vec![1.0], vec![1.0]], vec![vec![1.0], vec![1.0]]]]],
            reward: vec![vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]],
            turn_partition: None,
        }
    }

    /// Matching pennies at every state of every stage, two states per stage,
    /// transitions split evenly so the stage value is 0.5 everywhere.
    pub fn pennies_chain(hz: usize) -> MarkovGame {
        let states: Vec<usize> = vec![2; hz + 1];
        let transition = (0..hz)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        (0..2)
                            .map(|_| (0..2).map(|_| vec![0.5, 0.5]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let reward = (0..hz)
            .map(|_| (0..2).map(|_| vec![vec![1.0, 0.0], vec![0.0, 1.0]]).collect())
            .collect();
        MarkovGame {
            horizon: hz,
            states_per_stage: states,
            actions_max_per_stage: vec![2; hz],
            actions_min_per_stage: vec![2; hz],
            transition,
            reward,
            turn_partition: None,
        }
    }

    /// Deterministic pseudo-random game via xorshift, uniform-simplex rows.
    pub fn random_game(hz: usize, ns: usize, na: usize, nb: usize, seed: u64) -> MarkovGame {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut transition = Vec::new();
        let mut reward = Vec::new();
        for _ in 0..hz {
            let mut t_h = Vec::new();
            let mut r_h = Vec::new();
            for _ in 0..ns {
                let mut t_s = Vec::new();
                let mut r_s = Vec::new();
                for _ in 0..na {
                    let mut t_a = Vec::new();
                    let mut r_a = Vec::new();
                    for _ in 0..nb {
                        let raw: Vec<f64> = (0..ns).map(|_| -((1.0 - next()).ln())).collect();
                        let sum: f64 = raw.iter().sum();
                        t_a.push(raw.iter().map(|x| x / sum).collect::<Vec<f64>>());
                        r_a.push(next());
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
        let g = MarkovGame {
            horizon: hz,
            states_per_stage: vec![ns; hz + 1],
            actions_max_per_stage: vec![na; hz],
            actions_min_per_stage: vec![nb; hz],
            transition,
            reward,
            turn_partition: None,
        };
        g.validate().expect("test generator must produce valid games");
        g
    }
}


#[cfg(test)]
mod prop_tests {
    use super::test_games::random_game;
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gap_is_nonnegative_for_random_pairs(
            seed in 0u64..1000,
            mu_raw in proptest::collection::vec(0.05..1.0f64, 12),
            nu_raw in proptest::collection::vec(0.05..1.0f64, 12),
        ) {
            let g = random_game(2, 3, 2, 2, seed);
            let normalise = |raw: &[f64], h: usize, s: usize, n: usize| {
                let chunk = &raw[(h * 3 + s) * n..(h * 3 + s) * n + n];
                let sum: f64 = chunk.iter().sum();
                chunk.iter().map(|x| x / sum).collect::<Vec<f64>>()
            };
            let mu = (0..2).map(|h| (0..3).map(|s| normalise(&mu_raw, h, s, 2)).collect()).collect();
            let nu = (0..2).map(|h| (0..3).map(|s| normalise(&nu_raw, h, s, 2)).collect()).collect();
            let pair = PolicyPair { mu, nu };
            let gap = duality_gap(&g, &pair).unwrap();
            prop_assert!(gap >= -1e-9, "duality gap {gap} is negative");
        }

        #[test]
        fn values_stay_in_range(seed in 0u64..1000) {
            let g = random_game(3, 2, 2, 2, seed);
            let tables = policy_value(&g, &g.dims().uniform_pair()).unwrap();
            for (h, v_h) in tables.v.iter().enumerate() {
                for &v in v_h {
                    prop_assert!(v.is_finite());
                    prop_assert!(v >= -1e-12 && v <= (g.horizon - h) as f64 + 1e-12);
                }
            }
        }
    }
}
