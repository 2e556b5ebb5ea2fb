//! Optimistic/pessimistic value-iteration self-play with a per-state
//! general-sum Nash planning step.
//!
//! The learner keeps upper (`q_up`) and lower (`q_low`) action-value tables.
//! Before every episode it replans backward: visited cells receive the
//! empirical Bellman backup widened by a count-based bonus and clipped to
//! `[0, H]`; unvisited cells stay at the trivial envelope `(H, 0)`. Each
//! state's policy pair is a Nash equilibrium of the bimatrix game formed by
//! the two envelopes — the max player best-responds under `q_up`, the min
//! player under `q_low` — which keeps both players' announced values
//! simultaneously optimistic and pessimistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{self, GameDims, MarkovGame, PolicyPair};
use crate::matrix;
use crate::sample::sample_index;

/// Constants of the exploration bonus `beta_t = c * sqrt(H^2 S iota / t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonusParams {
    /// Leading constant; the theory only asks for "large enough".
    pub c: f64,
    pub horizon: usize,
    /// `S`: the largest per-stage state count.
    pub state_bound: usize,
    /// `iota = ln(S A B T / p)`.
    pub iota: f64,
    pub failure_prob: f64,
    /// `T = H K`, fixed up front.
    pub total_steps: usize,
}

impl BonusParams {
    /// Builds the bonus constants for a `k`-episode run on games shaped like
    /// `dims`, with failure probability `p`.
    pub fn new(c: f64, dims: &GameDims, episodes: usize, p: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Config(format!("bonus constant c = {c} must be >= 0")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("failure probability p = {p} must lie in (0, 1)")));
        }
        if episodes == 0 {
            return Err(Error::Config("episode count must be at least 1".into()));
        }
        let s = dims.max_states();
        let a = dims.max_actions();
        let b = dims.min_actions();
        let t = dims.horizon * episodes;
        Ok(BonusParams {
            c,
            horizon: dims.horizon,
            state_bound: s,
            iota: ((s * a * b * t) as f64 / p).ln(),
            failure_prob: p,
            total_steps: t,
        })
    }
}

/// The confidence bonus for a cell visited `t >= 1` times.
pub fn bonus(t: u64, params: &BonusParams) -> f64 {
    assert!(t >= 1, "bonus is defined for visited cells only");
    let h2s = (params.horizon * params.horizon * params.state_bound) as f64;
    params.c * (h2s * params.iota / t as f64).sqrt()
}

/// Learner state: visit counts, empirical model, value envelopes, and the
/// current policy pair. Serializes to a JSON snapshot for checkpoint/resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlcbLearner {
    pub dims: GameDims,
    /// Visit counts `N_h(s, a, b)`.
    pub counts: Vec<Vec<Vec<Vec<u64>>>>,
    /// Successor counts `N_h(s, a, b, s')`.
    pub successors: Vec<Vec<Vec<Vec<Vec<u64>>>>>,
    /// Observed (deterministic) rewards; meaningful only where `counts > 0`.
    pub r_hat: Vec<Vec<Vec<Vec<f64>>>>,
    pub q_up: Vec<Vec<Vec<Vec<f64>>>>,
    pub q_low: Vec<Vec<Vec<Vec<f64>>>>,
    /// Stage values of the current pair under `q_up`; `horizon + 1` rows.
    pub v_up: Vec<Vec<f64>>,
    pub v_low: Vec<Vec<f64>>,
    pub pair: PolicyPair,
    /// Set by the first [`UlcbLearner::plan`]; acting earlier is an error.
    pub planned: bool,
}

impl UlcbLearner {
    pub fn new(dims: &GameDims) -> Self {
        let hz = dims.horizon;
        let hf = hz as f64;
        let shape4 = |fill: f64| -> Vec<Vec<Vec<Vec<f64>>>> {
            (0..hz)
                .map(|h| {
                    vec![
                        vec![
                            vec![fill; dims.actions_min_per_stage[h]];
                            dims.actions_max_per_stage[h]
                        ];
                        dims.states_per_stage[h]
                    ]
                })
                .collect()
        };
        let counts = (0..hz)
            .map(|h| {
                vec![
                    vec![vec![0u64; dims.actions_min_per_stage[h]]; dims.actions_max_per_stage[h]];
                    dims.states_per_stage[h]
                ]
            })
            .collect();
        let successors = (0..hz)
            .map(|h| {
                vec![
                    vec![
                        vec![
                            vec![0u64; dims.states_per_stage[h + 1]];
                            dims.actions_min_per_stage[h]
                        ];
                        dims.actions_max_per_stage[h]
                    ];
                    dims.states_per_stage[h]
                ]
            })
            .collect();
        let mut v_up: Vec<Vec<f64>> =
            (0..=hz).map(|h| vec![0.0; dims.states_per_stage[h]]).collect();
        for (h, row) in v_up.iter_mut().enumerate().take(hz) {
            for v in row.iter_mut() {
                *v = hf - h as f64; // refined by the first planning pass
            }
        }
        let v_low = (0..=hz).map(|h| vec![0.0; dims.states_per_stage[h]]).collect();
        UlcbLearner {
            dims: dims.clone(),
            counts,
            successors,
            r_hat: shape4(0.0),
            q_up: shape4(hf),
            q_low: shape4(0.0),
            v_up,
            v_low,
            pair: dims.uniform_pair(),
            planned: false,
        }
    }

    /// Backward planning pass: rebuild both envelopes from the current
    /// counts, then recompute every state's policy pair via the general-sum
    /// Nash subroutine on `(q_up, q_low)`.
    ///
    /// Unvisited cells keep the trivial envelope `(H, 0)`; visited cells use
    /// the empirical backup widened by `bonus(t)` and clipped to `[0, H]`.
    pub fn plan(&mut self, params: &BonusParams) -> Result<()> {
        let hz = self.dims.horizon;
        let hf = hz as f64;
        let tol = 1e-6 * hf;
        for h in (0..hz).rev() {
            for s in 0..self.dims.states_per_stage[h] {
                for a in 0..self.dims.actions_max_per_stage[h] {
                    for b in 0..self.dims.actions_min_per_stage[h] {
                        let t = self.counts[h][s][a][b];
                        if t == 0 {
                            self.q_up[h][s][a][b] = hf;
                            self.q_low[h][s][a][b] = 0.0;
                            continue;
                        }
                        let beta = bonus(t, params);
                        let tf = t as f64;
                        let succ = &self.successors[h][s][a][b];
                        let mut up = 0.0;
                        let mut low = 0.0;
                        for (next, &n) in succ.iter().enumerate() {
                            if n > 0 {
                                let p = n as f64 / tf;
                                up += p * self.v_up[h + 1][next];
                                low += p * self.v_low[h + 1][next];
                            }
                        }
                        let r = self.r_hat[h][s][a][b];
                        self.q_up[h][s][a][b] = (r + up + beta).min(hf);
                        self.q_low[h][s][a][b] = (r + low - beta).max(0.0);
                    }
                }
            }
            let na = self.dims.actions_max_per_stage[h];
            let nb = self.dims.actions_min_per_stage[h];
            for s in 0..self.dims.states_per_stage[h] {
                // Turn-based stages reduce to vector games: the stage policy
                // is a pure argmax over the upper envelope (or argmin over
                // the lower one), so the matrix-game subroutine and its
                // certification are skipped. Ties break to the lowest index,
                // matching the general-sum solver's vector-game shortcut.
                if na == 1 || nb == 1 {
                    let (a_star, b_star) = if nb == 1 {
                        let q = &self.q_up[h][s];
                        let mut best = 0;
                        for a in 1..na {
                            if q[a][0] > q[best][0] {
                                best = a;
                            }
                        }
                        (best, 0)
                    } else {
                        (0, matrix::argmin(&self.q_low[h][s][0]))
                    };
                    let up = self.q_up[h][s][a_star][b_star];
                    let low = self.q_low[h][s][a_star][b_star];
                    debug_assert!(low <= up + 1e-9, "envelopes crossed at (h={h}, s={s})");
                    self.v_up[h][s] = up;
                    self.v_low[h][s] = low;
                    let mu = &mut self.pair.mu[h][s];
                    mu.iter_mut().for_each(|m| *m = 0.0);
                    mu[a_star] = 1.0;
                    let nu = &mut self.pair.nu[h][s];
                    nu.iter_mut().for_each(|n| *n = 0.0);
                    nu[b_star] = 1.0;
                    continue;
                }
                let sol = matrix::nash_general_sum(&self.q_up[h][s], &self.q_low[h][s], tol)?;
                let up = bilinear(&self.q_up[h][s], &sol.phi, &sol.psi);
                let low = bilinear(&self.q_low[h][s], &sol.phi, &sol.psi);
                debug_assert!(low <= up + 1e-9, "envelopes crossed at (h={h}, s={s})");
                self.v_up[h][s] = up;
                self.v_low[h][s] = low;
                self.pair.mu[h][s] = sol.phi;
                self.pair.nu[h][s] = sol.psi;
            }
        }
        self.planned = true;
        Ok(())
    }

    /// Samples both players' actions at `(h, s)` from the planned pair.
    pub fn act<R: rand::Rng>(&self, h: usize, s: usize, rng: &mut R) -> Result<(usize, usize)> {
        if !self.planned {
            return Err(Error::NotPlanned);
        }
        if h >= self.dims.horizon || s >= self.dims.states_per_stage[h] {
            return Err(Error::Dimension(format!("act out of range: h={h}, s={s}")));
        }
        let a = sample_index(&self.pair.mu[h][s], rng);
        let b = sample_index(&self.pair.nu[h][s], rng);
        Ok((a, b))
    }

    /// Records one transition. The deterministic reward is overwritten, the
    /// visit and successor counts incremented.
    pub fn update(
        &mut self,
        h: usize,
        s: usize,
        a: usize,
        b: usize,
        reward: f64,
        next: usize,
    ) -> Result<()> {
        if h >= self.dims.horizon
            || s >= self.dims.states_per_stage[h]
            || a >= self.dims.actions_max_per_stage[h]
            || b >= self.dims.actions_min_per_stage[h]
            || next >= self.dims.states_per_stage[h + 1]
        {
            return Err(Error::Dimension(format!(
                "update out of range: h={h}, s={s}, a={a}, b={b}, next={next}"
            )));
        }
        if !reward.is_finite() || !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange { h, s, a, b, value: reward });
        }
        self.counts[h][s][a][b] += 1;
        self.successors[h][s][a][b][next] += 1;
        self.r_hat[h][s][a][b] = reward;
        Ok(())
    }

    /// Fraction of `(h, s, a, b)` cells where the envelopes bracket the true
    /// best-response values against the current pair:
    /// `q_up >= Q^{best,nu}` and `q_low <= Q^{mu,best}`, with `1e-9` slack.
    pub fn validity_audit(&self, game: &MarkovGame) -> Result<f64> {
        if !self.planned {
            return Err(Error::NotPlanned);
        }
        let (_, up_tables) = game::best_response_max(game, &self.pair.nu)?;
        let (_, low_tables) = game::best_response_min(game, &self.pair.mu)?;
        let mut cells = 0usize;
        let mut valid = 0usize;
        for h in 0..self.dims.horizon {
            for s in 0..self.dims.states_per_stage[h] {
                for a in 0..self.dims.actions_max_per_stage[h] {
                    for b in 0..self.dims.actions_min_per_stage[h] {
                        cells += 1;
                        let up_ok = self.q_up[h][s][a][b] >= up_tables.q[h][s][a][b] - 1e-9;
                        let low_ok = self.q_low[h][s][a][b] <= low_tables.q[h][s][a][b] + 1e-9;
                        if up_ok && low_ok {
                            valid += 1;
                        }
                    }
                }
            }
        }
        Ok(valid as f64 / cells as f64)
    }

    /// Total visit count across all cells; equals `horizon * episodes` after
    /// any number of complete episodes.
    pub fn total_visits(&self) -> u64 {
        self.counts.iter().flatten().flatten().flatten().sum()
    }

    /// Serializes the full learner state as JSON.
    pub fn save_snapshot<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    /// Restores a learner from a JSON snapshot.
    pub fn load_snapshot<R: std::io::Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

fn bilinear(m: &[Vec<f64>], phi: &[f64], psi: &[f64]) -> f64 {
    phi.iter()
        .zip(m)
        .map(|(p, row)| p * row.iter().zip(psi).map(|(v, q)| v * q).sum::<f64>())
        .sum()
}
