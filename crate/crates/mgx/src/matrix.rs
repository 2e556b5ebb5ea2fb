//! Matrix-game solvers: zero-sum LP, bimatrix Lemke–Howson, and support
//! enumeration.
//!
//! Conventions: the row player ("max") receives payoff `P[a][b]` and wants it
//! large; the column player ("min") pays cost `Q[a][b]` and wants it small.
//! A pair `(phi, psi)` of mixed strategies is an equilibrium when
//! `phi' P psi = max_x x' P psi` and `phi' Q psi = min_y phi' Q y`.
//! The zero-sum case is `P == Q`. Every solver certifies its own output by
//! computing both exploitability gaps before returning.

use crate::error::{Error, Result};

/// A certified solution of a (bi)matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct BimatrixSolution {
    /// Row-player mixed strategy over `A` actions.
    pub phi: Vec<f64>,
    /// Column-player mixed strategy over `B` actions.
    pub psi: Vec<f64>,
    /// Bilinear value `phi' P psi` of the row player's payoff matrix.
    pub value_max: f64,
    /// Bilinear value `phi' Q psi` of the column player's cost matrix.
    pub value_min: f64,
    /// `max_a (P psi)_a - phi' P psi`; at most `tol` for certified output.
    pub exploit_max: f64,
    /// `phi' Q psi - min_b (phi' Q)_b`; at most `tol` for certified output.
    pub exploit_min: f64,
}

/// Rejects empty, ragged, or non-finite matrices; returns `(rows, cols)`.
fn check_matrix(m: &[Vec<f64>]) -> Result<(usize, usize)> {
    if m.is_empty() || m[0].is_empty() {
        return Err(Error::BadMatrix("matrix is empty".into()));
    }
    let cols = m[0].len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::BadMatrix(format!(
                "row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadMatrix(format!("entry ({i},{j}) is {v}")));
            }
        }
    }
    Ok((m.len(), cols))
}

fn check_dist(d: &[f64], n: usize, who: &str) -> Result<()> {
    if d.len() != n {
        return Err(Error::BadPolicy(format!("{who} has {} entries, expected {n}", d.len())));
    }
    let mut sum = 0.0;
    for &p in d {
        if !p.is_finite() || p < -1e-12 {
            return Err(Error::BadPolicy(format!("{who} has invalid mass {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadPolicy(format!("{who} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// `P psi` for each row.
fn row_values(m: &[Vec<f64>], psi: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(psi).map(|(v, p)| v * p).sum()).collect()
}

/// `phi' Q` for each column.
fn col_values(m: &[Vec<f64>], phi: &[f64]) -> Vec<f64> {
    let cols = m[0].len();
    (0..cols).map(|j| m.iter().zip(phi).map(|(row, p)| row[j] * p).sum()).collect()
}

fn bilinear(m: &[Vec<f64>], phi: &[f64], psi: &[f64]) -> f64 {
    phi.iter().zip(m).map(|(p, row)| p * row.iter().zip(psi).map(|(v, q)| v * q).sum::<f64>()).sum()
}

fn max_entry(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_entry(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Lowest index attaining the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Lowest index attaining the minimum.
pub(crate) fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Best-response gaps of `(phi, psi)` against payoff `P` and cost `Q`.
///
/// Returns `(gap_max, gap_min)`: the row player's forgone payoff under `P`
/// and the column player's excess cost under `Q`. Both are non-negative up
/// to floating-point noise (at worst about `-1e-12`).
pub fn exploitability(
    p: &[Vec<f64>],
    q: &[Vec<f64>],
    phi: &[f64],
    psi: &[f64],
) -> Result<(f64, f64)> {
    let (a, b) = check_matrix(p)?;
    let (a2, b2) = check_matrix(q)?;
    if (a, b) != (a2, b2) {
        return Err(Error::Dimension(format!("payoff {a}x{b} vs cost {a2}x{b2}")));
    }
    check_dist(phi, a, "phi")?;
    check_dist(psi, b, "psi")?;
    let gap_max = max_entry(&row_values(p, psi)) - bilinear(p, phi, psi);
    let gap_min = bilinear(q, phi, psi) - min_entry(&col_values(q, phi));
    Ok((gap_max, gap_min))
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Clamps tiny negative mass to zero and renormalises.
fn clean_dist(mut d: Vec<f64>) -> Vec<f64> {
    for x in d.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let sum: f64 = d.iter().sum();
    if sum > 0.0 {
        for x in d.iter_mut() {
            *x /= sum;
        }
    }
    d
}

fn certified(
    p: &[Vec<f64>],
    q: &[Vec<f64>],
    phi: Vec<f64>,
    psi: Vec<f64>,
    tol: f64,
    method: &str,
) -> Result<BimatrixSolution> {
    let (gap_max, gap_min) = exploitability(p, q, &phi, &psi)?;
    if gap_max > tol || gap_min > tol {
        return Err(Error::Solver(format!(
            "{method} produced an uncertified solution: gaps ({gap_max:.3e}, {gap_min:.3e}) exceed tol {tol:.3e}"
        )));
    }
    Ok(BimatrixSolution {
        value_max: bilinear(p, &phi, &psi),
        value_min: bilinear(q, &phi, &psi),
        exploit_max: gap_max,
        exploit_min: gap_min,
        phi,
        psi,
    })
}

/// Solves a vector game (one player has a single action) by direct argmax /
/// argmin with lowest-index tie-breaking. `None` if both sides have > 1 action.
fn vector_game(p: &[Vec<f64>], q: &[Vec<f64>], a: usize, b: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    if b == 1 {
        let col: Vec<f64> = p.iter().map(|row| row[0]).collect();
        Some((one_hot(a, argmax(&col)), vec![1.0]))
    } else if a == 1 {
        Some((vec![1.0], one_hot(b, argmin(&q[0]))))
    } else {
        None
    }
}

// ---- Zero-sum solver (dense primal simplex on the shifted game) ----

/// Simplex state for `max 1'y  s.t.  R y <= 1, y >= 0` with `R > 0` (A×B).
///
/// Column layout: `B` structural columns, then `A` slack columns, then rhs.
struct Simplex {
    rows: usize,
    cols: usize, // structural + slack
    tab: Vec<Vec<f64>>,
    /// `d[j] = c_j - z_j`; entering columns have `d[j] > 0` (maximisation).
    d: Vec<f64>,
    basis: Vec<usize>,
}

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-12;

impl Simplex {
    fn new(r: &[Vec<f64>]) -> Self {
        let rows = r.len();
        let b = r[0].len();
        let cols = b + rows;
        let mut tab = Vec::with_capacity(rows);
        for (i, row) in r.iter().enumerate() {
            let mut t = vec![0.0; cols + 1];
            t[..b].copy_from_slice(row);
            t[b + i] = 1.0;
            t[cols] = 1.0; // rhs
            tab.push(t);
        }
        let mut d = vec![0.0; cols];
        for dj in d.iter_mut().take(b) {
            *dj = 1.0;
        }
        Simplex { rows, cols, tab, d, basis: (b..b + rows).collect() }
    }

    /// Bland's rule: lowest-index improving column.
    fn entering(&self) -> Option<usize> {
        (0..self.cols).find(|&j| self.d[j] > COST_EPS)
    }

    /// Bland's rule ratio test: minimum ratio, ties to the lowest basis index.
    fn leaving(&self, e: usize) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.rows {
            let coef = self.tab[i][e];
            if coef > PIVOT_EPS {
                let ratio = self.tab[i][self.cols] / coef;
                best = match best {
                    None => Some((ratio, i)),
                    Some((r0, i0)) => {
                        if ratio < r0 - 1e-12
                            || (ratio < r0 + 1e-12 && self.basis[i] < self.basis[i0])
                        {
                            Some((ratio, i))
                        } else {
                            Some((r0, i0))
                        }
                    }
                };
            }
        }
        best.map(|(_, i)| i)
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let piv = self.tab[r][e];
        for v in self.tab[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.rows {
            if i != r {
                let f = self.tab[i][e];
                if f != 0.0 {
                    for j in 0..=self.cols {
                        self.tab[i][j] -= f * self.tab[r][j];
                    }
                }
            }
        }
        let f = self.d[e];
        if f != 0.0 {
            for j in 0..self.cols {
                self.d[j] -= f * self.tab[r][j];
            }
        }
        self.basis[r] = e;
    }

    /// Runs to optimality, returning `(y, duals)`.
    fn solve(&mut self, max_pivots: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.cols - self.rows;
        let mut pivots = 0;
        while let Some(e) = self.entering() {
            let r = self
                .leaving(e)
                .ok_or_else(|| Error::Solver("simplex detected an unbounded direction".into()))?;
            self.pivot(r, e);
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Solver(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
        let mut y = vec![0.0; b];
        for i in 0..self.rows {
            if self.basis[i] < b {
                y[self.basis[i]] = self.tab[i][self.cols];
            }
        }
        // At optimality the dual price of constraint i is -d[slack_i].
        let duals = (0..self.rows).map(|i| -self.d[b + i]).collect();
        Ok((y, duals))
    }
}

/// Exact mixed equilibrium of the zero-sum matrix game `Q` (row player
/// maximises `phi' Q psi`, column player minimises it).
///
/// Shifts `Q` positive, solves the standard primal/dual LP pair with a dense
/// simplex (Bland's rule), and reads the row player's strategy from the dual
/// prices. The returned solution carries its own exploitability certificate;
/// a certificate worse than `tol` is reported as a solver failure rather
/// than returned.
pub fn nash_zero_sum(q: &[Vec<f64>], tol: f64) -> Result<BimatrixSolution> {
    let (a, b) = check_matrix(q)?;
    if let Some((phi, psi)) = vector_game(q, q, a, b) {
        return certified(q, q, phi, psi, tol, "vector game");
    }
    let offset = q.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<Vec<f64>> =
        q.iter().map(|row| row.iter().map(|&v| v - offset + 1.0).collect()).collect();
    let (y, x) = Simplex::new(&shifted).solve(1000 * (a + b))?;
    let ysum: f64 = y.iter().sum();
    let xsum: f64 = x.iter().sum();
    if ysum <= 0.0 || xsum <= 0.0 {
        return Err(Error::Solver("simplex returned a zero strategy".into()));
    }
    let psi = clean_dist(y.iter().map(|v| v / ysum).collect());
    let phi = clean_dist(x.iter().map(|v| v / xsum).collect());
    certified(q, q, phi, psi, tol, "zero-sum simplex")
}

// ---- Lemke–Howson ----

/// One complementary-pivoting tableau: `coeffs * vars + I * slacks = 1`.
///
/// Variables are identified by label: in the x-system labels `0..a` are the
/// strategy variables and `a..a+b` the slacks; the y-system swaps the roles.
/// `lex` marks the initial identity columns used by the lexicographic ratio
/// test.
struct LhTableau {
    rows: usize,
    cols: usize,
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    lex: Vec<usize>,
}

impl LhTableau {
    /// `m` is rows×vars; variable columns come first, then one slack per row.
    /// `var_labels[j]` / `slack_labels[i]` give the global label per column.
    fn new(m: Vec<Vec<f64>>, nvars: usize) -> Self {
        let rows = m.len();
        let cols = nvars + rows;
        let mut tab = Vec::with_capacity(rows);
        for (i, row) in m.into_iter().enumerate() {
            let mut t = vec![0.0; cols + 1];
            t[..nvars].copy_from_slice(&row);
            t[nvars + i] = 1.0;
            t[cols] = 1.0;
            tab.push(t);
        }
        LhTableau {
            rows,
            cols,
            tab,
            basis: (nvars..nvars + rows).collect(),
            lex: (nvars..nvars + rows).collect(),
        }
    }

    /// Lexicographic minimum-ratio row for entering column `e`, or `None` if
    /// the column has no positive entry.
    fn ratio_row(&self, e: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.rows {
            if self.tab[i][e] <= PIVOT_EPS {
                continue;
            }
            best = Some(match best {
                None => i,
                Some(j) => {
                    if self.lex_less(i, j, e) {
                        i
                    } else {
                        j
                    }
                }
            });
        }
        best
    }

    /// True when row `i`'s ratio vector precedes row `j`'s lexicographically.
    fn lex_less(&self, i: usize, j: usize, e: usize) -> bool {
        let ci = self.tab[i][e];
        let cj = self.tab[j][e];
        let ri = self.tab[i][self.cols] / ci;
        let rj = self.tab[j][self.cols] / cj;
        if (ri - rj).abs() > 1e-12 {
            return ri < rj;
        }
        for &l in &self.lex {
            let vi = self.tab[i][l] / ci;
            let vj = self.tab[j][l] / cj;
            if (vi - vj).abs() > 1e-12 {
                return vi < vj;
            }
        }
        i < j
    }

    /// Pivots column `e` into the basis; returns the label that left.
    fn pivot(&mut self, e: usize) -> Option<usize> {
        let r = self.ratio_row(e)?;
        let piv = self.tab[r][e];
        for v in self.tab[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.rows {
            if i != r {
                let f = self.tab[i][e];
                if f != 0.0 {
                    for j in 0..=self.cols {
                        self.tab[i][j] -= f * self.tab[r][j];
                    }
                }
            }
        }
        let out = self.basis[r];
        self.basis[r] = e;
        Some(out)
    }

    /// Current value of variable column `v` (zero when nonbasic).
    fn value(&self, v: usize) -> f64 {
        for i in 0..self.rows {
            if self.basis[i] == v {
                return self.tab[i][self.cols];
            }
        }
        0.0
    }
}

/// Lemke–Howson complementary pivoting on positive payoff matrices.
///
/// Labels `0..a` belong to the row player, `a..a+b` to the column player.
/// Starting from the artificial equilibrium, drops label `drop` and follows
/// the complementary path with a lexicographic ratio test until the dropped
/// label is picked back up. Returns `None` if the pivot budget is exhausted
/// or a pivot column degenerates (both trigger the caller's fallback).
fn lemke_howson(
    apos: &[Vec<f64>],
    cpos: &[Vec<f64>],
    drop: usize,
    max_pivots: usize,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let a = apos.len();
    let b = apos[0].len();
    // x-system: cpos' x + s = 1  (b rows; var labels 0..a, slack labels a..a+b)
    let ct: Vec<Vec<f64>> = (0..b).map(|j| (0..a).map(|i| cpos[i][j]).collect()).collect();
    let mut tx = LhTableau::new(ct, a);
    // y-system: apos y + w = 1  (a rows; var cols hold labels a..a+b, slacks 0..a)
    let mut ty = LhTableau::new(apos.to_vec(), b);

    // Column index of the variable carrying `label` in each system.
    let x_col = |label: usize| label; // x_i at column i, s_j at column a + j
    let y_col = |label: usize| if label < a { b + label } else { label - a };

    let mut entering = drop;
    let mut in_x = drop < a; // strategy variable of the dropped label enters its own system
    for _ in 0..max_pivots {
        let left = if in_x {
            // In the x-system, column index equals label for both x and s vars.
            tx.pivot(x_col(entering))?
        } else {
            let col = y_col(entering);
            let out = ty.pivot(col)?;
            if out < b {
                out + a // y_j columns are 0..b in the y-system; label is a + j
            } else {
                out - b // slack w_i at column b + i carries label i
            }
        };
        if left == drop {
            let x: Vec<f64> = (0..a).map(|i| tx.value(x_col(i))).collect();
            let y: Vec<f64> = (0..b).map(|j| ty.value(y_col(a + j))).collect();
            let xs: f64 = x.iter().sum();
            let ys: f64 = y.iter().sum();
            if xs <= 0.0 || ys <= 0.0 {
                return None;
            }
            let phi = clean_dist(x.iter().map(|v| v / xs).collect());
            let psi = clean_dist(y.iter().map(|v| v / ys).collect());
            return Some((phi, psi));
        }
        in_x = !in_x;
        entering = left;
    }
    None
}

/// One Nash equilibrium of the bimatrix game `(P, Q)` (row player maximises
/// payoff `P`, column player minimises cost `Q`).
///
/// Vector games (`A == 1` or `B == 1`) reduce to a pure argmax / argmin.
/// Otherwise runs Lemke–Howson with initial dropped label `0` and a pivot
/// budget of `10 (A + B)`; on budget exhaustion or a degenerate pivot it
/// falls back to support enumeration (for matrices up to 6×6) and returns
/// the first enumerated equilibrium. Output is always certified against
/// `tol`.
pub fn nash_general_sum(p: &[Vec<f64>], q: &[Vec<f64>], tol: f64) -> Result<BimatrixSolution> {
    let (a, b) = check_matrix(p)?;
    let (a2, b2) = check_matrix(q)?;
    if (a, b) != (a2, b2) {
        return Err(Error::Dimension(format!("payoff {a}x{b} vs cost {a2}x{b2}")));
    }
    if let Some((phi, psi)) = vector_game(p, q, a, b) {
        return certified(p, q, phi, psi, tol, "vector game");
    }
    // Both players as maximisers on strictly positive matrices.
    let pmin = p.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let apos: Vec<Vec<f64>> =
        p.iter().map(|row| row.iter().map(|&v| v - pmin + 1.0).collect()).collect();
    let qmax = q.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let cpos: Vec<Vec<f64>> =
        q.iter().map(|row| row.iter().map(|&v| qmax - v + 1.0).collect()).collect();

    if let Some((phi, psi)) = lemke_howson(&apos, &cpos, 0, 10 * (a + b)) {
        if let Ok(sol) = certified(p, q, phi, psi, tol, "lemke-howson") {
            return Ok(sol);
        }
    }
    // Fallback: enumerate supports on small matrices.
    if a <= 6 && b <= 6 {
        let found = support_enumeration(p, q)?;
        if let Some(sol) = found.into_iter().next() {
            return Ok(sol);
        }
        return Err(Error::Solver("support enumeration found no certified equilibrium".into()));
    }
    Err(Error::Solver(format!(
        "lemke-howson exhausted {} pivots and the matrix is too large to enumerate",
        10 * (a + b)
    )))
}

/// Was this solve handled by the Lemke–Howson path (as opposed to the
/// support-enumeration fallback or the vector-game shortcut)?
///
/// Used to measure the fallback rate without changing `nash_general_sum`'s
/// behaviour; runs the same pivoting with the same budget.
pub fn general_sum_used_fallback(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<bool> {
    let (a, b) = check_matrix(p)?;
    if a == 1 || b == 1 {
        return Ok(false);
    }
    let pmin = p.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let apos: Vec<Vec<f64>> =
        p.iter().map(|row| row.iter().map(|&v| v - pmin + 1.0).collect()).collect();
    let qmax = q.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let cpos: Vec<Vec<f64>> =
        q.iter().map(|row| row.iter().map(|&v| qmax - v + 1.0).collect()).collect();
    Ok(lemke_howson(&apos, &cpos, 0, 10 * (a + b)).is_none())
}

// ---- Support enumeration ----

/// Gaussian elimination with partial pivoting; `None` on (near-)singularity.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = m[i][col] / m[col][col];
                if f != 0.0 {
                    for j in col..n {
                        m[i][j] -= f * m[col][j];
                    }
                    rhs[i] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Solves a possibly non-square system in the least-squares sense via normal
/// equations, then insists on an (almost) exact fit.
fn solve_system(m: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let rows = m.len();
    let cols = m[0].len();
    let sol = if rows == cols {
        solve_square(m.to_vec(), rhs.to_vec())?
    } else {
        let mut mtm = vec![vec![0.0; cols]; cols];
        let mut mtr = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                mtr[j] += m[i][j] * rhs[i];
                for k in 0..cols {
                    mtm[j][k] += m[i][j] * m[i][k];
                }
            }
        }
        solve_square(mtm, mtr)?
    };
    for (i, row) in m.iter().enumerate() {
        let lhs: f64 = row.iter().zip(&sol).map(|(a, x)| a * x).sum();
        if (lhs - rhs[i]).abs() > 1e-9 {
            return None;
        }
    }
    Some(sol)
}

/// Indifference system for one side: the `active` player mixes over `own`
/// so that every opponent action in `opp_support` attains a common value.
/// Returns the mixed strategy extended with zeros, or `None`.
fn support_candidate(
    payoff_rows: &[Vec<f64>], // indexed [opponent action][own action]
    own: &[usize],
    opp_support: &[usize],
    n_own: usize,
) -> Option<Vec<f64>> {
    // Unknowns: weights over `own`, then the common value u.
    let k = own.len();
    let mut m = Vec::with_capacity(opp_support.len() + 1);
    let mut rhs = Vec::with_capacity(opp_support.len() + 1);
    for &o in opp_support {
        let mut row = vec![0.0; k + 1];
        for (idx, &j) in own.iter().enumerate() {
            row[idx] = payoff_rows[o][j];
        }
        row[k] = -1.0;
        m.push(row);
        rhs.push(0.0);
    }
    let mut norm = vec![1.0; k];
    norm.push(0.0);
    m.push(norm);
    rhs.push(1.0);
    let sol = solve_system(&m, &rhs)?;
    let mut dist = vec![0.0; n_own];
    for (idx, &j) in own.iter().enumerate() {
        if sol[idx] < -1e-9 {
            return None;
        }
        dist[j] = sol[idx].max(0.0);
    }
    Some(clean_dist(dist))
}

/// All equilibria of `(P, Q)` found by support enumeration.
///
/// Enumerates every support pair in deterministic (mask-ascending) order,
/// solves the induced indifference systems, and keeps candidates that are
/// feasible and have both exploitability gaps at most `1e-9`. Singular or
/// inconsistent systems are skipped, not errors. Restricted to matrices up
/// to 6×6; at least one equilibrium exists for any finite game, but
/// floating-point filtering can in principle reject all candidates, so an
/// empty result is possible and callers must tolerate it.
pub fn support_enumeration(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<Vec<BimatrixSolution>> {
    let (a, b) = check_matrix(p)?;
    let (a2, b2) = check_matrix(q)?;
    if (a, b) != (a2, b2) {
        return Err(Error::Dimension(format!("payoff {a}x{b} vs cost {a2}x{b2}")));
    }
    if a > 6 || b > 6 {
        return Err(Error::SupportGuard { rows: a, cols: b });
    }
    // The column player is a cost minimiser, so its indifference system runs
    // on -Q, transposed to [column action][row action] for uniform access.
    let qneg_t: Vec<Vec<f64>> = (0..b).map(|j| (0..a).map(|i| -q[i][j]).collect()).collect();

    let mut found: Vec<BimatrixSolution> = Vec::new();
    for sa_mask in 1u32..(1 << a) {
        let sa: Vec<usize> = (0..a).filter(|i| sa_mask >> i & 1 == 1).collect();
        for sb_mask in 1u32..(1 << b) {
            let sb: Vec<usize> = (0..b).filter(|j| sb_mask >> j & 1 == 1).collect();
            // psi makes the row player indifferent over sa (payoff rows of P);
            // phi makes the column player indifferent over sb (rows of -Q').
            let Some(psi) = support_candidate(p, &sb, &sa, b) else { continue };
            let Some(phi) = support_candidate(&qneg_t, &sa, &sb, a) else { continue };
            let Ok((gm, gn)) = exploitability(p, q, &phi, &psi) else { continue };
            if gm.max(gn) > 1e-9 {
                continue;
            }
            let dup = found.iter().any(|s| {
                s.phi.iter().zip(&phi).all(|(x, y)| (x - y).abs() < 1e-8)
                    && s.psi.iter().zip(&psi).all(|(x, y)| (x - y).abs() < 1e-8)
            });
            if dup {
                continue;
            }
            found.push(BimatrixSolution {
                value_max: bilinear(p, &phi, &psi),
                value_min: bilinear(q, &phi, &psi),
                exploit_max: gm,
                exploit_min: gn,
                phi,
                psi,
            });
        }
    }
    Ok(found)
}
