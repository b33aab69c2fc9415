//! Finite Markov-chain analysis: structural checks on the support graph,
//! the stationary distribution as the fixpoint of the shifted affine map
//! x -> x(P - (1/n) 1 1^T) + (1/n) 1^T, and recurrence statistics built by
//! taboo-mass propagation.
//!
//! All matrix-vector products traverse indices in ascending order, so every
//! result here is bit-deterministic for fixed inputs.

use crate::fixpoint::{self, ContractiveSystem, FixpointError};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MarkovError {
    #[error("matrix is not square (row {row} has {len} entries, expected {n})")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("matrix is not stochastic: {reason}")]
    NotStochastic { reason: String },
    #[error("vector has length {got}, chain has {expected} states")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error(transparent)]
    NonConvergence(#[from] FixpointError),
}

/// A validated row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticChain {
    p: Vec<Vec<f64>>,
    n: usize,
}

impl StochasticChain {
    /// Validates and wraps a transition matrix. Rows must sum to one within
    /// 1e-9 with no negative entries.
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let n = p.len();
        for (row, r) in p.iter().enumerate() {
            if r.len() != n {
                return Err(MarkovError::NotSquare {
                    row,
                    len: r.len(),
                    n,
                });
            }
            let mut sum = 0.0;
            for (col, &v) in r.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(MarkovError::NotStochastic {
                        reason: format!("entry ({row},{col}) = {v} is negative"),
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MarkovError::NotStochastic {
                    reason: format!("row {row} sums to {sum}"),
                });
            }
        }
        Ok(Self { p, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.p
    }

    /// x P with ascending-index summation.
    pub fn row_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..self.n {
                acc += x[i] * self.p[i][j];
            }
            *o = acc;
        }
        out
    }

    fn support_adjacency(&self) -> Vec<Vec<usize>> {
        self.p
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

/// Wraps [`StochasticChain::new`].
pub fn validate_chain(p: Vec<Vec<f64>>) -> Result<StochasticChain, MarkovError> {
    StochasticChain::new(p)
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// True iff the support graph is strongly connected (forward sweep plus a
/// sweep on the reversed graph).
pub fn is_irreducible(chain: &StochasticChain) -> bool {
    let n = chain.n();
    if n == 0 {
        return false;
    }
    let adj = chain.support_adjacency();
    if !reachable(&adj, 0).iter().all(|&b| b) {
        return false;
    }
    let mut rev = vec![Vec::new(); n];
    for (i, outs) in adj.iter().enumerate() {
        for &j in outs {
            rev[j].push(i);
        }
    }
    reachable(&rev, 0).iter().all(|&b| b)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// True iff every state has cycle-length gcd 1, computed per strongly
/// connected component by the BFS level-difference gcd on the support graph.
pub fn is_aperiodic(chain: &StochasticChain) -> bool {
    let n = chain.n();
    let adj = chain.support_adjacency();
    let mut component = vec![usize::MAX; n];
    for s in 0..n {
        if component[s] != usize::MAX {
            continue;
        }
        let fwd = reachable(&adj, s);
        let mut rev = vec![Vec::new(); n];
        for (i, outs) in adj.iter().enumerate() {
            for &j in outs {
                rev[j].push(i);
            }
        }
        let bwd = reachable(&rev, s);
        for v in 0..n {
            if fwd[v] && bwd[v] && component[v] == usize::MAX {
                component[v] = s;
            }
        }
    }
    for s in 0..n {
        // A state with no cycle through it has an undefined period.
        let comp = component[s];
        let members: Vec<usize> = (0..n).filter(|&v| component[v] == comp).collect();
        let has_internal_edge = members
            .iter()
            .any(|&v| adj[v].iter().any(|w| component[*w] == comp));
        if !has_internal_edge {
            return false;
        }
        // BFS within the component; period = gcd of level[u] + 1 - level[v]
        // over internal edges u -> v.
        let mut level = vec![i64::MIN; n];
        let mut queue = std::collections::VecDeque::new();
        level[comp] = 0;
        queue.push_back(comp);
        let mut period: usize = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if component[v] != comp {
                    continue;
                }
                if level[v] == i64::MIN {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    let diff = (level[u] + 1 - level[v]).unsigned_abs() as usize;
                    if diff != 0 {
                        period = gcd(period, diff);
                    }
                }
            }
        }
        if period != 1 {
            return false;
        }
    }
    true
}

/// The shifted affine map x -> x (P - (1/n) 1 1^T) + (1/n) 1^T. On
/// stochastic inputs this equals x P exactly.
pub fn shifted_map_apply(chain: &StochasticChain, x: &[f64]) -> Result<Vec<f64>, MarkovError> {
    let n = chain.n();
    if x.len() != n {
        return Err(MarkovError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            acc += x[i] * (chain.p[i][j] - inv_n);
        }
        *o = acc + inv_n;
    }
    Ok(out)
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    /// Stationary row vector.
    pub u: Vec<f64>,
    /// Map applications performed by the fixpoint iteration.
    pub iterations: usize,
    /// Final defect ||uP - u||_inf.
    pub residual: f64,
    /// Power of the shifted map found to be empirically contractive.
    pub contraction_power: usize,
    /// Observed contraction ratio of that power (upper-clamped declaration).
    pub contraction_estimate: f64,
}

fn random_stochastic_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dist = Uniform::new(0.05, 1.0);
    let mut v: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Searches for a power k of the shifted map whose Lipschitz ratio over
/// sampled stochastic-vector pairs is comfortably below one. The spectral
/// radius argument guarantees such a power exists for ergodic chains but
/// does not name it, so it is discovered empirically here.
fn find_contraction_power(chain: &StochasticChain) -> Result<(usize, f64), MarkovError> {
    let n = chain.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..8)
        .map(|_| {
            (
                random_stochastic_vector(n, &mut rng),
                random_stochastic_vector(n, &mut rng),
            )
        })
        .collect();
    let mut images = pairs.clone();
    let max_power = 16 * n.max(4);
    for k in 1..=max_power {
        let mut ratio: f64 = 0.0;
        for ((a, b), (x0, y0)) in images.iter_mut().zip(&pairs) {
            *a = shifted_map_apply(chain, a)?;
            *b = shifted_map_apply(chain, b)?;
            let base = sup_dist(x0, y0);
            if base > 0.0 {
                ratio = ratio.max(sup_dist(a, b) / base);
            }
        }
        if ratio <= 0.9 {
            return Ok((k, ratio.max(0.5)));
        }
    }
    Err(MarkovError::NotErgodic(
        "no empirically contractive power of the shifted map found".into(),
    ))
}

/// Stationary distribution of an irreducible aperiodic chain, computed by
/// iterating the shifted map through the fixpoint engine.
pub fn stationary_distribution(
    chain: &StochasticChain,
    tol: f64,
) -> Result<StationaryResult, MarkovError> {
    if !is_irreducible(chain) {
        return Err(MarkovError::NotErgodic("support graph not strongly connected".into()));
    }
    if !is_aperiodic(chain) {
        return Err(MarkovError::NotErgodic("chain is periodic".into()));
    }
    let (power, estimate) = find_contraction_power(chain)?;
    let declared = estimate.min(0.9);
    let c = chain.clone();
    let sys = ContractiveSystem::new(
        move |x: &Vec<f64>| shifted_map_apply(&c, x).expect("dimension fixed by construction"),
        |a: &Vec<f64>, b: &Vec<f64>| sup_dist(a, b),
        declared,
        power,
    )?;
    let n = chain.n();
    let start = vec![1.0 / n as f64; n];
    let result = fixpoint::iterate_to_fixpoint(&sys, &start, tol, 500_000)?;
    let u = result.point;
    let residual = sup_dist(&chain.row_apply(&u), &u);
    Ok(StationaryResult {
        u,
        iterations: result.iterations,
        residual,
        contraction_power: power,
        contraction_estimate: estimate,
    })
}

/// First-return probabilities f_1..f_M for state `t`, by taboo-mass
/// propagation: mass entering `t` is recorded and removed at each step.
pub fn first_return_probabilities(chain: &StochasticChain, t: usize, horizon: usize) -> Vec<f64> {
    assert!(t < chain.n(), "state index out of range");
    assert!(horizon >= 1, "horizon must be at least 1");
    let mut mass = vec![0.0; chain.n()];
    mass[t] = 1.0;
    let mut f = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut next = chain.row_apply(&mass);
        f.push(next[t]);
        next[t] = 0.0;
        mass = next;
    }
    f
}

/// Recurrence statistics for state `t` to horizon M, with residuals for the
/// renewal identity, the truncated sigma*rho reciprocal identity, and the
/// limit law u_M -> 1/mu.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceStats {
    pub state: usize,
    pub horizon: usize,
    /// f_1..f_M.
    pub f: Vec<f64>,
    /// u_0..u_M with u_m = P^m_{tt}.
    pub u_seq: Vec<f64>,
    /// Sum_{m <= M} m f_m.
    pub mu_partial: f64,
    /// rho_m = Sum_{k=m+1..M} f_k for m = 0..M.
    pub rho_partial: Vec<f64>,
    /// m-th partial sum of sigma(1): u_0 + Sum_{k<m} (u_{k+1} - u_k).
    pub sigma_partial: Vec<f64>,
    /// max_n |u_n - Sum_{m<n} u_m f_{n-m}| over 1 <= n <= M.
    pub renewal_residual: f64,
    /// Max deviation of the truncated sigma*rho series from the constant 1.
    pub sigma_rho_residual: f64,
    /// |u_M - 1 / mu_partial|.
    pub limit_residual: f64,
}

pub fn recurrence_report(
    chain: &StochasticChain,
    t: usize,
    horizon: usize,
) -> Result<RecurrenceStats, MarkovError> {
    if !is_irreducible(chain) {
        return Err(MarkovError::NotErgodic("support graph not strongly connected".into()));
    }
    if !is_aperiodic(chain) {
        return Err(MarkovError::NotErgodic("chain is periodic".into()));
    }
    let f = first_return_probabilities(chain, t, horizon);

    let mut u_seq = Vec::with_capacity(horizon + 1);
    let mut mass = vec![0.0; chain.n()];
    mass[t] = 1.0;
    u_seq.push(1.0);
    for _ in 0..horizon {
        mass = chain.row_apply(&mass);
        u_seq.push(mass[t]);
    }

    let mu_partial: f64 = f
        .iter()
        .enumerate()
        .map(|(i, fm)| (i + 1) as f64 * fm)
        .sum();

    // rho_m = tail sum of f beyond position m, truncated at the horizon.
    let mut rho_partial = vec![0.0; horizon + 1];
    for m in (0..horizon).rev() {
        rho_partial[m] = rho_partial[m + 1] + f[m];
    }

    let mut sigma_partial = Vec::with_capacity(horizon + 1);
    let mut acc = u_seq[0];
    sigma_partial.push(acc);
    for m in 0..horizon {
        acc += u_seq[m + 1] - u_seq[m];
        sigma_partial.push(acc);
    }

    // Renewal identity u_n = Sum_{m<n} u_m f_{n-m}.
    let mut renewal_residual: f64 = 0.0;
    for n in 1..=horizon {
        let mut conv = 0.0;
        for m in 0..n {
            conv += u_seq[m] * f[n - m - 1]; // f_{n-m}, stored 0-based
        }
        renewal_residual = renewal_residual.max((u_seq[n] - conv).abs());
    }

    // Truncated sigma(x) rho(x) = 1: coefficient j of the product should be
    // 1 at j = 0 and 0 afterwards. Truncation noise grows with j, so only
    // the first half of the horizon is checked.
    let sigma_coeff = |k: usize| -> f64 {
        if k == 0 {
            u_seq[0]
        } else {
            u_seq[k] - u_seq[k - 1]
        }
    };
    let mut sigma_rho_residual: f64 = 0.0;
    for j in 0..=horizon / 2 {
        let mut coeff = 0.0;
        for k in 0..=j {
            coeff += sigma_coeff(k) * rho_partial[j - k];
        }
        let target = if j == 0 { 1.0 } else { 0.0 };
        sigma_rho_residual = sigma_rho_residual.max((coeff - target).abs());
    }

    let limit_residual = if mu_partial > 0.0 {
        (u_seq[horizon] - 1.0 / mu_partial).abs()
    } else {
        f64::INFINITY
    };

    Ok(RecurrenceStats {
        state: t,
        horizon,
        f,
        u_seq,
        mu_partial,
        rho_partial,
        sigma_partial,
        renewal_residual,
        sigma_rho_residual,
        limit_residual,
    })
}

/// Power-iteration estimate of the spectral radius of P - (1/n) 1 1^T.
pub fn spectral_gap_estimate(chain: &StochasticChain, iters: usize) -> f64 {
    let n = chain.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a1e_57a7);
    let dist = Uniform::new(-1.0, 1.0);
    let mut x: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let shift = 1.0 / n as f64;
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += x[i] * (chain.p[i][j] - shift);
            }
            *o = acc;
        }
        out
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let window = iters.min(32).max(1);
    let mut log_ratios = std::collections::VecDeque::with_capacity(window);
    for _ in 0..iters {
        let y = apply(&x);
        let ny = norm(&y);
        if ny < 1e-300 {
            return 0.0;
        }
        if log_ratios.len() == window {
            log_ratios.pop_front();
        }
        log_ratios.push_back(ny.ln());
        x = y.iter().map(|v| v / ny).collect();
    }
    let mean: f64 = log_ratios.iter().sum::<f64>() / log_ratios.len() as f64;
    mean.exp()
}
