//! Finite Markov decision processes under the contraction framework: the
//! per-policy operator, the optimality operator, epsilon-optimal greedy
//! strategies, probabilistic-strategy evaluation, and derandomization, all
//! cross-checkable against exhaustive policy enumeration.
//!
//! The one-step utility is instantiated as discounted expected reward
//! r(x,d) + c * E[u]; it satisfies uniform boundedness, uniform contraction
//! with constant c, and monotonicity. States and actions are plain indices;
//! probabilistic strategies are finite distributions, so the general
//! integral degenerates to a weighted sum.

use crate::fixpoint::{self, ContractiveSystem, FixpointError};
use crate::linalg;
use thiserror::Error;

const DIST_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("action {action} is not available in state {state}")]
    UnknownAction { state: usize, action: usize },
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("invalid action distribution at state {state}: {reason}")]
    InvalidDistribution { state: usize, reason: String },
    #[error("policy space too large to enumerate ({policies} policies)")]
    TooLarge { policies: f64 },
    #[error("no action dominates the evaluated value at state {state}; value function is inconsistent")]
    NoWitness { state: usize },
    #[error(transparent)]
    NonConvergence(#[from] FixpointError),
}

/// A finite MDP: per-state action counts, rewards, transition kernel and a
/// discount in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    /// rewards[x][d]
    rewards: Vec<Vec<f64>>,
    /// kernel[x][d][y] = P(y | x, d)
    kernel: Vec<Vec<Vec<f64>>>,
    discount: f64,
}

impl Mdp {
    pub fn new(
        rewards: Vec<Vec<f64>>,
        kernel: Vec<Vec<Vec<f64>>>,
        discount: f64,
    ) -> Result<Self, MdpError> {
        if !(0.0..1.0).contains(&discount) {
            return Err(MdpError::BadModel(format!(
                "discount {discount} outside [0, 1)"
            )));
        }
        let n = rewards.len();
        if n == 0 {
            return Err(MdpError::BadModel("no states".into()));
        }
        if kernel.len() != n {
            return Err(MdpError::BadModel("kernel/reward state count mismatch".into()));
        }
        for x in 0..n {
            let actions = rewards[x].len();
            if actions == 0 {
                return Err(MdpError::BadModel(format!("state {x} has no actions")));
            }
            if kernel[x].len() != actions {
                return Err(MdpError::BadModel(format!(
                    "state {x}: kernel/reward action count mismatch"
                )));
            }
            for d in 0..actions {
                if kernel[x][d].len() != n {
                    return Err(MdpError::BadModel(format!(
                        "state {x}, action {d}: kernel row has wrong length"
                    )));
                }
                let mut sum = 0.0;
                for &p in &kernel[x][d] {
                    if !(p >= 0.0) {
                        return Err(MdpError::BadModel(format!(
                            "state {x}, action {d}: negative transition probability"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
                    return Err(MdpError::BadModel(format!(
                        "state {x}, action {d}: kernel row sums to {sum}"
                    )));
                }
            }
        }
        Ok(Self {
            rewards,
            kernel,
            discount,
        })
    }

    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_actions(&self, state: usize) -> usize {
        self.rewards[state].len()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state][action]
    }

    pub fn transition(&self, state: usize, action: usize) -> &[f64] {
        &self.kernel[state][action]
    }
}

/// Bounded real-valued function on states, ordered pointwise, compared in
/// the sup norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn(pub Vec<f64>);

impl ValueFn {
    pub fn zero(n: usize) -> Self {
        ValueFn(vec![0.0; n])
    }

    pub fn sup_dist(&self, other: &ValueFn) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn leq(&self, other: &ValueFn, slack: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + slack)
    }
}

/// Deterministic strategy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy(pub Vec<usize>);

/// Probabilistic strategy: a distribution over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbPolicy(pub Vec<Vec<f64>>);

impl ProbPolicy {
    pub fn point_mass(mdp: &Mdp, policy: &Policy) -> Self {
        let dist = policy
            .0
            .iter()
            .enumerate()
            .map(|(x, &d)| {
                let mut row = vec![0.0; mdp.num_actions(x)];
                row[d] = 1.0;
                row
            })
            .collect();
        ProbPolicy(dist)
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<(), MdpError> {
        if self.0.len() != mdp.num_states() {
            return Err(MdpError::InvalidDistribution {
                state: self.0.len(),
                reason: "wrong number of states".into(),
            });
        }
        for (x, row) in self.0.iter().enumerate() {
            if row.len() != mdp.num_actions(x) {
                return Err(MdpError::InvalidDistribution {
                    state: x,
                    reason: "wrong number of actions".into(),
                });
            }
            let mut sum = 0.0;
            for &p in row {
                if !(p >= 0.0) {
                    return Err(MdpError::InvalidDistribution {
                        state: x,
                        reason: "negative weight".into(),
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
                return Err(MdpError::InvalidDistribution {
                    state: x,
                    reason: format!("weights sum to {sum}"),
                });
            }
        }
        Ok(())
    }
}

/// One-step utility h(x, d, u) = r(x, d) + c * Sum_y P(y|x,d) u(y).
pub fn h_eval(mdp: &Mdp, state: usize, action: usize, u: &ValueFn) -> Result<f64, MdpError> {
    if state >= mdp.num_states() || action >= mdp.num_actions(state) {
        return Err(MdpError::UnknownAction { state, action });
    }
    let mut expectation = 0.0;
    for (y, &p) in mdp.transition(state, action).iter().enumerate() {
        expectation += p * u.0[y];
    }
    Ok(mdp.reward(state, action) + mdp.discount() * expectation)
}

/// Per-policy operator: pointwise h at the policy's action.
pub fn bellman_policy(mdp: &Mdp, policy: &Policy, u: &ValueFn) -> ValueFn {
    ValueFn(
        (0..mdp.num_states())
            .map(|x| h_eval(mdp, x, policy.0[x], u).expect("policy actions validated"))
            .collect(),
    )
}

/// Optimality operator: pointwise max of h over the finite action set.
pub fn bellman_opt(mdp: &Mdp, u: &ValueFn) -> ValueFn {
    ValueFn(
        (0..mdp.num_states())
            .map(|x| {
                (0..mdp.num_actions(x))
                    .map(|d| h_eval(mdp, x, d, u).expect("indices in range"))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect(),
    )
}

fn solve_operator_fixpoint<F>(mdp: &Mdp, op: F, tol: f64) -> Result<ValueFn, MdpError>
where
    F: Fn(&ValueFn) -> ValueFn,
{
    let sys = ContractiveSystem::new(
        op,
        |a: &ValueFn, b: &ValueFn| a.sup_dist(b),
        mdp.discount(),
        1,
    )?;
    let start = ValueFn::zero(mdp.num_states());
    let result = fixpoint::iterate_to_fixpoint(&sys, &start, tol, 2_000_000)?;
    Ok(result.point)
}

/// Value of a deterministic policy: the unique fixpoint of its operator.
pub fn policy_value(mdp: &Mdp, policy: &Policy, tol: f64) -> Result<ValueFn, MdpError> {
    for (x, &d) in policy.0.iter().enumerate() {
        if d >= mdp.num_actions(x) {
            return Err(MdpError::UnknownAction { state: x, action: d });
        }
    }
    solve_operator_fixpoint(mdp, |u| bellman_policy(mdp, policy, u), tol)
}

/// Optimal value: the unique fixpoint of the optimality operator.
pub fn optimal_value(mdp: &Mdp, tol: f64) -> Result<ValueFn, MdpError> {
    solve_operator_fixpoint(mdp, |u| bellman_opt(mdp, u), tol)
}

/// Greedy selection at `v`: per state the maximizing action, lowest index on
/// ties. The `eps` parameter is kept for interface fidelity; with finite
/// action sets the maximum is attained and eps = 0 suffices.
pub fn greedy_policy(mdp: &Mdp, v: &ValueFn, _eps: f64) -> Policy {
    Policy(
        (0..mdp.num_states())
            .map(|x| {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for d in 0..mdp.num_actions(x) {
                    let val = h_eval(mdp, x, d, v).expect("indices in range");
                    if val > best_val {
                        best_val = val;
                        best = d;
                    }
                }
                best
            })
            .collect(),
    )
}

/// One-step evaluation of a probabilistic strategy: the weighted sum of h
/// over the per-state action distribution.
pub fn prob_policy_apply(mdp: &Mdp, mu: &ProbPolicy, u: &ValueFn) -> Result<ValueFn, MdpError> {
    mu.validate(mdp)?;
    Ok(ValueFn(
        (0..mdp.num_states())
            .map(|x| {
                mu.0[x]
                    .iter()
                    .enumerate()
                    .map(|(d, &w)| w * h_eval(mdp, x, d, u).expect("indices in range"))
                    .sum()
            })
            .collect(),
    ))
}

/// Value of a probabilistic strategy: the unique fixpoint of its one-step
/// evaluation operator.
pub fn prob_policy_value(mdp: &Mdp, mu: &ProbPolicy, tol: f64) -> Result<ValueFn, MdpError> {
    mu.validate(mdp)?;
    solve_operator_fixpoint(mdp, |u| prob_policy_apply(mdp, mu, u).expect("validated above"), tol)
}

/// Replaces a probabilistic strategy by a deterministic one that dominates
/// it: per state the lowest-index action d with h(x, d, v_mu) >= v_mu(x),
/// within `tol`. Such an action always exists when v_mu is consistent.
pub fn derandomize(mdp: &Mdp, mu: &ProbPolicy, tol: f64) -> Result<Policy, MdpError> {
    let v_mu = prob_policy_value(mdp, mu, tol)?;
    let mut choice = Vec::with_capacity(mdp.num_states());
    for x in 0..mdp.num_states() {
        let mut found = None;
        for d in 0..mdp.num_actions(x) {
            if h_eval(mdp, x, d, &v_mu)? >= v_mu.0[x] - tol {
                found = Some(d);
                break;
            }
        }
        match found {
            Some(d) => choice.push(d),
            None => return Err(MdpError::NoWitness { state: x }),
        }
    }
    Ok(Policy(choice))
}

/// Exhaustively enumerates deterministic policies, solves each value by a
/// direct linear solve of (I - c P_delta) v = r_delta, and returns the
/// pointwise maximum with an argmax policy. Independent of the fixpoint
/// iteration path, so usable as an oracle against `optimal_value`.
pub fn brute_force_optimal(mdp: &Mdp, _tol: f64) -> Result<(ValueFn, Policy), MdpError> {
    let n = mdp.num_states();
    let mut count = 1.0f64;
    for x in 0..n {
        count *= mdp.num_actions(x) as f64;
    }
    if count > 1e6 {
        return Err(MdpError::TooLarge { policies: count });
    }

    let mut best_value = ValueFn(vec![f64::NEG_INFINITY; n]);
    let mut best_policy = Policy(vec![0; n]);
    let mut per_state_best = vec![f64::NEG_INFINITY; n];

    let mut counter = vec![0usize; n];
    loop {
        let policy = Policy(counter.clone());
        let value = policy_value_linear(mdp, &policy);
        for x in 0..n {
            if value.0[x] > per_state_best[x] {
                per_state_best[x] = value.0[x];
            }
        }
        // Argmax in the sup sense: keep the policy whose value is largest
        // pointwise-summed; the returned value vector is the pointwise max.
        if value.0.iter().sum::<f64>() > best_value.0.iter().sum::<f64>() {
            best_value = value;
            best_policy = policy;
        }
        // Mixed-radix increment over the policy space.
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok((ValueFn(per_state_best), best_policy));
            }
            counter[pos] += 1;
            if counter[pos] < mdp.num_actions(pos) {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact policy evaluation by linear solve.
pub fn policy_value_linear(mdp: &Mdp, policy: &Policy) -> ValueFn {
    let n = mdp.num_states();
    let c = mdp.discount();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for x in 0..n {
        let d = policy.0[x];
        for y in 0..n {
            a[x][y] = (if x == y { 1.0 } else { 0.0 }) - c * mdp.transition(x, d)[y];
        }
        b[x] = mdp.reward(x, d);
    }
    ValueFn(linalg::solve(&a, &b).expect("I - cP is nonsingular for c < 1"))
}
