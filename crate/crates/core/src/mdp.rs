//! Finite MDP data model, validation and exact policy evaluation.
//!
//! An [`Mdp`] stores the reward table `r[s][a]`, the transition tensor
//! `P[s][a][s']` and the discount `gamma`. Policies are per-state probability
//! rows over actions. Evaluation solves `(I - gamma P^pi) V = r^pi` with a dense
//! LU factorization.

use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};

/// Tolerance on row sums for every probability vector accepted as input.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Maximum tolerated residual `|(I - gamma P^pi) V - r^pi|_inf` after a solve.
pub const EVAL_RESIDUAL_TOL: f64 = 1e-10;

/// Candidate transition rows of one state: `A` rows of length `S`.
pub type StateKernel = Vec<Vec<f64>>;

/// A finite MDP `(S, A, P, r, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    rewards: Vec<Vec<f64>>,
    kernel: Vec<StateKernel>,
}

impl Mdp {
    /// Builds an MDP after checking that all shapes agree.
    ///
    /// Stochasticity and the discount range are *not* enforced here; call
    /// [`validate_mdp`] (or use [`Mdp::checked`]) to get a list of violations.
    pub fn new(gamma: f64, rewards: Vec<Vec<f64>>, kernel: Vec<StateKernel>) -> Result<Self> {
        let num_states = rewards.len();
        if num_states == 0 {
            return Err(Error::InvalidArgument(
                "MDP needs at least one state".into(),
            ));
        }
        let num_actions = rewards[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidArgument(
                "MDP needs at least one action".into(),
            ));
        }
        for (s, row) in rewards.iter().enumerate() {
            dim(format!("rewards[{s}]"), num_actions, row.len())?;
        }
        dim("kernel", num_states, kernel.len())?;
        for (s, ks) in kernel.iter().enumerate() {
            dim(format!("kernel[{s}]"), num_actions, ks.len())?;
            for (a, row) in ks.iter().enumerate() {
                dim(format!("kernel[{s}][{a}]"), num_states, row.len())?;
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            gamma,
            rewards,
            kernel,
        })
    }

    /// Like [`Mdp::new`] but also rejects any instance with violations.
    pub fn checked(gamma: f64, rewards: Vec<Vec<f64>>, kernel: Vec<StateKernel>) -> Result<Self> {
        let m = Self::new(gamma, rewards, kernel)?;
        let violations = validate_mdp(&m);
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidMdp(violations))
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s][a]
    }

    pub fn kernel(&self) -> &[StateKernel] {
        &self.kernel
    }

    /// Transition row `P_{s,a}`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.kernel[s][a]
    }

    /// Same rewards and discount with a different transition tensor.
    pub fn with_kernel(&self, kernel: Vec<StateKernel>) -> Result<Self> {
        Self::new(self.gamma, self.rewards.clone(), kernel)
    }

    /// A-priori box `[min r / (1 - gamma), max r / (1 - gamma)]` containing every value.
    pub fn value_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self
            .rewards
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            });
        (lo / (1.0 - self.gamma), hi / (1.0 - self.gamma))
    }
}

/// One failed constraint found by [`validate_mdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Gamma {
        gamma: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    NonFiniteProbability {
        state: usize,
        action: usize,
        next: usize,
    },
    NonFiniteReward {
        state: usize,
        action: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Gamma { gamma } => write!(f, "gamma {gamma} not in [0,1)"),
            Violation::RowSum { state, action, sum } => {
                write!(f, "row sum {sum} ≠ 1 at (s{},a{})", state + 1, action + 1)
            }
            Violation::NegativeProbability {
                state,
                action,
                next,
                value,
            } => write!(
                f,
                "negative probability {value} at (s{},a{}) -> s{}",
                state + 1,
                action + 1,
                next + 1
            ),
            Violation::NonFiniteProbability {
                state,
                action,
                next,
            } => write!(
                f,
                "non-finite probability at (s{},a{}) -> s{}",
                state + 1,
                action + 1,
                next + 1
            ),
            Violation::NonFiniteReward { state, action } => {
                write!(f, "non-finite reward at (s{},a{})", state + 1, action + 1)
            }
        }
    }
}

/// Lists every broken invariant of `m`. Never aborts; an empty list means valid.
pub fn validate_mdp(m: &Mdp) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(0.0..1.0).contains(&m.gamma) {
        out.push(Violation::Gamma { gamma: m.gamma });
    }
    for s in 0..m.num_states {
        for a in 0..m.num_actions {
            if !m.rewards[s][a].is_finite() {
                out.push(Violation::NonFiniteReward {
                    state: s,
                    action: a,
                });
            }
            out.extend(row_violations(&m.kernel[s][a], s, a));
        }
    }
    out
}

pub(crate) fn row_violations(row: &[f64], s: usize, a: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for (next, &p) in row.iter().enumerate() {
        if !p.is_finite() {
            out.push(Violation::NonFiniteProbability {
                state: s,
                action: a,
                next,
            });
        } else if p < 0.0 {
            out.push(Violation::NegativeProbability {
                state: s,
                action: a,
                next,
                value: p,
            });
        }
    }
    let sum: f64 = row.iter().sum();
    if sum.is_finite() && (sum - 1.0).abs() > STOCHASTIC_TOL {
        out.push(Violation::RowSum {
            state: s,
            action: a,
            sum,
        });
    }
    out
}

/// Checks that `p` is a probability vector within [`STOCHASTIC_TOL`].
pub fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NotStochastic {
            what: what.into(),
            reason: "empty".into(),
        });
    }
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::NotStochastic {
            what: what.into(),
            reason: format!("entry {bad} is negative or non-finite"),
        });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic {
            what: what.into(),
            reason: format!("sums to {sum}"),
        });
    }
    Ok(())
}

/// A stationary stochastic policy: one probability row over actions per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    rows: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("policy has no rows".into()));
        }
        let na = rows[0].len();
        for (s, row) in rows.iter().enumerate() {
            dim(format!("policy[{s}]"), na, row.len())?;
            check_distribution(row, &format!("policy row {s}"))?;
        }
        Ok(Self { rows })
    }

    /// The policy choosing `actions[s]` with probability one (the `d_{s,a}` rows).
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let rows = actions.iter().map(|&a| one_hot(a, num_actions)).collect();
        Self { rows }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let row = vec![1.0 / num_actions as f64; num_actions];
        Self {
            rows: vec![row; num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Replaces the row of state `s`.
    pub fn with_row(&self, s: usize, row: Vec<f64>) -> Result<Self> {
        dim("policy row", self.num_actions(), row.len())?;
        check_distribution(&row, &format!("policy row {s}"))?;
        let mut rows = self.rows.clone();
        rows[s] = row;
        Ok(Self { rows })
    }

    pub(crate) fn check_against(&self, m: &Mdp) -> Result<()> {
        dim("policy states", m.num_states(), self.num_states())?;
        dim("policy actions", m.num_actions(), self.num_actions())
    }
}

/// Indicator row `d_{s,a}`.
pub fn one_hot(a: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = 1.0;
    v
}

/// A point of `R^S`; produced by evaluation or supplied as a query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `max_i |self_i - other_i|`.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for ValueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ValueVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<DVector<f64>> for ValueVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v.iter().copied().collect())
    }
}

/// `sum_a pi_a * rows[a]`.
pub fn mix_rows(rows: &[Vec<f64>], pi_s: &[f64]) -> Vec<f64> {
    let n = rows[0].len();
    let mut out = vec![0.0; n];
    for (row, &w) in rows.iter().zip(pi_s) {
        if w == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(row) {
            *o += w * p;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// State-to-state matrix `P^pi` with row `s` equal to `sum_a pi_{s,a} P_{s,a}`.
pub fn policy_transition(m: &Mdp, pi: &Policy) -> Result<DMatrix<f64>> {
    pi.check_against(m)?;
    Ok(transition_from_kernels(&m.kernel, pi))
}

pub(crate) fn transition_from_kernels(kernels: &[StateKernel], pi: &Policy) -> DMatrix<f64> {
    let n = kernels.len();
    let mut out = DMatrix::zeros(n, n);
    for (s, ks) in kernels.iter().enumerate() {
        let row = mix_rows(ks, pi.row(s));
        for (j, p) in row.into_iter().enumerate() {
            out[(s, j)] = p;
        }
    }
    out
}

/// Expected one-step reward vector `r^pi`.
pub fn policy_reward(m: &Mdp, pi: &Policy) -> Result<ValueVector> {
    pi.check_against(m)?;
    Ok(ValueVector(
        (0..m.num_states)
            .map(|s| dot(&m.rewards[s], pi.row(s)))
            .collect(),
    ))
}

/// Exact value `V^{pi,P}` of `pi` in `m`.
pub fn evaluate_policy(m: &Mdp, pi: &Policy) -> Result<ValueVector> {
    pi.check_against(m)?;
    Ok(evaluate_with_kernels(m, &m.kernel, pi))
}

/// Evaluates `pi` under per-state kernels `kernels[s]` (shapes assumed checked).
pub(crate) fn evaluate_with_kernels(m: &Mdp, kernels: &[StateKernel], pi: &Policy) -> ValueVector {
    let n = m.num_states;
    let p = transition_from_kernels(kernels, pi);
    let r = DVector::from_iterator(n, (0..n).map(|s| dot(&m.rewards[s], pi.row(s))));
    solve_bellman_system(m.gamma, &p, &r).into()
}

/// Solves `(I - gamma P) x = r` and applies refinement steps until the residual
/// drops under [`EVAL_RESIDUAL_TOL`].
pub fn solve_bellman_system(gamma: f64, p: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let n = r.len();
    let a = DMatrix::identity(n, n) - p * gamma;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(r)
        .expect("I - gamma P is nonsingular for gamma < 1");
    for _ in 0..3 {
        let res = r - &a * &x;
        if res.amax() <= EVAL_RESIDUAL_TOL * 1e-2 {
            break;
        }
        if let Some(dx) = lu.solve(&res) {
            x += dx;
        }
    }
    x
}

/// `|(I - gamma P^pi) V - r^pi|_inf`.
pub fn bellman_residual(m: &Mdp, pi: &Policy, v: &[f64]) -> Result<f64> {
    pi.check_against(m)?;
    dim("value vector", m.num_states, v.len())?;
    let mut worst = 0.0f64;
    for s in 0..m.num_states {
        let row = mix_rows(&m.kernel[s], pi.row(s));
        let lhs = v[s] - m.gamma * dot(&row, v);
        let rhs = dot(&m.rewards[s], pi.row(s));
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_instance_is_valid() {
        assert!(validate_mdp(&builtin::fig2()).is_empty());
    }

    #[test]
    fn short_row_is_reported() {
        let m = Mdp::new(
            0.9,
            vec![vec![0.0], vec![0.0]],
            vec![vec![vec![0.5, 0.4]], vec![vec![0.0, 1.0]]],
        )
        .unwrap();
        let v = validate_mdp(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "row sum 0.9 ≠ 1 at (s1,a1)");
    }

    #[test]
    fn gamma_one_is_reported() {
        let m = Mdp::new(1.0, vec![vec![0.0]], vec![vec![vec![1.0]]]).unwrap();
        let v = validate_mdp(&m);
        assert_eq!(v, vec![Violation::Gamma { gamma: 1.0 }]);
        assert!(v[0].to_string().contains("not in [0,1)"));
    }

    #[test]
    fn negative_and_nonfinite_entries() {
        let m = Mdp::new(0.5, vec![vec![f64::NAN]], vec![vec![vec![-0.5, 1.5]]]);
        // shape error: 1 state but rows of length 2
        assert!(matches!(m, Err(Error::DimensionMismatch { .. })));
        let m = Mdp::new(
            0.5,
            vec![vec![f64::NAN], vec![0.0]],
            vec![vec![vec![-0.5, 1.5]], vec![vec![1.0, 0.0]]],
        )
        .unwrap();
        let v = validate_mdp(&m);
        assert!(v.contains(&Violation::NonFiniteReward {
            state: 0,
            action: 0
        }));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NegativeProbability { next: 0, .. })));
    }

    #[test]
    fn single_action_transition_is_the_kernel() {
        let m = builtin::routing_rmdp().0;
        let p = policy_transition(&m, &Policy::uniform(2, 1)).unwrap();
        for s in 0..2 {
            for j in 0..2 {
                assert_eq!(p[(s, j)], m.row(s, 0)[j]);
            }
        }
    }

    #[test]
    fn deterministic_policy_selects_rows() {
        let m = builtin::fig2();
        let pi = Policy::deterministic(&[2, 1], 3);
        let p = policy_transition(&m, &pi).unwrap();
        assert_eq!(p.row(0).iter().copied().collect::<Vec<_>>(), m.row(0, 2));
        assert_eq!(p.row(1).iter().copied().collect::<Vec<_>>(), m.row(1, 1));
        let r = policy_reward(&m, &pi).unwrap();
        assert_eq!(r.0, vec![m.reward(0, 2), m.reward(1, 1)]);
    }

    #[test]
    fn worked_instance_mixed_row() {
        // 0.2*(0.7793,0.2207) + 0.3*(0.9713,0.0287) + 0.5*(0.0668,0.9332), by hand
        let m = builtin::fig2();
        let pi = builtin::fig2_policy();
        let p = policy_transition(&m, &pi).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 0.48065, epsilon = 1e-14);
        assert_abs_diff_eq!(p[(0, 1)], 0.51935, epsilon = 1e-14);
        // 0.3*(0.0676,0.9324) + 0.1*(0.5929,0.4071) + 0.6*(0.2497,0.7503)
        assert_abs_diff_eq!(p[(1, 0)], 0.22939, epsilon = 1e-14);
        assert_abs_diff_eq!(p[(1, 1)], 0.77061, epsilon = 1e-14);
    }

    #[test]
    fn zero_rewards_give_zero_vector_and_value() {
        let m = builtin::fig2();
        let m0 = Mdp::new(0.9, vec![vec![0.0; 3]; 2], m.kernel().to_vec()).unwrap();
        let pi = builtin::fig2_policy();
        assert_eq!(policy_reward(&m0, &pi).unwrap().0, vec![0.0, 0.0]);
        assert_eq!(evaluate_policy(&m0, &pi).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn two_state_reward_table_mix() {
        let (m, _) = builtin::fig4();
        let pi = builtin::fig4_policy();
        let r = policy_reward(&m, &pi).unwrap();
        assert_abs_diff_eq!(r[0], 0.555, epsilon = 1e-15);
    }

    #[test]
    fn self_loop_geometric_series() {
        let m = Mdp::new(
            0.9,
            vec![vec![1.0], vec![0.0]],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        )
        .unwrap();
        let v = evaluate_policy(&m, &Policy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(v[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluation_matches_truncated_neumann_series() {
        let m = builtin::fig2();
        let pi = builtin::fig2_policy();
        let v = evaluate_policy(&m, &pi).unwrap();
        // sum_{t < 10^6} (gamma P^pi)^t r^pi, accumulated term by term
        let p = policy_transition(&m, &pi).unwrap() * m.gamma();
        let r = policy_reward(&m, &pi).unwrap();
        let mut term = DVector::from_vec(r.0.clone());
        let mut acc = DVector::zeros(2);
        for _ in 0..1_000_000 {
            acc += &term;
            term = &p * term;
        }
        for s in 0..2 {
            assert_abs_diff_eq!(v[s], acc[s], epsilon = 1e-8);
        }
        assert!(bellman_residual(&m, &pi, &v).unwrap() <= EVAL_RESIDUAL_TOL);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = builtin::fig2();
        let pi = Policy::uniform(2, 2);
        assert!(matches!(
            evaluate_policy(&m, &pi),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(policy_transition(&m, &Policy::uniform(3, 3)).is_err());
    }

    #[test]
    fn policy_rejects_bad_rows() {
        assert!(Policy::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(Policy::new(vec![vec![1.2, -0.2]]).is_err());
        assert!(Policy::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }
}
