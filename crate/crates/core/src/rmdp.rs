//! Rectangular uncertainty sets and robust policy evaluation.
//!
//! Uncertainty sets are finite candidate lists. A polyhedral set enters
//! through its vertex list; extreme points suffice for the robust value space
//! (see [`crate::reduction`]).

use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};
use crate::game::{maximin_row_mix, MaximinSolution};
use crate::mdp::{
    check_distribution, dot, evaluate_with_kernels, Mdp, Policy, StateKernel, ValueVector,
};

/// Default guard on the number of kernel combinations materialized at once.
pub const DEFAULT_COMBINATION_CAP: usize = 4096;

/// s-rectangular set: per state, a nonempty list of candidate `A x S` kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SRectangularSet {
    per_state: Vec<Vec<StateKernel>>,
}

impl SRectangularSet {
    pub fn new(per_state: Vec<Vec<StateKernel>>) -> Result<Self> {
        let ns = per_state.len();
        if ns == 0 {
            return Err(Error::InvalidArgument(
                "uncertainty set has no states".into(),
            ));
        }
        let na = per_state
            .iter()
            .flatten()
            .next()
            .map(|k| k.len())
            .ok_or_else(|| Error::EmptyCandidates {
                location: "state 0".into(),
            })?;
        for (s, cands) in per_state.iter().enumerate() {
            if cands.is_empty() {
                return Err(Error::EmptyCandidates {
                    location: format!("state {s}"),
                });
            }
            for (k, kernel) in cands.iter().enumerate() {
                dim(format!("s_rect[{s}][{k}] actions"), na, kernel.len())?;
                for (a, row) in kernel.iter().enumerate() {
                    dim(format!("s_rect[{s}][{k}][{a}]"), ns, row.len())?;
                    check_distribution(row, &format!("s_rect[{s}][{k}][{a}]"))?;
                }
            }
        }
        Ok(Self { per_state })
    }

    /// The nominal kernel of `m` as the only candidate of every state.
    pub fn singleton(m: &Mdp) -> Self {
        Self {
            per_state: m.kernel().iter().map(|k| vec![k.clone()]).collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.per_state.len()
    }

    pub fn num_actions(&self) -> usize {
        self.per_state[0][0].len()
    }

    pub fn candidates(&self, s: usize) -> &[StateKernel] {
        &self.per_state[s]
    }

    pub fn per_state(&self) -> &[Vec<StateKernel>] {
        &self.per_state
    }

    pub fn is_singleton(&self) -> bool {
        self.per_state.iter().all(|c| c.len() == 1)
    }

    /// `prod_s |P_s|`, saturating.
    pub fn combination_count(&self) -> u128 {
        self.per_state
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    /// First candidate of every state.
    pub fn nominal_kernel(&self) -> Vec<StateKernel> {
        self.per_state.iter().map(|c| c[0].clone()).collect()
    }

    /// Kernel assembled from one candidate index per state.
    pub fn assemble(&self, choice: &[usize]) -> Vec<StateKernel> {
        choice
            .iter()
            .enumerate()
            .map(|(s, &k)| self.per_state[s][k].clone())
            .collect()
    }

    /// A copy with `kernel` appended to the candidates of state `s`.
    pub fn with_extra_candidate(&self, s: usize, kernel: StateKernel) -> Result<Self> {
        let mut per_state = self.per_state.clone();
        per_state[s].push(kernel);
        Self::new(per_state)
    }

    /// Keeps only the listed candidate indices per state.
    pub fn restrict(&self, keep: &[Vec<usize>]) -> Result<Self> {
        Self::new(
            self.per_state
                .iter()
                .zip(keep)
                .map(|(c, idx)| idx.iter().map(|&i| c[i].clone()).collect())
                .collect(),
        )
    }

    pub(crate) fn check_against(&self, m: &Mdp) -> Result<()> {
        dim("uncertainty set states", m.num_states(), self.num_states())?;
        dim(
            "uncertainty set actions",
            m.num_actions(),
            self.num_actions(),
        )
    }
}

/// (s,a)-rectangular set: per state-action pair, a nonempty list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SARectangularSet {
    per_state_action: Vec<Vec<Vec<Vec<f64>>>>,
}

impl SARectangularSet {
    pub fn new(per_state_action: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let ns = per_state_action.len();
        if ns == 0 {
            return Err(Error::InvalidArgument(
                "uncertainty set has no states".into(),
            ));
        }
        let na = per_state_action[0].len();
        if na == 0 {
            return Err(Error::InvalidArgument(
                "uncertainty set has no actions".into(),
            ));
        }
        for (s, per_action) in per_state_action.iter().enumerate() {
            dim(format!("sa_rect[{s}] actions"), na, per_action.len())?;
            for (a, rows) in per_action.iter().enumerate() {
                if rows.is_empty() {
                    return Err(Error::EmptyCandidates {
                        location: format!("state {s}, action {a}"),
                    });
                }
                for (k, row) in rows.iter().enumerate() {
                    dim(format!("sa_rect[{s}][{a}][{k}]"), ns, row.len())?;
                    check_distribution(row, &format!("sa_rect[{s}][{a}][{k}]"))?;
                }
            }
        }
        Ok(Self { per_state_action })
    }

    pub fn singleton(m: &Mdp) -> Self {
        Self {
            per_state_action: m
                .kernel()
                .iter()
                .map(|ks| ks.iter().map(|row| vec![row.clone()]).collect())
                .collect(),
        }
    }

    /// Per-(s,a) union of the rows appearing in any candidate kernel of `u`.
    /// Exact when `u` already factorizes per action; an outer relaxation otherwise.
    pub fn rectangular_hull(u: &SRectangularSet) -> Self {
        let ns = u.num_states();
        let na = u.num_actions();
        let mut per_state_action = vec![vec![Vec::<Vec<f64>>::new(); na]; ns];
        for (s, rows) in per_state_action.iter_mut().enumerate() {
            for kernel in u.candidates(s) {
                for (a, row) in kernel.iter().enumerate() {
                    if !rows[a].contains(row) {
                        rows[a].push(row.clone());
                    }
                }
            }
        }
        Self { per_state_action }
    }

    pub fn num_states(&self) -> usize {
        self.per_state_action.len()
    }

    pub fn num_actions(&self) -> usize {
        self.per_state_action[0].len()
    }

    pub fn candidates(&self, s: usize, a: usize) -> &[Vec<f64>] {
        &self.per_state_action[s][a]
    }

    pub fn per_state_action(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.per_state_action
    }

    pub fn nominal_kernel(&self) -> Vec<StateKernel> {
        self.per_state_action
            .iter()
            .map(|pa| pa.iter().map(|rows| rows[0].clone()).collect())
            .collect()
    }

    pub(crate) fn check_against(&self, m: &Mdp) -> Result<()> {
        dim("uncertainty set states", m.num_states(), self.num_states())?;
        dim(
            "uncertainty set actions",
            m.num_actions(),
            self.num_actions(),
        )
    }
}

/// Either kind of rectangular set.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    S(SRectangularSet),
    SA(SARectangularSet),
}

impl UncertaintySet {
    /// The set as s-rectangular candidate lists (Cartesian product for SA data).
    pub fn to_s_rectangular(&self, cap: usize) -> Result<SRectangularSet> {
        match self {
            UncertaintySet::S(u) => Ok(u.clone()),
            UncertaintySet::SA(u) => sa_to_s_rectangular(u, cap),
        }
    }

    pub fn nominal_kernel(&self) -> Vec<StateKernel> {
        match self {
            UncertaintySet::S(u) => u.nominal_kernel(),
            UncertaintySet::SA(u) => u.nominal_kernel(),
        }
    }
}

/// Expands each state's per-action row lists into their Cartesian product.
///
/// Candidate order is lexicographic with action 0 most significant.
pub fn sa_to_s_rectangular(u: &SARectangularSet, cap: usize) -> Result<SRectangularSet> {
    let mut per_state = Vec::with_capacity(u.num_states());
    for s in 0..u.num_states() {
        let sizes: Vec<usize> = (0..u.num_actions())
            .map(|a| u.candidates(s, a).len())
            .collect();
        let count = sizes
            .iter()
            .fold(1u128, |acc, &n| acc.saturating_mul(n as u128));
        if count > cap as u128 {
            return Err(Error::CapExceeded {
                what: "per-state action-row product",
                count,
                cap,
            });
        }
        let kernels = product_indices(&sizes)
            .map(|idx| {
                idx.iter()
                    .enumerate()
                    .map(|(a, &k)| u.candidates(s, a)[k].clone())
                    .collect()
            })
            .collect();
        per_state.push(kernels);
    }
    SRectangularSet::new(per_state)
}

/// Iterates all index tuples `i` with `i[j] < sizes[j]`, last position fastest.
pub fn product_indices(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut n| {
        let mut idx = vec![0; sizes.len()];
        for j in (0..sizes.len()).rev() {
            idx[j] = n % sizes[j];
            n /= sizes[j];
        }
        idx
    })
}

/// One-step payoff table `q[a][k] = r_{s,a} + gamma <P^{(k)}_{s,a}, x>`.
pub fn one_step_payoff(m: &Mdp, kernels: &[StateKernel], s: usize, x: &[f64]) -> Vec<Vec<f64>> {
    (0..m.num_actions())
        .map(|a| {
            kernels
                .iter()
                .map(|k| m.reward(s, a) + m.gamma() * dot(&k[a], x))
                .collect()
        })
        .collect()
}

/// Per-state `(min_k sum_a pi_{s,a} q[a][k], argmin k)`; lowest index wins ties.
fn robust_backup(m: &Mdp, u: &SRectangularSet, pi: &Policy, v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let ns = m.num_states();
    let mut out = Vec::with_capacity(ns);
    let mut arg = Vec::with_capacity(ns);
    for s in 0..ns {
        let pi_s = pi.row(s);
        let r = dot(m.rewards()[s].as_slice(), pi_s);
        let mut best = (0, f64::INFINITY);
        for (k, kernel) in u.candidates(s).iter().enumerate() {
            let cont: f64 = kernel
                .iter()
                .zip(pi_s)
                .map(|(row, &w)| if w == 0.0 { 0.0 } else { w * dot(row, v) })
                .sum();
            let val = r + m.gamma() * cont;
            if val < best.1 {
                best = (k, val);
            }
        }
        out.push(best.1);
        arg.push(best.0);
    }
    (out, arg)
}

fn check_inputs(m: &Mdp, u: &SRectangularSet, pi: &Policy) -> Result<()> {
    u.check_against(m)?;
    pi.check_against(m)
}

/// Robust evaluation operator `(T v)(s) = min_k sum_a pi_{s,a}(r_{s,a} + gamma <P^{(k)}_{s,a}, v>)`.
pub fn robust_bellman_apply(
    m: &Mdp,
    u: &SRectangularSet,
    pi: &Policy,
    v: &[f64],
) -> Result<ValueVector> {
    check_inputs(m, u, pi)?;
    dim("value vector", m.num_states(), v.len())?;
    Ok(ValueVector(robust_backup(m, u, pi, v).0))
}

/// Robust value of a policy with the adversary's per-state choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustEvalResult {
    pub value: ValueVector,
    /// Candidate index chosen at each state by the adversary.
    pub worst_kernel: Vec<usize>,
    pub iterations: usize,
    /// For the fixed point: sup-distance between the iterate and the exact
    /// value of `worst_kernel`. For enumeration: slack of the chosen
    /// combination over the per-state minimum.
    pub residual: f64,
}

/// Robust value `V^{pi, U}` by fixed-point iteration from zero.
///
/// Iterates until the sup-norm change is at most `tol (1 - gamma) / gamma`,
/// which bounds the error of the iterate by `tol`. The adversary's argmin
/// kernel is then refined by re-evaluating it exactly until it is greedy with
/// respect to its own value, which makes the returned value exact up to the
/// linear solve.
pub fn robust_evaluate_policy(
    m: &Mdp,
    u: &SRectangularSet,
    pi: &Policy,
    tol: f64,
) -> Result<RobustEvalResult> {
    check_inputs(m, u, pi)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let gamma = m.gamma();
    let stop = if gamma > 0.0 {
        tol * (1.0 - gamma) / gamma
    } else {
        f64::INFINITY
    };
    let mut v = vec![0.0; m.num_states()];
    let mut iterations = 0;
    loop {
        let (next, _) = robust_backup(m, u, pi, &v);
        iterations += 1;
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta <= stop {
            break;
        }
    }

    let mut choice = robust_backup(m, u, pi, &v).1;
    let mut exact = evaluate_with_kernels(m, &u.assemble(&choice), pi);
    for _ in 0..64 {
        let greedy = robust_backup(m, u, pi, &exact).1;
        if greedy == choice {
            break;
        }
        let candidate = evaluate_with_kernels(m, &u.assemble(&greedy), pi);
        // accept only strict improvements for the adversary to rule out ping-pong on ties
        if candidate
            .iter()
            .zip(exact.iter())
            .all(|(c, e)| *c <= *e + 1e-15)
        {
            choice = greedy;
            exact = candidate;
        } else {
            break;
        }
    }
    let residual = exact.sup_distance(&v);
    Ok(RobustEvalResult {
        value: exact,
        worst_kernel: choice,
        iterations,
        residual,
    })
}

/// Robust value by enumerating every kernel combination and picking the one
/// whose value is elementwise minimal (combinations in lexicographic order).
pub fn brute_force_robust_value(
    m: &Mdp,
    u: &SRectangularSet,
    pi: &Policy,
    cap: usize,
) -> Result<RobustEvalResult> {
    check_inputs(m, u, pi)?;
    let count = u.combination_count();
    if count > cap as u128 {
        return Err(Error::CapExceeded {
            what: "kernel combinations",
            count,
            cap,
        });
    }
    let sizes: Vec<usize> = (0..u.num_states()).map(|s| u.candidates(s).len()).collect();
    let all: Vec<(Vec<usize>, ValueVector)> = product_indices(&sizes)
        .map(|choice| {
            let v = evaluate_with_kernels(m, &u.assemble(&choice), pi);
            (choice, v)
        })
        .collect();
    let ns = m.num_states();
    let floor: Vec<f64> = (0..ns)
        .map(|s| all.iter().map(|(_, v)| v[s]).fold(f64::INFINITY, f64::min))
        .collect();
    const MINIMAL_TOL: f64 = 1e-9;
    let found = all
        .iter()
        .find(|(_, v)| v.iter().zip(&floor).all(|(x, f)| *x <= f + MINIMAL_TOL));
    match found {
        Some((choice, v)) => Ok(RobustEvalResult {
            residual: v.sup_distance(&floor),
            value: v.clone(),
            worst_kernel: choice.clone(),
            iterations: all.len(),
        }),
        None => {
            // report the first state where the lexicographically first candidate fails
            let (_, v0) = &all[0];
            let state = (0..ns)
                .find(|&s| v0[s] > floor[s] + MINIMAL_TOL)
                .unwrap_or(0);
            Err(Error::NoMinimalCombination { state })
        }
    }
}

/// Which rectangularity the optimal-control update exploits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectMode {
    /// Per-state maximin over mixed action rows.
    S,
    /// Per-action worst case, then the best action.
    Sa,
}

/// Optimal robust value and a greedy policy attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustOptimum {
    pub value: ValueVector,
    pub policy: Policy,
    pub iterations: usize,
}

/// Robust value iteration for `V^{*, U}`.
///
/// In [`RectMode::S`] each state solves a maximin game over the candidate
/// kernels, so the greedy policy may be stochastic. In [`RectMode::Sa`] the
/// inner minimum splits per action and the greedy policy is deterministic;
/// s-rectangular input is replaced by its per-action rectangular hull.
pub fn robust_optimal_value(
    m: &Mdp,
    u: &UncertaintySet,
    tol: f64,
    mode: RectMode,
) -> Result<RobustOptimum> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let gamma = m.gamma();
    let stop = if gamma > 0.0 {
        tol * (1.0 - gamma) / gamma
    } else {
        f64::INFINITY
    };
    let ns = m.num_states();
    let na = m.num_actions();

    enum Backup {
        S(SRectangularSet),
        Sa(SARectangularSet),
    }
    let backup = match (mode, u) {
        (RectMode::S, u) => Backup::S(u.to_s_rectangular(DEFAULT_COMBINATION_CAP)?),
        (RectMode::Sa, UncertaintySet::SA(u)) => Backup::Sa(u.clone()),
        (RectMode::Sa, UncertaintySet::S(u)) => Backup::Sa(SARectangularSet::rectangular_hull(u)),
    };
    match &backup {
        Backup::S(u) => u.check_against(m)?,
        Backup::Sa(u) => u.check_against(m)?,
    }

    // returns (value, greedy row) for state s at iterate v
    let step = |s: usize, v: &[f64]| -> Result<(f64, Vec<f64>)> {
        match &backup {
            Backup::S(u) => {
                let q = one_step_payoff(m, u.candidates(s), s, v);
                let MaximinSolution { mix, value } = maximin_row_mix(&q)?;
                Ok((value, mix))
            }
            Backup::Sa(u) => {
                let mut best = (0, f64::NEG_INFINITY);
                for a in 0..na {
                    let worst = u
                        .candidates(s, a)
                        .iter()
                        .map(|row| m.reward(s, a) + gamma * dot(row, v))
                        .fold(f64::INFINITY, f64::min);
                    if worst > best.1 {
                        best = (a, worst);
                    }
                }
                Ok((best.1, crate::mdp::one_hot(best.0, na)))
            }
        }
    };

    let mut v = vec![0.0; ns];
    let mut iterations = 0;
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| step(s, &v).map(|x| x.0))
            .collect::<Result<_>>()?;
        iterations += 1;
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta <= stop {
            break;
        }
    }
    let rows = (0..ns)
        .map(|s| step(s, &v).map(|x| x.1))
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustOptimum {
        value: ValueVector(v),
        policy: Policy::new(rows)?,
        iterations,
    })
}
