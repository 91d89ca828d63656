//! Hyperplanes through policy values and membership in the value space.
//!
//! For a state `s` and action row `pi_s`, the values of every policy that
//! plays `pi_s` at `s` lie on the hyperplane `<x, L> = r^{pi_s}` with
//! `L = e_s - gamma * sum_a pi_{s,a} P_{s,a}`. Its residual can be written as
//! `x_s - sum_a pi_{s,a} q_a(x)` with one-step values
//! `q_a(x) = r_{s,a} + gamma <x, P_{s,a}>`, and a point belongs to the value
//! space iff at every state `x_s` lies between the smallest and the largest
//! one-step value.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};
use crate::mdp::{
    check_distribution, dot, evaluate_policy, one_hot, Mdp, Policy, StateKernel, ValueVector,
};
use crate::sample::{derive_seed, random_policy, rng};

/// Default absolute tolerance on membership residuals.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Normal and offset of the hyperplane `<x, normal> = offset` at `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LVector {
    pub state: usize,
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl LVector {
    /// `<x, normal> - offset`; nonnegative on the plus side.
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(x, &self.normal) - self.offset
    }
}

/// Which closed side of a hyperplane a point is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `<x, L> >= r`.
    Plus,
    /// `<x, L> <= r`.
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub lvec: LVector,
}

impl Hyperplane {
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.lvec.residual(x)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.residual(x).abs() <= tol
    }

    pub fn in_half_space(&self, x: &[f64], side: Side, tol: f64) -> bool {
        match side {
            Side::Plus => self.residual(x) >= -tol,
            Side::Minus => self.residual(x) <= tol,
        }
    }
}

/// L-vector for `pi_s` at `s` under an explicit per-state kernel.
pub fn l_vector_for_kernel(
    m: &Mdp,
    s: usize,
    kernel: &StateKernel,
    pi_s: &[f64],
) -> Result<LVector> {
    if s >= m.num_states() {
        return Err(Error::InvalidArgument(format!("state {s} out of range")));
    }
    dim("action row", m.num_actions(), pi_s.len())?;
    dim("kernel actions", m.num_actions(), kernel.len())?;
    check_distribution(pi_s, "action row")?;
    let mut normal = vec![0.0; m.num_states()];
    for (row, &w) in kernel.iter().zip(pi_s) {
        dim("kernel row", m.num_states(), row.len())?;
        for (n, &p) in normal.iter_mut().zip(row) {
            *n -= m.gamma() * w * p;
        }
    }
    normal[s] += 1.0;
    Ok(LVector {
        state: s,
        normal,
        offset: dot(&m.rewards()[s], pi_s),
    })
}

/// L-vector for `pi_s` at `s` under the model's kernel.
pub fn l_vector(m: &Mdp, s: usize, pi_s: &[f64]) -> Result<LVector> {
    if s >= m.num_states() {
        return Err(Error::InvalidArgument(format!("state {s} out of range")));
    }
    l_vector_for_kernel(m, s, &m.kernel()[s], pi_s)
}

pub fn hyperplane(m: &Mdp, s: usize, pi_s: &[f64]) -> Result<Hyperplane> {
    Ok(Hyperplane {
        lvec: l_vector(m, s, pi_s)?,
    })
}

fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .expect("hyperplane normals are linearly independent");
    for _ in 0..3 {
        let res = b - a * &x;
        if res.amax() <= 1e-14 {
            break;
        }
        if let Some(dx) = lu.solve(&res) {
            x += dx;
        }
    }
    x
}

/// The unique common point of the `S` hyperplanes of `pi`.
pub fn intersect_policy_hyperplanes(m: &Mdp, pi: &Policy) -> Result<ValueVector> {
    dim("policy states", m.num_states(), pi.num_states())?;
    let n = m.num_states();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for s in 0..n {
        let l = l_vector(m, s, pi.row(s))?;
        for (j, v) in l.normal.iter().enumerate() {
            a[(s, j)] = *v;
        }
        b[s] = l.offset;
    }
    Ok(solve_refined(&a, &b).into())
}

/// One-step values `q_a(x) = r_{s,a} + gamma <x, P_{s,a}>`.
pub fn one_step_values(m: &Mdp, s: usize, x: &[f64]) -> Vec<f64> {
    (0..m.num_actions())
        .map(|a| m.reward(s, a) + m.gamma() * dot(m.row(s, a), x))
        .collect()
}

/// Action (and candidate kernel, 0 for plain models) attaining the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub action: usize,
    pub kernel: usize,
}

/// Per-state evidence for or against membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCertificate {
    pub state: usize,
    pub coordinate: f64,
    /// Smallest one-step value; plus side holds iff `coordinate >= lower - tol`.
    pub lower: f64,
    /// Largest value reachable by an action row; minus side holds iff `coordinate <= upper + tol`.
    pub upper: f64,
    pub lower_witness: Witness,
    /// Action row attaining `upper`.
    pub upper_mix: Vec<f64>,
    pub plus_side: bool,
    pub minus_side: bool,
}

impl StateCertificate {
    pub fn holds(&self) -> bool {
        self.plus_side && self.minus_side
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub verdict: bool,
    pub tol: f64,
    pub per_state: Vec<StateCertificate>,
}

impl MembershipReport {
    pub(crate) fn from_certificates(per_state: Vec<StateCertificate>, tol: f64) -> Self {
        Self {
            verdict: per_state.iter().all(StateCertificate::holds),
            tol,
            per_state,
        }
    }

    pub fn violated_states(&self) -> Vec<usize> {
        self.per_state
            .iter()
            .filter(|c| !c.holds())
            .map(|c| c.state)
            .collect()
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

/// Whether `x` is the value of some policy of `m`.
pub fn value_space_membership(m: &Mdp, x: &[f64], tol: f64) -> Result<MembershipReport> {
    dim("point", m.num_states(), x.len())?;
    check_tol(tol)?;
    let certs = (0..m.num_states())
        .map(|s| {
            let q = one_step_values(m, s, x);
            let (amin, lower) = argext(&q, |a, b| a < b);
            let (amax, upper) = argext(&q, |a, b| a > b);
            StateCertificate {
                state: s,
                coordinate: x[s],
                lower,
                upper,
                lower_witness: Witness {
                    action: amin,
                    kernel: 0,
                },
                upper_mix: one_hot(amax, q.len()),
                plus_side: x[s] >= lower - tol,
                minus_side: x[s] <= upper + tol,
            }
        })
        .collect();
    Ok(MembershipReport::from_certificates(certs, tol))
}

/// First index whose value beats all others under `better`.
pub(crate) fn argext(v: &[f64], better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if better(x, best.1) {
            best = (i, x);
        }
    }
    best
}

/// Values of `n` random policies that play the given rows on the fixed states.
///
/// Sample `i` uses its own stream derived from `seed`, so output is
/// independent of thread count.
pub fn agreement_slice_sample(
    m: &Mdp,
    fixed: &[(usize, Vec<f64>)],
    n: usize,
    seed: u64,
) -> Result<Vec<ValueVector>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    for (s, row) in fixed {
        if *s >= m.num_states() {
            return Err(Error::InvalidArgument(format!(
                "fixed state {s} out of range"
            )));
        }
        dim(
            format!("fixed row at state {s}"),
            m.num_actions(),
            row.len(),
        )?;
        check_distribution(row, &format!("fixed row at state {s}"))?;
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(derive_seed(seed, i as u64));
            let mut pi = random_policy(&mut r, m.num_states(), m.num_actions());
            for (s, row) in fixed {
                pi = pi.with_row(*s, row.clone())?;
            }
            evaluate_policy(m, &pi)
        })
        .collect()
}

/// Action row on the hyperplane through `x` built from a row on its plus side
/// and a row on its minus side: with `alpha = res(plus) >= 0` and
/// `beta = -res(minus) >= 0`, returns `(beta * plus + alpha * minus) / (alpha + beta)`.
///
/// `None` when `plus` or `minus` is on the wrong side of `x` by more than `tol`.
pub fn bridging_mix(
    m: &Mdp,
    s: usize,
    x: &[f64],
    plus: &[f64],
    minus: &[f64],
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    dim("point", m.num_states(), x.len())?;
    let alpha = l_vector(m, s, plus)?.residual(x);
    let beta = -l_vector(m, s, minus)?.residual(x);
    if alpha < -tol || beta < -tol {
        return Ok(None);
    }
    let (alpha, beta) = (alpha.max(0.0), beta.max(0.0));
    if alpha + beta == 0.0 {
        return Ok(Some(plus.to_vec()));
    }
    Ok(Some(
        plus.iter()
            .zip(minus)
            .map(|(p, q)| (beta * p + alpha * q) / (alpha + beta))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::sample::{random_mdp, sample_simplex};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn self_loops() -> Mdp {
        Mdp::new(
            0.9,
            vec![vec![1.0], vec![0.0]],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        )
        .unwrap()
    }

    #[test]
    fn self_loop_normal() {
        let l = l_vector(&self_loops(), 0, &[1.0]).unwrap();
        assert_abs_diff_eq!(l.normal[0], 0.1, epsilon = 1e-15);
        assert_eq!(l.normal[1], 0.0);
        assert_eq!(l.offset, 1.0);
    }

    #[test]
    fn zero_discount_normal_is_unit_vector() {
        let m = builtin::fig2();
        let m0 = Mdp::new(0.0, m.rewards().to_vec(), m.kernel().to_vec()).unwrap();
        let l = l_vector(&m0, 1, &[0.2, 0.5, 0.3]).unwrap();
        assert_eq!(l.normal, vec![0.0, 1.0]);
    }

    #[test]
    fn mixed_normal_by_hand() {
        // e1 - 0.9 * (0.45 * (.78,.22) + 0.55 * (.79,.21)) = e1 - 0.9 * (0.7855, 0.2145)
        let (m, _) = builtin::fig4();
        let l = l_vector(&m, 0, &[0.45, 0.55]).unwrap();
        assert_abs_diff_eq!(l.normal[0], 0.29305, epsilon = 1e-14);
        assert_abs_diff_eq!(l.normal[1], -0.19305, epsilon = 1e-14);
        assert_abs_diff_eq!(l.offset, 0.555, epsilon = 1e-15);
    }

    #[test]
    fn non_stochastic_row_is_rejected() {
        let m = builtin::fig2();
        assert!(l_vector(&m, 0, &[0.5, 0.4, 0.0]).is_err());
        assert!(l_vector(&m, 2, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn intersection_matches_evaluation() {
        let mut r = rng(101);
        for _ in 0..200 {
            let s = r.random_range(1..=5);
            let a = r.random_range(1..=4);
            let gamma = r.random_range(0.0..0.99);
            let m = random_mdp(&mut r, s, a, gamma);
            let pi = random_policy(&mut r, s, a);
            let v = intersect_policy_hyperplanes(&m, &pi).unwrap();
            let w = evaluate_policy(&m, &pi).unwrap();
            assert!(v.sup_distance(&w) <= 1e-9);
        }
    }

    #[test]
    fn zero_rewards_intersect_at_origin() {
        let m = builtin::fig2();
        let m0 = Mdp::new(0.9, vec![vec![0.0; 3]; 2], m.kernel().to_vec()).unwrap();
        let v = intersect_policy_hyperplanes(&m0, &builtin::fig2_policy()).unwrap();
        assert!(v.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn single_action_space_is_a_point() {
        let m = self_loops();
        let v = evaluate_policy(&m, &Policy::uniform(2, 1)).unwrap();
        assert!(value_space_membership(&m, &v, 1e-9).unwrap().verdict);
        let moved = [v[0] + 1.0, v[1]];
        let rep = value_space_membership(&m, &moved, 1e-9).unwrap();
        assert!(!rep.verdict);
        assert_eq!(rep.violated_states(), vec![0]);
        assert!(!rep.per_state[0].minus_side);
    }

    #[test]
    fn membership_rejects_wrong_length() {
        let m = builtin::fig2();
        assert!(matches!(
            value_space_membership(&m, &[0.0; 3], 1e-9),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(value_space_membership(&m, &[0.0; 2], 0.0).is_err());
    }

    #[test]
    fn fully_fixed_slice_is_one_point() {
        let m = builtin::fig2();
        let pi = builtin::fig2_policy();
        let fixed: Vec<_> = (0..2).map(|s| (s, pi.row(s).to_vec())).collect();
        let pts = agreement_slice_sample(&m, &fixed, 20, 4).unwrap();
        let v = evaluate_policy(&m, &pi).unwrap();
        assert!(pts.iter().all(|p| p.sup_distance(&v) == 0.0));
    }

    #[test]
    fn free_slice_lies_in_value_space() {
        let m = builtin::fig2();
        for p in agreement_slice_sample(&m, &[], 500, 9).unwrap() {
            assert!(value_space_membership(&m, &p, 1e-9).unwrap().verdict);
        }
    }

    #[test]
    fn one_fixed_state_stays_on_its_hyperplane() {
        let m = builtin::fig2();
        let row = builtin::fig2_policy().row(0).to_vec();
        let l = l_vector(&m, 0, &row).unwrap();
        for p in agreement_slice_sample(&m, &[(0, row)], 1000, 12).unwrap() {
            assert!(l.residual(&p).abs() <= 1e-9);
        }
    }

    #[test]
    fn slice_arguments_are_checked() {
        let m = builtin::fig2();
        assert!(agreement_slice_sample(&m, &[], 0, 1).is_err());
        assert!(agreement_slice_sample(&m, &[(5, vec![1.0, 0.0, 0.0])], 1, 1).is_err());
        assert!(agreement_slice_sample(&m, &[(0, vec![0.9, 0.0, 0.0])], 1, 1).is_err());
    }

    #[test]
    fn slice_is_seed_deterministic() {
        let m = builtin::fig2();
        let a = agreement_slice_sample(&m, &[], 50, 77).unwrap();
        let b = agreement_slice_sample(&m, &[], 50, 77).unwrap();
        assert_eq!(a, b);
    }

    fn instance() -> impl Strategy<Value = (Mdp, u64)> {
        (1usize..5, 1usize..4, any::<u64>()).prop_map(|(s, a, seed)| {
            let mut r = rng(seed);
            (random_mdp(&mut r, s, a, 0.9), seed)
        })
    }

    proptest! {
        #[test]
        fn l_vector_entries_sum_to_one_minus_gamma((m, seed) in instance()) {
            let mut r = rng(seed ^ 1);
            for s in 0..m.num_states() {
                let l = l_vector(&m, s, &sample_simplex(&mut r, m.num_actions())).unwrap();
                prop_assert!((l.normal.iter().sum::<f64>() - (1.0 - m.gamma())).abs() <= 1e-12);
                for (j, v) in l.normal.iter().enumerate() {
                    if j != s {
                        prop_assert!(*v <= 0.0);
                    }
                }
            }
        }

        #[test]
        fn evaluation_is_a_fixed_point((m, seed) in instance()) {
            let pi = random_policy(&mut rng(seed ^ 2), m.num_states(), m.num_actions());
            let v = evaluate_policy(&m, &pi).unwrap();
            prop_assert!(crate::mdp::bellman_residual(&m, &pi, &v).unwrap() <= 1e-10);
        }

        #[test]
        fn half_spaces_are_covered_by_deterministic_rows((m, seed) in instance()) {
            let mut r = rng(seed ^ 3);
            let (lo, hi) = m.value_bounds();
            for _ in 0..20 {
                let x: Vec<f64> = (0..m.num_states()).map(|_| r.random_range(lo..=hi)).collect();
                let s = r.random_range(0..m.num_states());
                let pi_s = sample_simplex(&mut r, m.num_actions());
                let res = l_vector(&m, s, &pi_s).unwrap().residual(&x);
                let det: Vec<f64> = (0..m.num_actions())
                    .map(|a| l_vector(&m, s, &one_hot(a, m.num_actions())).unwrap().residual(&x))
                    .collect();
                if res >= 0.0 {
                    prop_assert!(det.iter().any(|&d| d >= -1e-12));
                }
                if res <= 0.0 {
                    prop_assert!(det.iter().any(|&d| d <= 1e-12));
                }
            }
        }

        #[test]
        fn bridging_mix_lands_on_hyperplane((m, seed) in instance()) {
            let mut r = rng(seed ^ 4);
            let (lo, hi) = m.value_bounds();
            for _ in 0..20 {
                let x: Vec<f64> = (0..m.num_states()).map(|_| r.random_range(lo..=hi)).collect();
                let s = r.random_range(0..m.num_states());
                let p1 = sample_simplex(&mut r, m.num_actions());
                let p2 = sample_simplex(&mut r, m.num_actions());
                let r1 = l_vector(&m, s, &p1).unwrap().residual(&x);
                let r2 = l_vector(&m, s, &p2).unwrap().residual(&x);
                let (plus, minus) = if r1 >= r2 { (&p1, &p2) } else { (&p2, &p1) };
                match bridging_mix(&m, s, &x, plus, minus, 0.0).unwrap() {
                    Some(mix) => {
                        prop_assert!(l_vector(&m, s, &mix).unwrap().residual(&x).abs() <= 1e-9);
                    }
                    None => prop_assert!(r1.min(r2) > 0.0 || r1.max(r2) < 0.0),
                }
            }
        }
    }
}
