//! The small worked instances used throughout the tests, figures and fixtures.
//!
//! None of them come with a discount factor; all use [`DEFAULT_GAMMA`].

use crate::instance::Instance;
use crate::mdp::{Mdp, Policy};
use crate::rmdp::{SARectangularSet, SRectangularSet, UncertaintySet};

pub const DEFAULT_GAMMA: f64 = 0.9;

fn kernel2(a: [f64; 2], b: [f64; 2]) -> Vec<Vec<f64>> {
    vec![a.to_vec(), b.to_vec()]
}

fn policy(rows: &[&[f64]]) -> Policy {
    Policy::new(rows.iter().map(|r| r.to_vec()).collect()).expect("built-in policy")
}

fn rmdp(rewards: Vec<Vec<f64>>, per_state: Vec<Vec<Vec<Vec<f64>>>>) -> (Mdp, SRectangularSet) {
    let u = SRectangularSet::new(per_state).expect("built-in uncertainty set");
    let m = Mdp::checked(DEFAULT_GAMMA, rewards, u.nominal_kernel()).expect("built-in MDP");
    (m, u)
}

/// Two states, three actions: the planar value-space polytope.
pub fn fig2() -> Mdp {
    Mdp::checked(
        DEFAULT_GAMMA,
        vec![vec![0.0199, 0.6097, 0.8313], vec![0.4044, 0.5534, 0.8319]],
        vec![
            vec![
                vec![0.7793, 0.2207],
                vec![0.9713, 0.0287],
                vec![0.0668, 0.9332],
            ],
            vec![
                vec![0.0676, 0.9324],
                vec![0.5929, 0.4071],
                vec![0.2497, 0.7503],
            ],
        ],
    )
    .expect("built-in MDP")
}

pub fn fig2_policy() -> Policy {
    policy(&[&[0.2, 0.3, 0.5], &[0.3, 0.1, 0.6]])
}

/// Three states, two actions.
pub fn fig1b() -> Mdp {
    Mdp::checked(
        DEFAULT_GAMMA,
        vec![vec![0.5, 0.8], vec![0.4, 0.2], vec![0.2, 0.6]],
        vec![
            vec![vec![0.14, 0.75, 0.11], vec![0.44, 0.45, 0.11]],
            vec![vec![0.23, 0.19, 0.58], vec![0.44, 0.32, 0.24]],
            vec![vec![0.45, 0.43, 0.12], vec![0.14, 0.54, 0.32]],
        ],
    )
    .expect("built-in MDP")
}

pub fn fig1b_policy() -> Policy {
    policy(&[&[0.46, 0.54], &[0.38, 0.62], &[0.49, 0.51]])
}

/// Two candidate kernels per state.
pub fn fig4() -> (Mdp, SRectangularSet) {
    rmdp(
        vec![vec![0.5, 0.6], vec![0.4, 0.7]],
        vec![
            vec![
                kernel2([0.78, 0.22], [0.79, 0.21]),
                kernel2([0.85, 0.15], [0.99, 0.01]),
            ],
            vec![
                kernel2([0.59, 0.41], [0.92, 0.08]),
                kernel2([0.60, 0.40], [0.39, 0.61]),
            ],
        ],
    )
}

/// Policy shared by [`fig4`] and [`fig5`].
pub fn fig4_policy() -> Policy {
    policy(&[&[0.45, 0.55], &[0.10, 0.90]])
}

/// Four candidate kernels at the first state, one at the second.
pub fn fig5() -> (Mdp, SRectangularSet) {
    rmdp(
        vec![vec![0.5, 0.6], vec![0.4, 0.7]],
        vec![
            vec![
                kernel2([0.78, 0.22], [0.79, 0.21]),
                kernel2([0.85, 0.15], [0.99, 0.01]),
                kernel2([0.92, 0.08], [0.99, 0.01]),
                kernel2([0.92, 0.08], [0.83, 0.17]),
            ],
            vec![kernel2([0.59, 0.41], [0.92, 0.08])],
        ],
    )
}

/// The s-rectangular instance behind the robust value space pictures.
pub fn fig6() -> (Mdp, SRectangularSet) {
    rmdp(
        vec![vec![0.27, 0.9398], vec![0.3374, 0.2212]],
        vec![
            vec![
                kernel2([0.95, 0.05], [0.17, 0.83]),
                kernel2([0.24, 0.76], [0.05, 0.95]),
            ],
            vec![
                kernel2([0.07, 0.93], [0.83, 0.17]),
                kernel2([0.70, 0.30], [0.23, 0.77]),
            ],
        ],
    )
}

pub fn fig6_policy() -> Policy {
    policy(&[&[0.8, 0.2], &[0.9, 0.1]])
}

/// The (s,a)-rectangular counterpart of [`fig6`], built from the same rows.
pub fn fig8b() -> (Mdp, SARectangularSet) {
    let u = SARectangularSet::new(vec![
        vec![
            vec![vec![0.95, 0.05], vec![0.24, 0.76]],
            vec![vec![0.17, 0.83], vec![0.05, 0.95]],
        ],
        vec![
            vec![vec![0.07, 0.93], vec![0.70, 0.30]],
            vec![vec![0.83, 0.17], vec![0.23, 0.77]],
        ],
    ])
    .expect("built-in uncertainty set");
    let m = Mdp::checked(
        DEFAULT_GAMMA,
        vec![vec![0.27, 0.9398], vec![0.3374, 0.2212]],
        u.nominal_kernel(),
    )
    .expect("built-in MDP");
    (m, u)
}

/// An s-rectangular instance whose robust value space is not star-shaped.
pub fn fig11b() -> (Mdp, SRectangularSet) {
    rmdp(
        vec![vec![0.24, 0.998], vec![0.3574, 0.412]],
        vec![
            vec![
                kernel2([0.95, 0.05], [0.05, 0.95]),
                kernel2([0.24, 0.76], [0.95, 0.05]),
            ],
            vec![
                kernel2([0.2, 0.8], [0.99, 0.01]),
                kernel2([0.2, 0.8], [0.01, 0.99]),
            ],
        ],
    )
}

/// One action; the adversary at state 1 picks between staying and falling
/// into the zero-reward absorbing state 2. Robust value is exactly (1, 0).
pub fn routing_rmdp() -> (Mdp, SRectangularSet) {
    rmdp(
        vec![vec![1.0], vec![0.0]],
        vec![
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            vec![vec![vec![0.0, 1.0]]],
        ],
    )
}

/// Every named instance, for fixtures and round-trip tests.
pub fn all_names() -> &'static [&'static str] {
    &["fig1b", "fig2", "fig4", "fig5", "fig6", "fig8b", "fig11b"]
}

/// Named instance with its listed policy, if it has one.
pub fn instance(name: &str) -> Option<Instance> {
    let s = |(m, u): (Mdp, SRectangularSet)| {
        Instance::with_uncertainty(&m, UncertaintySet::S(u)).expect("built-in")
    };
    Some(match name {
        "fig1b" => Instance::from_mdp(fig1b()).with_policy(fig1b_policy()),
        "fig2" => Instance::from_mdp(fig2()).with_policy(fig2_policy()),
        "fig4" => s(fig4()).with_policy(fig4_policy()),
        "fig5" => s(fig5()).with_policy(fig4_policy()),
        "fig6" => s(fig6()).with_policy(fig6_policy()),
        "fig8b" => {
            let (m, u) = fig8b();
            Instance::with_uncertainty(&m, UncertaintySet::SA(u)).expect("built-in")
        }
        "fig11b" => s(fig11b()),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceKind;

    #[test]
    fn every_name_resolves() {
        for name in all_names() {
            assert!(instance(name).is_some(), "{name}");
        }
        assert!(instance("fig9").is_none());
        assert_eq!(instance("fig8b").unwrap().kind(), InstanceKind::SaRect);
        assert_eq!(instance("fig2").unwrap().kind(), InstanceKind::Mdp);
    }
}
