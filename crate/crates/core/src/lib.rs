//! Value-space geometry of finite Markov decision processes and their robust
//! counterparts under rectangular uncertainty.
//!
//! * [`mdp`]: models, policies and exact policy evaluation.
//! * [`geometry`]: hyperplanes through policy values and value-space membership.
//! * [`rmdp`]: rectangular uncertainty sets and robust evaluation.
//! * [`robust_geometry`]: conic regions and robust value-space membership.
//! * [`reduction`]: extreme-point reduction of candidate kernels.
//! * [`harness`]: random instances, the property suite and figure data.

pub mod builtin;
pub mod error;
pub mod format;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod instance;
pub mod lp;
pub mod mdp;
pub mod reduction;
pub mod rmdp;
pub mod robust_geometry;
pub mod sample;

pub use error::{Error, Result};
pub use mdp::{
    evaluate_policy, policy_reward, policy_transition, validate_mdp, Mdp, Policy, ValueVector,
};
pub use rmdp::{
    brute_force_robust_value, robust_evaluate_policy, RobustEvalResult, SARectangularSet,
    SRectangularSet, UncertaintySet,
};
