use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::mdp::Mdp;
use crate::rmdp::{SARectangularSet, SRectangularSet, UncertaintySet};
use crate::sample::{random_kernel, random_mdp, rng, sample_simplex};

use super::SuiteConfig;

/// Most rows drawn per state-action pair for (s,a)-rectangular instances.
pub const SA_ROWS_MAX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateKind {
    Mdp,
    SRect,
    SaRect,
}

/// Random instance with sizes drawn from the configured ranges, rewards
/// uniform in `[0, 1)` and every probability row uniform on the simplex.
pub fn generate_instance(cfg: &SuiteConfig, kind: GenerateKind, seed: u64) -> Instance {
    let mut r = rng(seed);
    let s = r.random_range(cfg.states[0]..=cfg.states[1]);
    let a = r.random_range(cfg.actions[0]..=cfg.actions[1]);
    let m = random_mdp(&mut r, s, a, cfg.gamma);
    match kind {
        GenerateKind::Mdp => Instance::from_mdp(m),
        GenerateKind::SRect => {
            let per_state = (0..s)
                .map(|_| {
                    let k = r.random_range(cfg.candidates[0]..=cfg.candidates[1]);
                    (0..k).map(|_| random_kernel(&mut r, s, a)).collect()
                })
                .collect();
            let u = SRectangularSet::new(per_state).expect("simplex rows");
            Instance::with_uncertainty(&m, UncertaintySet::S(u)).expect("matching shapes")
        }
        GenerateKind::SaRect => {
            let hi = cfg.candidates[1]
                .min(SA_ROWS_MAX)
                .max(cfg.candidates[0].min(SA_ROWS_MAX));
            let lo = cfg.candidates[0].min(hi);
            let per_sa = (0..s)
                .map(|_| {
                    (0..a)
                        .map(|_| {
                            let k = r.random_range(lo..=hi);
                            (0..k).map(|_| sample_simplex(&mut r, s)).collect()
                        })
                        .collect()
                })
                .collect();
            let u = SARectangularSet::new(per_sa).expect("simplex rows");
            Instance::with_uncertainty(&m, UncertaintySet::SA(u)).expect("matching shapes")
        }
    }
}

/// Uniform point of the value bounding box.
pub fn box_point<R: Rng + ?Sized>(r: &mut R, m: &Mdp) -> Vec<f64> {
    let (lo, hi) = m.value_bounds();
    (0..m.num_states())
        .map(|_| if hi > lo { r.random_range(lo..=hi) } else { lo })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceKind;
    use crate::mdp::validate_mdp;

    #[test]
    fn same_seed_same_instance() {
        let cfg = SuiteConfig::default();
        for kind in [GenerateKind::Mdp, GenerateKind::SRect, GenerateKind::SaRect] {
            assert_eq!(
                generate_instance(&cfg, kind, 9),
                generate_instance(&cfg, kind, 9)
            );
        }
        assert_ne!(
            generate_instance(&cfg, GenerateKind::SRect, 9),
            generate_instance(&cfg, GenerateKind::SRect, 10)
        );
    }

    #[test]
    fn plain_kind_is_a_singleton_set() {
        let cfg = SuiteConfig::default();
        let inst = generate_instance(&cfg, GenerateKind::Mdp, 4);
        assert_eq!(inst.kind(), InstanceKind::Mdp);
        let u = inst.s_rectangular(4096).unwrap();
        assert!(u.is_singleton());
        assert_eq!(u.nominal_kernel(), inst.mdp.kernel());
    }

    #[test]
    fn thousand_instances_are_valid() {
        let cfg = SuiteConfig::default();
        for i in 0..1000 {
            for kind in [GenerateKind::SRect, GenerateKind::SaRect] {
                let inst = generate_instance(&cfg, kind, i);
                assert!(validate_mdp(&inst.mdp).is_empty());
                let m = &inst.mdp;
                assert!((cfg.states[0]..=cfg.states[1]).contains(&m.num_states()));
                assert!((cfg.actions[0]..=cfg.actions[1]).contains(&m.num_actions()));
                let u = inst.s_rectangular(4096).unwrap();
                assert!(u.combination_count() <= 4096);
                assert!(m.rewards().iter().flatten().all(|r| (0.0..1.0).contains(r)));
                // parsing re-validates every row
                assert_eq!(Instance::parse(&inst.to_json()).unwrap(), inst);
            }
        }
    }
}
