//! The property suite: every geometric identity checked on random instances.
//!
//! Each check turns one instance and one probe seed into a single metric and
//! compares it with a fixed limit. Instances and probe seeds are derived from
//! the suite seed, so a run is reproducible bit for bit and every failure can
//! be replayed from its record alone.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{best_pure_row, maximin_row_mix};
use crate::geometry::{
    agreement_slice_sample, bridging_mix, intersect_policy_hyperplanes, l_vector,
    value_space_membership, MembershipReport,
};
use crate::instance::{Instance, InstanceFile};
use crate::mdp::{evaluate_policy, one_hot, Mdp, Policy};
use crate::reduction::reduce_uncertainty;
use crate::rmdp::{
    brute_force_robust_value, one_step_payoff, product_indices, robust_bellman_apply,
    robust_evaluate_policy, robust_optimal_value, RectMode, SRectangularSet, UncertaintySet,
    DEFAULT_COMBINATION_CAP,
};
use crate::robust_geometry::{
    axis_line_interval, conic_bridging_mix, conic_membership, conic_region, region_bounds,
    robust_space_membership, robust_value_at_cone_intersection, robust_violation, AxisScan,
};
use crate::sample::{derive_seed, random_kernel, random_policy, rng, sample_simplex};

use super::generate::{box_point, generate_instance, GenerateKind};

/// Property identifiers; the snake-case name is the anchor printed in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    HyperplaneIntersectionEqualsEvaluation,
    SampledValuesSatisfyMembership,
    NonmembersFarFromSampledValues,
    BridgingMixLandsOnHyperplane,
    DeterministicHalfspacesCover,
    AgreementSliceOnHyperplane,
    RobustFixedPointMatchesEnumeration,
    WorstKernelReproducesValue,
    RobustValueBelowEveryKernel,
    ExtraCandidateNeverRaisesValue,
    RobustBellmanContraction,
    MaximinDominatesPureRows,
    OptimalValueDominatesPolicies,
    RobustValueOnConicSurface,
    ApexOnEveryHyperplane,
    ConeIntersectionIsolatesRobustValue,
    RobustValuesSatisfyMembership,
    ConicBridgingMixLandsOnSurface,
    PlusSideDeterministicUnion,
    MinusSideInclusion,
    SaRectangularBoundsCoincide,
    RegionBoundsChain,
    ActiveSubsetPreservesValues,
    ReducedSetPreservesMembership,
    PolarConeMembershipPreserved,
    ReductionIdempotent,
    AxisLinesMeetSpaceInSegments,
}

impl CheckId {
    pub const ALL: [CheckId; 27] = [
        CheckId::HyperplaneIntersectionEqualsEvaluation,
        CheckId::SampledValuesSatisfyMembership,
        CheckId::NonmembersFarFromSampledValues,
        CheckId::BridgingMixLandsOnHyperplane,
        CheckId::DeterministicHalfspacesCover,
        CheckId::AgreementSliceOnHyperplane,
        CheckId::RobustFixedPointMatchesEnumeration,
        CheckId::WorstKernelReproducesValue,
        CheckId::RobustValueBelowEveryKernel,
        CheckId::ExtraCandidateNeverRaisesValue,
        CheckId::RobustBellmanContraction,
        CheckId::MaximinDominatesPureRows,
        CheckId::OptimalValueDominatesPolicies,
        CheckId::RobustValueOnConicSurface,
        CheckId::ApexOnEveryHyperplane,
        CheckId::ConeIntersectionIsolatesRobustValue,
        CheckId::RobustValuesSatisfyMembership,
        CheckId::ConicBridgingMixLandsOnSurface,
        CheckId::PlusSideDeterministicUnion,
        CheckId::MinusSideInclusion,
        CheckId::SaRectangularBoundsCoincide,
        CheckId::RegionBoundsChain,
        CheckId::ActiveSubsetPreservesValues,
        CheckId::ReducedSetPreservesMembership,
        CheckId::PolarConeMembershipPreserved,
        CheckId::ReductionIdempotent,
        CheckId::AxisLinesMeetSpaceInSegments,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .expect("unit variant")
    }

    pub fn parse(name: &str) -> Option<CheckId> {
        serde_json::from_value(serde_json::Value::String(name.to_owned())).ok()
    }

    /// Property being checked and the meaning of the metric.
    pub fn statement(self) -> &'static str {
        use CheckId::*;
        match self {
            HyperplaneIntersectionEqualsEvaluation => {
                "the S hyperplanes of a policy meet exactly at its value; metric: sup distance"
            }
            SampledValuesSatisfyMembership => "policy values pass the value-space test; metric: largest violation",
            NonmembersFarFromSampledValues => {
                "points failing the value-space test are away from every sampled value; metric: smallest distance"
            }
            BridgingMixLandsOnHyperplane => {
                "mixing a plus-side row and a minus-side row puts the point on a hyperplane; metric: |residual|"
            }
            DeterministicHalfspacesCover => {
                "a point on one side of a mixed row's hyperplane is on that side for some action; metric: misses"
            }
            AgreementSliceOnHyperplane => {
                "values of policies sharing a row stay on that row's hyperplane; metric: |residual|"
            }
            RobustFixedPointMatchesEnumeration => {
                "robust fixed point equals the elementwise-minimal enumerated value; metric: sup distance"
            }
            WorstKernelReproducesValue => {
                "exact value of the extracted worst kernel matches the iterate; metric: sup distance"
            }
            RobustValueBelowEveryKernel => "robust value is below the value under every kernel; metric: largest excess",
            ExtraCandidateNeverRaisesValue => {
                "adding a candidate kernel never raises the robust value; metric: largest increase"
            }
            RobustBellmanContraction => "robust operator contracts by gamma; metric: excess over gamma |V - W|",
            MaximinDominatesPureRows => {
                "maximin value lies between the pure-row bounds; metric: largest violation"
            }
            OptimalValueDominatesPolicies => {
                "robust optimal value dominates every sampled policy; metric: largest excess"
            }
            RobustValueOnConicSurface => {
                "robust values lie on the cone surface of every state; metric: |max residual|"
            }
            ApexOnEveryHyperplane => "the apex lies on every hyperplane of a conic region; metric: |residual|",
            ConeIntersectionIsolatesRobustValue => {
                "the robust value is the only common point of its cone surfaces; metric: surface residual"
            }
            RobustValuesSatisfyMembership => {
                "robust policy values pass the robust-space test; metric: largest violation"
            }
            ConicBridgingMixLandsOnSurface => {
                "mixing rows on both sides of a cone puts the point on its surface; metric: |max residual|"
            }
            PlusSideDeterministicUnion => {
                "plus-side cone membership is decided by deterministic rows; metric: misses"
            }
            MinusSideInclusion => {
                "deterministic minus-side cones are inside the mixed-row region; metric: misses"
            }
            SaRectangularBoundsCoincide => {
                "for (s,a)-rectangular sets the deterministic inner bound is exact; metric: mismatches"
            }
            RegionBoundsChain => "inner bound, exact test and outer bound are nested; metric: breaks",
            ActiveSubsetPreservesValues => {
                "injected combinations are removed and robust values are unchanged; metric: sup distance"
            }
            ReducedSetPreservesMembership => {
                "robust-space verdicts agree for the full and reduced sets; metric: mismatches"
            }
            PolarConeMembershipPreserved => {
                "cone residuals agree for the full and reduced sets; metric: largest difference"
            }
            ReductionIdempotent => "reducing a reduced set removes nothing; metric: removals",
            AxisLinesMeetSpaceInSegments => {
                "axis-parallel lines meet the robust space in one segment; metric: non-contiguous lines"
            }
        }
    }

    /// Pass condition on the metric.
    pub fn limit(self) -> Limit {
        use CheckId::*;
        match self {
            HyperplaneIntersectionEqualsEvaluation
            | SampledValuesSatisfyMembership
            | BridgingMixLandsOnHyperplane => Limit::AtMost(1e-9),
            AgreementSliceOnHyperplane
            | WorstKernelReproducesValue
            | RobustValueBelowEveryKernel => Limit::AtMost(1e-9),
            ExtraCandidateNeverRaisesValue | MaximinDominatesPureRows => Limit::AtMost(1e-9),
            NonmembersFarFromSampledValues => Limit::AtLeast(1e-9),
            RobustFixedPointMatchesEnumeration
            | RobustValueOnConicSurface
            | ConeIntersectionIsolatesRobustValue => Limit::AtMost(1e-8),
            RobustValuesSatisfyMembership
            | ConicBridgingMixLandsOnSurface
            | ActiveSubsetPreservesValues => Limit::AtMost(1e-8),
            RobustBellmanContraction => Limit::AtMost(1e-12),
            OptimalValueDominatesPolicies => Limit::AtMost(1e-6),
            ApexOnEveryHyperplane | PolarConeMembershipPreserved => Limit::AtMost(1e-10),
            DeterministicHalfspacesCover
            | PlusSideDeterministicUnion
            | MinusSideInclusion
            | SaRectangularBoundsCoincide
            | RegionBoundsChain
            | ReducedSetPreservesMembership
            | ReductionIdempotent
            | AxisLinesMeetSpaceInSegments => Limit::AtMost(0.0),
        }
    }

    /// Instance family the check runs on.
    pub fn kind(self) -> GenerateKind {
        match self {
            CheckId::SaRectangularBoundsCoincide => GenerateKind::SaRect,
            _ => GenerateKind::SRect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    AtMost(f64),
    AtLeast(f64),
}

impl Limit {
    pub fn accepts(self, metric: f64) -> bool {
        match self {
            Limit::AtMost(l) => metric <= l,
            Limit::AtLeast(l) => metric >= l,
        }
    }

    /// The worse of two metrics; NaN is worst.
    fn worse(self, a: f64, b: f64) -> f64 {
        if a.is_nan() || b.is_nan() {
            return f64::NAN;
        }
        match self {
            Limit::AtMost(_) => a.max(b),
            Limit::AtLeast(_) => a.min(b),
        }
    }

    fn failing_value(self) -> f64 {
        match self {
            Limit::AtMost(l) => l + 1.0,
            Limit::AtLeast(l) => l - 1.0,
        }
    }
}

/// Suite parameters. Size ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub num_instances: usize,
    pub states: [usize; 2],
    pub actions: [usize; 2],
    pub candidates: [usize; 2],
    pub gamma: f64,
    /// Policies evaluated per instance by policy-based checks.
    pub policies: usize,
    /// Random probes per instance by point-based checks.
    pub probes: usize,
    /// Policy values sampled per instance for the value-space checks.
    pub samples: usize,
    /// Robust evaluation tolerance.
    pub eval_tol: f64,
    pub checks: Vec<CheckId>,
    /// Test hook: forces every trial of this check to fail.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_failure: Option<CheckId>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            num_instances: 200,
            states: [2, 3],
            actions: [2, 3],
            candidates: [1, 3],
            gamma: 0.9,
            policies: 20,
            probes: 50,
            samples: 200,
            eval_tol: 1e-10,
            checks: CheckId::ALL.to_vec(),
            inject_failure: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error::InvalidArgument;
        for (name, r) in [
            ("states", self.states),
            ("actions", self.actions),
            ("candidates", self.candidates),
        ] {
            if r[0] == 0 || r[0] > r[1] {
                return Err(InvalidArgument(format!(
                    "{name} range {r:?} is empty or starts at 0"
                )));
            }
        }
        let combos = (self.candidates[1] as u128).saturating_pow(self.states[1] as u32);
        if combos > DEFAULT_COMBINATION_CAP as u128 {
            return Err(InvalidArgument(format!(
                "up to {combos} kernel combinations exceed the brute-force cap"
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(InvalidArgument(format!(
                "gamma {} not in [0,1)",
                self.gamma
            )));
        }
        if self.eval_tol.is_nan() || self.eval_tol <= 0.0 {
            return Err(InvalidArgument("eval_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: CheckId,
    pub statement: String,
    pub limit: Limit,
    pub trials: usize,
    pub passes: usize,
    pub failures: usize,
    /// Worst metric over all trials (`null` when there were none or one was NaN).
    pub worst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub check: CheckId,
    pub instance_index: usize,
    pub probe_seed: u64,
    pub metric: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub instance: InstanceFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub all_passed: bool,
    pub checks: Vec<CheckSummary>,
    pub failures: Vec<FailureRecord>,
}

struct Trial {
    check: CheckId,
    probe_seed: u64,
    metric: f64,
    error: Option<String>,
}

/// Runs every enabled check on `cfg.num_instances` generated instances.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let per_instance: Vec<(Vec<Trial>, [Instance; 2])> = (0..cfg.num_instances)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.seed, i as u64);
            let s_inst = generate_instance(cfg, GenerateKind::SRect, seed);
            let sa_inst = generate_instance(cfg, GenerateKind::SaRect, derive_seed(seed, 1));
            let trials = cfg
                .checks
                .iter()
                .map(|&check| {
                    let inst = if check.kind() == GenerateKind::SaRect {
                        &sa_inst
                    } else {
                        &s_inst
                    };
                    let probe_seed = derive_seed(seed, 1000 + check as u64);
                    let (metric, error) = match run_check(cfg, check, inst, probe_seed) {
                        Ok(v) => (v, None),
                        Err(e) => (f64::NAN, Some(e.to_string())),
                    };
                    Trial {
                        check,
                        probe_seed,
                        metric,
                        error,
                    }
                })
                .collect();
            (trials, [s_inst, sa_inst])
        })
        .collect();

    let mut checks: Vec<CheckSummary> = cfg
        .checks
        .iter()
        .map(|&check| CheckSummary {
            check,
            statement: check.statement().to_owned(),
            limit: check.limit(),
            trials: 0,
            passes: 0,
            failures: 0,
            worst: None,
        })
        .collect();
    let mut failures = Vec::new();
    for (i, (trials, insts)) in per_instance.into_iter().enumerate() {
        for (summary, t) in checks.iter_mut().zip(trials) {
            let limit = t.check.limit();
            let pass = limit.accepts(t.metric);
            summary.trials += 1;
            summary.worst = Some(match summary.worst {
                None => t.metric,
                Some(w) => limit.worse(w, t.metric),
            });
            if pass {
                summary.passes += 1;
            } else {
                summary.failures += 1;
                let inst = if t.check.kind() == GenerateKind::SaRect {
                    &insts[1]
                } else {
                    &insts[0]
                };
                failures.push(FailureRecord {
                    check: t.check,
                    instance_index: i,
                    probe_seed: t.probe_seed,
                    metric: t.metric,
                    error: t.error,
                    instance: inst.to_file(),
                });
            }
        }
    }
    for s in &mut checks {
        s.worst = s.worst.filter(|w| !w.is_nan());
    }
    Ok(SuiteReport {
        config: cfg.clone(),
        all_passed: failures.is_empty(),
        checks,
        failures,
    })
}

/// Recomputes the metric of a stored failure from its instance and probe seed.
pub fn replay(cfg: &SuiteConfig, record: &FailureRecord) -> Result<f64> {
    let inst = Instance::from_file(record.instance.clone())?;
    run_check(cfg, record.check, &inst, record.probe_seed)
}

/// Metric of one check on one instance.
pub fn run_check(
    cfg: &SuiteConfig,
    check: CheckId,
    inst: &Instance,
    probe_seed: u64,
) -> Result<f64> {
    let ctx = Ctx {
        cfg,
        m: &inst.mdp,
        u: inst.s_rectangular(DEFAULT_COMBINATION_CAP)?,
    };
    let mut r = rng(probe_seed);
    let metric = ctx.run(check, &mut r)?;
    if cfg.inject_failure == Some(check) {
        return Ok(check.limit().failing_value());
    }
    Ok(metric)
}

type Rng8 = rand_chacha::ChaCha8Rng;

struct Ctx<'a> {
    cfg: &'a SuiteConfig,
    m: &'a Mdp,
    u: SRectangularSet,
}

/// Largest amount by which a report's bounds are violated (`<= 0` inside).
fn violation(rep: &MembershipReport) -> f64 {
    rep.per_state
        .iter()
        .map(|c| (c.lower - c.coordinate).max(c.coordinate - c.upper))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_excess(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .fold(f64::NEG_INFINITY, f64::max)
}

impl Ctx<'_> {
    fn ns(&self) -> usize {
        self.m.num_states()
    }

    fn na(&self) -> usize {
        self.m.num_actions()
    }

    fn policy(&self, r: &mut Rng8) -> Policy {
        random_policy(r, self.ns(), self.na())
    }

    fn robust(&self, u: &SRectangularSet, pi: &Policy) -> Result<crate::ValueVector> {
        Ok(robust_evaluate_policy(self.m, u, pi, self.cfg.eval_tol)?.value)
    }

    fn run(&self, check: CheckId, r: &mut Rng8) -> Result<f64> {
        use CheckId::*;
        let (m, u, cfg) = (self.m, &self.u, self.cfg);
        let mut worst: f64 = 0.0;
        let mut count = 0usize;
        match check {
            HyperplaneIntersectionEqualsEvaluation => {
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    worst = worst.max(sup(
                        &intersect_policy_hyperplanes(m, &pi)?,
                        &evaluate_policy(m, &pi)?,
                    ));
                }
            }
            SampledValuesSatisfyMembership => {
                for v in agreement_slice_sample(m, &[], cfg.samples.max(1), r.random())? {
                    worst = worst.max(violation(&value_space_membership(m, &v, 1e-9)?));
                }
            }
            NonmembersFarFromSampledValues => {
                let values = agreement_slice_sample(m, &[], cfg.samples.max(1), r.random())?;
                let mut nearest = f64::MAX;
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    if !value_space_membership(m, &x, 1e-9)?.verdict {
                        for v in &values {
                            nearest = nearest.min(sup(&x, v));
                        }
                    }
                }
                return Ok(nearest);
            }
            BridgingMixLandsOnHyperplane => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let p1 = sample_simplex(r, self.na());
                    let p2 = sample_simplex(r, self.na());
                    let (r1, r2) = (
                        l_vector(m, s, &p1)?.residual(&x),
                        l_vector(m, s, &p2)?.residual(&x),
                    );
                    let (plus, minus) = if r1 >= r2 { (&p1, &p2) } else { (&p2, &p1) };
                    if let Some(mix) = bridging_mix(m, s, &x, plus, minus, 1e-12)? {
                        worst = worst.max(l_vector(m, s, &mix)?.residual(&x).abs());
                    }
                }
            }
            DeterministicHalfspacesCover => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let res = l_vector(m, s, &sample_simplex(r, self.na()))?.residual(&x);
                    let det = (0..self.na())
                        .map(|a| l_vector(m, s, &one_hot(a, self.na())).map(|l| l.residual(&x)))
                        .collect::<Result<Vec<_>>>()?;
                    if res >= 0.0 && !det.iter().any(|&d| d >= -1e-12) {
                        count += 1;
                    }
                    if res <= 0.0 && !det.iter().any(|&d| d <= 1e-12) {
                        count += 1;
                    }
                }
                return Ok(count as f64);
            }
            AgreementSliceOnHyperplane => {
                let s = r.random_range(0..self.ns());
                let row = sample_simplex(r, self.na());
                let l = l_vector(m, s, &row)?;
                for v in agreement_slice_sample(m, &[(s, row)], cfg.policies.max(1), r.random())? {
                    worst = worst.max(l.residual(&v).abs());
                }
            }
            RobustFixedPointMatchesEnumeration => {
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    let bf = brute_force_robust_value(m, u, &pi, DEFAULT_COMBINATION_CAP)?;
                    worst = worst.max(sup(&self.robust(u, &pi)?, &bf.value));
                }
            }
            WorstKernelReproducesValue => {
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    worst = worst.max(robust_evaluate_policy(m, u, &pi, cfg.eval_tol)?.residual);
                }
            }
            RobustValueBelowEveryKernel => {
                let sizes: Vec<usize> = (0..self.ns()).map(|s| u.candidates(s).len()).collect();
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    let v = self.robust(u, &pi)?;
                    for choice in product_indices(&sizes) {
                        let vp = evaluate_policy(&m.with_kernel(u.assemble(&choice))?, &pi)?;
                        worst = worst.max(max_excess(&v, &vp));
                    }
                }
            }
            ExtraCandidateNeverRaisesValue => {
                let s = r.random_range(0..self.ns());
                let bigger = u.with_extra_candidate(s, random_kernel(r, self.ns(), self.na()))?;
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    worst = worst.max(max_excess(
                        &self.robust(&bigger, &pi)?,
                        &self.robust(u, &pi)?,
                    ));
                }
            }
            RobustBellmanContraction => {
                worst = f64::NEG_INFINITY;
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    let (v, w) = (box_point(r, m), box_point(r, m));
                    let tv = robust_bellman_apply(m, u, &pi, &v)?;
                    let tw = robust_bellman_apply(m, u, &pi, &w)?;
                    worst = worst.max(sup(&tv, &tw) - m.gamma() * sup(&v, &w));
                }
            }
            MaximinDominatesPureRows => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let q = one_step_payoff(m, u.candidates(s), s, &x);
                    let sol = maximin_row_mix(&q)?;
                    let upper = (0..q[0].len())
                        .map(|k| q.iter().map(|row| row[k]).fold(f64::NEG_INFINITY, f64::max))
                        .fold(f64::INFINITY, f64::min);
                    worst = worst
                        .max(best_pure_row(&q).1 - sol.value)
                        .max(sol.value - upper);
                }
            }
            OptimalValueDominatesPolicies => {
                let opt = robust_optimal_value(
                    m,
                    &UncertaintySet::S(u.clone()),
                    cfg.eval_tol,
                    RectMode::S,
                )?;
                worst = f64::NEG_INFINITY;
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    worst = worst.max(max_excess(&self.robust(u, &pi)?, &opt.value));
                }
            }
            RobustValueOnConicSurface => {
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    let v = self.robust(u, &pi)?;
                    for s in 0..self.ns() {
                        let region = conic_region(m, u, s, pi.row(s))?;
                        worst = worst.max(region.max_residual(&v).1.abs());
                    }
                }
            }
            ApexOnEveryHyperplane => {
                for _ in 0..cfg.probes {
                    for s in 0..self.ns() {
                        worst = worst.max(
                            conic_region(m, u, s, &sample_simplex(r, self.na()))?.apex_residual,
                        );
                    }
                }
            }
            ConeIntersectionIsolatesRobustValue => {
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    let c = robust_value_at_cone_intersection(m, u, &pi, 1e-8)?;
                    let probe = if c.probe_failures.is_empty() {
                        0.0
                    } else {
                        f64::MAX
                    };
                    worst = worst.max(c.surface_residual).max(probe);
                }
            }
            RobustValuesSatisfyMembership => {
                worst = f64::NEG_INFINITY;
                for _ in 0..cfg.policies {
                    let v = self.robust(u, &self.policy(r))?;
                    worst = worst.max(violation(&robust_space_membership(m, u, &v, 1e-8)?));
                }
            }
            ConicBridgingMixLandsOnSurface => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let b = region_bounds(m, u, &x, s, 1e-12)?;
                    let q = one_step_payoff(m, u.candidates(s), s, &x);
                    let mins: Vec<f64> = q
                        .iter()
                        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
                        .collect();
                    let (low, low_v) =
                        mins.iter()
                            .enumerate()
                            .fold(
                                (0, f64::INFINITY),
                                |acc, (a, &v)| if v < acc.1 { (a, v) } else { acc },
                            );
                    if !b.in_exact || x[s] < low_v {
                        continue;
                    }
                    let plus = one_hot(low, self.na());
                    if let Some(mix) =
                        conic_bridging_mix(m, u, s, &x, &plus, &b.maximin.mix, 1e-12)?
                    {
                        worst = worst.max(conic_region(m, u, s, &mix)?.max_residual(&x).1.abs());
                    } else {
                        return Ok(f64::MAX);
                    }
                }
            }
            PlusSideDeterministicUnion => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let mixed = conic_region(m, u, s, &sample_simplex(r, self.na()))?;
                    if conic_membership(&mixed, &x, 1e-12)?.inside_plus {
                        let mut any = false;
                        for a in 0..self.na() {
                            let det = conic_region(m, u, s, &one_hot(a, self.na()))?;
                            any |= conic_membership(&det, &x, 1e-12)?.inside_plus;
                        }
                        count += usize::from(!any);
                    }
                }
                return Ok(count as f64);
            }
            MinusSideInclusion => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let b = region_bounds(m, u, &x, s, 1e-9)?;
                    let mut det_inside = false;
                    for a in 0..self.na() {
                        let det = conic_region(m, u, s, &one_hot(a, self.na()))?;
                        det_inside |= conic_membership(&det, &x, 1e-9)?.inside_minus;
                    }
                    let mix = conic_region(m, u, s, &b.maximin.mix)?;
                    let mix_inside = conic_membership(&mix, &x, 1e-9)?.inside_minus;
                    count += usize::from(det_inside && !(b.in_exact && mix_inside));
                }
                return Ok(count as f64);
            }
            SaRectangularBoundsCoincide => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let b = region_bounds(m, u, &x, s, 1e-9)?;
                    if (x[s] - b.maximin.value).abs() > 1e-6 && b.in_lower_bound != b.in_exact {
                        count += 1;
                    }
                }
                return Ok(count as f64);
            }
            RegionBoundsChain => {
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    count += usize::from(!region_bounds(m, u, &x, s, 1e-9)?.chain_holds);
                }
                return Ok(count as f64);
            }
            ActiveSubsetPreservesValues => {
                let (aug, injected) = self.augment(r)?;
                let (red, rep) = reduce_uncertainty(&aug)?;
                // a single candidate and its rounded copy may drop either one
                let all_removed = injected
                    .iter()
                    .zip(&rep.groups)
                    .all(|(&k, g)| g.kept.len() == k && (k == 1 || !g.kept.contains(&k)));
                if !all_removed || rep.max_certificate_error() > 1e-9 {
                    return Ok(f64::MAX);
                }
                for _ in 0..cfg.policies {
                    let pi = self.policy(r);
                    worst = worst.max(sup(&self.robust(&aug, &pi)?, &self.robust(&red, &pi)?));
                }
            }
            ReducedSetPreservesMembership => {
                let (aug, _) = self.augment(r)?;
                let (red, _) = reduce_uncertainty(&aug)?;
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    if robust_violation(m, &aug, &x)?.abs() <= 1e-6 {
                        continue;
                    }
                    let full = robust_space_membership(m, &aug, &x, 1e-9)?.verdict;
                    let reduced = robust_space_membership(m, &red, &x, 1e-9)?.verdict;
                    count += usize::from(full != reduced);
                }
                return Ok(count as f64);
            }
            PolarConeMembershipPreserved => {
                let (aug, _) = self.augment(r)?;
                let (red, _) = reduce_uncertainty(&aug)?;
                for _ in 0..cfg.probes {
                    let x = box_point(r, m);
                    let s = r.random_range(0..self.ns());
                    let row = sample_simplex(r, self.na());
                    let full = conic_region(m, &aug, s, &row)?.max_residual(&x).1;
                    let reduced = conic_region(m, &red, s, &row)?.max_residual(&x).1;
                    worst = worst.max((full - reduced).abs());
                }
            }
            ReductionIdempotent => {
                let (aug, _) = self.augment(r)?;
                let (once, _) = reduce_uncertainty(&aug)?;
                let (twice, rep) = reduce_uncertainty(&once)?;
                return Ok((rep.removed_count() + usize::from(once != twice)) as f64);
            }
            AxisLinesMeetSpaceInSegments => {
                let v = self.robust(u, &self.policy(r))?;
                for axis in 0..self.ns() {
                    let scan = AxisScan::over_value_box(m, &v, axis);
                    let iv = axis_line_interval(m, u, &v, axis, scan, 1e-9)?;
                    count += usize::from(!iv.contiguous || iv.interval.is_none());
                }
                return Ok(count as f64);
            }
        }
        Ok(worst)
    }

    /// Appends one random convex combination of the existing candidates to
    /// every state; returns the set and the injected index per state.
    fn augment(&self, r: &mut Rng8) -> Result<(SRectangularSet, Vec<usize>)> {
        let mut aug = self.u.clone();
        let mut injected = Vec::with_capacity(self.ns());
        for s in 0..self.ns() {
            let cands = self.u.candidates(s);
            let w = sample_simplex(r, cands.len());
            let mix: Vec<Vec<f64>> = (0..self.na())
                .map(|a| {
                    (0..self.ns())
                        .map(|j| cands.iter().zip(&w).map(|(k, wk)| wk * k[a][j]).sum())
                        .collect()
                })
                .collect();
            // guard against rows drifting off the simplex by rounding
            let mix = mix
                .into_iter()
                .map(|row: Vec<f64>| {
                    let t: f64 = row.iter().sum();
                    row.into_iter().map(|p| p / t).collect()
                })
                .collect();
            injected.push(cands.len());
            aug = aug.with_extra_candidate(s, mix)?;
        }
        Ok((aug, injected))
    }
}
