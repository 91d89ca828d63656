//! Conic regions and membership in the robust value space.
//!
//! Under s-rectangular uncertainty, fixing an action row `pi_s` at `s` yields
//! one hyperplane per candidate kernel. They share the apex
//! `r^{pi_s} / (1 - gamma) * 1`, and the robust values of policies playing
//! `pi_s` at `s` lie on the surface of the cone where the largest residual is
//! zero.

use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};
use crate::game::{best_pure_row, maximin_row_mix, MaximinSolution};
use crate::geometry::{
    argext, check_tol, l_vector_for_kernel, Hyperplane, MembershipReport, StateCertificate, Witness,
};
use crate::mdp::{check_distribution, dot, one_hot, Mdp, Policy, ValueVector};
use crate::rmdp::{one_step_payoff, robust_evaluate_policy, SRectangularSet};

/// Largest apex residual accepted when a region is built.
pub const APEX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicRegion {
    pub state: usize,
    pub pi_s: Vec<f64>,
    /// One hyperplane per candidate kernel, in candidate order.
    pub hyperplanes: Vec<Hyperplane>,
    pub apex: ValueVector,
    /// Largest `|residual|` of the apex over all hyperplanes.
    pub apex_residual: f64,
}

impl ConicRegion {
    /// `(k, max_k residual_k(x))`, lowest index on ties.
    pub fn max_residual(&self, x: &[f64]) -> (usize, f64) {
        let res: Vec<f64> = self.hyperplanes.iter().map(|h| h.residual(x)).collect();
        argext(&res, |a, b| a > b)
    }
}

pub fn conic_region(m: &Mdp, u: &SRectangularSet, s: usize, pi_s: &[f64]) -> Result<ConicRegion> {
    u.check_against(m)?;
    if s >= m.num_states() {
        return Err(Error::InvalidArgument(format!("state {s} out of range")));
    }
    let hyperplanes = u
        .candidates(s)
        .iter()
        .map(|k| l_vector_for_kernel(m, s, k, pi_s).map(|lvec| Hyperplane { lvec }))
        .collect::<Result<Vec<_>>>()?;
    let offset = dot(&m.rewards()[s], pi_s);
    let apex = ValueVector(vec![offset / (1.0 - m.gamma()); m.num_states()]);
    let apex_residual = hyperplanes
        .iter()
        .map(|h| h.residual(&apex).abs())
        .fold(0.0, f64::max);
    debug_assert!(apex_residual <= APEX_TOL, "apex residual {apex_residual}");
    Ok(ConicRegion {
        state: s,
        pi_s: pi_s.to_vec(),
        hyperplanes,
        apex,
        apex_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicMembership {
    pub inside_minus: bool,
    pub inside_plus: bool,
    pub on_surface: bool,
    pub max_residual: f64,
    /// Candidate attaining `max_residual`.
    pub kernel: usize,
}

pub fn conic_membership(region: &ConicRegion, x: &[f64], tol: f64) -> Result<ConicMembership> {
    dim("point", region.apex.len(), x.len())?;
    check_tol(tol)?;
    let (kernel, r) = region.max_residual(x);
    Ok(ConicMembership {
        inside_minus: r <= tol,
        inside_plus: r >= -tol,
        on_surface: r.abs() <= tol,
        max_residual: r,
        kernel,
    })
}

/// Outcome of checking that a robust value is the common point of its cone surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeIntersectionCheck {
    pub value: ValueVector,
    /// `max_s |max_k residual|` at the robust value.
    pub surface_residual: f64,
    pub on_all_surfaces: bool,
    /// Axis perturbation used by the uniqueness probe.
    pub probe_step: f64,
    /// `(state, direction)` pairs whose perturbed point stayed on every surface.
    pub probe_failures: Vec<(usize, i8)>,
    pub passed: bool,
}

/// Evaluates `pi` robustly and checks the value lies on every state's cone
/// surface, and that moving it by `10 tol / (1 - gamma)` along any axis
/// leaves at least one surface.
///
/// A unit axis step changes the residuals at its own state by at least
/// `1 - gamma`, so the probe step is scaled to leave the `tol` band by a
/// factor of ten.
pub fn robust_value_at_cone_intersection(
    m: &Mdp,
    u: &SRectangularSet,
    pi: &Policy,
    tol: f64,
) -> Result<ConeIntersectionCheck> {
    check_tol(tol)?;
    let value = robust_evaluate_policy(m, u, pi, tol * 1e-2)?.value;
    let regions = (0..m.num_states())
        .map(|s| conic_region(m, u, s, pi.row(s)))
        .collect::<Result<Vec<_>>>()?;
    let surface_dev = |x: &[f64]| {
        regions
            .iter()
            .map(|r| r.max_residual(x).1.abs())
            .fold(0.0, f64::max)
    };
    let surface_residual = surface_dev(&value);
    let on_all_surfaces = surface_residual <= tol;
    let probe_step = 10.0 * tol / (1.0 - m.gamma());
    let mut probe_failures = Vec::new();
    for j in 0..m.num_states() {
        for dir in [1i8, -1] {
            let mut x = value.0.clone();
            x[j] += f64::from(dir) * probe_step;
            if surface_dev(&x) <= tol {
                probe_failures.push((j, dir));
            }
        }
    }
    Ok(ConeIntersectionCheck {
        passed: on_all_surfaces && probe_failures.is_empty(),
        value,
        surface_residual,
        on_all_surfaces,
        probe_step,
        probe_failures,
    })
}

/// `min_k max_a q[a][k]`: the best the adversary can do against pure rows.
fn pure_minimax(q: &[Vec<f64>]) -> f64 {
    (0..q[0].len())
        .map(|k| q.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Whether `x` is the robust value of some policy.
///
/// Per state, with `q[a][k] = r_{s,a} + gamma <x, P^{(k)}_{s,a}>`: the plus side
/// needs `x_s >= min_{a,k} q - tol`, the minus side `x_s <= maximin(q) + tol`.
/// The certificate's `upper` is the guaranteed payoff of `upper_mix`: a pure
/// row whenever one already covers `x_s`, the maximin mix otherwise.
pub fn robust_space_membership(
    m: &Mdp,
    u: &SRectangularSet,
    x: &[f64],
    tol: f64,
) -> Result<MembershipReport> {
    u.check_against(m)?;
    dim("point", m.num_states(), x.len())?;
    check_tol(tol)?;
    let mut certs = Vec::with_capacity(m.num_states());
    for s in 0..m.num_states() {
        let q = one_step_payoff(m, u.candidates(s), s, x);
        let mut lower = (
            Witness {
                action: 0,
                kernel: 0,
            },
            f64::INFINITY,
        );
        for (a, row) in q.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v < lower.1 {
                    lower = (
                        Witness {
                            action: a,
                            kernel: k,
                        },
                        v,
                    );
                }
            }
        }
        let (pure_a, pure_v) = best_pure_row(&q);
        let (upper_mix, upper) = if x[s] <= pure_v + tol {
            (one_hot(pure_a, q.len()), pure_v)
        } else {
            let MaximinSolution { mix, value } = maximin_row_mix(&q)?;
            (mix, value)
        };
        certs.push(StateCertificate {
            state: s,
            coordinate: x[s],
            lower: lower.1,
            upper,
            lower_witness: lower.0,
            upper_mix,
            plus_side: x[s] >= lower.1 - tol,
            minus_side: x[s] <= upper + tol,
        });
    }
    Ok(MembershipReport::from_certificates(certs, tol))
}

/// Largest constraint violation of `x` over all states (`<= 0` inside).
pub fn robust_violation(m: &Mdp, u: &SRectangularSet, x: &[f64]) -> Result<f64> {
    u.check_against(m)?;
    dim("point", m.num_states(), x.len())?;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..m.num_states() {
        let q = one_step_payoff(m, u.candidates(s), s, x);
        let lower = q.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let upper = maximin_row_mix(&q)?.value;
        worst = worst.max(lower - x[s]).max(x[s] - upper);
    }
    Ok(worst)
}

/// Inner bound, exact test and outer bound of the minus-side region at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundsReport {
    pub state: usize,
    /// Some deterministic row keeps `x` inside all of its half-spaces.
    pub in_lower_bound: bool,
    /// Some action row keeps `x` inside all of its half-spaces.
    pub in_exact: bool,
    /// For every candidate, some action keeps `x` inside that candidate's half-space.
    pub in_upper_bound: bool,
    /// `max_a min_k q[a][k]` and the action attaining it.
    pub lower_bound: f64,
    pub lower_bound_action: usize,
    pub maximin: MaximinSolution,
    /// `min_k max_a q[a][k]`.
    pub upper_bound: f64,
    pub chain_holds: bool,
}

pub fn region_bounds(
    m: &Mdp,
    u: &SRectangularSet,
    x: &[f64],
    s: usize,
    tol: f64,
) -> Result<RegionBoundsReport> {
    u.check_against(m)?;
    dim("point", m.num_states(), x.len())?;
    check_tol(tol)?;
    if s >= m.num_states() {
        return Err(Error::InvalidArgument(format!("state {s} out of range")));
    }
    let q = one_step_payoff(m, u.candidates(s), s, x);
    let (lower_bound_action, lower_bound) = best_pure_row(&q);
    let maximin = maximin_row_mix(&q)?;
    let upper_bound = pure_minimax(&q);
    let in_lower_bound = x[s] <= lower_bound + tol;
    let in_exact = x[s] <= maximin.value + tol;
    let in_upper_bound = x[s] <= upper_bound + tol;
    Ok(RegionBoundsReport {
        state: s,
        in_lower_bound,
        in_exact,
        in_upper_bound,
        lower_bound,
        lower_bound_action,
        maximin,
        upper_bound,
        chain_holds: (!in_lower_bound || in_exact) && (!in_exact || in_upper_bound),
    })
}

/// Parameter range scanned along an axis line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScan {
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
}

impl AxisScan {
    /// 2001 steps covering the value bounding box along `axis`.
    pub fn over_value_box(m: &Mdp, base: &[f64], axis: usize) -> Self {
        let (lo, hi) = m.value_bounds();
        Self {
            t_min: lo - base[axis],
            t_max: hi - base[axis],
            steps: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisInterval {
    /// Membership interval in `t`, endpoints refined to width `1e-6`; spans
    /// the first to the last member when membership is not contiguous.
    pub interval: Option<(f64, f64)>,
    /// Maximal runs of consecutive member scan points.
    pub runs: usize,
    pub contiguous: bool,
}

const BISECT_WIDTH: f64 = 1e-6;

/// Membership of `x(t) = base + t e_axis` over the scan range.
///
/// A line that meets the space in a single point would slip between scan
/// points, so when no scan point is a member the smallest violation is
/// refined by golden-section search around the best scan point.
pub fn axis_line_interval(
    m: &Mdp,
    u: &SRectangularSet,
    base: &[f64],
    axis: usize,
    scan: AxisScan,
    tol: f64,
) -> Result<AxisInterval> {
    u.check_against(m)?;
    dim("base point", m.num_states(), base.len())?;
    check_tol(tol)?;
    if axis >= m.num_states() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    if scan.steps < 2 || scan.t_max.is_nan() || scan.t_min.is_nan() || scan.t_max <= scan.t_min {
        return Err(Error::InvalidArgument(
            "scan needs t_max > t_min and at least 2 steps".into(),
        ));
    }
    let point = |t: f64| {
        let mut x = base.to_vec();
        x[axis] += t;
        x
    };
    let member = |t: f64| robust_space_membership(m, u, &point(t), tol).map(|r| r.verdict);
    let h = (scan.t_max - scan.t_min) / (scan.steps - 1) as f64;
    let ts: Vec<f64> = (0..scan.steps).map(|i| scan.t_min + i as f64 * h).collect();
    let inside = ts
        .iter()
        .map(|&t| member(t))
        .collect::<Result<Vec<bool>>>()?;
    let runs = inside
        .iter()
        .enumerate()
        .filter(|&(i, &b)| b && (i == 0 || !inside[i - 1]))
        .count();

    if runs == 0 {
        let viol = ts
            .iter()
            .map(|&t| robust_violation(m, u, &point(t)))
            .collect::<Result<Vec<f64>>>()?;
        let (i, _) = argext(&viol, |a, b| a < b);
        let lo = ts[i.saturating_sub(1)];
        let hi = ts[(i + 1).min(ts.len() - 1)];
        let (t, v) = golden_min(lo, hi, |t| {
            robust_violation(m, u, &point(t)).unwrap_or(f64::INFINITY)
        });
        let interval = (v <= tol).then_some((t, t));
        return Ok(AxisInterval {
            interval,
            runs: usize::from(interval.is_some()),
            contiguous: true,
        });
    }

    let first = inside.iter().position(|&b| b).expect("a run exists");
    let last = inside.iter().rposition(|&b| b).expect("a run exists");
    let lo = if first == 0 {
        ts[0]
    } else {
        bisect(ts[first - 1], ts[first], &member)?
    };
    let hi = if last == ts.len() - 1 {
        ts[last]
    } else {
        bisect(ts[last + 1], ts[last], &member)?
    };
    Ok(AxisInterval {
        interval: Some((lo, hi)),
        runs,
        contiguous: runs == 1,
    })
}

/// Shrinks `[out, inn]` (either order) until narrower than the bisection width; returns the member end.
fn bisect(mut out: f64, mut inn: f64, member: &impl Fn(f64) -> Result<bool>) -> Result<f64> {
    while (inn - out).abs() > BISECT_WIDTH {
        let mid = 0.5 * (out + inn);
        if member(mid)? {
            inn = mid;
        } else {
            out = mid;
        }
    }
    Ok(inn)
}

fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Action row whose cone surface passes through `x`, mixed from a row `plus`
/// with `x` in its plus region and a row `minus` with `x` in its minus region.
///
/// With `alpha_k = res_k(plus)` and `beta_k = -res_k(minus)`, the mix
/// `(1 - lambda) plus + lambda minus` has residuals
/// `alpha_k - lambda (alpha_k + beta_k)`. Taking `lambda` as the largest
/// `alpha_k / (alpha_k + beta_k)` over candidates with `alpha_k >= 0` makes
/// every residual nonpositive and one of them zero.
///
/// `None` when the inputs are on the wrong sides of `x` by more than `tol`.
pub fn conic_bridging_mix(
    m: &Mdp,
    u: &SRectangularSet,
    s: usize,
    x: &[f64],
    plus: &[f64],
    minus: &[f64],
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    dim("point", m.num_states(), x.len())?;
    check_distribution(plus, "plus row")?;
    check_distribution(minus, "minus row")?;
    let rp = conic_region(m, u, s, plus)?;
    let rm = conic_region(m, u, s, minus)?;
    let alpha: Vec<f64> = rp.hyperplanes.iter().map(|h| h.residual(x)).collect();
    let beta: Vec<f64> = rm.hyperplanes.iter().map(|h| -h.residual(x)).collect();
    let max_alpha = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_beta = beta.iter().copied().fold(f64::INFINITY, f64::min);
    if max_alpha < -tol || min_beta < -tol {
        return Ok(None);
    }
    if min_beta <= tol {
        return Ok(Some(minus.to_vec()));
    }
    let lambda = alpha
        .iter()
        .zip(&beta)
        .filter(|(a, _)| **a >= 0.0)
        .map(|(a, b)| a / (a + b))
        .fold(f64::NEG_INFINITY, f64::max);
    if lambda == f64::NEG_INFINITY {
        return Ok(Some(plus.to_vec()));
    }
    Ok(Some(
        plus.iter()
            .zip(minus)
            .map(|(p, q)| (1.0 - lambda) * p + lambda * q)
            .collect(),
    ))
}
