//! Extreme points of finite candidate sets.
//!
//! A candidate that is a convex combination of the others never changes the
//! robust value space, so each candidate list can be cut down to the extreme
//! points of its convex hull. Kernels are compared as flat vectors, rows in
//! action order with next states inner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::rmdp::{SARectangularSet, SRectangularSet, UncertaintySet};

/// Feasibility tolerance of the hull membership solves.
pub const HULL_TOL: f64 = 1e-9;

/// A removed point and the convex weights over kept points that rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub index: usize,
    /// `(kept index, weight)` pairs with positive weight.
    pub weights: Vec<(usize, f64)>,
    /// L-infinity reconstruction error of the weights.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremePoints {
    pub kept: Vec<usize>,
    pub removed: Vec<Removal>,
}

/// Weights over `basis` reproducing `target`, or `None` if it lies outside
/// their hull by more than [`HULL_TOL`] (summed absolute residual).
pub fn convex_weights(points: &[Vec<f64>], basis: &[usize], target: &[f64]) -> Option<Vec<f64>> {
    if basis.is_empty() {
        return None;
    }
    let d = target.len();
    let mut a: Vec<Vec<f64>> = (0..d)
        .map(|r| basis.iter().map(|&j| points[j][r]).collect())
        .collect();
    a.push(vec![1.0; basis.len()]);
    let mut b = target.to_vec();
    b.push(1.0);
    let sol = lp::minimize(&vec![0.0; basis.len()], &a, &b, HULL_TOL);
    (sol.status != lp::LpStatus::Infeasible).then_some(sol.x)
}

fn reconstruction_error(points: &[Vec<f64>], basis: &[usize], w: &[f64], target: &[f64]) -> f64 {
    (0..target.len())
        .map(|r| {
            let v: f64 = basis.iter().zip(w).map(|(&j, &wj)| wj * points[j][r]).sum();
            (v - target[r]).abs()
        })
        .fold(0.0, f64::max)
}

/// Indices of the extreme points, in input order, with removal certificates.
///
/// Exact duplicates keep their lowest index. The remaining points are then
/// visited in order and dropped when they lie in the hull of the points still
/// kept; points within tolerance of the hull of the others count as interior.
pub fn extreme_points_with_certificates(points: &[Vec<f64>]) -> Result<ExtremePoints> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("no points".into()))?;
    if first.is_empty() || points.iter().any(|p| p.len() != first.len()) {
        return Err(Error::InvalidArgument(
            "points must share a positive dimension".into(),
        ));
    }
    let mut kept: Vec<usize> = (0..points.len())
        .filter(|&i| !points[..i].contains(&points[i]))
        .collect();
    let mut i = 0;
    while i < kept.len() {
        let idx = kept[i];
        let others: Vec<usize> = kept.iter().copied().filter(|&j| j != idx).collect();
        if convex_weights(points, &others, &points[idx]).is_some() {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    let removed = (0..points.len())
        .filter(|i| !kept.contains(i))
        .map(|index| {
            let w = convex_weights(points, &kept, &points[index]).unwrap_or_else(|| {
                // tolerance accumulated over sequential removals: fall back to the nearest kept point
                let mut w = vec![0.0; kept.len()];
                w[0] = 1.0;
                w
            });
            let error = reconstruction_error(points, &kept, &w, &points[index]);
            Removal {
                index,
                weights: kept
                    .iter()
                    .zip(&w)
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(&j, &x)| (j, x))
                    .collect(),
                error,
            }
        })
        .collect();
    Ok(ExtremePoints { kept, removed })
}

pub fn extreme_points(points: &[Vec<f64>]) -> Result<Vec<usize>> {
    Ok(extreme_points_with_certificates(points)?.kept)
}

/// Reduction of one candidate list: a state, or a state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReduction {
    pub state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<usize>,
    pub kept: Vec<usize>,
    pub removed: Vec<Removal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub groups: Vec<GroupReduction>,
}

impl ReductionReport {
    pub fn removed_count(&self) -> usize {
        self.groups.iter().map(|g| g.removed.len()).sum()
    }

    /// Largest reconstruction error over all certificates.
    pub fn max_certificate_error(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.removed.iter().map(|r| r.error))
            .fold(0.0, f64::max)
    }
}

fn flatten(kernel: &[Vec<f64>]) -> Vec<f64> {
    kernel.iter().flatten().copied().collect()
}

/// Keeps the extreme kernels of every state's candidate list.
pub fn reduce_uncertainty(u: &SRectangularSet) -> Result<(SRectangularSet, ReductionReport)> {
    let groups = (0..u.num_states())
        .into_par_iter()
        .map(|s| {
            let pts: Vec<Vec<f64>> = u.candidates(s).iter().map(|k| flatten(k)).collect();
            let ext = extreme_points_with_certificates(&pts)?;
            Ok(GroupReduction {
                state: s,
                action: None,
                kept: ext.kept,
                removed: ext.removed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let keep: Vec<Vec<usize>> = groups.iter().map(|g| g.kept.clone()).collect();
    Ok((u.restrict(&keep)?, ReductionReport { groups }))
}

/// Keeps the extreme rows of every state-action candidate list.
pub fn reduce_sa_uncertainty(u: &SARectangularSet) -> Result<(SARectangularSet, ReductionReport)> {
    let mut groups = Vec::new();
    let mut reduced = Vec::with_capacity(u.num_states());
    for s in 0..u.num_states() {
        let mut per_action = Vec::with_capacity(u.num_actions());
        for a in 0..u.num_actions() {
            let rows = u.candidates(s, a);
            let ext = extreme_points_with_certificates(rows)?;
            per_action.push(ext.kept.iter().map(|&k| rows[k].clone()).collect());
            groups.push(GroupReduction {
                state: s,
                action: Some(a),
                kept: ext.kept,
                removed: ext.removed,
            });
        }
        reduced.push(per_action);
    }
    Ok((SARectangularSet::new(reduced)?, ReductionReport { groups }))
}

pub fn reduce(u: &UncertaintySet) -> Result<(UncertaintySet, ReductionReport)> {
    match u {
        UncertaintySet::S(u) => reduce_uncertainty(u).map(|(r, rep)| (UncertaintySet::S(r), rep)),
        UncertaintySet::SA(u) => {
            reduce_sa_uncertainty(u).map(|(r, rep)| (UncertaintySet::SA(r), rep))
        }
    }
}
