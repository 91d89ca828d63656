//! Maximin mixed strategies for small zero-sum matrix games.
//!
//! Rows are the maximizer's actions, columns the adversary's candidates. The
//! game value `max_{pi in simplex} min_k sum_a pi_a M[a][k]` is found with the
//! classic positive-shift LP: after shifting every entry to be `>= 1`, solve
//! `min sum x  s.t.  M'^T x >= 1, x >= 0`; then `value' = 1 / sum x` and the
//! mix is `x * value'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;

/// Optimal row mix and the worst-case payoff it guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximinSolution {
    pub mix: Vec<f64>,
    pub value: f64,
}

/// Guaranteed payoff `min_k sum_a mix_a payoff[a][k]`.
pub fn guaranteed_payoff(payoff: &[Vec<f64>], mix: &[f64]) -> f64 {
    let k = payoff[0].len();
    (0..k)
        .map(|j| {
            payoff
                .iter()
                .zip(mix)
                .map(|(row, &w)| w * row[j])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Best deterministic row: `max_a min_k payoff[a][k]`, lowest index on ties.
pub fn best_pure_row(payoff: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (a, row) in payoff.iter().enumerate() {
        let v = row.iter().copied().fold(f64::INFINITY, f64::min);
        if v > best.1 {
            best = (a, v);
        }
    }
    best
}

/// Solves `max_{pi} min_k sum_a pi_a payoff[a][k]` for an `A x K` payoff.
pub fn maximin_row_mix(payoff: &[Vec<f64>]) -> Result<MaximinSolution> {
    let na = payoff.len();
    if na == 0 || payoff[0].is_empty() {
        return Err(Error::InvalidArgument("empty payoff matrix".into()));
    }
    let nk = payoff[0].len();
    if payoff.iter().any(|r| r.len() != nk) {
        return Err(Error::InvalidArgument("ragged payoff matrix".into()));
    }
    if payoff.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite payoff entry".into()));
    }

    let (pure_a, pure_v) = best_pure_row(payoff);
    let pure = || {
        let mut mix = vec![0.0; na];
        mix[pure_a] = 1.0;
        MaximinSolution { mix, value: pure_v }
    };
    if na == 1 || nk == 1 {
        return Ok(pure());
    }

    let lowest = payoff
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let shift = 1.0 - lowest;
    // columns: x_0..x_{A-1}, surplus s_0..s_{K-1}
    let nvar = na + nk;
    let mut a = Vec::with_capacity(nk);
    for k in 0..nk {
        let mut row = vec![0.0; nvar];
        for (i, prow) in payoff.iter().enumerate() {
            row[i] = prow[k] + shift;
        }
        row[na + k] = -1.0;
        a.push(row);
    }
    let mut c = vec![0.0; nvar];
    c[..na].fill(1.0);
    let sol = lp::minimize(&c, &a, &vec![1.0; nk], 1e-10);
    if sol.status != lp::LpStatus::Optimal {
        return Ok(pure());
    }
    let total: f64 = sol.x[..na].iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Ok(pure());
    }
    let mut mix: Vec<f64> = sol.x[..na].iter().map(|v| (v / total).max(0.0)).collect();
    let norm: f64 = mix.iter().sum();
    mix.iter_mut().for_each(|v| *v /= norm);
    let value = guaranteed_payoff(payoff, &mix);
    if value < pure_v {
        return Ok(pure());
    }
    Ok(MaximinSolution { mix, value })
}
