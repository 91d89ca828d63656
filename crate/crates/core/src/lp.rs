//! Small dense linear programs in standard form.
//!
//! `minimize c'x  s.t.  A x = b, x >= 0`, solved with a two-phase tableau
//! simplex. Bland's rule is used for both the entering and the leaving
//! variable, so degenerate problems cannot cycle. Problem sizes here are a
//! handful of rows and columns, so the dense tableau is the right tool.

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point. For an infeasible problem this is the phase-one optimum.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Optimal phase-one value: the total residual `sum |b - A x|` left after
    /// minimizing it over `x >= 0`. Zero (up to rounding) iff feasible.
    pub infeasibility: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `d_j = c_j - c_B' B^{-1} A_j` for the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, &t) in d.iter_mut().zip(row.iter()) {
                    *dj -= cb * t;
                }
            }
        }
        d
    }

    /// Runs simplex iterations for `cost`, letting only columns `< allowed` enter.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> LpStatus {
        for _ in 0..MAX_PIVOTS {
            let d = self.reduced_costs(cost);
            let Some(enter) = (0..allowed).find(|&j| d[j] < -COST_EPS) else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-15
                                || (ratio <= lr + 1e-15 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return LpStatus::Unbounded,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        // Bland's rule terminates; hitting the cap means numerical trouble.
        LpStatus::Optimal
    }
}

/// Solves `min c'x s.t. A x = b, x >= 0`.
///
/// Phase one is declared successful when its optimum is at most `feas_tol`.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64], feas_tol: f64) -> LpSolution {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for (i, ai) in a.iter().enumerate() {
        debug_assert_eq!(ai.len(), n);
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for (j, &v) in ai.iter().enumerate() {
            row[j] = sign * v;
        }
        row[n + i] = 1.0;
        row[width - 1] = sign * b[i];
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };

    let mut phase_one = vec![0.0; width - 1];
    for v in phase_one.iter_mut().skip(n) {
        *v = 1.0;
    }
    t.optimize(&phase_one, n + m);
    let infeasibility: f64 = (0..m)
        .filter(|&i| t.basis[i] >= n)
        .map(|i| t.rhs(i).max(0.0))
        .sum();
    let x = extract(&t, n);
    if infeasibility > feas_tol {
        return LpSolution {
            status: LpStatus::Infeasible,
            objective: dot(c, &x),
            x,
            infeasibility,
        };
    }

    // Drive remaining artificials out of the basis where possible; rows where
    // that fails are redundant and keep a zero-valued artificial.
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                t.pivot(i, j);
            }
        }
    }

    let mut cost = vec![0.0; width - 1];
    cost[..n].copy_from_slice(c);
    let status = t.optimize(&cost, n);
    let x = extract(&t, n);
    LpSolution {
        status,
        objective: dot(c, &x),
        x,
        infeasibility,
    }
}

fn extract(t: &Tableau, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i).max(0.0);
        }
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let c = [-3.0, -5.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 1.0, 0.0],
            vec![3.0, 2.0, 0.0, 0.0, 1.0],
        ];
        let sol = minimize(&c, &a, &[4.0, 12.0, 18.0], 1e-9);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_reports_residual() {
        // x + y = 1 and x + y = 3 cannot both hold
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let sol = minimize(&[0.0, 0.0], &a, &[1.0, 3.0], 1e-9);
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert_abs_diff_eq!(sol.infeasibility, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn unbounded_is_detected() {
        // min -x s.t. x - y = 0
        let sol = minimize(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0], 1e-9);
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // x + y = -(-2) written with a negative rhs, plus a duplicate row
        let a = vec![vec![-1.0, -1.0], vec![1.0, 1.0]];
        let sol = minimize(&[1.0, 2.0], &a, &[-2.0, 2.0], 1e-9);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-12);
    }
}
