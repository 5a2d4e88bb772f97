//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Solves `maximize c.x  subject to  A x <= b,  x >= 0`. Rows with a negative
//! right-hand side get an artificial variable and are handled in phase one.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Infeasible,
    Unbounded,
    PivotLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::PivotLimit => "pivot limit reached (cycling?)",
        })
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(DEFAULT_TOL, DEFAULT_MAX_PIVOTS)
            .map_err(|status| Error::SolverFailure(status.to_string()))
    }

    pub fn solve_with(&self, tol: f64, max_pivots: usize) -> std::result::Result<LpSolution, LpStatus> {
        let n = self.objective.len();
        let m = self.rows.len();
        assert_eq!(self.rhs.len(), m, "rhs length must match row count");
        assert!(self.rows.iter().all(|r| r.len() == n), "row width must match objective length");

        let negative: Vec<usize> = (0..m).filter(|&i| self.rhs[i] < 0.0).collect();
        let n_art = negative.len();
        let width = n + m + n_art;
        let mut tab = Tableau {
            rows: Vec::with_capacity(m),
            basis: Vec::with_capacity(m),
            reduced: vec![0.0; width + 1],
            width,
            tol,
            pivots: 0,
            max_pivots,
        };
        let mut art = 0;
        for i in 0..m {
            let mut row = vec![0.0; width + 1];
            let sign = if self.rhs[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                row[j] = sign * self.rows[i][j];
            }
            row[n + i] = sign;
            row[width] = sign * self.rhs[i];
            if sign < 0.0 {
                row[n + m + art] = 1.0;
                tab.basis.push(n + m + art);
                art += 1;
            } else {
                tab.basis.push(n + i);
            }
            tab.rows.push(row);
        }

        if n_art > 0 {
            // phase one: maximize -(sum of artificials)
            for j in n + m..width {
                tab.reduced[j] = -1.0;
            }
            for &i in &negative {
                for j in 0..=width {
                    tab.reduced[j] += tab.rows[i][j];
                }
            }
            tab.optimize(width)?;
            let infeasibility = tab.reduced[width];
            let scale = 1.0 + negative.iter().map(|&i| self.rhs[i].abs()).fold(0.0, f64::max);
            if infeasibility > tol * scale {
                return Err(LpStatus::Infeasible);
            }
            tab.evict_artificials(n + m);
        }

        // phase two over structural + slack columns only
        tab.reduced = vec![0.0; width + 1];
        tab.reduced[..n].copy_from_slice(&self.objective);
        for i in 0..tab.rows.len() {
            let b = tab.basis[i];
            let cb = if b < n { self.objective[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..=width {
                    tab.reduced[j] -= cb * tab.rows[i][j];
                }
            }
        }
        tab.optimize(n + m)?;

        let mut x = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rows[i][width];
            }
        }
        let objective = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: tab.pivots,
        })
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Reduced costs; the last entry is minus the current objective value.
    reduced: Vec<f64>,
    width: usize,
    tol: f64,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    /// Pivots until no column below `limit` has a positive reduced cost.
    fn optimize(&mut self, limit: usize) -> std::result::Result<(), LpStatus> {
        loop {
            // Bland: lowest-index improving column
            let Some(enter) = (0..limit).find(|&j| self.reduced[j] > self.tol) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a <= self.tol {
                    continue;
                }
                let ratio = row[self.width] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= self.tol * (1.0 + best_ratio.abs());
                        if ratio < best_ratio && !tie || tie && self.basis[i] < self.basis[best] {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((leave, _)) = leave else {
                return Err(LpStatus::Unbounded);
            };
            if self.pivots >= self.max_pivots {
                return Err(LpStatus::PivotLimit);
            }
            self.pivot(leave, enter);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let inv = 1.0 / self.rows[r][c];
        self.rows[r].iter_mut().for_each(|x| *x *= inv);
        self.rows[r][c] = 1.0;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
                row[c] = 0.0;
            }
        }
        let f = self.reduced[c];
        if f != 0.0 {
            self.reduced.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
            self.reduced[c] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Drives zero-valued artificials out of the basis after phase one and
    /// drops rows that turn out to be redundant.
    fn evict_artificials(&mut self, first_artificial: usize) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < first_artificial {
                i += 1;
                continue;
            }
            let col = (0..first_artificial)
                .filter(|&j| self.rows[i][j].abs() > self.tol)
                .max_by(|&a, &b| self.rows[i][a].abs().total_cmp(&self.rows[i][b].abs()));
            match col {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    self.rows.remove(i);
                    self.basis.remove(i);
                }
            }
        }
        for row in &mut self.rows {
            row[first_artificial..self.width].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            rows: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            rhs: vec![4.0, 12.0, 18.0],
        };
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn phase_one_handles_lower_bounds() {
        // max -x - y, x + y >= 2 (as -x - y <= -2), x <= 3  ->  objective -2
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            rows: vec![vec![-1.0, -1.0], vec![1.0, 0.0]],
            rhs: vec![-2.0, 3.0],
        };
        let sol = lp.solve().unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-12);
        assert!(sol.x[0] + sol.x[1] >= 2.0 - 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            objective: vec![1.0],
            rows: vec![vec![1.0], vec![-1.0]],
            rhs: vec![1.0, -2.0],
        };
        assert_eq!(infeasible.solve_with(1e-9, 1000), Err(LpStatus::Infeasible));
        let unbounded = LinearProgram {
            objective: vec![1.0, 0.0],
            rows: vec![vec![0.0, 1.0]],
            rhs: vec![1.0],
        };
        assert_eq!(unbounded.solve_with(1e-9, 1000), Err(LpStatus::Unbounded));
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Beale's classic cycling LP (as a max problem); optimum 1/20
        let lp = LinearProgram {
            objective: vec![0.75, -150.0, 0.02, -6.0],
            rows: vec![
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            rhs: vec![0.0, 0.0, 1.0],
        };
        let sol = lp.solve_with(1e-12, 1000).unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-12);
    }

    #[test]
    fn redundant_equality_rows() {
        // x + y = 1 written as two inequalities twice over
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            rows: vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![2.0, 2.0], vec![-2.0, -2.0]],
            rhs: vec![1.0, -1.0, 2.0, -2.0],
        };
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }
}
