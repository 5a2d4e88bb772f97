//! Independent checks and baseline allocators.
//!
//! The grid oracle evaluates the sum rate through the full SINR model rather
//! than the reduced SINR map, so it shares no code path with the solver beyond
//! the strongest-user assignment. The baselines are declared stand-ins for a
//! heuristic comparison, not reimplementations of any published scheme.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, Scenario};
use crate::polyblock::{SolveResult, SolveStatus};
use crate::reduction::{reduce, ReducedProblem};

/// Largest `K * L` accepted by [`grid_optimum`].
pub const MAX_GRID_DIM: usize = 4;

/// Grid-cell bounds within this many nats of the grid value are not refined.
pub const REFINE_TOL: f64 = 1e-6;
/// Bisections allowed per grid cell when refining its bound.
pub const REFINE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GridOptimum {
    pub powers: Vec<f64>,
    pub value: f64,
    /// Grid spacing per dimension, watts.
    pub spacing: Vec<f64>,
    /// Finite-difference slope estimate per dimension around the best point, nats/W.
    pub lipschitz: Vec<f64>,
    /// `sum_d lipschitz[d] * spacing[d]`; an estimate, not a bound.
    pub lipschitz_bound: f64,
    /// Largest box upper bound over the grid cells minus `value`: the
    /// continuous optimum lies in `[value, value + error_bound]`.
    pub error_bound: f64,
    pub points_evaluated: usize,
}

/// Exhaustive search over a uniform grid of carrier powers.
///
/// Dimension `d = (k, l)` ranges over `[0, min(pbar[k][l], pbar[k])]` with
/// `points_per_dim` points; grid points breaking a per-cell cap are skipped.
pub fn grid_optimum(s: &Scenario, points_per_dim: usize) -> Result<GridOptimum> {
    let r = reduce(s)?;
    let dim = r.dim();
    if dim > MAX_GRID_DIM {
        return Err(Error::DimensionGuard(format!(
            "grid search supports K * L <= {MAX_GRID_DIM}, got {dim}"
        )));
    }
    if points_per_dim < 2 {
        return Err(Error::DimensionGuard("need at least 2 grid points per dimension".into()));
    }
    let grid = Grid::new(&r, points_per_dim);
    let total = points_per_dim.pow(dim as u32);

    let best = (0..total)
        .into_par_iter()
        .filter_map(|flat| {
            let q = grid.point(flat);
            grid.feasible(&q).then(|| (flat, grid.evaluate(&q)))
        })
        .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        .expect("the zero power point is always feasible");

    let (best_flat, value) = best;
    let digits = grid.digits(best_flat);
    let lipschitz = grid.local_slopes(&digits);
    let lipschitz_bound = lipschitz.iter().zip(&grid.spacing).map(|(l, h)| l * h).sum();
    let cell_max = (0..total)
        .into_par_iter()
        .filter_map(|flat| grid.cell_upper_bound(&grid.digits(flat), value))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(GridOptimum {
        powers: grid.point(best_flat),
        value,
        spacing: grid.spacing.clone(),
        lipschitz,
        lipschitz_bound,
        error_bound: (cell_max - value).max(0.0),
        points_evaluated: total,
    })
}

/// Two-sided comparison of a certified solve against the grid oracle.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Sandwich {
    pub solver_value: f64,
    pub grid_value: f64,
    pub epsilon: f64,
    pub grid_error_bound: f64,
    /// `solver_value - grid_value`.
    pub difference: f64,
    /// The grid cannot beat the solver by more than `epsilon + bound`.
    pub grid_below_solver: bool,
    /// The solver cannot beat the grid by more than `bound`.
    pub solver_below_grid: bool,
    pub pass: bool,
}

/// Checks `f_grid <= f* + epsilon + bound` and `f* <= f_grid + bound`.
pub fn sandwich(solver_value: f64, grid: &GridOptimum, epsilon: f64) -> Sandwich {
    let bound = grid.error_bound;
    let difference = solver_value - grid.value;
    let grid_below_solver = -difference <= epsilon + bound;
    let solver_below_grid = difference <= bound;
    Sandwich {
        solver_value,
        grid_value: grid.value,
        epsilon,
        grid_error_bound: bound,
        difference,
        grid_below_solver,
        solver_below_grid,
        pass: grid_below_solver && solver_below_grid,
    }
}

/// Refinement box ordered by its bound.
struct Cell {
    bound: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cell {
    fn new(bound: f64, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Cell { bound, lo, hi }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

struct Grid<'a> {
    r: &'a ReducedProblem,
    order: model::DecodingOrder,
    points: usize,
    spacing: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(r: &'a ReducedProblem, points: usize) -> Self {
        let mut spacing = vec![0.0; r.dim()];
        for k in 0..r.num_cells() {
            for l in 0..r.num_subcarriers() {
                spacing[r.index(k, l)] = r.carrier_cap(k, l).min(r.cell_cap(k)) / (points - 1) as f64;
            }
        }
        Grid {
            r,
            order: model::build_decoding_order(r.scenario()),
            points,
            spacing,
        }
    }

    fn digits(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.spacing.len()];
        for d in (0..out.len()).rev() {
            out[d] = flat % self.points;
            flat /= self.points;
        }
        out
    }

    fn point_at(&self, digits: &[usize]) -> Vec<f64> {
        digits.iter().zip(&self.spacing).map(|(&i, h)| i as f64 * h).collect()
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        self.point_at(&self.digits(flat))
    }

    fn feasible(&self, q: &[f64]) -> bool {
        self.r.powers_within_caps(q)
    }

    fn evaluate(&self, q: &[f64]) -> f64 {
        model::sum_rate(self.r.scenario(), &self.order, &self.r.allocation(q))
    }

    /// Largest sum-rate upper bound over the grid cell with lower corner
    /// `digits` after refining it against `floor`, or `None` when that corner
    /// is infeasible or on the top face. Every cell holding a feasible point
    /// has a feasible lower corner.
    ///
    /// The box with the largest bound is bisected along its widest side,
    /// relative to the grid spacing, until every bound is within
    /// `floor + REFINE_TOL` or [`REFINE_BUDGET`] splits are spent.
    fn cell_upper_bound(&self, digits: &[usize], floor: f64) -> Option<f64> {
        if digits.iter().any(|&d| d + 1 >= self.points) {
            return None;
        }
        let lo = self.point_at(digits);
        if !self.feasible(&lo) {
            return None;
        }
        let hi: Vec<f64> = lo.iter().zip(&self.spacing).map(|(a, h)| a + h).collect();
        let mut heap = BinaryHeap::new();
        heap.push(Cell::new(self.box_upper_bound(&lo, &hi), lo, hi));
        let mut budget = REFINE_BUDGET;
        loop {
            let top = heap.pop().expect("the heap always holds the box containing the feasible lower corner");
            if top.bound <= floor + REFINE_TOL || budget == 0 {
                return Some(top.bound);
            }
            budget -= 1;
            let (lo, hi) = (top.lo, top.hi);
            let d = (0..lo.len())
                .filter(|&d| self.spacing[d] > 0.0)
                .max_by(|&a, &b| ((hi[a] - lo[a]) / self.spacing[a]).total_cmp(&((hi[b] - lo[b]) / self.spacing[b])).then(b.cmp(&a)))
                .expect("a box above the floor has a side of positive width");
            let mid = 0.5 * (lo[d] + hi[d]);
            let (mut lo2, mut hi1) = (lo.clone(), hi.clone());
            lo2[d] = mid;
            hi1[d] = mid;
            if self.feasible(&lo2) {
                heap.push(Cell::new(self.box_upper_bound(&lo2, &hi), lo2, hi));
            }
            heap.push(Cell::new(self.box_upper_bound(&lo, &hi1), lo, hi1));
        }
    }

    /// Each rate term grows with its own power and falls with every other
    /// power, so over `[lo, hi]` it is at most its value at own power `hi`
    /// and interference from `lo`.
    fn box_upper_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let s = self.r.scenario();
        let lc = self.r.num_subcarriers();
        let mut total = 0.0;
        for k in 0..self.r.num_cells() {
            for l in 0..lc {
                let u = self.r.best_user(k, l);
                let interference: f64 = (0..self.r.num_cells())
                    .filter(|&j| j != k)
                    .map(|j| s.link_gain(k, u, j, l) * lo[j * lc + l])
                    .sum();
                total += (s.own_gain(k, u, l) * hi[self.r.index(k, l)] / (s.noise_power + interference)).ln_1p();
            }
        }
        total
    }

    /// Largest |forward difference| / spacing along each axis over the
    /// feasible grid points within two steps of `center`.
    fn local_slopes(&self, center: &[usize]) -> Vec<f64> {
        let dim = center.len();
        let lo: Vec<usize> = center.iter().map(|&c| c.saturating_sub(2)).collect();
        let hi: Vec<usize> = center.iter().map(|&c| (c + 2).min(self.points - 1)).collect();
        let mut slopes = vec![0.0f64; dim];
        let mut cursor = lo.clone();
        loop {
            let q = self.point_at(&cursor);
            if self.feasible(&q) {
                let here = self.evaluate(&q);
                for d in 0..dim {
                    if cursor[d] < hi[d] && self.spacing[d] > 0.0 {
                        let mut next = cursor.clone();
                        next[d] += 1;
                        let qn = self.point_at(&next);
                        if self.feasible(&qn) {
                            slopes[d] = slopes[d].max((self.evaluate(&qn) - here).abs() / self.spacing[d]);
                        }
                    }
                }
            }
            // odometer over the neighbourhood box
            let mut d = dim;
            loop {
                if d == 0 {
                    return slopes;
                }
                d -= 1;
                if cursor[d] < hi[d] {
                    cursor[d] += 1;
                    break;
                }
                cursor[d] = lo[d];
            }
        }
    }
}

/// Strongest-user assignment at every carrier cap, scaled down uniformly in
/// any cell whose carrier caps exceed its cell cap.
pub fn full_power_powers(r: &ReducedProblem) -> Vec<f64> {
    let mut q = vec![0.0; r.dim()];
    for k in 0..r.num_cells() {
        let total: f64 = (0..r.num_subcarriers()).map(|l| r.carrier_cap(k, l)).sum();
        let shrink = if total > r.cell_cap(k) { r.cell_cap(k) / total } else { 1.0 };
        for l in 0..r.num_subcarriers() {
            q[r.index(k, l)] = r.carrier_cap(k, l) * shrink;
        }
    }
    q
}

pub fn baseline_full_power(s: &Scenario) -> Result<SolveResult> {
    let r = reduce(s)?;
    let q = full_power_powers(&r);
    SolveResult::from_carrier_powers("full-power", &r, q, SolveStatus::Heuristic)
}

pub const GREEDY_SWEEPS: usize = 50;
pub const GREEDY_STALL: f64 = 1e-6;

/// Cyclic coordinate ascent on the carrier powers from the full-power point,
/// with a golden-section line search per coordinate. A coordinate only moves
/// when the objective does not decrease.
pub fn baseline_greedy(s: &Scenario) -> Result<SolveResult> {
    let r = reduce(s)?;
    let mut q = full_power_powers(&r);
    let eval = |q: &[f64]| r.z_from_p(q).0.iter().map(|z| z.ln()).sum::<f64>();
    let mut value = eval(&q);
    let mut sweeps = 0;
    for _ in 0..GREEDY_SWEEPS {
        sweeps += 1;
        let before = value;
        for k in 0..r.num_cells() {
            for l in 0..r.num_subcarriers() {
                let i = r.index(k, l);
                let others: f64 = (0..r.num_subcarriers()).filter(|&m| m != l).map(|m| q[r.index(k, m)]).sum();
                let hi = r.carrier_cap(k, l).min(r.cell_cap(k) - others).max(0.0);
                let mut trial = q.clone();
                let mut line = |x: f64| {
                    trial[i] = x;
                    eval(&trial)
                };
                let (x, fx) = golden_section_max(&mut line, 0.0, hi);
                for (cand, f) in [(x, fx), (0.0, line(0.0)), (hi, line(hi))] {
                    if f > value {
                        value = f;
                        q[i] = cand;
                    }
                }
            }
        }
        if value - before < GREEDY_STALL {
            break;
        }
    }
    let mut res = SolveResult::from_carrier_powers("greedy", &r, q, SolveStatus::Heuristic)?;
    res.iterations = sweeps;
    Ok(res)
}

fn golden_section_max(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b <= a {
        return (a, f(a));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a) <= 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
