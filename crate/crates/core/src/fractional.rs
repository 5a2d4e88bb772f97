//! Projection of an SINR vertex onto the upper boundary of the feasible SINR
//! set along a ray, by Dinkelbach iteration on a generalized fractional
//! program.
//!
//! With one active user per (cell, sub-carrier) the intra-cell terms vanish:
//! `n_i = g_i q_i + I_i(q) + N` and `d_i = I_i(q) + N`, so `n_i / d_i = 1 + gamma_i`.
//! The ray starts at a base point `a` (the origin or the all-ones corner) and
//! the projection of `z` is `a + lambda (z - a)` for the largest feasible
//! `lambda`, i.e. `max_q min_i (n_i / d_i - a) / (z_i - a)`. Both `n_i` and
//! `d_i` are affine in `q`, so the parametric subproblem
//! `max_q min_i n_i - d_i (a + lambda (z_i - a))` is a linear program.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::{ReducedProblem, SinrVector};
use crate::simplex::LinearProgram;

pub const DEFAULT_TOL: f64 = 1e-8;
/// Dinkelbach steps tried before the bisection fallback takes over.
pub const MAX_OUTER_ITERATIONS: usize = 30;
/// Relative width of the final `lambda` bracket in the bisection fallback.
pub const BISECTION_REL_TOL: f64 = 1e-13;
const MAX_BISECTION_STEPS: usize = 200;

/// Base point of the projection ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayBase {
    /// `lambda z`.
    #[default]
    Origin,
    /// `1 + lambda (z - 1)`: the ray through the zero-power SINR point.
    Unit,
}

impl RayBase {
    pub fn point(self) -> f64 {
        match self {
            RayBase::Origin => 0.0,
            RayBase::Unit => 1.0,
        }
    }

    /// `a + lambda (z - a)`.
    pub fn along(self, z: &SinrVector, lambda: f64) -> SinrVector {
        let a = self.point();
        SinrVector(z.0.iter().map(|v| a + lambda * (v - a)).collect())
    }

    /// Coordinates that move along the ray; the rest stay at the base point.
    fn moves(self, zi: f64) -> bool {
        zi != self.point()
    }
}

/// Numerators, denominators and ratios of the fractional program at `powers`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalState {
    pub powers: Vec<f64>,
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl FractionalState {
    /// `min_i ratio_i / z_i`.
    pub fn lambda_for(&self, z: &SinrVector) -> f64 {
        self.lambda_along(z, RayBase::Origin)
    }

    /// `min_i (ratio_i - a) / (z_i - a)` over the coordinates that move.
    pub fn lambda_along(&self, z: &SinrVector, base: RayBase) -> f64 {
        let a = base.point();
        self.ratios
            .iter()
            .zip(&z.0)
            .filter(|(_, zi)| base.moves(**zi))
            .map(|(r, zi)| (r - a) / (zi - a))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_i n_i - lambda d_i z_i`.
    pub fn parametric_value(&self, lambda: f64, z: &SinrVector) -> f64 {
        self.weighted_parametric_value(lambda, z, RayBase::Origin, None)
    }

    /// `min_i w_i (n_i - d_i (a + lambda (z_i - a)))` over the coordinates that
    /// move, all `w_i = 1` when `weights` is `None`.
    pub fn weighted_parametric_value(&self, lambda: f64, z: &SinrVector, base: RayBase, weights: Option<&[f64]>) -> f64 {
        let a = base.point();
        (0..self.numerators.len())
            .filter(|&i| base.moves(z.0[i]))
            .map(|i| {
                let w = weights.map_or(1.0, |w| w[i]);
                w * (self.numerators[i] - self.denominators[i] * (a + lambda * (z.0[i] - a)))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `N / d_i`: row weights that divide each parametric row by its
    /// denominator at these powers, in noise units.
    pub fn row_weights(&self, noise: f64) -> Vec<f64> {
        self.denominators.iter().map(|d| noise / d).collect()
    }
}

pub fn compute_nd(r: &ReducedProblem, q: &[f64]) -> FractionalState {
    let noise = r.noise();
    let dim = r.dim();
    let mut numerators = Vec::with_capacity(dim);
    let mut denominators = Vec::with_capacity(dim);
    for k in 0..r.num_cells() {
        for l in 0..r.num_subcarriers() {
            let d = r.interference(q, k, l) + noise;
            denominators.push(d);
            numerators.push(r.own_gain(k, l) * q[r.index(k, l)] + d);
        }
    }
    let ratios = numerators.iter().zip(&denominators).map(|(n, d)| n / d).collect();
    FractionalState {
        powers: q.to_vec(),
        numerators,
        denominators,
        ratios,
    }
}

/// The epigraph LP `max t  s.t.  t <= w_i (n_i(q) - d_i(q) (a + lambda (z_i - a))),  q in P`
/// over the coordinates that move, with fixed positive row weights `w_i`
/// (all ones unless set).
#[derive(Debug, Clone)]
pub struct MaximinLp<'a> {
    pub problem: &'a ReducedProblem,
    pub lambda: f64,
    pub z: &'a SinrVector,
    pub base: RayBase,
    pub row_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximinSolution {
    pub powers: Vec<f64>,
    /// The LP objective re-evaluated exactly at `powers`, in watts.
    pub value: f64,
}

impl<'a> MaximinLp<'a> {
    pub fn new(problem: &'a ReducedProblem, lambda: f64, z: &'a SinrVector) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Precondition(format!("lambda must be non-negative and finite, got {lambda}")));
        }
        if z.len() != problem.dim() || z.0.iter().any(|&v| !(v >= 1.0 && v.is_finite())) {
            return Err(Error::Precondition("z must have one finite entry >= 1 per active user".into()));
        }
        Ok(MaximinLp {
            problem,
            lambda,
            z,
            base: RayBase::Origin,
            row_weights: None,
        })
    }

    pub fn with_base(mut self, base: RayBase) -> Self {
        self.base = base;
        self
    }

    pub fn with_row_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.problem.dim() || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Precondition("row weights must be positive, one per active user".into()));
        }
        self.row_weights = Some(weights);
        Ok(self)
    }

    fn weight(&self, i: usize) -> f64 {
        self.row_weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Builds the LP with columns `x_j = c_j q_j` followed by the shifted
    /// epigraph variable `s = (t - t_min) / N >= 0`, where `t_min` is the
    /// value at `q = 0`. Each `c_j` is the largest magnitude of `q_j`'s
    /// noise-normalised coefficient over the max-min rows, so those rows have
    /// entries in `[-1, 1]` next to the unit coefficient of `s`.
    pub fn linear_program(&self) -> LinearProgram {
        self.scaled_program().0
    }

    fn scaled_program(&self) -> (LinearProgram, Vec<f64>) {
        let r = self.problem;
        let dim = r.dim();
        let noise = r.noise();
        let a = self.base.point();
        let active: Vec<usize> = (0..dim).filter(|&i| self.base.moves(self.z.0[i])).collect();
        // normalised constant term of row i, also the coefficient of its interference
        let consts: Vec<f64> = self.z.0.iter().map(|zi| 1.0 - a - self.lambda * (zi - a)).collect();
        let weighted: Vec<f64> = (0..dim).map(|i| self.weight(i) * consts[i]).collect();
        let t_min = active.iter().map(|&i| weighted[i]).fold(f64::INFINITY, f64::min);

        let mut rows = Vec::with_capacity(active.len() + dim + r.num_cells());
        let mut rhs = Vec::with_capacity(rows.capacity());
        for k in 0..r.num_cells() {
            for l in 0..r.num_subcarriers() {
                let i = r.index(k, l);
                if !self.base.moves(self.z.0[i]) {
                    continue;
                }
                let w = self.weight(i);
                let mut row = vec![0.0; dim + 1];
                row[i] = -w * r.own_gain(k, l) / noise;
                for j in (0..r.num_cells()).filter(|&j| j != k) {
                    row[r.index(j, l)] = -w * consts[i] * r.cross_gain(k, l, j) / noise;
                }
                row[dim] = 1.0;
                rows.push(row);
                rhs.push(weighted[i] - t_min);
            }
        }
        let col: Vec<f64> = (0..dim)
            .map(|j| {
                let c = rows.iter().fold(0.0f64, |m, row| m.max(row[j].abs()));
                if c > 0.0 && c.is_finite() {
                    c
                } else {
                    1.0
                }
            })
            .collect();
        for row in &mut rows {
            row[..dim].iter_mut().zip(&col).for_each(|(v, c)| *v /= c);
        }
        for k in 0..r.num_cells() {
            for l in 0..r.num_subcarriers() {
                let i = r.index(k, l);
                let mut row = vec![0.0; dim + 1];
                row[i] = 1.0;
                rows.push(row);
                rhs.push(r.carrier_cap(k, l) * col[i]);
            }
            let mut row = vec![0.0; dim + 1];
            for l in 0..r.num_subcarriers() {
                let i = r.index(k, l);
                row[i] = 1.0 / col[i];
            }
            let norm = row.iter().fold(0.0f64, |m, v| m.max(*v));
            row.iter_mut().for_each(|v| *v /= norm);
            rows.push(row);
            rhs.push(r.cell_cap(k) / norm);
        }
        let mut objective = vec![0.0; dim + 1];
        if !active.is_empty() {
            objective[dim] = 1.0;
        }
        (LinearProgram { objective, rows, rhs }, col)
    }

    pub fn solve(&self) -> Result<MaximinSolution> {
        let r = self.problem;
        let (lp, col) = self.scaled_program();
        let sol = lp.solve()?;
        let mut q: Vec<f64> = sol.x[..r.dim()].iter().zip(&col).map(|(x, c)| x / c).collect();
        r.clip_to_caps(&mut q);
        let value =
            compute_nd(r, &q).weighted_parametric_value(self.lambda, self.z, self.base, self.row_weights.as_deref());
        Ok(MaximinSolution { powers: q, value })
    }
}

/// Result of projecting a vertex onto the boundary of the feasible SINR set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `a + lambda (z - a)` for the ray base `a`.
    pub z_proj: SinrVector,
    pub lambda: f64,
    /// Powers at which `1 + gamma_i >= z_proj_i` holds for every `i`.
    pub witness: Vec<f64>,
    /// Every Dinkelbach lambda iterate, in order.
    pub lambdas: Vec<f64>,
    /// Membership tests spent by the bisection fallback; zero when the
    /// Dinkelbach iteration certified `lambda` by itself.
    pub bisection_steps: usize,
}

impl Projection {
    pub fn iterations(&self) -> usize {
        self.lambdas.len()
    }
}

/// Dinkelbach projection of `z` along the ray from the origin.
pub fn dinkelbach_project(r: &ReducedProblem, z: &SinrVector, tol: f64) -> Result<Projection> {
    project(r, z, RayBase::Origin, tol)
}

/// Dinkelbach projection of `z` onto the boundary of the feasible SINR set
/// along the ray from `base`.
///
/// Starting from zero power, alternates `lambda <- min_i (ratio_i - a) / (z_i - a)`
/// with the max-min LP until the LP optimum (relative to the largest weighted
/// numerator) is at most `tol`, i.e. no power vector beats `lambda` on every
/// ratio. Row `i` of each LP is divided by `d_i` at the current iterate, which
/// leaves the sign of the optimum unchanged.
///
/// On badly scaled rays the iteration can converge only linearly. Once a step
/// gains more than a quarter of the previous step's relative progress, or
/// after [`MAX_OUTER_ITERATIONS`] steps, the last feasible `lambda` seeds a
/// bisection on exact membership instead.
pub fn project(r: &ReducedProblem, z: &SinrVector, base: RayBase, tol: f64) -> Result<Projection> {
    if z.len() != r.dim() || z.0.iter().any(|&v| !(v >= 1.0 && v.is_finite())) {
        return Err(Error::Precondition("z must have one finite entry >= 1 per active user".into()));
    }
    let mut witness = vec![0.0; r.dim()];
    if z.0.iter().all(|&v| v == 1.0) {
        return Ok(Projection {
            z_proj: z.clone(),
            lambda: 1.0,
            witness,
            lambdas: vec![1.0],
            bisection_steps: 0,
        });
    }
    let noise = r.noise();
    let mut state = compute_nd(r, &witness);
    let mut lambda = state.lambda_along(z, base);
    let mut lambdas = vec![lambda];
    let mut last_gain = f64::INFINITY;
    let done = |lambda: f64, witness: Vec<f64>, lambdas: Vec<f64>| Projection {
        z_proj: base.along(z, lambda),
        lambda,
        witness,
        lambdas,
        bisection_steps: 0,
    };
    for _ in 0..MAX_OUTER_ITERATIONS {
        let weights = state.row_weights(noise);
        let sol = MaximinLp::new(r, lambda, z)?
            .with_base(base)
            .with_row_weights(weights.clone())?
            .solve()?;
        let next = compute_nd(r, &sol.powers);
        let magnitude = (0..r.dim()).fold(1.0f64, |m, i| m.max(weights[i] * next.numerators[i] / noise));
        if sol.value / noise <= tol * magnitude {
            return Ok(done(lambda, witness, lambdas));
        }
        let next_lambda = next.lambda_along(z, base);
        if next_lambda <= lambda {
            // the LP improvement is below floating-point resolution of lambda
            return Ok(done(lambda, witness, lambdas));
        }
        let gain = if lambda > 0.0 { next_lambda / lambda - 1.0 } else { f64::INFINITY };
        witness = sol.powers;
        state = next;
        lambda = next_lambda;
        lambdas.push(lambda);
        if gain > 0.25 * last_gain {
            break;
        }
        last_gain = gain;
    }
    bisect(r, z, base, lambda, witness, lambdas)
}

/// Entries below 1 carry no power and are feasible at any scale.
fn clamp_to_one(z: &SinrVector) -> SinrVector {
    SinrVector(z.0.iter().map(|v| v.max(1.0)).collect())
}

/// Brackets the boundary between `lo` (achieved by `witness`) and the
/// interference-free bound, then halves until the bracket is relatively
/// narrower than [`BISECTION_REL_TOL`].
fn bisect(
    r: &ReducedProblem,
    z: &SinrVector,
    base: RayBase,
    lo: f64,
    witness: Vec<f64>,
    lambdas: Vec<f64>,
) -> Result<Projection> {
    let a = base.point();
    let mut lo = lo;
    let mut hi = (0..r.num_cells())
        .flat_map(|k| (0..r.num_subcarriers()).map(move |l| (k, l)))
        .filter(|&(k, l)| base.moves(z.0[r.index(k, l)]))
        .map(|(k, l)| {
            let cap = r.carrier_cap(k, l).min(r.cell_cap(k));
            (1.0 + r.own_gain(k, l) * cap / r.noise() - a) / (z.0[r.index(k, l)] - a)
        })
        .fold(f64::INFINITY, f64::min);
    let mut steps = 0;
    while hi - lo > BISECTION_REL_TOL * hi {
        if steps == MAX_BISECTION_STEPS {
            return Err(Error::NoConvergence {
                iterations: steps,
                lambda: lo,
                gap: (hi - lo) / hi,
            });
        }
        steps += 1;
        let mid = 0.5 * (lo + hi);
        if r.membership(&clamp_to_one(&base.along(z, mid))) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut best = witness;
    let mut lambda = compute_nd(r, &best).lambda_along(z, base);
    if let Ok(mut q) = r.p_from_z(&clamp_to_one(&base.along(z, lo))) {
        r.clip_to_caps(&mut q);
        let achieved = compute_nd(r, &q).lambda_along(z, base);
        if achieved > lambda {
            lambda = achieved;
            best = q;
        }
    }
    Ok(Projection {
        z_proj: base.along(z, lambda),
        lambda,
        witness: best,
        lambdas,
        bisection_steps: steps,
    })
}
