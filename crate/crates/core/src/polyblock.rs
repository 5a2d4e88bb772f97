//! Outer polyblock approximation over the feasible SINR set.
//!
//! The vertex set starts from the interference-free corner, which dominates
//! every feasible SINR vector. Each iteration takes the vertex with the
//! largest objective, projects it onto the boundary of the feasible set,
//! replaces it by the children that cut off the box above the projection,
//! and prunes. The incumbent is the SINR vector actually achieved by the
//! projection's power vector, so it is always feasible.

use std::collections::BTreeSet;
use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{self, project, RayBase};
use crate::model::{self, Allocation, Scenario, Violation};
use crate::reduction::{reduce, ReducedProblem, SinrVector};

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_MAX_VERTICES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Absolute optimality gap in nats.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub max_vertices: usize,
    pub dinkelbach_tol: f64,
    /// Feasible carrier powers `q[k * L + l]` used as the starting incumbent.
    pub warm_start: Option<Vec<f64>>,
    /// Grid resolution for the grid-search allocator.
    pub grid_points: usize,
    pub record_trace: bool,
    /// Base point of the projection rays.
    pub ray_base: RayBase,
    /// Solve decoupled sub-carriers separately.
    pub split_carriers: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            epsilon: 0.1,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_vertices: DEFAULT_MAX_VERTICES,
            dinkelbach_tol: fractional::DEFAULT_TOL,
            warm_start: None,
            grid_points: 100,
            record_trace: false,
            ray_base: RayBase::default(),
            split_carriers: true,
        }
    }
}

impl SolveOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SolveOptions {
            epsilon,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Upper bound and incumbent are within epsilon.
    Certified,
    /// Iteration or vertex budget ran out; bounds are still valid.
    BudgetExceeded,
    /// No optimality certificate is attempted.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub upper_bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub algorithm: String,
    pub status: SolveStatus,
    pub certified: bool,
    pub allocation: Allocation,
    /// Carrier powers `q[k * L + l]` of the strongest-user assignment.
    pub carrier_powers: Vec<f64>,
    /// Canonical SINR vector, `1 + gamma` on active entries and 0 elsewhere.
    pub sinr: Vec<f64>,
    pub sum_rate_nats: f64,
    pub sum_rate_bits: f64,
    pub epsilon: Option<f64>,
    pub upper_bound: Option<f64>,
    pub iterations: usize,
    pub projections: usize,
    pub wall_time_ms: f64,
    /// Whether every pair satisfies the SIC condition for all powers.
    pub sic_flag: bool,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    /// Assembles a result for carrier powers `q` on the reduced problem,
    /// recomputing the sum rate from the canonical allocation.
    pub fn from_carrier_powers(algorithm: &str, r: &ReducedProblem, q: Vec<f64>, status: SolveStatus) -> Result<Self> {
        let s = r.scenario();
        let allocation = r.allocation(&q);
        let order = model::build_decoding_order(s);
        let sum_rate_nats = model::sum_rate(s, &order, &allocation);
        let violations = model::check_feasible(s, &allocation)?;
        Ok(SolveResult {
            algorithm: algorithm.to_string(),
            status,
            certified: status == SolveStatus::Certified,
            sinr: r.expand(&r.z_from_p(&q)),
            allocation,
            carrier_powers: q,
            sum_rate_nats,
            sum_rate_bits: sum_rate_nats / LN_2,
            epsilon: None,
            upper_bound: None,
            iterations: 0,
            projections: 0,
            wall_time_ms: 0.0,
            sic_flag: model::sic_always_feasible(s),
            violations,
            trace: Vec::new(),
        })
    }
}

/// Interference-free corner `1 + g min(pbar_kl, pbar_k) / N`; it dominates
/// the feasible set.
pub fn initial_vertex(r: &ReducedProblem) -> SinrVector {
    let mut z = Vec::with_capacity(r.dim());
    for k in 0..r.num_cells() {
        for l in 0..r.num_subcarriers() {
            z.push(1.0 + r.own_gain(k, l) * r.carrier_cap(k, l).min(r.cell_cap(k)) / r.noise());
        }
    }
    SinrVector(z)
}

/// Children of vertex `z` after projecting it to `z_proj`: for each
/// coordinate `i` carrying power in `witness`, the copy of `z` with entry `i`
/// lowered to `z_proj[i]` (clamped to `[1, z_i]`).
///
/// A coordinate with zero witness power has ratio 1, hence `z_proj[i] <= 1`;
/// its child is kept only in the degenerate case `z_proj[i] == 1`. A
/// coordinate already at 1 has nothing to cut and yields no child.
pub fn generate_children(z: &SinrVector, z_proj: &SinrVector, witness: &[f64]) -> Vec<SinrVector> {
    let mut out = Vec::new();
    for i in 0..z.len() {
        if z.0[i] <= 1.0 || !(witness[i] > 0.0 || z_proj.0[i] >= 1.0 - 1e-12) {
            continue;
        }
        let mut child = z.clone();
        child.0[i] = z_proj.0[i].min(z.0[i]).max(1.0);
        out.push(child);
    }
    out
}

/// Removes vertices dominated by another vertex and vertices whose objective
/// cannot beat `incumbent + epsilon`.
pub fn prune(vertices: Vec<SinrVector>, incumbent: f64, epsilon: f64) -> Vec<SinrVector> {
    let mut set = VertexSet::default();
    for v in vertices {
        if let Ok(vertex) = Vertex::new(v) {
            set.insert(vertex);
        }
    }
    set.prune_at_or_below(incumbent + epsilon);
    set.vertices.into_iter().map(|v| v.z).collect()
}

#[derive(Debug, Clone)]
struct Vertex {
    value: f64,
    z: SinrVector,
}

impl Vertex {
    fn new(z: SinrVector) -> Result<Self> {
        Ok(Vertex { value: z.objective()?, z })
    }
}

impl PartialEq for Vertex {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Vertex {}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Vertex {
    /// Objective first, then lexicographic on `z`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value).then_with(|| {
            self.z
                .0
                .iter()
                .zip(&other.z.0)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

/// Vertex set ordered by objective, kept free of dominated vertices.
#[derive(Debug, Default)]
struct VertexSet {
    vertices: BTreeSet<Vertex>,
}

impl VertexSet {
    fn len(&self) -> usize {
        self.vertices.len()
    }

    fn best_value(&self) -> Option<f64> {
        self.vertices.last().map(|v| v.value)
    }

    fn pop_best(&mut self) -> Option<Vertex> {
        self.vertices.pop_last()
    }

    /// Inserts unless dominated; drops vertices the newcomer dominates.
    fn insert(&mut self, v: Vertex) -> bool {
        let mut dominated = Vec::new();
        for w in &self.vertices {
            if v.z.dominated_by(&w.z) {
                return false;
            }
            if w.z.dominated_by(&v.z) {
                dominated.push(w.clone());
            }
        }
        for w in &dominated {
            self.vertices.remove(w);
        }
        self.vertices.insert(v)
    }

    /// Removes every vertex with objective `<= threshold`; returns the
    /// largest removed objective.
    fn prune_at_or_below(&mut self, threshold: f64) -> Option<f64> {
        let mut largest = None;
        while let Some(first) = self.vertices.first() {
            if first.value > threshold {
                break;
            }
            largest = Some(first.value);
            self.vertices.pop_first();
        }
        largest
    }
}

/// Solves to `epsilon` with default budgets.
pub fn solve(s: &Scenario, epsilon: f64) -> Result<SolveResult> {
    solve_with(s, &SolveOptions::with_epsilon(epsilon))
}

/// Solves with explicit options.
///
/// When every cell's carrier caps sum to at most its cell cap, sub-carriers
/// share neither a constraint nor interference, so each carrier is solved as
/// its own single-carrier problem to `epsilon / L` and the results are summed.
pub fn solve_with(s: &Scenario, opts: &SolveOptions) -> Result<SolveResult> {
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let started = Instant::now();
    let r = reduce(s)?;
    if let Some(q) = &opts.warm_start {
        if q.len() != r.dim() || !r.powers_within_caps(q) {
            return Err(Error::Precondition("warm start must be capped carrier powers of length K * L".into()));
        }
    }

    let lc = s.num_subcarriers;
    let blocks: Vec<(ReducedProblem, Option<Vec<f64>>)> = if opts.split_carriers && lc > 1 && s.carriers_decouple() {
        (0..lc)
            .map(|l| {
                let warm = opts.warm_start.as_ref().map(|q| (0..s.num_cells).map(|k| q[k * lc + l]).collect());
                Ok((reduce(&s.carrier_slice(l))?, warm))
            })
            .collect::<Result<_>>()?
    } else {
        vec![(r.clone(), opts.warm_start.clone())]
    };
    let block_eps = opts.epsilon / blocks.len() as f64;

    let starts: Vec<(f64, f64, Vec<f64>)> = blocks
        .iter()
        .map(|(b, warm)| starting_bounds(b, warm.as_deref()))
        .collect::<Result<_>>()?;
    // Current bounds per block; summed in block order so that rounding keeps
    // the totals monotone.
    let mut ubs: Vec<f64> = starts.iter().map(|s| s.0).collect();
    let mut incs: Vec<f64> = starts.iter().map(|s| s.1).collect();

    let mut runs = Vec::with_capacity(blocks.len());
    let mut iterations = 0;
    let mut trace = Vec::new();
    for (i, ((b, _), (_, inc0, q0))) in blocks.iter().zip(starts).enumerate() {
        let run = run_block(b, opts, block_eps, inc0, q0, &mut iterations, |row| {
            if opts.record_trace {
                ubs[i] = row.upper_bound;
                incs[i] = row.incumbent;
                trace.push(TraceRow {
                    iteration: row.iteration,
                    upper_bound: ubs.iter().sum(),
                    incumbent: incs.iter().sum(),
                });
            }
        })?;
        ubs[i] = run.upper_bound;
        incs[i] = run.incumbent;
        runs.push(run);
    }

    let q = if runs.len() == 1 {
        runs[0].q.clone()
    } else {
        let mut q = vec![0.0; r.dim()];
        for (l, run) in runs.iter().enumerate() {
            for k in 0..s.num_cells {
                q[k * lc + l] = run.q[k];
            }
        }
        q
    };
    let status = if runs.iter().all(|b| b.status == SolveStatus::Certified) {
        SolveStatus::Certified
    } else {
        SolveStatus::BudgetExceeded
    };
    let mut result = SolveResult::from_carrier_powers("polyblock", &r, q, status)?;
    result.epsilon = Some(opts.epsilon);
    result.upper_bound = Some(ubs.iter().sum::<f64>().max(result.sum_rate_nats));
    result.iterations = iterations;
    result.projections = iterations;
    result.trace = trace;
    result.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

/// `(upper bound, incumbent, incumbent powers)` before any iteration. The
/// incumbent is the better of zero power and the warm start.
fn starting_bounds(r: &ReducedProblem, warm: Option<&[f64]>) -> Result<(f64, f64, Vec<f64>)> {
    let mut inc = 0.0;
    let mut q = vec![0.0; r.dim()];
    if let Some(w) = warm {
        let v = r.z_from_p(w).objective()?;
        if v >= inc {
            inc = v;
            q = w.to_vec();
        }
    }
    Ok((initial_vertex(r).objective()?.max(inc), inc, q))
}

struct BlockRun {
    q: Vec<f64>,
    incumbent: f64,
    upper_bound: f64,
    status: SolveStatus,
}

/// Runs the polyblock loop on one problem, counting iterations in the shared
/// `iterations` against `opts.max_iterations`.
fn run_block(
    r: &ReducedProblem,
    opts: &SolveOptions,
    epsilon: f64,
    mut incumbent: f64,
    mut best_q: Vec<f64>,
    iterations: &mut usize,
    mut on_iteration: impl FnMut(TraceRow),
) -> Result<BlockRun> {
    let mut set = VertexSet::default();
    set.insert(Vertex::new(initial_vertex(r))?);
    let mut pruned_max = set.prune_at_or_below(incumbent + epsilon).unwrap_or(f64::NEG_INFINITY);
    let mut status = SolveStatus::Certified;

    while let Some(vertex) = set.pop_best() {
        if *iterations >= opts.max_iterations || set.len() >= opts.max_vertices {
            set.insert(vertex);
            status = SolveStatus::BudgetExceeded;
            break;
        }
        *iterations += 1;
        let proj = project(r, &vertex.z, opts.ray_base, opts.dinkelbach_tol)?;
        let (candidate, achieved) = switch_off_improvement(r, &proj.witness)?;
        if achieved >= incumbent {
            incumbent = achieved;
            best_q = candidate;
        }
        for child in generate_children(&vertex.z, &proj.z_proj, &proj.witness) {
            set.insert(Vertex::new(child)?);
        }
        if let Some(v) = set.prune_at_or_below(incumbent + epsilon) {
            pruned_max = pruned_max.max(v);
        }
        on_iteration(TraceRow {
            iteration: *iterations,
            upper_bound: upper_bound(&set, pruned_max, incumbent),
            incumbent,
        });
    }
    Ok(BlockRun {
        q: best_q,
        incumbent,
        upper_bound: upper_bound(&set, pruned_max, incumbent),
        status,
    })
}

/// Largest number of powered coordinates whose switch-off subsets are all tried.
const SWITCH_OFF_EXHAUSTIVE: usize = 10;

/// Best of `q` and every variant of `q` with a subset of its powered
/// coordinates switched off (singletons only above
/// [`SWITCH_OFF_EXHAUSTIVE`] powered coordinates). All variants stay in the
/// power polytope, so the result is a valid incumbent; it lets the incumbent
/// reach optima on the faces `z_i = 1`, which the projections approach only
/// geometrically.
fn switch_off_improvement(r: &ReducedProblem, q: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut best = (q.to_vec(), r.z_from_p(q).objective()?);
    let powered: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 0.0).collect();
    let subsets: Vec<Vec<usize>> = if powered.len() <= SWITCH_OFF_EXHAUSTIVE {
        (1..(1usize << powered.len()))
            .map(|mask| (0..powered.len()).filter(|b| mask >> b & 1 == 1).map(|b| powered[b]).collect())
            .collect()
    } else {
        powered.iter().map(|&i| vec![i]).collect()
    };
    for off in subsets {
        let mut cand = q.to_vec();
        off.iter().for_each(|&i| cand[i] = 0.0);
        let f = r.z_from_p(&cand).objective()?;
        if f > best.1 {
            best = (cand, f);
        }
    }
    Ok(best)
}

fn upper_bound(set: &VertexSet, pruned_max: f64, incumbent: f64) -> f64 {
    set.best_value().unwrap_or(f64::NEG_INFINITY).max(pruned_max).max(incumbent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::scenario_with;

    #[test]
    fn initial_vertex_examples() {
        let r = reduce(&scenario_with(vec![vec![vec![1.0]]], 0.1, 1.0, 2.0, 2.0)).unwrap();
        assert_eq!(initial_vertex(&r).0, vec![3.0]);
        let r = reduce(&scenario_with(vec![vec![vec![2.0, 2.0]]], 0.1, 1.0, 1.0, 2.0)).unwrap();
        let z = initial_vertex(&r);
        assert_eq!(z.0[0], z.0[1]);
    }

    #[test]
    fn initial_vertex_is_beyond_its_projection() {
        let r = reduce(&scenario_with(vec![vec![vec![1.0]], vec![vec![2.0]]], 0.3, 0.1, 1.0, 1.0)).unwrap();
        let z0 = initial_vertex(&r);
        let p = fractional::dinkelbach_project(&r, &z0, fractional::DEFAULT_TOL).unwrap();
        assert!(p.lambda < 1.0);
        for factor in [1.0 + 1e-4, 1.1, 1.0 / p.lambda] {
            assert!(!r.membership(&z0.scaled(p.lambda * factor)));
        }
    }

    #[test]
    fn children_examples() {
        let z = SinrVector(vec![3.0, 3.0]);
        let children = generate_children(&z, &SinrVector(vec![2.0, 1.0]), &[0.5, 0.5]);
        assert_eq!(children, vec![SinrVector(vec![2.0, 3.0]), SinrVector(vec![3.0, 1.0])]);
        let same = generate_children(&z, &z, &[1.0, 1.0]);
        assert!(same.iter().all(|c| *c == z));
        let partial = generate_children(&z, &SinrVector(vec![2.0, 0.5]), &[0.5, 0.0]);
        assert_eq!(partial, vec![SinrVector(vec![2.0, 3.0])]);
        let clamped = generate_children(&z, &SinrVector(vec![0.5, 2.0]), &[0.1, 0.5]);
        assert_eq!(clamped[0], SinrVector(vec![1.0, 3.0]));
    }

    #[test]
    fn prune_examples() {
        let v = prune(vec![SinrVector(vec![2.0, 3.0]), SinrVector(vec![2.0, 2.0])], f64::NEG_INFINITY, 0.1);
        assert_eq!(v, vec![SinrVector(vec![2.0, 3.0])]);
        let v = prune(vec![SinrVector(vec![2.0, 3.0]), SinrVector(vec![3.0, 1.5])], 10.0, 0.1);
        assert!(v.is_empty());
        // the best vertex survives while it beats incumbent + epsilon
        let best = SinrVector(vec![4.0, 4.0]);
        let v = prune(vec![best.clone(), SinrVector(vec![5.0, 1.0])], 2.0, 0.1);
        assert_eq!(v, vec![best]);
    }

    #[test]
    fn single_link_needs_one_projection() {
        let s = scenario_with(vec![vec![vec![2.0], vec![5.0]]], 0.1, 0.5, 1.5, 3.0);
        let res = solve(&s, 0.01).unwrap();
        assert_eq!(res.projections, 1);
        assert!(res.certified);
        let closed = (1.0 + 5.0 * 1.5 / 0.5f64).ln();
        assert!((res.sum_rate_nats - closed).abs() < 1e-9);
        assert!(res.violations.is_empty());
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let s = scenario_with(vec![vec![vec![1.0]]], 0.1, 1.0, 1.0, 1.0);
        assert!(solve(&s, 0.0).is_err());
        assert!(solve(&s, -1.0).is_err());
    }

    #[test]
    fn budget_exceeded_keeps_bounds() {
        let s = scenario_with(vec![vec![vec![1.0, 2.0]], vec![vec![2.0, 1.0]]], 0.4, 0.01, 1.0, 2.0);
        let opts = SolveOptions {
            epsilon: 1e-6,
            max_iterations: 3,
            ..Default::default()
        };
        let res = solve_with(&s, &opts).unwrap();
        assert_eq!(res.status, SolveStatus::BudgetExceeded);
        assert!(!res.certified);
        assert_eq!(res.iterations, 3);
        assert!(res.upper_bound.unwrap() >= res.sum_rate_nats - 1e-9);
    }

    #[test]
    fn zero_caps_give_zero_rate() {
        let s = scenario_with(vec![vec![vec![1.0]], vec![vec![2.0]]], 0.4, 0.01, 0.0, 0.0);
        let res = solve(&s, 0.1).unwrap();
        assert!(res.certified);
        assert_eq!(res.sum_rate_nats, 0.0);
    }

    #[test]
    fn split_carriers_match_the_joint_solve() {
        let cfg = crate::experiments::RadioConfig {
            seed: 1,
            ..Default::default()
        };
        for t in [1, 13] {
            let s = crate::experiments::generate_trial(&cfg, t).unwrap();
            assert!(s.carriers_decouple());
            let opts = SolveOptions {
                epsilon: 0.5,
                record_trace: true,
                ..Default::default()
            };
            let split = solve_with(&s, &opts).unwrap();
            let joint = solve_with(&s, &SolveOptions { split_carriers: false, ..opts }).unwrap();
            assert!(split.certified && joint.certified);
            assert!((split.sum_rate_nats - joint.sum_rate_nats).abs() <= 0.5);
            assert!(split.upper_bound.unwrap() >= joint.sum_rate_nats - 1e-9);
            assert!(joint.upper_bound.unwrap() >= split.sum_rate_nats - 1e-9);
            let last = split.trace.last().unwrap();
            assert!((last.upper_bound - split.upper_bound.unwrap()).abs() < 1e-9);
            assert!(split.trace.windows(2).all(|w| w[1].upper_bound <= w[0].upper_bound + 1e-9));
        }
    }
}
