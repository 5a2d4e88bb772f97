#![allow(dead_code)]

use mcnoma::model::ScenarioMeta;
use mcnoma::reduction::reduce;
use mcnoma::{ReducedProblem, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random instance with `k` cells, `l` carriers and `m` users per cell.
/// Serving links span two decades, cross links are weaker by up to another
/// decade, and the cell cap sits between the largest carrier cap and their sum.
pub fn random_scenario(rng: &mut impl Rng, k: usize, l: usize, m: usize) -> Scenario {
    let gains = (0..k)
        .map(|cell| {
            (0..m)
                .map(|_| {
                    (0..k)
                        .map(|bs| {
                            (0..l)
                                .map(|_| {
                                    if bs == cell {
                                        log_uniform(rng, 1e-2, 1.0)
                                    } else {
                                        log_uniform(rng, 1e-3, 1e-1)
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let subcarrier_cap: Vec<Vec<f64>> = (0..k).map(|_| (0..l).map(|_| rng.random_range(0.5..2.0)).collect()).collect();
    let cell_cap = subcarrier_cap
        .iter()
        .map(|caps| {
            let max = caps.iter().copied().fold(0.0, f64::max);
            let sum: f64 = caps.iter().sum();
            rng.random_range(max..=sum)
        })
        .collect();
    Scenario {
        num_cells: k,
        num_subcarriers: l,
        users_per_cell: vec![m; k],
        sic_limit: 2,
        gains,
        noise_power: log_uniform(rng, 1e-2, 1e-1),
        subcarrier_cap,
        cell_cap,
        weights: None,
        meta: ScenarioMeta::default(),
    }
}

/// Random instance with random shape, small enough for every test.
pub fn random_small(rng: &mut impl Rng) -> Scenario {
    let k = rng.random_range(1..=3);
    let l = rng.random_range(1..=2);
    let m = rng.random_range(1..=3);
    random_scenario(rng, k, l, m)
}

/// Uniform point of the capped power polytope: uniform in the carrier box,
/// then shrunk per cell onto the cell cap when above it.
pub fn random_powers(rng: &mut impl Rng, r: &ReducedProblem) -> Vec<f64> {
    let mut q = vec![0.0; r.dim()];
    for k in 0..r.num_cells() {
        for l in 0..r.num_subcarriers() {
            q[r.index(k, l)] = rng.random_range(0.0..=r.carrier_cap(k, l));
        }
        let total: f64 = (0..r.num_subcarriers()).map(|l| q[r.index(k, l)]).sum();
        if total > r.cell_cap(k) {
            let shrink = r.cell_cap(k) / total;
            for l in 0..r.num_subcarriers() {
                q[r.index(k, l)] *= shrink;
            }
        }
    }
    q
}

pub fn reduced(s: &Scenario) -> ReducedProblem {
    reduce(s).expect("generated scenarios reduce")
}

/// Relative closeness with an absolute floor of `tol` near zero.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// At most two cells, for properties that run the full solver.
pub fn random_solvable(rng: &mut impl Rng) -> Scenario {
    let k = rng.random_range(1..=2);
    let l = rng.random_range(1..=2);
    let m = rng.random_range(1..=3);
    random_scenario(rng, k, l, m)
}
