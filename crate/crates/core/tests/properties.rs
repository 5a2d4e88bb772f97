mod common;

use common::{close, random_powers, random_scenario, random_small, random_solvable, reduced, rng};
use mcnoma::fractional::{dinkelbach_project, DEFAULT_TOL};
use mcnoma::model::{self, build_decoding_order, sic_pair_condition, sum_rate, CanonicalIndex, Layout};
use mcnoma::polyblock::{initial_vertex, solve_with, SolveOptions, SolveStatus};
use mcnoma::reduction::objective_f;
use mcnoma::simplex::LinearProgram;
use mcnoma::SinrVector;
use proptest::prelude::*;
use rand::Rng;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn canonical_index_is_a_bijection(users in prop::collection::vec(1usize..5, 1..4), carriers in 1usize..4) {
        let layout = Layout::new(&users, carriers);
        prop_assert_eq!(layout.len(), users.iter().sum::<usize>() * carriers);
        let mut seen = vec![false; layout.len()];
        for (i, idx) in layout.iter().enumerate() {
            prop_assert_eq!(layout.flat(idx), i);
            prop_assert_eq!(layout.triplet(i).unwrap(), idx);
            prop_assert!(!seen[i]);
            seen[i] = true;
        }
        // cell-major, then sub-carrier, then user
        let ordered: Vec<CanonicalIndex> = layout.iter().collect();
        prop_assert!(ordered.windows(2).all(|w| (w[0].cell, w[0].subcarrier, w[0].user) < (w[1].cell, w[1].subcarrier, w[1].user)));
        prop_assert!(layout.triplet(layout.len()).is_err());
    }

    #[test]
    fn more_own_power_raises_own_sinr_and_lowers_the_rest(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = random_small(&mut g);
        let r = reduced(&s);
        let q = random_powers(&mut g, &r);
        let i = g.random_range(0..r.dim());
        let mut up = q.clone();
        up[i] += g.random_range(1e-3..1.0);
        let (z0, z1) = (r.z_from_p(&q), r.z_from_p(&up));
        prop_assert!(z1.0[i] > z0.0[i]);
        for j in (0..r.dim()).filter(|&j| j != i) {
            prop_assert!(z1.0[j] <= z0.0[j]);
        }
    }

    #[test]
    fn pair_condition_matches_the_unsimplified_comparison(seed in any::<u64>()) {
        let mut g = rng(seed);
        let k_cells = g.random_range(2..=3);
        let s = random_scenario(&mut g, k_cells, 1, 2);
        let (weak, strong) = if s.own_gain(0, 0, 0) < s.own_gain(0, 1, 0) { (0, 1) } else { (1, 0) };
        let p: Vec<f64> = (0..k_cells).map(|_| g.random_range(0.0..2.0)).collect();
        let (p_weak, p_strong) = (g.random_range(1e-3..1.0), g.random_range(0.0..1.0));
        // the weak user's signal as seen by itself and by the strong user,
        // each with the strong user's signal as intra-cell interference
        let gamma = |u: usize| {
            let own = s.own_gain(0, u, 0);
            let inter: f64 = (1..k_cells).map(|i| s.link_gain(0, u, i, 0) * p[i]).sum();
            own * p_weak / (own * p_strong + inter + s.noise_power)
        };
        let lhs = sic_pair_condition(&s, 0, 0, weak, strong, &p).unwrap();
        let diff = gamma(strong) - gamma(weak);
        let scale = s.own_gain(0, strong, 0) * s.noise_power;
        prop_assume!(lhs.abs() > 1e-9 * scale);
        prop_assert_eq!(lhs > 0.0, diff > 0.0, "lhs {} diff {}", lhs, diff);
    }

    #[test]
    fn smaller_sinr_needs_smaller_powers(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = random_small(&mut g);
        let r = reduced(&s);
        let q2 = random_powers(&mut g, &r);
        let z2 = r.z_from_p(&q2);
        let z1 = SinrVector(z2.0.iter().map(|z| 1.0 + g.random_range(0.0..=1.0) * (z - 1.0)).collect());
        let (p1, p2) = (r.p_from_z(&z1).unwrap(), r.p_from_z(&z2).unwrap());
        for (a, b) in p1.iter().zip(&p2) {
            prop_assert!(*a <= b + 1e-9 * b.max(1.0), "{a} > {b}");
        }
        prop_assert!(r.membership(&z1));
    }

    #[test]
    fn objective_is_lipschitz_with_the_largest_weight(seed in any::<u64>(), n in 1usize..8) {
        let mut g = rng(seed);
        let w: Vec<f64> = (0..n).map(|_| g.random_range(0.01..3.0)).collect();
        let x1: Vec<f64> = (0..n).map(|_| 1.0 + common::log_uniform(&mut g, 1e-6, 1e3)).collect();
        let x2: Vec<f64> = (0..n).map(|_| 1.0 + common::log_uniform(&mut g, 1e-6, 1e3)).collect();
        let gap = (objective_f(&x1, Some(&w)).unwrap() - objective_f(&x2, Some(&w)).unwrap()).abs();
        let l1: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).sum();
        let lip = w.iter().copied().fold(0.0, f64::max);
        prop_assert!(gap <= lip * l1 * (1.0 + 1e-12));
    }

    #[test]
    fn sinr_round_trip_and_objective_agree(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = random_small(&mut g);
        let r = reduced(&s);
        let q = random_powers(&mut g, &r);
        let z = r.z_from_p(&q);
        let back = r.p_from_z(&z).unwrap();
        for (a, b) in q.iter().zip(&back) {
            prop_assert!(close(*a, *b, 1e-9), "{a} vs {b}");
        }
        let via_model = sum_rate(&s, &build_decoding_order(&s), &r.allocation(&q));
        prop_assert!(close(z.objective().unwrap(), via_model, 1e-9));
    }

    #[test]
    fn best_user_beats_every_split(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = loop {
            let s = random_scenario(&mut g, 2, 1, 2);
            if model::sic_always_feasible(&s) {
                break s;
            }
        };
        let r = reduced(&s);
        let order = build_decoding_order(&s);
        let layout = s.layout();
        let totals: Vec<f64> = (0..2).map(|k| g.random_range(0.0..=s.subcarrier_cap[k][0])).collect();
        let best = {
            let q: Vec<f64> = totals.clone();
            sum_rate(&s, &order, &r.allocation(&q))
        };
        let steps = 10;
        for a in 0..=steps {
            for b in 0..=steps {
                let mut alloc = model::Allocation::zeros(layout.len());
                for (k, share) in [(0usize, a), (1usize, b)] {
                    let frac = share as f64 / steps as f64;
                    for (u, part) in [(0usize, frac), (1usize, 1.0 - frac)] {
                        let i = layout.flat(CanonicalIndex { cell: k, subcarrier: 0, user: u });
                        alloc.p[i] = totals[k] * part;
                        alloc.a[i] = u8::from(alloc.p[i] > 0.0);
                    }
                }
                prop_assert!(sum_rate(&s, &order, &alloc) <= best + 1e-9 * best.max(1.0));
            }
        }
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = random_small(&mut g);
        let r = reduced(&s);
        let top = initial_vertex(&r);
        let z = SinrVector(top.0.iter().map(|t| 1.0 + g.random_range(0.05..=1.0) * (t - 1.0)).collect());
        let first = dinkelbach_project(&r, &z, DEFAULT_TOL).unwrap();
        // coordinates below 1 lie in the downward hull; membership needs z >= 1
        let clamped = SinrVector(first.z_proj.0.iter().map(|z| z.max(1.0)).collect());
        prop_assert!(r.membership(&clamped));
        let again = dinkelbach_project(&r, &clamped, DEFAULT_TOL).unwrap();
        prop_assert!((again.lambda - 1.0).abs() <= 1e-6, "lambda {}", again.lambda);
        prop_assert!(!r.membership(&z.scaled(first.lambda * (1.0 + 1e-6))));
    }
}

/// Best objective over all basic feasible points of `max c.x, A x <= b,
/// x >= 0`, found by solving every square subsystem of tight constraints.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.rows.iter().cloned().zip(lp.rhs.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let m = rows.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = mcnoma::linalg::solve_dense(a, b, 1e-12) {
            let feasible = rows.iter().all(|(r, rhs)| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= rhs + 1e-9);
            if feasible {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next n-combination of 0..m
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>(), n in 1usize..4, m in 1usize..5) {
        let mut g = rng(seed);
        let mut rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| g.random_range(-2.0..3.0)).collect()).collect();
        let mut rhs: Vec<f64> = (0..m).map(|_| g.random_range(-1.0..4.0)).collect();
        // a box keeps every instance bounded
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push(e);
            rhs.push(g.random_range(0.5..3.0));
        }
        let lp = LinearProgram { objective: (0..n).map(|_| g.random_range(-1.0..2.0)).collect(), rows, rhs };
        match (lp.solve(), vertex_enumeration(&lp)) {
            (Ok(sol), Some(best)) => {
                prop_assert!((sol.objective - best).abs() <= 1e-7 * best.abs().max(1.0), "{} vs {}", sol.objective, best);
                let feasible = lp.rows.iter().zip(&lp.rhs).all(|(r, b)| r.iter().zip(&sol.x).map(|(a, x)| a * x).sum::<f64>() <= b + 1e-7);
                prop_assert!(feasible && sol.x.iter().all(|x| *x >= -1e-9));
            }
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "simplex {:?} vs enumeration {:?}", a.map(|s| s.objective), b),
        }
    }
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn traces_are_monotone_and_certified(seed in any::<u64>(), eps in prop::sample::select(vec![0.05, 0.1, 0.5])) {
        let mut g = rng(seed);
        let s = random_solvable(&mut g);
        let opts = SolveOptions { epsilon: eps, record_trace: true, max_iterations: 4_000, ..Default::default() };
        let res = solve_with(&s, &opts).unwrap();
        prop_assert!(!res.trace.is_empty());
        for w in res.trace.windows(2) {
            prop_assert!(w[1].upper_bound <= w[0].upper_bound);
            prop_assert!(w[1].incumbent >= w[0].incumbent);
            prop_assert!(w[1].iteration == w[0].iteration + 1);
        }
        let last = res.trace.last().unwrap();
        prop_assert!(last.incumbent <= last.upper_bound);
        if res.status == SolveStatus::Certified {
            prop_assert!(last.upper_bound - last.incumbent <= eps * (1.0 + 1e-12));
            prop_assert!(res.upper_bound.unwrap() - res.sum_rate_nats <= eps + 1e-9);
        }
        prop_assert!(res.violations.is_empty());
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = random_solvable(&mut g);
        let opts = SolveOptions { epsilon: 0.1, record_trace: true, max_iterations: 2_000, ..Default::default() };
        let (mut a, mut b) = (solve_with(&s, &opts).unwrap(), solve_with(&s, &opts).unwrap());
        a.wall_time_ms = 0.0;
        b.wall_time_ms = 0.0;
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn certified_solve_beats_both_baselines(seed in any::<u64>()) {
        let mut g = rng(seed);
        let s = random_solvable(&mut g);
        let eps = 0.1;
        let opts = SolveOptions { epsilon: eps, max_iterations: 4_000, ..Default::default() };
        let res = solve_with(&s, &opts).unwrap();
        prop_assume!(res.certified);
        let fp = mcnoma::oracle::baseline_full_power(&s).unwrap();
        let gr = mcnoma::oracle::baseline_greedy(&s).unwrap();
        prop_assert!(gr.sum_rate_nats >= fp.sum_rate_nats - 1e-12);
        prop_assert!(res.sum_rate_nats >= gr.sum_rate_nats - eps);
        prop_assert!(res.upper_bound.unwrap() >= gr.sum_rate_nats - 1e-9);
        prop_assert!(fp.violations.is_empty() && gr.violations.is_empty());
    }
}
