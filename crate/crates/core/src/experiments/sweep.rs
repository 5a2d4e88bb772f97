use std::f64::consts::LN_2;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::radio::{generate_trial, set_caps, RadioConfig};
use super::write_float;
use crate::error::{Error, Result};
use crate::oracle;
use crate::polyblock::{self, SolveOptions};
use crate::reduction::reduce;

pub const BASELINES: [&str; 2] = ["full-power", "greedy"];

/// Per-trial outcome of one allocator at one (cap, epsilon).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub trial: u64,
    pub cap_w: f64,
    /// `None` for the baselines, which ignore epsilon.
    pub epsilon: Option<f64>,
    pub algo: String,
    pub sum_rate_nats: f64,
    pub certified: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cap_w: f64,
    pub epsilon: f64,
    pub algo: String,
    pub mean_sum_rate_nats: f64,
    pub mean_sum_rate_bits: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Ordered by trial, then cap, then algorithm as in `rows`.
    pub records: Vec<SweepRecord>,
}

impl SweepTable {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "cap_w,epsilon,algo,mean_sum_rate_nats,mean_sum_rate_bits,trials")?;
        for r in &self.rows {
            write_float(&mut w, r.cap_w)?;
            w.write_all(b",")?;
            write_float(&mut w, r.epsilon)?;
            write!(w, ",{},", r.algo)?;
            write_float(&mut w, r.mean_sum_rate_nats)?;
            w.write_all(b",")?;
            write_float(&mut w, r.mean_sum_rate_bits)?;
            writeln!(w, ",{}", r.trials)?;
        }
        Ok(())
    }
}

fn check_positive(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Precondition(format!("{name} must be a non-empty list of positive values")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Sum rate against per-carrier cap for polyblock at each epsilon and for
/// both baselines.
///
/// Caps are visited in increasing order per trial and, at each cap, epsilons
/// in decreasing order. Every polyblock run is warm-started from the previous
/// run's allocation, which stays feasible when caps grow; so each trial's
/// curve is non-decreasing in the cap and a smaller epsilon never reports
/// less than a larger one.
pub fn power_sweep(cfg: &RadioConfig, caps: &[f64], epsilons: &[f64], trials: usize, base: &SolveOptions) -> Result<SweepTable> {
    cfg.validate()?;
    check_positive("caps", caps)?;
    check_positive("epsilons", epsilons)?;
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let caps = sorted(caps);
    let epsilons = sorted(epsilons);

    let per_trial: Vec<Vec<SweepRecord>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| sweep_trial(cfg, &caps, &epsilons, t, base))
        .collect::<Result<_>>()?;
    let records: Vec<SweepRecord> = per_trial.concat();

    let mut rows = Vec::new();
    for &cap in &caps {
        for &eps in &epsilons {
            for algo in std::iter::once("polyblock").chain(BASELINES) {
                let sel: Vec<f64> = records
                    .iter()
                    .filter(|r| r.cap_w == cap && r.algo == algo && r.epsilon.is_none_or(|e| e == eps))
                    .map(|r| r.sum_rate_nats)
                    .collect();
                let mean = sel.iter().sum::<f64>() / sel.len() as f64;
                rows.push(SweepRow {
                    cap_w: cap,
                    epsilon: eps,
                    algo: algo.to_string(),
                    mean_sum_rate_nats: mean,
                    mean_sum_rate_bits: mean / LN_2,
                    trials: sel.len(),
                });
            }
        }
    }
    Ok(SweepTable { rows, records })
}

fn sweep_trial(cfg: &RadioConfig, caps: &[f64], epsilons: &[f64], t: u64, base: &SolveOptions) -> Result<Vec<SweepRecord>> {
    let mut s = generate_trial(cfg, t)?;
    let mut out = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    for &cap in caps {
        let capped = cfg.with_cap(cap);
        set_caps(&mut s, &capped);
        let r = reduce(&s)?;
        warm = warm.filter(|q| r.powers_within_caps(q));
        let mut solved = Vec::with_capacity(epsilons.len());
        for &eps in epsilons.iter().rev() {
            let opts = SolveOptions {
                epsilon: eps,
                warm_start: warm.take(),
                record_trace: false,
                ..base.clone()
            };
            let res = polyblock::solve_with(&s, &opts)?;
            warm = Some(res.carrier_powers.clone());
            solved.push((eps, res));
        }
        for (eps, res) in solved.into_iter().rev() {
            out.push(SweepRecord {
                trial: t,
                cap_w: cap,
                epsilon: Some(eps),
                algo: "polyblock".into(),
                sum_rate_nats: res.sum_rate_nats,
                certified: res.certified,
                iterations: res.iterations,
            });
        }
        for (algo, res) in BASELINES.into_iter().zip([oracle::baseline_full_power(&s)?, oracle::baseline_greedy(&s)?]) {
            out.push(SweepRecord {
                trial: t,
                cap_w: cap,
                epsilon: None,
                algo: algo.into(),
                sum_rate_nats: res.sum_rate_nats,
                certified: false,
                iterations: res.iterations,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub trial: u64,
    pub epsilon: f64,
    /// Fastest of [`BENCH_REPEATS`] identical runs.
    pub wall_ms: f64,
    pub iterations: usize,
    pub sum_rate_nats: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub epsilon: f64,
    pub algo: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub mean_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub records: Vec<BenchRecord>,
}

impl BenchTable {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epsilon,algo,mean_ms,std_ms,mean_iters")?;
        for r in &self.rows {
            write_float(&mut w, r.epsilon)?;
            write!(w, ",{},", r.algo)?;
            write_float(&mut w, r.mean_ms)?;
            w.write_all(b",")?;
            write_float(&mut w, r.std_ms)?;
            w.write_all(b",")?;
            write_float(&mut w, r.mean_iters)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub const BENCH_REPEATS: usize = 3;

/// Polyblock wall time and iteration count per epsilon.
///
/// Runs sequentially so timings do not compete for cores; each record keeps
/// the fastest of [`BENCH_REPEATS`] runs.
pub fn runtime_bench(cfg: &RadioConfig, epsilons: &[f64], trials: usize, base: &SolveOptions) -> Result<BenchTable> {
    cfg.validate()?;
    check_positive("epsilons", epsilons)?;
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let epsilons = sorted(epsilons);
    let mut records = Vec::new();
    for t in 0..trials as u64 {
        let s = generate_trial(cfg, t)?;
        for &eps in &epsilons {
            let opts = SolveOptions {
                epsilon: eps,
                record_trace: false,
                ..base.clone()
            };
            let mut best: Option<BenchRecord> = None;
            for _ in 0..BENCH_REPEATS {
                let res = polyblock::solve_with(&s, &opts)?;
                if best.as_ref().is_none_or(|b| res.wall_time_ms < b.wall_ms) {
                    best = Some(BenchRecord {
                        trial: t,
                        epsilon: eps,
                        wall_ms: res.wall_time_ms,
                        iterations: res.iterations,
                        sum_rate_nats: res.sum_rate_nats,
                        certified: res.certified,
                    });
                }
            }
            records.extend(best);
        }
    }
    let rows = epsilons
        .iter()
        .map(|&eps| {
            let sel: Vec<&BenchRecord> = records.iter().filter(|r| r.epsilon == eps).collect();
            let n = sel.len() as f64;
            let mean = sel.iter().map(|r| r.wall_ms).sum::<f64>() / n;
            let var = if sel.len() > 1 {
                sel.iter().map(|r| (r.wall_ms - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            BenchRow {
                epsilon: eps,
                algo: "polyblock".into(),
                mean_ms: mean,
                std_ms: var.sqrt(),
                mean_iters: sel.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(BenchTable { rows, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RadioConfig {
        RadioConfig {
            num_subcarriers: 1,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn sweep_shapes_and_order() {
        let t = power_sweep(&small(), &[1.0, 0.5], &[1.0, 0.5], 2, &SolveOptions::default()).unwrap();
        // 2 caps x 2 epsilons x 3 algorithms
        assert_eq!(t.rows.len(), 12);
        assert_eq!(t.rows[0].cap_w, 0.5);
        assert_eq!(t.rows[0].epsilon, 0.5);
        assert_eq!(t.rows[0].algo, "polyblock");
        assert!(t.rows.iter().all(|r| r.trials == 2));
        // per trial: 2 caps x (2 polyblock + 2 baselines)
        assert_eq!(t.records.len(), 16);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("cap_w,epsilon,algo,mean_sum_rate_nats,mean_sum_rate_bits,trials\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let o = SolveOptions::default();
        assert!(power_sweep(&small(), &[], &[0.1], 1, &o).is_err());
        assert!(power_sweep(&small(), &[1.0], &[0.0], 1, &o).is_err());
        assert!(power_sweep(&small(), &[1.0], &[0.1], 0, &o).is_err());
        assert!(runtime_bench(&small(), &[-1.0], 1, &o).is_err());
    }

    #[test]
    fn bench_rows() {
        let t = runtime_bench(&small(), &[1.0, 0.5], 2, &SolveOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.records.len(), 4);
        assert!(t.rows.iter().all(|r| r.mean_ms >= 0.0 && r.std_ms >= 0.0 && r.mean_iters >= 1.0));
    }
}
