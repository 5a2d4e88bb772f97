use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::radio::{generate_trial, RadioConfig};
use super::write_float;
use crate::error::{Error, Result};
use crate::model::{build_decoding_order, sic_gain_differences};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfTable {
    /// Sorted gain-product differences.
    pub values: Vec<f64>,
    pub samples: usize,
    pub p_nonneg: f64,
    /// Wilson score interval for `p_nonneg`.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CdfTable {
    pub fn from_values(mut values: Vec<f64>, samples: usize) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let hits = values.iter().filter(|v| **v >= 0.0).count();
        let (p_nonneg, ci_low, ci_high) = wilson(hits, n);
        CdfTable {
            values,
            samples,
            p_nonneg,
            ci_low,
            ci_high,
        }
    }

    /// Empirical CDF at the `i`-th sorted value.
    pub fn cdf(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.values.len() as f64
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "value,cdf")?;
        for (i, v) in self.values.iter().enumerate() {
            write_float(&mut w, *v)?;
            w.write_all(b",")?;
            write_float(&mut w, self.cdf(i))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Returns `(p_hat, low, high)`; an empty sample gives `(NaN, 0, 1)`.
pub fn wilson(hits: usize, n: usize) -> (f64, f64, f64) {
    if n == 0 {
        return (f64::NAN, 0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

/// Draws `samples` scenarios and collects every SIC gain-product difference
/// (each cell, sub-carrier, decoding-ordered pair and interfering cell).
pub fn cdf_experiment(cfg: &RadioConfig, samples: usize) -> Result<CdfTable> {
    if samples == 0 {
        return Err(Error::Precondition("samples must be at least 1".into()));
    }
    cfg.validate()?;
    let per_trial: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|t| {
            let s = generate_trial(cfg, t)?;
            Ok(sic_gain_differences(&s, &build_decoding_order(&s)))
        })
        .collect::<Result<_>>()?;
    Ok(CdfTable::from_values(per_trial.concat(), samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::scenario_with;

    #[test]
    fn co_located_users_give_zero_differences() {
        let s = scenario_with(vec![vec![vec![1e-9], vec![1e-9]], vec![vec![2e-9], vec![2e-9]]], 3e-10, 1e-15, 1.0, 1.0);
        let values = sic_gain_differences(&s, &build_decoding_order(&s));
        assert!(values.iter().all(|v| *v == 0.0));
        let t = CdfTable::from_values(values, 1);
        assert_eq!(t.p_nonneg, 1.0);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let cfg = RadioConfig {
            seed: 5,
            ..Default::default()
        };
        let t = cdf_experiment(&cfg, 200).unwrap();
        assert!(t.values.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(t.cdf(t.values.len() - 1), 1.0);
        assert!(t.ci_low <= t.p_nonneg && t.p_nonneg <= t.ci_high);
        // 2 cells x 2 carriers x 3 ordered pairs x 1 interferer
        assert_eq!(t.values.len(), 200 * 12);
    }

    #[test]
    fn csv_is_reproducible() {
        let cfg = RadioConfig::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        cdf_experiment(&cfg, 50).unwrap().write_csv(&mut a).unwrap();
        cdf_experiment(&cfg, 50).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("value,cdf\n"));
    }

    #[test]
    fn wilson_interval_examples() {
        let (p, lo, hi) = wilson(90, 100);
        assert_eq!(p, 0.9);
        assert!((lo - 0.8256).abs() < 1e-3 && (hi - 0.9448).abs() < 1e-3);
        assert!(wilson(10, 10).2 > 1.0 - 1e-12);
        assert!(cdf_experiment(&RadioConfig::default(), 0).is_err());
    }
}
