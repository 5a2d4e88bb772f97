//! Scenario generation on a hexagonal layout and the Monte Carlo studies:
//! SIC condition CDF, sum rate against power cap, and runtime against epsilon.
//!
//! Trials draw from independent generator streams keyed by `(seed, trial)`
//! and are reported in trial order, so results do not depend on the number
//! of worker threads.

mod cdf;
mod radio;
mod sweep;

use std::io::Write;

pub use cdf::{cdf_experiment, wilson, CdfTable};
pub use radio::{
    drop_user, generate_scenario, generate_trial, in_hexagon, set_caps, trial_rng, RadioConfig, MIN_DISTANCE_M,
};
pub use sweep::{
    power_sweep, runtime_bench, BenchRecord, BenchRow, BenchTable, SweepRecord, SweepRow, SweepTable, BASELINES,
    BENCH_REPEATS,
};

/// Writes `x` with 12 significant digits.
pub fn write_float(w: &mut impl Write, x: f64) -> std::io::Result<()> {
    write!(w, "{x:.11e}")
}

/// Parses a comma-separated list of floats.
pub fn parse_list(text: &str) -> crate::Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| crate::Error::Precondition(format!("not a number: {t:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_twelve_digits() {
        let mut out = Vec::new();
        write_float(&mut out, 1.0 / 3.0).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3.33333333333e-1");
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("0.1, 0.5,1").unwrap(), vec![0.1, 0.5, 1.0]);
        assert!(parse_list("0.1,x").is_err());
    }
}
