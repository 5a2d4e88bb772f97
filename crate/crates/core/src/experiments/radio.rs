use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Scenario, ScenarioMeta};

/// Radio and layout parameters for generated scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Hexagon circumradius, meters.
    pub cell_radius_m: f64,
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub num_subcarriers: usize,
    pub sic_limit: usize,
    /// Bandwidth of one sub-carrier, Hz.
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    /// Path loss `intercept + slope * log10(d_km)`, dB.
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub subcarrier_cap_w: f64,
    /// Defaults to `num_subcarriers * subcarrier_cap_w`.
    pub cell_cap_w: Option<f64>,
    /// Multiplies every gain by an i.i.d. unit-mean exponential draw.
    pub fading: bool,
    pub seed: u64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            cell_radius_m: 100.0,
            num_cells: 2,
            users_per_cell: 3,
            num_subcarriers: 2,
            sic_limit: 2,
            bandwidth_hz: 1e6,
            noise_density_dbm_hz: -174.0,
            pathloss_intercept_db: 128.1,
            pathloss_slope_db: 37.6,
            subcarrier_cap_w: 1.0,
            cell_cap_w: None,
            fading: false,
            seed: 0,
        }
    }
}

/// Distances below this are clamped before evaluating the path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;

impl RadioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RadioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(format!("radio config: {m}")));
        if !(self.cell_radius_m.is_finite() && self.cell_radius_m > 0.0) {
            return bad("cell_radius_m must be positive");
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive");
        }
        if self.num_cells == 0 || self.users_per_cell == 0 || self.num_subcarriers == 0 || self.sic_limit == 0 {
            return bad("counts must be positive");
        }
        if !(self.subcarrier_cap_w.is_finite() && self.subcarrier_cap_w >= 0.0) {
            return bad("subcarrier_cap_w must be non-negative");
        }
        if let Some(c) = self.cell_cap_w {
            if !(c.is_finite() && c >= 0.0) {
                return bad("cell_cap_w must be non-negative");
            }
        }
        if !self.noise_density_dbm_hz.is_finite()
            || !self.pathloss_intercept_db.is_finite()
            || !self.pathloss_slope_db.is_finite()
        {
            return bad("dB parameters must be finite");
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10();
        10f64.powf(dbm / 10.0) * 1e-3
    }

    pub fn pathloss_db(&self, distance_m: f64) -> f64 {
        let d_km = distance_m.max(MIN_DISTANCE_M) / 1000.0;
        self.pathloss_intercept_db + self.pathloss_slope_db * d_km.log10()
    }

    pub fn gain(&self, distance_m: f64) -> f64 {
        10f64.powf(-self.pathloss_db(distance_m) / 10.0)
    }

    pub fn cell_cap(&self) -> f64 {
        self.cell_cap_w.unwrap_or(self.num_subcarriers as f64 * self.subcarrier_cap_w)
    }

    /// Base station `k` sits at `(k * sqrt(3) * R, 0)`.
    pub fn bs_position(&self, k: usize) -> (f64, f64) {
        (k as f64 * 3f64.sqrt() * self.cell_radius_m, 0.0)
    }

    pub fn with_cap(&self, subcarrier_cap_w: f64) -> Self {
        RadioConfig {
            subcarrier_cap_w,
            ..self.clone()
        }
    }
}

/// Per-trial generator stream: seeded by the config seed, stream = trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// True iff `(dx, dy)` lies in the hexagon of circumradius `r` with vertices
/// at `(0, +-r)`, so that neighbours along the x-axis share an edge.
pub fn in_hexagon(dx: f64, dy: f64, r: f64) -> bool {
    let (ax, ay) = (dx.abs(), dy.abs());
    ax <= 3f64.sqrt() / 2.0 * r && ay <= r - ax / 3f64.sqrt()
}

/// Uniform point in the hexagon, relative to its center.
pub fn drop_user(rng: &mut impl Rng, r: f64) -> (f64, f64) {
    let half_w = 3f64.sqrt() / 2.0 * r;
    loop {
        let dx = rng.random_range(-half_w..=half_w);
        let dy = rng.random_range(-r..=r);
        if in_hexagon(dx, dy, r) {
            return (dx, dy);
        }
    }
}

pub fn generate_scenario(cfg: &RadioConfig) -> Result<Scenario> {
    generate_trial(cfg, 0)
}

/// Drops users and builds the gain tensor for one trial.
pub fn generate_trial(cfg: &RadioConfig, trial: u64) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = trial_rng(cfg.seed, trial);
    let (kc, lc, m) = (cfg.num_cells, cfg.num_subcarriers, cfg.users_per_cell);
    let mut gains = Vec::with_capacity(kc);
    for k in 0..kc {
        let (cx, cy) = cfg.bs_position(k);
        let mut cell = Vec::with_capacity(m);
        for _ in 0..m {
            let (dx, dy) = drop_user(&mut rng, cfg.cell_radius_m);
            let (ux, uy) = (cx + dx, cy + dy);
            let mut links = Vec::with_capacity(kc);
            for j in 0..kc {
                let (bx, by) = cfg.bs_position(j);
                let g = cfg.gain((ux - bx).hypot(uy - by));
                let per_carrier: Vec<f64> = (0..lc)
                    .map(|_| {
                        if cfg.fading {
                            let h: f64 = Exp1.sample(&mut rng);
                            g * h.max(f64::MIN_POSITIVE)
                        } else {
                            g
                        }
                    })
                    .collect();
                links.push(per_carrier);
            }
            cell.push(links);
        }
        gains.push(cell);
    }
    let s = Scenario {
        num_cells: kc,
        num_subcarriers: lc,
        users_per_cell: vec![m; kc],
        sic_limit: cfg.sic_limit,
        gains,
        noise_power: cfg.noise_power_w(),
        subcarrier_cap: vec![vec![cfg.subcarrier_cap_w; lc]; kc],
        cell_cap: vec![cfg.cell_cap(); kc],
        weights: None,
        meta: ScenarioMeta {
            seed: Some(cfg.seed),
            trial: Some(trial),
            generator: Some(serde_json::to_value(cfg)?),
        },
    };
    s.validate()?;
    Ok(s)
}

/// Overwrites the caps of a generated scenario as if generated with `cfg`.
pub fn set_caps(s: &mut Scenario, cfg: &RadioConfig) {
    s.subcarrier_cap = vec![vec![cfg.subcarrier_cap_w; s.num_subcarriers]; s.num_cells];
    s.cell_cap = vec![cfg.cell_cap(); s.num_cells];
}
