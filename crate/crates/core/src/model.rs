//! Multi-cell multi-carrier NOMA instance, canonical vector layout, SINR and
//! sum-rate evaluation, and constraint checking.
//!
//! All vectors indexed by (cell, sub-carrier, user) use the canonical order:
//! cell-major, then sub-carrier, then user within the cell. Rates are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack accepted on power caps before a violation is reported.
pub const CAP_REL_TOL: f64 = 1e-9;

/// A static problem instance.
///
/// `gains[k][u][j][l]` is the linear power gain between base station `j` and
/// user `u` of cell `k` on sub-carrier `l`. The serving-link gain of that user
/// is `gains[k][u][k][l]`; every other `j` is an interfering link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub num_cells: usize,
    pub num_subcarriers: usize,
    pub users_per_cell: Vec<usize>,
    /// Maximum number of users multiplexed on one (cell, sub-carrier).
    pub sic_limit: usize,
    pub gains: Vec<Vec<Vec<Vec<f64>>>>,
    /// Noise power in watts, identical for every user and sub-carrier.
    pub noise_power: f64,
    /// Per-carrier power cap `[k][l]` in watts.
    pub subcarrier_cap: Vec<Vec<f64>>,
    /// Per-cell power cap `[k]` in watts.
    pub cell_cap: Vec<f64>,
    /// Rate weights `[k][u]`; absent means all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub meta: ScenarioMeta,
}

/// Provenance carried alongside a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

/// Non-fatal findings of [`Scenario::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Cells where the printed cap relation `sum_l pbar[k][l] <= pbar[k]` fails,
    /// i.e. where the operational per-cell power constraint can bind.
    pub binding_cell_caps: Vec<CapRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapRelation {
    pub cell: usize,
    pub carrier_cap_sum: f64,
    pub cell_cap: f64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.binding_cell_caps.is_empty()
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every hard invariant. A violated cap relation between carrier
    /// and cell caps is reported, not rejected: the per-cell power constraint
    /// is enforced on allocations either way.
    pub fn validate(&self) -> Result<ValidationReport> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let (kc, lc) = (self.num_cells, self.num_subcarriers);
        if kc == 0 || lc == 0 {
            return bad("num_cells and num_subcarriers must be positive".into());
        }
        if self.sic_limit == 0 {
            return bad("sic_limit must be positive".into());
        }
        if self.users_per_cell.len() != kc {
            return bad(format!(
                "users_per_cell has {} entries, expected {kc}",
                self.users_per_cell.len()
            ));
        }
        if let Some(k) = self.users_per_cell.iter().position(|&m| m == 0) {
            return bad(format!("cell {k} has no users"));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return bad(format!("noise_power must be positive, got {}", self.noise_power));
        }
        if self.gains.len() != kc {
            return bad(format!("gains has {} cells, expected {kc}", self.gains.len()));
        }
        for (k, cell) in self.gains.iter().enumerate() {
            if cell.len() != self.users_per_cell[k] {
                return bad(format!("gains[{k}] has {} users, expected {}", cell.len(), self.users_per_cell[k]));
            }
            for (u, user) in cell.iter().enumerate() {
                if user.len() != kc {
                    return bad(format!("gains[{k}][{u}] has {} base stations, expected {kc}", user.len()));
                }
                for (j, link) in user.iter().enumerate() {
                    if link.len() != lc {
                        return bad(format!("gains[{k}][{u}][{j}] has {} sub-carriers, expected {lc}", link.len()));
                    }
                    if let Some(l) = link.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
                        return bad(format!("gain gains[{k}][{u}][{j}][{l}] = {} must be positive and finite", link[l]));
                    }
                }
            }
        }
        if self.subcarrier_cap.len() != kc || self.subcarrier_cap.iter().any(|c| c.len() != lc) {
            return bad(format!("subcarrier_cap must be {kc} x {lc}"));
        }
        if self.cell_cap.len() != kc {
            return bad(format!("cell_cap must have {kc} entries"));
        }
        let caps_ok = self
            .subcarrier_cap
            .iter()
            .flatten()
            .chain(self.cell_cap.iter())
            .all(|c| c.is_finite() && *c >= 0.0);
        if !caps_ok {
            return bad("power caps must be finite and non-negative".into());
        }
        if let Some(w) = &self.weights {
            if w.len() != kc || w.iter().zip(&self.users_per_cell).any(|(row, &m)| row.len() != m) {
                return bad("weights must be shaped like users_per_cell".into());
            }
            if w.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return bad("weights must be finite and non-negative".into());
            }
        }

        let mut report = ValidationReport::default();
        for k in 0..kc {
            let carrier_cap_sum: f64 = self.subcarrier_cap[k].iter().sum();
            if carrier_cap_sum > self.cell_cap[k] * (1.0 + CAP_REL_TOL) {
                report.binding_cell_caps.push(CapRelation {
                    cell: k,
                    carrier_cap_sum,
                    cell_cap: self.cell_cap[k],
                });
            }
        }
        Ok(report)
    }

    /// Serving-link gain of user `u` of cell `k` on sub-carrier `l`.
    #[inline]
    pub fn own_gain(&self, k: usize, u: usize, l: usize) -> f64 {
        self.gains[k][u][k][l]
    }

    /// Gain from base station `j` to user `u` of cell `k` on sub-carrier `l`.
    #[inline]
    pub fn link_gain(&self, k: usize, u: usize, j: usize, l: usize) -> f64 {
        self.gains[k][u][j][l]
    }

    pub fn weight(&self, k: usize, u: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[k][u])
    }

    pub fn has_uniform_weights(&self) -> bool {
        self.weights
            .as_ref()
            .is_none_or(|w| w.iter().flatten().all(|&x| x == 1.0))
    }

    /// Total length of the canonical `a`, `p` and `z` vectors.
    pub fn vector_len(&self) -> usize {
        self.users_per_cell.iter().sum::<usize>() * self.num_subcarriers
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.users_per_cell, self.num_subcarriers)
    }

    /// True when no cell can reach its cell cap without first exceeding a
    /// carrier cap; sub-carriers then share no constraint and no interference.
    pub fn carriers_decouple(&self) -> bool {
        (0..self.num_cells).all(|k| self.subcarrier_cap[k].iter().sum::<f64>() <= self.cell_cap[k])
    }

    /// The single-carrier scenario on sub-carrier `l`, keeping every cap.
    pub fn carrier_slice(&self, l: usize) -> Scenario {
        Scenario {
            num_cells: self.num_cells,
            num_subcarriers: 1,
            users_per_cell: self.users_per_cell.clone(),
            sic_limit: self.sic_limit,
            gains: self
                .gains
                .iter()
                .map(|cell| cell.iter().map(|user| user.iter().map(|link| vec![link[l]]).collect()).collect())
                .collect(),
            noise_power: self.noise_power,
            subcarrier_cap: self.subcarrier_cap.iter().map(|caps| vec![caps[l]]).collect(),
            cell_cap: self.cell_cap.clone(),
            weights: self.weights.clone(),
            meta: self.meta.clone(),
        }
    }
}

/// A position in the canonical vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalIndex {
    pub cell: usize,
    pub subcarrier: usize,
    pub user: usize,
}

/// Bijection between flat indices and `(cell, sub-carrier, user)` triplets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    users_per_cell: Vec<usize>,
    num_subcarriers: usize,
    cell_offsets: Vec<usize>,
    len: usize,
}

impl Layout {
    pub fn new(users_per_cell: &[usize], num_subcarriers: usize) -> Self {
        let mut cell_offsets = Vec::with_capacity(users_per_cell.len());
        let mut acc = 0;
        for &m in users_per_cell {
            cell_offsets.push(acc);
            acc += m * num_subcarriers;
        }
        Layout {
            users_per_cell: users_per_cell.to_vec(),
            num_subcarriers,
            cell_offsets,
            len: acc,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn flat(&self, idx: CanonicalIndex) -> usize {
        debug_assert!(idx.user < self.users_per_cell[idx.cell]);
        self.cell_offsets[idx.cell] + idx.subcarrier * self.users_per_cell[idx.cell] + idx.user
    }

    pub fn triplet(&self, i: usize) -> Result<CanonicalIndex> {
        if i >= self.len {
            return Err(Error::IndexOutOfRange { index: i, len: self.len });
        }
        let cell = self.cell_offsets.partition_point(|&off| off <= i) - 1;
        let within = i - self.cell_offsets[cell];
        let m = self.users_per_cell[cell];
        Ok(CanonicalIndex {
            cell,
            subcarrier: within / m,
            user: within % m,
        })
    }

    /// Iterates all triplets in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = CanonicalIndex> + '_ {
        self.users_per_cell.iter().enumerate().flat_map(move |(cell, &m)| {
            (0..self.num_subcarriers)
                .flat_map(move |subcarrier| (0..m).map(move |user| CanonicalIndex { cell, subcarrier, user }))
        })
    }
}

/// Paired assignment and power vectors in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub a: Vec<u8>,
    pub p: Vec<f64>,
}

impl Allocation {
    pub fn zeros(len: usize) -> Self {
        Allocation { a: vec![0; len], p: vec![0.0; len] }
    }

    /// Total power `p_k^l` radiated by each cell on `subcarrier`.
    pub fn carrier_totals(&self, s: &Scenario, subcarrier: usize) -> Vec<f64> {
        let layout = s.layout();
        (0..s.num_cells)
            .map(|cell| {
                (0..s.users_per_cell[cell])
                    .map(|user| self.p[layout.flat(CanonicalIndex { cell, subcarrier, user })])
                    .sum()
            })
            .collect()
    }
}

/// Per-(cell, sub-carrier) SIC decoding order: users sorted by increasing
/// serving-link gain, ties by ascending user index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder {
    /// `order[k][l][i]` is the user decoded at position `i`.
    pub order: Vec<Vec<Vec<usize>>>,
    /// `position[k][l][u]` is the decoding position of user `u`.
    pub position: Vec<Vec<Vec<usize>>>,
}

pub fn build_decoding_order(s: &Scenario) -> DecodingOrder {
    let mut order = Vec::with_capacity(s.num_cells);
    let mut position = Vec::with_capacity(s.num_cells);
    for k in 0..s.num_cells {
        let m = s.users_per_cell[k];
        let mut ord_k = Vec::with_capacity(s.num_subcarriers);
        let mut pos_k = Vec::with_capacity(s.num_subcarriers);
        for l in 0..s.num_subcarriers {
            let mut users: Vec<usize> = (0..m).collect();
            // stable sort keeps ascending index among equal gains
            users.sort_by(|&a, &b| s.own_gain(k, a, l).total_cmp(&s.own_gain(k, b, l)));
            let mut pos = vec![0; m];
            for (i, &u) in users.iter().enumerate() {
                pos[u] = i;
            }
            ord_k.push(users);
            pos_k.push(pos);
        }
        order.push(ord_k);
        position.push(pos_k);
    }
    DecodingOrder { order, position }
}

/// SINR of the user at canonical position `idx`: own signal over intra-cell
/// interference from users decoded after it, inter-cell interference and noise.
pub fn sinr(s: &Scenario, order: &DecodingOrder, alloc: &Allocation, idx: CanonicalIndex) -> Result<f64> {
    let layout = s.layout();
    if idx.cell >= s.num_cells || idx.subcarrier >= s.num_subcarriers || idx.user >= s.users_per_cell[idx.cell] {
        return Err(Error::IndexOutOfRange {
            index: idx.user,
            len: layout.len(),
        });
    }
    if alloc.p.len() != layout.len() {
        return Err(Error::Precondition(format!(
            "allocation has length {}, expected {}",
            alloc.p.len(),
            layout.len()
        )));
    }
    Ok(sinr_unchecked(s, &layout, order, alloc, idx))
}

fn sinr_unchecked(s: &Scenario, layout: &Layout, order: &DecodingOrder, alloc: &Allocation, idx: CanonicalIndex) -> f64 {
    let CanonicalIndex { cell: k, subcarrier: l, user: u } = idx;
    let g = s.own_gain(k, u, l);
    let signal = g * alloc.p[layout.flat(idx)];
    if signal == 0.0 {
        return 0.0;
    }
    let after = &order.order[k][l][order.position[k][l][u] + 1..];
    let intra: f64 = after
        .iter()
        .map(|&v| alloc.p[layout.flat(CanonicalIndex { cell: k, subcarrier: l, user: v })])
        .sum();
    let mut inter = 0.0;
    for j in (0..s.num_cells).filter(|&j| j != k) {
        let p_j: f64 = (0..s.users_per_cell[j])
            .map(|v| alloc.p[layout.flat(CanonicalIndex { cell: j, subcarrier: l, user: v })])
            .sum();
        inter += s.link_gain(k, u, j, l) * p_j;
    }
    signal / (g * intra + inter + s.noise_power)
}

/// Weighted-by-assignment sum rate `sum_i a_i ln(1 + gamma_i)` in nats.
pub fn sum_rate(s: &Scenario, order: &DecodingOrder, alloc: &Allocation) -> f64 {
    let layout = s.layout();
    layout
        .iter()
        .enumerate()
        .filter(|(i, _)| alloc.a[*i] != 0)
        .map(|(_, idx)| sinr_unchecked(s, &layout, order, alloc, idx).ln_1p())
        .sum()
}

/// Left-hand side of the pairwise SIC condition for a weak/strong user pair
/// of cell `k` on sub-carrier `l`; the strong user can cancel the weak user's
/// signal iff the value is non-negative.
///
/// `carrier_powers[j]` is the total power of cell `j` on `l`; entry `k` is ignored.
pub fn sic_pair_condition(
    s: &Scenario,
    k: usize,
    l: usize,
    weak: usize,
    strong: usize,
    carrier_powers: &[f64],
) -> Result<f64> {
    if carrier_powers.len() != s.num_cells {
        return Err(Error::Precondition(format!(
            "expected {} per-cell carrier powers, got {}",
            s.num_cells,
            carrier_powers.len()
        )));
    }
    let (gw, gs) = (s.own_gain(k, weak, l), s.own_gain(k, strong, l));
    if gw >= gs {
        return Err(Error::Precondition(format!(
            "user {weak} (gain {gw:e}) is not weaker than user {strong} (gain {gs:e}) in cell {k} on sub-carrier {l}"
        )));
    }
    Ok(pair_condition(s, k, l, weak, strong, carrier_powers))
}

fn pair_condition(s: &Scenario, k: usize, l: usize, weak: usize, strong: usize, carrier_powers: &[f64]) -> f64 {
    let (gw, gs) = (s.own_gain(k, weak, l), s.own_gain(k, strong, l));
    let cross: f64 = (0..s.num_cells)
        .filter(|&i| i != k)
        .map(|i| (gs * s.link_gain(k, weak, i, l) - gw * s.link_gain(k, strong, i, l)) * carrier_powers[i])
        .sum();
    cross + (gs - gw) * s.noise_power
}

/// Gain-product differences `g_{k,strong} g_{i,weak} - g_{k,weak} g_{i,strong}`
/// over every cell `k`, sub-carrier `l`, decoding-ordered user pair and
/// interfering cell `i`. All non-negative means SIC is feasible for any power.
pub fn sic_gain_differences(s: &Scenario, order: &DecodingOrder) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..s.num_cells {
        for l in 0..s.num_subcarriers {
            let ord = &order.order[k][l];
            for (a, &weak) in ord.iter().enumerate() {
                for &strong in &ord[a + 1..] {
                    let (gw, gs) = (s.own_gain(k, weak, l), s.own_gain(k, strong, l));
                    for i in (0..s.num_cells).filter(|&i| i != k) {
                        out.push(gs * s.link_gain(k, weak, i, l) - gw * s.link_gain(k, strong, i, l));
                    }
                }
            }
        }
    }
    out
}

/// True iff every gain-ordered pair satisfies the SIC condition for every
/// non-negative power vector.
pub fn sic_always_feasible(s: &Scenario) -> bool {
    sic_gain_differences(s, &build_decoding_order(s)).iter().all(|&d| d >= 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Negative power, or power on an unassigned entry.
    PowerSign,
    /// Per-carrier cap `sum_u p[k][u][l] <= pbar[k][l]`.
    SubcarrierPower,
    /// Per-cell cap `sum_l sum_u p[k][u][l] <= pbar[k]`.
    CellPower,
    /// At most `sic_limit` users per (cell, sub-carrier).
    SicLimit,
    /// Pairwise SIC decodability between two active users.
    SicDecoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    pub cell: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcarrier: Option<usize>,
    pub magnitude: f64,
}

/// Lists every violated constraint; an empty list means feasible.
pub fn check_feasible(s: &Scenario, alloc: &Allocation) -> Result<Vec<Violation>> {
    let layout = s.layout();
    if alloc.a.len() != layout.len() || alloc.p.len() != layout.len() {
        return Err(Error::Precondition(format!(
            "allocation vectors must have length {}",
            layout.len()
        )));
    }
    let order = build_decoding_order(s);
    let mut out = Vec::new();
    let over = |sum: f64, cap: f64| sum > cap * (1.0 + CAP_REL_TOL) + f64::MIN_POSITIVE;

    for (i, idx) in layout.iter().enumerate() {
        let p = alloc.p[i];
        let bad = if !p.is_finite() || p < 0.0 {
            Some(if p.is_finite() { -p } else { f64::INFINITY })
        } else if alloc.a[i] == 0 && p > 0.0 {
            Some(p)
        } else {
            None
        };
        if let Some(magnitude) = bad {
            out.push(Violation {
                constraint: ConstraintKind::PowerSign,
                cell: idx.cell,
                subcarrier: Some(idx.subcarrier),
                magnitude,
            });
        }
    }

    for k in 0..s.num_cells {
        let mut cell_total = 0.0;
        for l in 0..s.num_subcarriers {
            let flat = |u| layout.flat(CanonicalIndex { cell: k, subcarrier: l, user: u });
            let users = 0..s.users_per_cell[k];
            let total: f64 = users.clone().map(|u| alloc.p[flat(u)]).sum();
            cell_total += total;
            if over(total, s.subcarrier_cap[k][l]) {
                out.push(Violation {
                    constraint: ConstraintKind::SubcarrierPower,
                    cell: k,
                    subcarrier: Some(l),
                    magnitude: total - s.subcarrier_cap[k][l],
                });
            }
            let active: Vec<usize> = order.order[k][l].iter().copied().filter(|&u| alloc.a[flat(u)] != 0).collect();
            if active.len() > s.sic_limit {
                out.push(Violation {
                    constraint: ConstraintKind::SicLimit,
                    cell: k,
                    subcarrier: Some(l),
                    magnitude: (active.len() - s.sic_limit) as f64,
                });
            }
            if active.len() >= 2 {
                let powers = alloc.carrier_totals(s, l);
                for (a, &weak) in active.iter().enumerate() {
                    for &strong in &active[a + 1..] {
                        let value = pair_condition(s, k, l, weak, strong, &powers);
                        let scale = (s.own_gain(k, strong, l) * s.noise_power).max(f64::MIN_POSITIVE);
                        if value < -1e-12 * scale {
                            out.push(Violation {
                                constraint: ConstraintKind::SicDecoding,
                                cell: k,
                                subcarrier: Some(l),
                                magnitude: -value,
                            });
                        }
                    }
                }
            }
        }
        if over(cell_total, s.cell_cap[k]) {
            out.push(Violation {
                constraint: ConstraintKind::CellPower,
                cell: k,
                subcarrier: None,
                magnitude: cell_total - s.cell_cap[k],
            });
        }
    }
    Ok(out)
}
