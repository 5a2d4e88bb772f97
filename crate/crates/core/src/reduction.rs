//! Reduction to one active user per (cell, sub-carrier) and the SINR-vector
//! reformulation.
//!
//! For fixed per-cell carrier powers, giving all of a cell's carrier power to
//! its strongest user on that carrier maximises the unweighted sum rate. After
//! the reduction the decision variables are `q[k][l]`, stored flat at
//! `k * L + l`, and the SINR vector `z` has one entry per (cell, sub-carrier):
//! `z = 1 + gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::model::{Allocation, CanonicalIndex, Scenario, CAP_REL_TOL};

/// Pivot tolerance for the per-carrier power solve.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Negative powers down to this many watts are clamped to zero.
pub const NEGATIVE_POWER_TOL: f64 = 1e-12;

/// SINR vector over the active (cell, sub-carrier) entries, in canonical
/// order. Use [`ReducedProblem::expand`] for the full-length vector with zeros
/// on inactive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SinrVector(pub Vec<f64>);

impl SinrVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Component-wise `self <= other`.
    pub fn dominated_by(&self, other: &SinrVector) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn scaled(&self, factor: f64) -> SinrVector {
        SinrVector(self.0.iter().map(|z| z * factor).collect())
    }

    /// Unweighted objective `sum ln z_i`.
    pub fn objective(&self) -> Result<f64> {
        objective_f(&self.0, None)
    }
}

/// `sum_i w_i ln z_i` over entries with `z_i != 0`; zero entries are the
/// inactive convention and contribute nothing. `weights = None` means all ones.
pub fn objective_f(z: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if let Some(w) = weights {
        if w.len() != z.len() {
            return Err(Error::Precondition(format!(
                "weights have length {}, z has length {}",
                w.len(),
                z.len()
            )));
        }
    }
    let mut total = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        if zi == 0.0 {
            continue;
        }
        if !(zi >= 1.0) {
            return Err(Error::Precondition(format!("active SINR entry z[{i}] = {zi} is below 1")));
        }
        total += weights.map_or(1.0, |w| w[i]) * zi.ln();
    }
    Ok(total)
}

/// The problem after fixing the strongest-user assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    scenario: Scenario,
    best_user: Vec<Vec<usize>>,
    own_gain: Vec<Vec<f64>>,
    /// `cross_gain[k][l][j]`: BS `j` to the active user of `(k, l)`; zero at `j == k`.
    cross_gain: Vec<Vec<Vec<f64>>>,
}

/// Builds the reduced problem. Only the unweighted sum rate is supported.
pub fn reduce(s: &Scenario) -> Result<ReducedProblem> {
    s.validate()?;
    if !s.has_uniform_weights() {
        return Err(Error::UnsupportedWeights);
    }
    let (kc, lc) = (s.num_cells, s.num_subcarriers);
    let mut best_user = vec![vec![0; lc]; kc];
    let mut own_gain = vec![vec![0.0; lc]; kc];
    let mut cross_gain = vec![vec![vec![0.0; kc]; lc]; kc];
    for k in 0..kc {
        for l in 0..lc {
            let mut best = 0;
            for u in 1..s.users_per_cell[k] {
                if s.own_gain(k, u, l) > s.own_gain(k, best, l) {
                    best = u;
                }
            }
            best_user[k][l] = best;
            own_gain[k][l] = s.own_gain(k, best, l);
            for j in (0..kc).filter(|&j| j != k) {
                cross_gain[k][l][j] = s.link_gain(k, best, j, l);
            }
        }
    }
    Ok(ReducedProblem {
        scenario: s.clone(),
        best_user,
        own_gain,
        cross_gain,
    })
}

impl ReducedProblem {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn num_cells(&self) -> usize {
        self.scenario.num_cells
    }

    pub fn num_subcarriers(&self) -> usize {
        self.scenario.num_subcarriers
    }

    /// Number of active entries, `K * L`.
    pub fn dim(&self) -> usize {
        self.num_cells() * self.num_subcarriers()
    }

    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.num_subcarriers() + l
    }

    pub fn best_user(&self, k: usize, l: usize) -> usize {
        self.best_user[k][l]
    }

    pub fn own_gain(&self, k: usize, l: usize) -> f64 {
        self.own_gain[k][l]
    }

    pub fn cross_gain(&self, k: usize, l: usize, j: usize) -> f64 {
        self.cross_gain[k][l][j]
    }

    pub fn noise(&self) -> f64 {
        self.scenario.noise_power
    }

    pub fn carrier_cap(&self, k: usize, l: usize) -> f64 {
        self.scenario.subcarrier_cap[k][l]
    }

    pub fn cell_cap(&self, k: usize) -> f64 {
        self.scenario.cell_cap[k]
    }

    /// Inter-cell interference seen by the active user of `(k, l)`.
    #[inline]
    pub fn interference(&self, q: &[f64], k: usize, l: usize) -> f64 {
        (0..self.num_cells())
            .filter(|&j| j != k)
            .map(|j| self.cross_gain[k][l][j] * q[self.index(j, l)])
            .sum()
    }

    /// Canonical indices of the active entries, in active-coordinate order.
    pub fn active_indices(&self) -> Vec<usize> {
        let layout = self.scenario.layout();
        (0..self.num_cells())
            .flat_map(|cell| (0..self.num_subcarriers()).map(move |subcarrier| (cell, subcarrier)))
            .map(|(cell, subcarrier)| {
                layout.flat(CanonicalIndex {
                    cell,
                    subcarrier,
                    user: self.best_user[cell][subcarrier],
                })
            })
            .collect()
    }

    /// Full-length canonical vector with `z` on active entries and 0 elsewhere.
    pub fn expand(&self, z: &SinrVector) -> Vec<f64> {
        let mut out = vec![0.0; self.scenario.vector_len()];
        for (i, flat) in self.active_indices().into_iter().enumerate() {
            out[flat] = z.0[i];
        }
        out
    }

    /// Canonical allocation: `a = 1` on the strongest user of each
    /// (cell, sub-carrier), carrying all of that carrier's power.
    pub fn allocation(&self, q: &[f64]) -> Allocation {
        let mut alloc = Allocation::zeros(self.scenario.vector_len());
        for (i, flat) in self.active_indices().into_iter().enumerate() {
            alloc.a[flat] = 1;
            alloc.p[flat] = q[i];
        }
        alloc
    }

    /// `z = 1 + gamma` for every active entry at carrier powers `q`.
    pub fn z_from_p(&self, q: &[f64]) -> SinrVector {
        let n = self.noise();
        let mut z = Vec::with_capacity(self.dim());
        for k in 0..self.num_cells() {
            for l in 0..self.num_subcarriers() {
                let i = self.index(k, l);
                z.push(1.0 + self.own_gain[k][l] * q[i] / (self.interference(q, k, l) + n));
            }
        }
        SinrVector(z)
    }

    /// The unique carrier powers realising `z`, solved per sub-carrier.
    ///
    /// Entries with `z = 1` get zero power; the remaining cells of each
    /// sub-carrier solve `g q_k - (z_k - 1) sum_j g_kj q_j = (z_k - 1) N`.
    pub fn p_from_z(&self, z: &SinrVector) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Precondition(format!(
                "SINR vector has length {}, expected {}",
                z.len(),
                self.dim()
            )));
        }
        if let Some(i) = z.0.iter().position(|&v| !(v >= 1.0)) {
            return Err(Error::Precondition(format!("z[{i}] = {} is below 1", z.0[i])));
        }
        let n = self.noise();
        let mut q = vec![0.0; self.dim()];
        for l in 0..self.num_subcarriers() {
            let cells: Vec<usize> = (0..self.num_cells()).filter(|&k| z.0[self.index(k, l)] > 1.0).collect();
            if cells.is_empty() {
                continue;
            }
            // normalised by N so the right-hand side is z - 1
            let a = cells
                .iter()
                .map(|&k| {
                    let t = z.0[self.index(k, l)] - 1.0;
                    cells
                        .iter()
                        .map(|&j| {
                            if j == k {
                                self.own_gain[k][l] / n
                            } else {
                                -t * self.cross_gain[k][l][j] / n
                            }
                        })
                        .collect()
                })
                .collect();
            let b = cells.iter().map(|&k| z.0[self.index(k, l)] - 1.0).collect();
            let x = solve_dense(a, b, SINGULAR_TOL)
                .ok_or_else(|| Error::Inconsistent(format!("singular power system on sub-carrier {l}")))?;
            for (&k, &v) in cells.iter().zip(&x) {
                if !v.is_finite() || v < -NEGATIVE_POWER_TOL {
                    return Err(Error::Inconsistent(format!(
                        "cell {k} on sub-carrier {l} needs power {v:e} W"
                    )));
                }
                q[self.index(k, l)] = v.max(0.0);
            }
        }
        Ok(q)
    }

    /// Whether `q` meets the per-carrier and per-cell caps.
    pub fn powers_within_caps(&self, q: &[f64]) -> bool {
        let over = |sum: f64, cap: f64| sum > cap * (1.0 + CAP_REL_TOL) + f64::MIN_POSITIVE;
        (0..self.num_cells()).all(|k| {
            let mut total = 0.0;
            for l in 0..self.num_subcarriers() {
                let v = q[self.index(k, l)];
                if v < 0.0 || over(v, self.carrier_cap(k, l)) {
                    return false;
                }
                total += v;
            }
            !over(total, self.cell_cap(k))
        })
    }

    /// Projects round-off out of `q`: clamps each entry to `[0, carrier cap]`
    /// and shrinks any cell whose total exceeds its cap.
    pub fn clip_to_caps(&self, q: &mut [f64]) {
        for k in 0..self.num_cells() {
            let mut total = 0.0;
            for l in 0..self.num_subcarriers() {
                let v = &mut q[self.index(k, l)];
                *v = v.clamp(0.0, self.carrier_cap(k, l));
                total += *v;
            }
            if total > self.cell_cap(k) {
                let shrink = self.cell_cap(k) / total;
                for l in 0..self.num_subcarriers() {
                    q[self.index(k, l)] *= shrink;
                }
            }
        }
    }

    /// Membership in the feasible SINR set: some capped power vector realises `z`.
    pub fn membership(&self, z: &SinrVector) -> bool {
        self.p_from_z(z).is_ok_and(|q| self.powers_within_caps(&q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::scenario_with;

    fn symmetric_pair() -> ReducedProblem {
        reduce(&scenario_with(vec![vec![vec![1.0]], vec![vec![1.0]]], 0.5, 1.0, 5.0, 5.0)).unwrap()
    }

    #[test]
    fn reduce_picks_strongest_user() {
        let r = reduce(&scenario_with(vec![vec![vec![3.0], vec![1.0], vec![2.0]]], 0.1, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.best_user(0, 0), 0);
        let r = reduce(&scenario_with(vec![vec![vec![1.0], vec![1.0], vec![1.0]]], 0.1, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.best_user(0, 0), 0);
        let r = reduce(&scenario_with(
            vec![vec![vec![1.0, 4.0], vec![2.0, 3.0]], vec![vec![5.0, 1.0], vec![1.0, 2.0], vec![0.5, 7.0]]],
            0.1,
            1.0,
            1.0,
            2.0,
        ))
        .unwrap();
        let alloc = r.allocation(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(alloc.a.iter().filter(|&&a| a == 1).count(), 4);
        assert_eq!((r.best_user(0, 0), r.best_user(0, 1), r.best_user(1, 0), r.best_user(1, 1)), (1, 0, 0, 2));
    }

    #[test]
    fn reduce_rejects_weights() {
        let mut s = scenario_with(vec![vec![vec![1.0], vec![2.0]]], 0.1, 1.0, 1.0, 1.0);
        s.weights = Some(vec![vec![1.0, 0.5]]);
        assert!(matches!(reduce(&s), Err(Error::UnsupportedWeights)));
        s.weights = Some(vec![vec![1.0, 1.0]]);
        assert!(reduce(&s).is_ok());
    }

    #[test]
    fn z_from_p_examples() {
        let r = symmetric_pair();
        assert_eq!(r.z_from_p(&[0.0, 0.0]).0, vec![1.0, 1.0]);
        assert_eq!(r.z_from_p(&[2.0, 2.0]).0, vec![2.0, 2.0]);
        let single = reduce(&scenario_with(vec![vec![vec![3.0]]], 0.1, 2.0, 5.0, 5.0)).unwrap();
        assert_eq!(single.z_from_p(&[4.0]).0, vec![1.0 + 3.0 * 4.0 / 2.0]);
    }

    #[test]
    fn p_from_z_examples() {
        let r = symmetric_pair();
        assert_eq!(r.p_from_z(&SinrVector(vec![1.0, 1.0])).unwrap(), vec![0.0, 0.0]);
        let q = r.p_from_z(&SinrVector(vec![2.0, 2.0])).unwrap();
        assert!((q[0] - 2.0).abs() < 1e-12 && (q[1] - 2.0).abs() < 1e-12);

        // negligible cross gains decouple the cells
        let r = reduce(&scenario_with(vec![vec![vec![2.0]], vec![vec![4.0]]], 1e-300, 0.5, 5.0, 5.0)).unwrap();
        let q = r.p_from_z(&SinrVector(vec![3.0, 5.0])).unwrap();
        assert!((q[0] - 2.0 * 0.5 / 2.0).abs() < 1e-15);
        assert!((q[1] - 4.0 * 0.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn p_from_z_inconsistent_when_interference_limited() {
        // gamma = 1 each needs q = (z-1)(0.5 q' + 1): fine; gamma = 3 needs
        // spectral radius 3 * 0.5 > 1, no non-negative solution
        let r = symmetric_pair();
        assert!(matches!(r.p_from_z(&SinrVector(vec![4.0, 4.0])), Err(Error::Inconsistent(_))));
        assert!(!r.membership(&SinrVector(vec![4.0, 4.0])));
    }

    #[test]
    fn objective_examples() {
        let e = std::f64::consts::E;
        assert_eq!(objective_f(&[1.0, 1.0], None).unwrap(), 0.0);
        assert!((objective_f(&[e, e * e], None).unwrap() - 3.0).abs() < 1e-15);
        assert!((objective_f(&[e, 0.0, e], Some(&[0.5, 9.0, 2.0])).unwrap() - 2.5).abs() < 1e-15);
        assert!(objective_f(&[0.5], None).is_err());
    }

    #[test]
    fn membership_examples() {
        let r = symmetric_pair();
        assert!(r.membership(&SinrVector(vec![1.0, 1.0])));
        // interference-free corner 1 + g pbar / N is out of reach with cross gains
        let corner = SinrVector(vec![1.0 + 5.0, 1.0 + 5.0]);
        assert!(!r.membership(&corner));
        assert!(r.membership(&SinrVector(vec![1.5, 1.5])));
        assert!(r.membership(&SinrVector(vec![1.2, 1.0])));
    }

    #[test]
    fn expand_puts_zeros_on_inactive_entries() {
        let r = reduce(&scenario_with(vec![vec![vec![1.0], vec![2.0]]], 0.1, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.expand(&SinrVector(vec![3.0])), vec![0.0, 3.0]);
        assert_eq!(r.active_indices(), vec![1]);
    }
}
