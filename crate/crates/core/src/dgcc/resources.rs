//! Per-round bookkeeping: hypervolume progress, optimization potential,
//! stagnation and the integer evaluation budget of each component.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative improvement below which a component counts as stagnant.
pub const STAGNATION_THRESHOLD: f64 = 5e-5;

/// `mean(deltas) + delta_const`.
pub fn balancing_coefficient<T: Scalar>(deltas: &[T], delta_const: T) -> Result<T> {
    if deltas.is_empty() {
        return Err(Error::invalid("deltas", "need at least one component"));
    }
    if !(delta_const > T::zero()) {
        return Err(Error::invalid("delta_const", "must be positive"));
    }
    let mean = deltas.iter().copied().sum::<T>() / T::of_usize(deltas.len());
    Ok(mean + delta_const)
}

/// `(delta + balance) * size`.
pub fn optimization_potential<T: Scalar>(delta: T, balance: T, size: usize) -> Result<T> {
    if size < 1 {
        return Err(Error::invalid("N_i", "component must hold at least one POI"));
    }
    Ok((delta + balance) * T::of_usize(size))
}

/// True iff `c_prev > 0` and `delta / c_prev` is strictly below the threshold.
pub fn detect_stagnation<T: Scalar>(delta: T, c_prev: T) -> bool {
    c_prev > T::zero() && delta / c_prev < T::of(STAGNATION_THRESHOLD)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ResourceLedger<T> {
    /// Component hypervolume at the end of the last round.
    pub c: Vec<T>,
    pub delta: Vec<T>,
    pub potential: Vec<T>,
    /// POI count of each component's cluster.
    pub sizes: Vec<usize>,
    pub stagnant: Vec<bool>,
    pub i_bas: usize,
    pub i_add: usize,
    pub delta_const: T,
    pub balance: T,
}

impl<T: Scalar> ResourceLedger<T> {
    /// Fresh ledger: unit potentials, nobody stagnant.
    pub fn new(sizes: Vec<usize>, i_bas: usize, i_add: usize, delta_const: T) -> Self {
        let m = sizes.len();
        Self {
            c: vec![T::zero(); m],
            delta: vec![T::zero(); m],
            potential: vec![T::one(); m],
            sizes,
            stagnant: vec![false; m],
            i_bas,
            i_add,
            delta_const,
            balance: delta_const,
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Indices of non-stagnant components.
    pub fn non_stagnant(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.stagnant[i]).collect()
    }

    /// Records the hypervolumes reached this round and recomputes
    /// improvements, balance, potentials and stagnation flags.
    pub fn update(&mut self, c_new: &[T]) -> Result<()> {
        if c_new.len() != self.len() {
            return Err(Error::invalid("c_new", "one value per component required"));
        }
        for i in 0..self.len() {
            self.delta[i] = c_new[i] - self.c[i];
            self.stagnant[i] = detect_stagnation(self.delta[i], self.c[i]);
        }
        self.balance = balancing_coefficient(&self.delta, self.delta_const)?;
        for i in 0..self.len() {
            self.potential[i] = optimization_potential(self.delta[i], self.balance, self.sizes[i])?;
        }
        self.c.copy_from_slice(c_new);
        Ok(())
    }
}

/// Integer budgets: `I_bas` for everyone plus `|U| * I_add` split over the
/// non-stagnant set `U` in proportion to potential. Floors are topped up
/// one evaluation at a time in descending potential (ties: lower index),
/// so the total is exactly `m * I_bas + |U| * I_add`.
///
/// Negative potentials count as zero; if every weight in `U` is zero the
/// pool is split evenly.
pub fn allocate_resources<T: Scalar>(ledger: &ResourceLedger<T>) -> Vec<usize> {
    let mut out = vec![ledger.i_bas; ledger.len()];
    let u = ledger.non_stagnant();
    if u.is_empty() {
        if ledger.i_add > 0 {
            log::debug!("all components stagnant; additional pool unspent this round");
        }
        return out;
    }
    let pool = u.len() * ledger.i_add;
    let mut weights: Vec<f64> = u
        .iter()
        .map(|&i| ledger.potential[i].as_f64().max(0.0))
        .map(|w| if w.is_finite() { w } else { 0.0 })
        .collect();
    let mut total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        weights = vec![1.0; u.len()];
        total = u.len() as f64;
    }
    let mut granted = 0usize;
    for (k, &i) in u.iter().enumerate() {
        let share = ((pool as f64) * weights[k] / total).floor() as usize;
        let share = share.min(pool - granted);
        out[i] += share;
        granted += share;
    }
    let mut by_weight: Vec<usize> = (0..u.len()).collect();
    by_weight.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut k = 0;
    while granted < pool {
        out[u[by_weight[k % u.len()]]] += 1;
        granted += 1;
        k += 1;
    }
    out
}
