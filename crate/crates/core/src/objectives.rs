//! Travel-time, travel-cost and experience objectives, all minimized.
//!
//! For a visited sequence `s` of length `k`:
//!
//! * `f_t = omega * sum w_t(s_i, s_i+1)`
//! * `f_c = omega * (sum w_c(s_i, s_i+1) + sum w_c(s_i))`
//! * `f_e = theta * sum 1 / score(s_i)`
//!
//! with `omega = 1 - k / (capacity + alpha_ctrl)` and `capacity = D * M`.

use serde::{Deserialize, Serialize};

use crate::encoding::{validate, DecompositionPlan, Genome, EMPTY};
use crate::error::{Error, Result};
use crate::instance::ClusteredInstance;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", into = "[T; 3]", from = "[T; 3]")]
pub struct ObjectiveVector<T> {
    pub f_t: T,
    pub f_c: T,
    pub f_e: T,
}

impl<T: Scalar> ObjectiveVector<T> {
    pub fn new(f_t: T, f_c: T, f_e: T) -> Self {
        Self { f_t, f_c, f_e }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.f_t, self.f_c, self.f_e]
    }

    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.f_t), f(self.f_c), f(self.f_e))
    }
}

impl<T: Scalar> From<ObjectiveVector<T>> for [T; 3] {
    fn from(v: ObjectiveVector<T>) -> Self {
        v.to_array()
    }
}

impl<T: Scalar> From<[T; 3]> for ObjectiveVector<T> {
    fn from(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// How candidates of one component are scored during its evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Full objectives of the candidate assembled into the current best solution.
    #[default]
    Context,
    /// Objectives of the component's own segment, boundary edges excluded.
    Isolated,
}

/// Capacity used by `omega` when scoring a lone segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaScope {
    /// `d_i * M` of the segment.
    #[default]
    Local,
    /// `D * M` of the whole itinerary.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct EvalConfig<T> {
    pub alpha_ctrl: T,
    pub theta: T,
    pub eval_mode: EvalMode,
    pub count_interday_edges: bool,
    pub segment_omega: OmegaScope,
}

impl<T: Scalar> Default for EvalConfig<T> {
    fn default() -> Self {
        Self {
            alpha_ctrl: T::of(0.8),
            theta: T::of(10_000.0),
            eval_mode: EvalMode::Context,
            count_interday_edges: true,
            segment_omega: OmegaScope::Local,
        }
    }
}

impl<T: Scalar> EvalConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_ctrl > T::zero()) {
            return Err(Error::invalid("alpha_ctrl", "must be positive"));
        }
        if !(self.theta > T::zero()) {
            return Err(Error::invalid("theta", "must be positive"));
        }
        Ok(())
    }
}

/// Balancing factor `1 - k / (D*M + alpha_ctrl)`.
pub fn omega<T: Scalar>(k: usize, days: usize, day_len: usize, alpha_ctrl: T) -> Result<T> {
    let capacity = days * day_len;
    if k > capacity {
        return Err(Error::OutOfRange { index: k, len: capacity + 1 });
    }
    Ok(omega_unchecked(k, capacity, alpha_ctrl))
}

#[inline]
fn omega_unchecked<T: Scalar>(k: usize, capacity: usize, alpha_ctrl: T) -> T {
    T::one() - T::of_usize(k) / (T::of_usize(capacity) + alpha_ctrl)
}

/// Unweighted sums along a visited sequence.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PathSums<T> {
    pub visits: usize,
    pub edge_time: T,
    pub edge_cost: T,
    pub visit_cost: T,
    pub inverse_score: T,
}

/// Sums over the non-zero slots of `slots`. Slot `p` lies in day
/// `p / day_len`; with `count_interday_edges = false` only edges between
/// consecutive visits of the same day are counted.
pub fn path_sums<T: Scalar>(
    instance: &ClusteredInstance<T>,
    slots: &[u32],
    day_len: usize,
    count_interday_edges: bool,
) -> PathSums<T> {
    let mut sums = PathSums::default();
    let mut prev: Option<(usize, usize)> = None;
    for (pos, &id) in slots.iter().enumerate() {
        if id == EMPTY {
            continue;
        }
        let idx = instance.index_of(id).expect("slot holds a known POI id");
        let day = pos / day_len;
        if let Some((p, pday)) = prev {
            if count_interday_edges || pday == day {
                sums.edge_time = sums.edge_time + instance.time_at(p, idx);
                sums.edge_cost = sums.edge_cost + instance.cost_at(p, idx);
            }
        }
        let poi = &instance.pois()[idx];
        sums.visit_cost = sums.visit_cost + poi.visit_cost;
        sums.inverse_score = sums.inverse_score + poi.score.recip();
        sums.visits += 1;
        prev = Some((idx, day));
    }
    sums
}

fn objectives_from_sums<T: Scalar>(sums: &PathSums<T>, capacity: usize, cfg: &EvalConfig<T>) -> ObjectiveVector<T> {
    let w = omega_unchecked(sums.visits, capacity, cfg.alpha_ctrl);
    ObjectiveVector::new(
        w * sums.edge_time,
        w * (sums.edge_cost + sums.visit_cost),
        cfg.theta * sums.inverse_score,
    )
}

/// Full objectives of a genome assumed structurally valid.
#[inline]
pub(crate) fn full_objectives<T: Scalar>(
    slots: &[u32],
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
    cfg: &EvalConfig<T>,
) -> ObjectiveVector<T> {
    let sums = path_sums(instance, slots, plan.day_len(), cfg.count_interday_edges);
    objectives_from_sums(&sums, plan.genome_len(), cfg)
}

/// Objectives of component `i`'s segment slots taken alone.
pub(crate) fn segment_objectives<T: Scalar>(
    segment: &[u32],
    i: usize,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
    cfg: &EvalConfig<T>,
) -> ObjectiveVector<T> {
    let sums = path_sums(instance, segment, plan.day_len(), cfg.count_interday_edges);
    let capacity = match cfg.segment_omega {
        OmegaScope::Local => plan.segment_len(i),
        OmegaScope::Global => plan.genome_len(),
    };
    objectives_from_sums(&sums, capacity, cfg)
}

fn invalid_genome(violations: Vec<crate::encoding::Violation>) -> Error {
    let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
    Error::invalid("genome", text.join("; "))
}

pub fn evaluate_full<T: Scalar>(
    genome: &Genome,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
    cfg: &EvalConfig<T>,
) -> Result<ObjectiveVector<T>> {
    validate(genome, plan, instance).map_err(invalid_genome)?;
    Ok(full_objectives(genome.slots(), plan, instance, cfg))
}

/// Objectives of segment `i` alone: edges to neighbouring segments are
/// excluded and `omega` uses the segment's own visit count.
pub fn evaluate_segment<T: Scalar>(
    genome: &Genome,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
    cfg: &EvalConfig<T>,
    i: usize,
) -> Result<ObjectiveVector<T>> {
    let view = crate::encoding::segment_of(genome, plan, i)?;
    let violations = crate::encoding::segment_violations(view.slots(), i, plan, instance);
    if !violations.is_empty() {
        return Err(invalid_genome(violations));
    }
    Ok(segment_objectives(view.slots(), i, plan, instance, cfg))
}

/// Per-day normalization `f / d_i`.
pub fn normalized_fitness<T: Scalar>(v: ObjectiveVector<T>, days: usize) -> Result<ObjectiveVector<T>> {
    if days == 0 {
        return Err(Error::invalid("days", "must be at least 1"));
    }
    let d = T::of_usize(days);
    Ok(v.map(|x| x / d))
}
