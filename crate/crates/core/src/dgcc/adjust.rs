//! Structure adjustment: the component with the best per-day hypervolume
//! grows by one day, taken from the weakest component that can spare one,
//! with every component in between shifting by a day.

use rand::Rng;
use serde::Serialize;

use crate::dgcc::config::RunConfig;
use crate::encoding::{DecompositionPlan, Genome, EMPTY};
use crate::error::Result;
use crate::evolution::{random_block, repair_empty, Subpopulation};
use crate::instance::ClusteredInstance;
use crate::objectives::{normalized_fitness, segment_objectives, ObjectiveVector};
use crate::pareto::{choose_reference_point, hypervolume, RefPolicy};
use crate::scalar::Scalar;
use crate::stream::{StreamTag, Streams};

/// Side of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Front,
    Back,
}

/// Donor/receiver pair chosen from per-component hypervolumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Shift {
    /// Component receiving a day.
    pub i_max: usize,
    /// Component giving up a day.
    pub i_min: usize,
}

impl Shift {
    /// `i_max` = first argmax of `hv`; `i_min` = first argmin over
    /// components with more than one day. `None` if no eligible donor or
    /// donor and receiver coincide.
    pub fn select<T: Scalar>(hv: &[T], days: &[usize]) -> Option<Self> {
        let mut i_max = None;
        for (i, &h) in hv.iter().enumerate() {
            if i_max.map_or(true, |b: usize| h > hv[b]) {
                i_max = Some(i);
            }
        }
        let mut i_min = None;
        for (i, &h) in hv.iter().enumerate() {
            if days[i] > 1 && i_min.map_or(true, |b: usize| h < hv[b]) {
                i_min = Some(i);
            }
        }
        match (i_max, i_min) {
            (Some(a), Some(b)) if a != b => Some(Shift { i_max: a, i_min: b }),
            _ => None,
        }
    }

    /// Day counts after the shift.
    pub fn apply_days(&self, days: &[usize]) -> Vec<usize> {
        let mut out = days.to_vec();
        out[self.i_max] += 1;
        out[self.i_min] -= 1;
        out
    }

    fn toward_donor(&self) -> Side {
        if self.i_min > self.i_max {
            Side::Back
        } else {
            Side::Front
        }
    }

    fn is_between(&self, i: usize) -> bool {
        let (lo, hi) = if self.i_max < self.i_min {
            (self.i_max, self.i_min)
        } else {
            (self.i_min, self.i_max)
        };
        lo < i && i < hi
    }

    /// Components whose segment content changes.
    pub fn touched(&self, preserve_intermediate: bool) -> Vec<usize> {
        let (lo, hi) = if self.i_max < self.i_min {
            (self.i_max, self.i_min)
        } else {
            (self.i_min, self.i_max)
        };
        (lo..=hi)
            .filter(|&i| !preserve_intermediate || !self.is_between(i))
            .collect()
    }

    /// New slots of component `i`'s segment under this shift.
    pub(crate) fn reshape<R: Rng>(
        &self,
        i: usize,
        segment: &[u32],
        day_len: usize,
        members: &[u32],
        p_z: f64,
        preserve_intermediate: bool,
        rng: &mut R,
    ) -> Vec<u32> {
        let toward_donor = self.toward_donor();
        let toward_receiver = match toward_donor {
            Side::Front => Side::Back,
            Side::Back => Side::Front,
        };
        let (remove, add) = if i == self.i_max {
            (None, Some(toward_donor))
        } else if i == self.i_min {
            (Some(toward_receiver), None)
        } else if self.is_between(i) && !preserve_intermediate {
            (Some(toward_receiver), Some(toward_donor))
        } else {
            (None, None)
        };
        let mut out = segment.to_vec();
        match remove {
            Some(Side::Front) => {
                out.drain(..day_len);
            }
            Some(Side::Back) => out.truncate(out.len() - day_len),
            None => {}
        }
        if let Some(side) = add {
            let block = random_block(day_len, members, &out, p_z, rng);
            match side {
                Side::Front => {
                    out.splice(0..0, block);
                }
                Side::Back => out.extend(block),
            }
        }
        repair_empty(&mut out, members, rng);
        out
    }
}

/// What one adjustment did.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct AdjustOutcome<T> {
    /// Normalized per-component hypervolume used for the decision.
    pub hv: Vec<T>,
    pub shift: Option<Shift>,
    pub days_before: Vec<usize>,
    pub days_after: Vec<usize>,
    /// Isolated evaluations spent computing `hv`.
    pub fes_used: usize,
}

/// Per-component hypervolume of per-day normalized isolated objectives
/// against one shared reference. Costs one evaluation per individual.
pub fn normalized_component_hv<T: Scalar>(
    plan: &DecompositionPlan,
    subpops: &[Subpopulation<T>],
    instance: &ClusteredInstance<T>,
    cfg: &RunConfig<T>,
) -> Result<(Vec<T>, usize)> {
    let eval = cfg.eval_config();
    let mut fes = 0;
    let mut normalized: Vec<Vec<ObjectiveVector<T>>> = Vec::with_capacity(subpops.len());
    for (i, sp) in subpops.iter().enumerate() {
        let mut vs = Vec::with_capacity(sp.len());
        for seg in &sp.individuals {
            let v = segment_objectives(seg, i, plan, instance, &eval);
            vs.push(normalized_fitness(v, plan.days()[i])?);
            fes += 1;
        }
        normalized.push(vs);
    }
    let all: Vec<ObjectiveVector<T>> = normalized.iter().flatten().copied().collect();
    let reference = choose_reference_point(&all, RefPolicy::Adaptive { margin: T::of(1.1) })?;
    let hv = normalized.iter().map(|vs| hypervolume(vs, &reference)).collect();
    Ok((hv, fes))
}

/// Moves one day from the weakest eligible component to the strongest
/// and reshapes the affected subpopulations in place. Returns the new
/// plan (unchanged on a no-op). Cached objectives of reshaped
/// subpopulations are cleared.
pub fn dynamic_adjust<T: Scalar>(
    plan: &DecompositionPlan,
    subpops: &mut [Subpopulation<T>],
    instance: &ClusteredInstance<T>,
    cfg: &RunConfig<T>,
    streams: &Streams,
    adjust_index: u64,
) -> Result<(DecompositionPlan, AdjustOutcome<T>)> {
    let (hv, fes_used) = normalized_component_hv(plan, subpops, instance, cfg)?;
    let days_before = plan.days().to_vec();
    let shift = Shift::select(&hv, plan.days());
    let Some(shift) = shift else {
        return Ok((
            plan.clone(),
            AdjustOutcome { hv, shift: None, days_after: days_before.clone(), days_before, fes_used },
        ));
    };
    let days_after = shift.apply_days(plan.days());
    let new_plan = plan.with_days(days_after.clone())?;
    for i in shift.touched(cfg.preserve_intermediate_days) {
        let members = &instance.clusters()[plan.cluster(i)];
        let sp = &mut subpops[i];
        for (j, seg) in sp.individuals.iter_mut().enumerate() {
            let mut rng = streams.rng(StreamTag::Adjust, adjust_index, i as u64, j as u64);
            *seg = shift.reshape(i, seg, plan.day_len(), members, cfg.p_z, cfg.preserve_intermediate_days, &mut rng);
        }
        sp.objectives.clear();
    }
    Ok((
        new_plan,
        AdjustOutcome { hv, shift: Some(shift), days_before, days_after, fes_used },
    ))
}

/// Applies `shift` to a full genome laid out under `plan`.
pub(crate) fn reshape_genome<T: Scalar>(
    genome: &Genome,
    plan: &DecompositionPlan,
    shift: &Shift,
    instance: &ClusteredInstance<T>,
    cfg: &RunConfig<T>,
    streams: &Streams,
    adjust_index: u64,
) -> Genome {
    let mut slots = Vec::with_capacity(genome.len());
    for i in 0..plan.num_components() {
        let seg = &genome.slots()[plan.segment_range(i)];
        let members = &instance.clusters()[plan.cluster(i)];
        let mut rng = streams.rng(StreamTag::Adjust, adjust_index, i as u64, u64::MAX);
        slots.extend(shift.reshape(i, seg, plan.day_len(), members, cfg.p_z, cfg.preserve_intermediate_days, &mut rng));
    }
    debug_assert!(slots.iter().any(|&s| s != EMPTY));
    Genome::new(slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{initial_decomposition, segment_violations};
    use crate::evolution::init_subpopulation;
    use crate::instance::{generate_instance, GeneratorSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn selection_examples() {
        let s = Shift::select(&[9.0, 5.0, 1.0], &[2, 2, 2]).unwrap();
        assert_eq!(s, Shift { i_max: 0, i_min: 2 });
        assert_eq!(s.apply_days(&[2, 2, 2]), vec![3, 2, 1]);
        let s = Shift::select(&[1.0, 9.0], &[2, 1]).unwrap();
        assert_eq!(s, Shift { i_max: 1, i_min: 0 });
        assert_eq!(s.apply_days(&[2, 1]), vec![1, 2]);
        assert_eq!(Shift::select(&[9.0, 1.0, 1.0], &[3, 1, 1]), None);
        assert_eq!(Shift::select(&[4.0, 4.0], &[2, 2]), None);
        // ties: lowest index for both
        assert_eq!(Shift::select(&[4.0, 4.0, 1.0, 1.0], &[2, 2, 2, 2]), Some(Shift { i_max: 0, i_min: 2 }));
    }

    #[test]
    fn reshape_moves_blocks_toward_donor() {
        let members: Vec<u32> = (1..=20).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Shift { i_max: 0, i_min: 2 };
        // receiver appends at the back
        let r = s.reshape(0, &[1, 2, 3, 4], 2, &members, 0.0, false, &mut rng);
        assert_eq!(&r[..4], &[1, 2, 3, 4]);
        assert_eq!(r.len(), 6);
        // intermediate drops its front day and gains a back day
        let r = s.reshape(1, &[5, 6, 7, 8], 2, &members, 0.0, false, &mut rng);
        assert_eq!(&r[..2], &[7, 8]);
        assert_eq!(r.len(), 4);
        let r = s.reshape(1, &[5, 6, 7, 8], 2, &members, 0.0, true, &mut rng);
        assert_eq!(r, vec![5, 6, 7, 8]);
        // donor drops its front day
        let r = s.reshape(2, &[9, 10, 11, 12], 2, &members, 0.0, false, &mut rng);
        assert_eq!(r, vec![11, 12]);
        // mirrored direction
        let s = Shift { i_max: 2, i_min: 0 };
        let r = s.reshape(0, &[9, 10, 11, 12], 2, &members, 0.0, false, &mut rng);
        assert_eq!(r, vec![9, 10]);
        let r = s.reshape(2, &[1, 2], 2, &members, 0.0, false, &mut rng);
        assert_eq!(&r[2..], &[1, 2]);
    }

    #[test]
    fn donor_losing_its_only_poi_is_repaired() {
        let members: Vec<u32> = (1..=4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Shift { i_max: 1, i_min: 0 };
        let r = s.reshape(0, &[0, 0, 3, 0], 2, &members, 0.0, false, &mut rng);
        assert_eq!(r.len(), 2);
        assert!(r.iter().any(|&x| x != 0));
    }

    fn fixture(m: usize, days: usize) -> (ClusteredInstance<f64>, DecompositionPlan, Vec<Subpopulation<f64>>, RunConfig<f64>) {
        let inst = generate_instance(&GeneratorSpec::uniform(m, 8, 1.5), 3).unwrap();
        let plan = initial_decomposition(m, days, 3, (0..m).collect()).unwrap();
        let streams = Streams::new(5);
        let subpops = (0..m)
            .map(|i| init_subpopulation(i, &plan, &inst, 6, 0.3, &streams, 0).unwrap())
            .collect();
        let cfg = RunConfig { n: 6, day_len: 3, ..RunConfig::with_days(days) };
        (inst, plan, subpops, cfg)
    }

    #[test]
    fn adjust_keeps_plan_and_segments_valid() {
        let (inst, mut plan, mut subpops, cfg) = fixture(3, 7);
        let streams = Streams::new(9);
        for k in 0..30 {
            let (next, out) = dynamic_adjust(&plan, &mut subpops, &inst, &cfg, &streams, k).unwrap();
            assert_eq!(out.fes_used, 18);
            assert_eq!(next.days().iter().sum::<usize>(), 7);
            assert!(next.days().iter().all(|&d| d >= 1));
            plan = next;
            for (i, sp) in subpops.iter().enumerate() {
                for seg in &sp.individuals {
                    assert!(segment_violations(seg, i, &plan, &inst).is_empty(), "{seg:?}");
                }
            }
        }
    }

    #[test]
    fn untouched_components_keep_their_population() {
        let (inst, plan, mut subpops, cfg) = fixture(4, 8);
        let before = subpops.clone();
        let (next, out) = dynamic_adjust(&plan, &mut subpops, &inst, &cfg, &Streams::new(1), 0).unwrap();
        if let Some(shift) = out.shift {
            for i in 0..4 {
                if !shift.touched(false).contains(&i) {
                    assert_eq!(subpops[i], before[i]);
                }
            }
            assert_ne!(next.days(), plan.days());
        }
    }

    proptest! {
        #[test]
        fn shifted_days_stay_valid(
            hv in prop::collection::vec(0.0f64..10.0, 2..7),
            extra in prop::collection::vec(0usize..3, 7),
        ) {
            let days: Vec<usize> = (0..hv.len()).map(|i| 1 + extra[i]).collect();
            if let Some(s) = Shift::select(&hv, &days) {
                let after = s.apply_days(&days);
                prop_assert_eq!(after.iter().sum::<usize>(), days.iter().sum::<usize>());
                prop_assert!(after.iter().all(|&d| d >= 1));
            }
        }
    }
}
