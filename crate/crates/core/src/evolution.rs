//! Subpopulation lifecycle for one component: initialization, mutation,
//! two-point crossover with duplicate repair, context assembly and the
//! NSGA-II generational step.
//!
//! All operators keep a segment valid: no duplicate ids, only ids of the
//! component's cluster, and at least one visited POI.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::encoding::{segment_violations, DecompositionPlan, Genome, EMPTY};
use crate::error::{Error, Result};
use crate::instance::ClusteredInstance;
use crate::objectives::{full_objectives, segment_objectives, EvalConfig, EvalMode, ObjectiveVector};
use crate::pareto::{crowding_distance_points, non_dominated_sort_points};
use crate::scalar::Scalar;
use crate::stream::{StreamTag, Streams};

/// Population of segment genotypes for one component.
#[derive(Clone, Debug, PartialEq)]
pub struct Subpopulation<T> {
    pub component_index: usize,
    pub individuals: Vec<Vec<u32>>,
    /// One vector per individual once evaluated; empty before.
    pub objectives: Vec<ObjectiveVector<T>>,
    /// Generations run so far; keys the selection and offspring streams.
    pub generations: u64,
    /// Re-initialization counter; keys the init stream.
    pub epoch: u64,
}

impl<T: Scalar> Subpopulation<T> {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn is_evaluated(&self) -> bool {
        !self.individuals.is_empty() && self.objectives.len() == self.individuals.len()
    }
}

/// A full solution produced while evolving one component.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<T> {
    pub genome: Genome,
    pub objectives: ObjectiveVector<T>,
}

/// Current best full solution used to assemble candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextSolution<T> {
    pub genome: Genome,
    pub objectives: ObjectiveVector<T>,
    pub hv_contrib: T,
}

fn members_of<'a, T: Scalar>(
    plan: &DecompositionPlan,
    instance: &'a ClusteredInstance<T>,
    component: usize,
) -> &'a [u32] {
    &instance.clusters()[plan.cluster(component)]
}

fn unused_members(members: &[u32], segment: &[u32]) -> Vec<u32> {
    members
        .iter()
        .copied()
        .filter(|id| !segment.contains(id))
        .collect()
}

/// Puts one random cluster POI into a random slot of an all-zero segment.
pub(crate) fn repair_empty<R: Rng>(segment: &mut [u32], members: &[u32], rng: &mut R) {
    if segment.is_empty() || segment.iter().any(|&s| s != EMPTY) {
        return;
    }
    let id = *members.choose(rng).expect("clusters are non-empty");
    let slot = rng.gen_range(0..segment.len());
    segment[slot] = id;
}

/// Random segment of `len` slots: `min(len, |members|)` distinct POIs
/// shuffled over the slots, each then zeroed with probability `p_z`.
pub fn random_segment<R: Rng>(members: &[u32], len: usize, p_z: f64, rng: &mut R) -> Vec<u32> {
    let k = len.min(members.len());
    let mut slots: Vec<u32> = members.choose_multiple(rng, k).copied().collect();
    slots.resize(len, EMPTY);
    slots.shuffle(rng);
    let sampled: Vec<u32> = slots.iter().copied().filter(|&s| s != EMPTY).collect();
    for s in slots.iter_mut() {
        if rng.gen_bool(p_z) {
            *s = EMPTY;
        }
    }
    if len > 0 && slots.iter().all(|&s| s == EMPTY) {
        let id = *sampled.choose(rng).expect("at least one POI sampled");
        let slot = rng.gen_range(0..len);
        slots[slot] = id;
    }
    slots
}

/// Fills `block` with random POIs of the cluster that are absent from
/// `keep`, zeroing each slot with probability `p_z`. May leave it empty.
pub(crate) fn random_block<R: Rng>(
    block_len: usize,
    members: &[u32],
    keep: &[u32],
    p_z: f64,
    rng: &mut R,
) -> Vec<u32> {
    let pool = unused_members(members, keep);
    let k = block_len.min(pool.len());
    let mut slots: Vec<u32> = pool.choose_multiple(rng, k).copied().collect();
    slots.resize(block_len, EMPTY);
    slots.shuffle(rng);
    for s in slots.iter_mut() {
        if rng.gen_bool(p_z) {
            *s = EMPTY;
        }
    }
    slots
}

pub fn init_subpopulation<T: Scalar>(
    component: usize,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
    n: usize,
    p_z: f64,
    streams: &Streams,
    epoch: u64,
) -> Result<Subpopulation<T>> {
    if n < 2 {
        return Err(Error::invalid("n", "population size must be at least 2"));
    }
    if component >= plan.num_components() {
        return Err(Error::OutOfRange { index: component, len: plan.num_components() });
    }
    check_probability("p_z", p_z)?;
    let members = members_of(plan, instance, component);
    let len = plan.segment_len(component);
    let individuals = (0..n)
        .map(|j| {
            let mut rng = streams.rng(StreamTag::Init, component as u64, epoch, j as u64);
            random_segment(members, len, p_z, &mut rng)
        })
        .collect();
    Ok(Subpopulation {
        component_index: component,
        individuals,
        objectives: Vec::new(),
        generations: 0,
        epoch,
    })
}

pub(crate) fn check_probability(field: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(field, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// With probability `p_m`, replaces one uniformly chosen slot by a draw
/// from `{0} ∪ (cluster \ segment)`.
pub fn mutate<R: Rng>(segment: &mut [u32], members: &[u32], p_m: f64, rng: &mut R) {
    if segment.is_empty() || !rng.gen_bool(p_m) {
        return;
    }
    let slot = rng.gen_range(0..segment.len());
    let unused = unused_members(members, segment);
    let pick = rng.gen_range(0..=unused.len());
    segment[slot] = if pick == 0 { EMPTY } else { unused[pick - 1] };
    repair_empty(segment, members, rng);
}

/// Replaces every exchanged slot whose id also occurs elsewhere in the
/// child by a draw from `{0} ∪ unused cluster POIs`.
fn repair_duplicates<R: Rng>(child: &mut [u32], lo: usize, hi: usize, members: &[u32], rng: &mut R) {
    for k in lo..hi {
        let id = child[k];
        if id == EMPTY {
            continue;
        }
        let duplicated = child
            .iter()
            .enumerate()
            .any(|(pos, &other)| pos != k && other == id);
        if duplicated {
            let unused = unused_members(members, child);
            let pick = rng.gen_range(0..=unused.len());
            child[k] = if pick == 0 { EMPTY } else { unused[pick - 1] };
        }
    }
}

/// Two-point crossover: the slots between two uniform cut points are
/// swapped, then duplicates in the swapped region are re-drawn and empty
/// children repaired.
pub fn crossover<R: Rng>(
    parent_a: &[u32],
    parent_b: &[u32],
    members: &[u32],
    rng: &mut R,
) -> Result<(Vec<u32>, Vec<u32>)> {
    if parent_a.len() != parent_b.len() {
        return Err(Error::invalid(
            "parents",
            format!("length mismatch {} vs {}", parent_a.len(), parent_b.len()),
        ));
    }
    let len = parent_a.len();
    let mut c1 = rng.gen_range(0..=len);
    let mut c2 = rng.gen_range(0..=len);
    if c1 > c2 {
        std::mem::swap(&mut c1, &mut c2);
    }
    let mut a = parent_a.to_vec();
    let mut b = parent_b.to_vec();
    a[c1..c2].copy_from_slice(&parent_b[c1..c2]);
    b[c1..c2].copy_from_slice(&parent_a[c1..c2]);
    for child in [&mut a, &mut b] {
        repair_duplicates(child, c1, c2, members, rng);
        repair_empty(child, members, rng);
    }
    Ok((a, b))
}

/// Crossover followed by mutation of both children, drawing from one stream.
pub(crate) fn breed<R: Rng>(
    parent_a: &[u32],
    parent_b: &[u32],
    members: &[u32],
    p_m: f64,
    rng: &mut R,
) -> (Vec<u32>, Vec<u32>) {
    let (mut a, mut b) = crossover(parent_a, parent_b, members, rng).expect("parents share a layout");
    mutate(&mut a, members, p_m, rng);
    mutate(&mut b, members, p_m, rng);
    (a, b)
}

/// Copy of `context` with component `i`'s slots replaced by `segment`.
pub fn assemble<T: Scalar>(
    context: &Genome,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
    i: usize,
    segment: &[u32],
) -> Result<Genome> {
    if i >= plan.num_components() {
        return Err(Error::OutOfRange { index: i, len: plan.num_components() });
    }
    if context.len() != plan.genome_len() {
        return Err(Error::invalid("context", "context genome does not match the plan"));
    }
    let violations = segment_violations(segment, i, plan, instance);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::invalid("segment", text.join("; ")));
    }
    Ok(assemble_unchecked(context, plan, i, segment))
}

#[inline]
pub(crate) fn assemble_unchecked(context: &Genome, plan: &DecompositionPlan, i: usize, segment: &[u32]) -> Genome {
    let mut slots = context.slots().to_vec();
    slots[plan.segment_range(i)].copy_from_slice(segment);
    Genome::new(slots)
}

/// Pareto rank (0 = best) and crowding distance within the rank.
pub(crate) fn rank_and_crowding<T: Scalar>(objs: &[ObjectiveVector<T>]) -> (Vec<usize>, Vec<T>) {
    let points: Vec<[T; 3]> = objs.iter().map(|o| o.to_array()).collect();
    let fronts = non_dominated_sort_points(&points);
    let mut rank = vec![0; objs.len()];
    let mut crowd = vec![T::zero(); objs.len()];
    for (r, front) in fronts.iter().enumerate() {
        let members: Vec<[T; 3]> = front.iter().map(|&i| points[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance_points(&members)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Binary tournament on (rank, crowding); ties go to the first draw.
pub(crate) fn tournament<T: Scalar, R: Rng>(rank: &[usize], crowd: &[T], rng: &mut R) -> usize {
    let a = rng.gen_range(0..rank.len());
    let b = rng.gen_range(0..rank.len());
    let better_b = rank[b] < rank[a] || (rank[b] == rank[a] && crowd[b] > crowd[a]);
    if better_b {
        b
    } else {
        a
    }
}

/// Indices of the `n` survivors: whole fronts first, then the last front
/// by descending crowding distance (ties by index).
pub(crate) fn select_survivors<T: Scalar>(objs: &[ObjectiveVector<T>], n: usize) -> Vec<usize> {
    let points: Vec<[T; 3]> = objs.iter().map(|o| o.to_array()).collect();
    let mut chosen = Vec::with_capacity(n);
    for front in non_dominated_sort_points(&points) {
        if chosen.len() + front.len() <= n {
            chosen.extend_from_slice(&front);
        } else {
            let members: Vec<[T; 3]> = front.iter().map(|&i| points[i]).collect();
            let crowd = crowding_distance_points(&members);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| {
                crowd[b]
                    .partial_cmp(&crowd[a])
                    .unwrap_or(Ordering::Equal)
                    .then(front[a].cmp(&front[b]))
            });
            chosen.extend(order.into_iter().take(n - chosen.len()).map(|k| front[k]));
        }
        if chosen.len() == n {
            break;
        }
    }
    chosen
}

/// Read-only inputs of one component step.
#[derive(Clone, Copy)]
pub struct StepEnv<'a, T> {
    pub instance: &'a ClusteredInstance<T>,
    pub plan: &'a DecompositionPlan,
    pub context: &'a Genome,
    pub eval: &'a EvalConfig<T>,
    pub p_m: f64,
    pub streams: Streams,
}

impl<T: Scalar> StepEnv<'_, T> {
    /// Selection objectives and full-assembly candidate for one segment.
    /// Counts as a single evaluation.
    pub(crate) fn score(&self, component: usize, segment: &[u32]) -> (ObjectiveVector<T>, Candidate<T>) {
        let genome = assemble_unchecked(self.context, self.plan, component, segment);
        let full = full_objectives(genome.slots(), self.plan, self.instance, self.eval);
        let selection = match self.eval.eval_mode {
            EvalMode::Context => full,
            EvalMode::Isolated => segment_objectives(segment, component, self.plan, self.instance, self.eval),
        };
        (selection, Candidate { genome, objectives: full })
    }
}

#[derive(Clone, Debug, Default)]
pub struct StepOutcome<T> {
    pub fes_used: usize,
    pub generations: usize,
    pub candidates: Vec<Candidate<T>>,
}

/// Evaluates every individual of `subpop` (one evaluation each).
pub fn evaluate_subpopulation<T: Scalar>(subpop: &mut Subpopulation<T>, env: &StepEnv<'_, T>) -> StepOutcome<T> {
    let i = subpop.component_index;
    let (objs, candidates): (Vec<_>, Vec<_>) = subpop
        .individuals
        .iter()
        .map(|seg| env.score(i, seg))
        .unzip();
    subpop.objectives = objs;
    StepOutcome {
        fes_used: candidates.len(),
        generations: 0,
        candidates,
    }
}

/// Runs NSGA-II generations on `subpop` while another full generation of
/// `n` evaluations fits in `budget`. The subpopulation must be evaluated.
pub fn nsga2_step<T: Scalar>(subpop: &mut Subpopulation<T>, budget: usize, env: &StepEnv<'_, T>) -> StepOutcome<T> {
    let n = subpop.len();
    let mut outcome = StepOutcome::default();
    if n == 0 || !subpop.is_evaluated() {
        return outcome;
    }
    let component = subpop.component_index;
    let members = members_of(env.plan, env.instance, component);
    while outcome.fes_used + n <= budget {
        let generation = subpop.generations;
        let (rank, crowd) = rank_and_crowding(&subpop.objectives);
        let mut sel = env
            .streams
            .rng(StreamTag::Selection, component as u64, generation, 0);
        let pairs = n.div_ceil(2);
        let parents: Vec<(usize, usize)> = (0..pairs)
            .map(|_| (tournament(&rank, &crowd, &mut sel), tournament(&rank, &crowd, &mut sel)))
            .collect();

        let mut offspring = Vec::with_capacity(2 * pairs);
        for (p, &(a, b)) in parents.iter().enumerate() {
            let mut rng = env
                .streams
                .rng(StreamTag::Offspring, component as u64, generation, p as u64);
            let (x, y) = breed(&subpop.individuals[a], &subpop.individuals[b], members, env.p_m, &mut rng);
            offspring.push(x);
            offspring.push(y);
        }
        offspring.truncate(n);

        let mut pool_objs = subpop.objectives.clone();
        for child in &offspring {
            let (sel_obj, candidate) = env.score(component, child);
            pool_objs.push(sel_obj);
            outcome.candidates.push(candidate);
        }
        outcome.fes_used += offspring.len();

        let mut pool = std::mem::take(&mut subpop.individuals);
        pool.extend(offspring);
        let survivors = select_survivors(&pool_objs, n);
        subpop.individuals = survivors.iter().map(|&k| pool[k].clone()).collect();
        subpop.objectives = survivors.iter().map(|&k| pool_objs[k]).collect();
        subpop.generations += 1;
        outcome.generations += 1;
    }
    outcome
}
