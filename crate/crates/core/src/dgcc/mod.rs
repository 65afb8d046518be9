//! Cooperative coevolution over city components: round-robin NSGA-II
//! steps, potential-driven budget allocation, periodic structure
//! adjustment and an external Pareto archive. Also hosts the
//! single-population NSGA-II baseline.

mod adjust;
mod config;
mod output;
mod resources;

use std::sync::Arc;

use serde::Serialize;

use crate::encoding::{initial_decomposition, DecompositionPlan, Genome};
use crate::error::Result;
use crate::evolution::{
    breed, evaluate_subpopulation, init_subpopulation, nsga2_step, rank_and_crowding, select_survivors,
    tournament, Candidate, ContextSolution, StepEnv, Subpopulation,
};
use crate::instance::{check_weak_decomposability, Channel, ClusteredInstance};
use crate::objectives::{full_objectives, ObjectiveVector};
use crate::pareto::{
    choose_reference_point, hv_contribution, hypervolume, ArchiveEntry, ParetoArchive, ReferencePoint,
};
use crate::scalar::Scalar;
use crate::stream::{StreamTag, Streams};

pub use adjust::{dynamic_adjust, normalized_component_hv, AdjustOutcome, Shift};
pub use config::{Ablation, Ablations, RunConfig};
pub use output::{write_run_outputs, RunSummary};
pub use resources::{
    allocate_resources, balancing_coefficient, detect_stagnation, optimization_potential, ResourceLedger,
    STAGNATION_THRESHOLD,
};

/// Hypervolume of a subpopulation's cached objectives.
pub fn component_hv<T: Scalar>(subpop: &Subpopulation<T>, reference: &ReferencePoint<T>) -> T {
    hypervolume(&subpop.objectives, reference)
}

/// Ledger state of one component at the end of a round.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ComponentSnapshot<T> {
    pub cluster: usize,
    pub days: usize,
    pub c: T,
    pub delta: T,
    pub potential: T,
    pub stagnant: bool,
    /// Budget granted for this round.
    pub i_avl: usize,
    /// Evaluations actually spent this round.
    pub spent: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct RoundSnapshot<T> {
    pub round: usize,
    /// Size of the non-stagnant set this round's budgets were computed for.
    pub u: usize,
    pub allocated: usize,
    pub balance: T,
    pub components: Vec<ComponentSnapshot<T>>,
    /// Cumulative evaluations after the round, including any adjustment.
    pub fes: usize,
    pub archive_len: usize,
    pub context: ObjectiveVector<T>,
    pub context_hv: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjustment: Option<AdjustOutcome<T>>,
}

#[derive(Clone, Debug)]
pub struct RunResult<T> {
    pub archive: ParetoArchive<T>,
    pub history: Vec<RoundSnapshot<T>>,
    pub fes_total: usize,
    /// Evaluations spent outside per-round budgets (initial populations,
    /// structure adjustment and the re-evaluation it triggers).
    pub setup_fes: usize,
    pub max_fes: usize,
    pub plan: DecompositionPlan,
    pub reference: ReferencePoint<T>,
    pub context: Option<ContextSolution<T>>,
    pub i_bas: usize,
    pub i_add: usize,
}

impl<T: Scalar> RunResult<T> {
    /// Archive hypervolume against the run's own frozen reference.
    pub fn final_hv(&self) -> T {
        hypervolume(&self.archive.objectives(), &self.reference)
    }

    pub fn hv_against(&self, reference: &ReferencePoint<T>) -> T {
        hypervolume(&self.archive.objectives(), reference)
    }
}

fn warn_if_not_decomposable<T: Scalar>(instance: &ClusteredInstance<T>) {
    for channel in Channel::ALL {
        let report = check_weak_decomposability(instance, channel);
        if !report.satisfied {
            log::warn!(
                "instance {} is not weakly decomposable on the {channel:?} channel ({} > {}); continuing",
                instance.name(),
                report.lhs,
                report.rhs
            );
        }
    }
}

/// Mutable state shared by the round loop helpers.
struct Run<'a, T: Scalar> {
    instance: &'a ClusteredInstance<T>,
    cfg: &'a RunConfig<T>,
    eval: crate::objectives::EvalConfig<T>,
    streams: Streams,
    plan: DecompositionPlan,
    plan_arc: Arc<DecompositionPlan>,
    archive: ParetoArchive<T>,
    context: ContextSolution<T>,
    reference: ReferencePoint<T>,
    fes: usize,
    setup_fes: usize,
}

impl<'a, T: Scalar> Run<'a, T> {
    fn env<'b>(&'b self) -> StepEnv<'b, T> {
        StepEnv {
            instance: self.instance,
            plan: &self.plan,
            context: &self.context.genome,
            eval: &self.eval,
            p_m: self.cfg.p_m,
            streams: self.streams,
        }
    }

    /// Archives every candidate and promotes strictly better contexts.
    fn absorb(&mut self, candidates: Vec<Candidate<T>>) {
        for c in candidates {
            let contrib = hv_contribution(&c.objectives, &self.reference);
            if self.archive.would_accept(&c.objectives) {
                self.archive.insert(ArchiveEntry {
                    genome: c.genome.clone(),
                    plan: Arc::clone(&self.plan_arc),
                    objectives: c.objectives,
                });
            }
            if contrib > self.context.hv_contrib {
                self.context = ContextSolution {
                    genome: c.genome,
                    objectives: c.objectives,
                    hv_contrib: contrib,
                };
            }
        }
    }

    fn evaluate(&mut self, subpop: &mut Subpopulation<T>) -> usize {
        let out = evaluate_subpopulation(subpop, &self.env());
        self.fes += out.fes_used;
        self.setup_fes += out.fes_used;
        self.absorb(out.candidates);
        out.fes_used
    }
}

/// Per-component reference points for `component_hv`. In isolated mode the
/// cached objectives live in segment space, so each component gets its own.
fn component_references<T: Scalar>(
    subpops: &[Subpopulation<T>],
    shared: &ReferencePoint<T>,
    cfg: &RunConfig<T>,
) -> Result<Vec<ReferencePoint<T>>> {
    match cfg.eval_mode {
        crate::objectives::EvalMode::Context => Ok(vec![*shared; subpops.len()]),
        crate::objectives::EvalMode::Isolated => subpops
            .iter()
            .map(|sp| choose_reference_point(&sp.objectives, cfg.ref_policy))
            .collect(),
    }
}

/// True when the context differs from `seen` outside component `i`, so
/// cached assembled objectives of that component no longer apply.
fn is_stale(seen: &Genome, context: &Genome, plan: &DecompositionPlan, i: usize) -> bool {
    let range = plan.segment_range(i);
    let (a, b) = (seen.slots(), context.slots());
    a.len() != b.len() || a[..range.start] != b[..range.start] || a[range.end..] != b[range.end..]
}

/// Runs the coevolutionary optimizer until the evaluation budget is spent.
pub fn run_dgcc<T: Scalar>(instance: &ClusteredInstance<T>, cfg: &RunConfig<T>) -> Result<RunResult<T>> {
    let m = instance.num_clusters();
    cfg.validate(m)?;
    warn_if_not_decomposable(instance);
    let n = cfg.n;
    let max_fes = cfg.max_fes_for(m);
    let i_bas = cfg.i_bas_value();
    let i_add = cfg.i_add_value();
    let streams = Streams::new(cfg.seed);
    let order = cfg.component_order.clone().unwrap_or_else(|| (0..m).collect());
    let plan = initial_decomposition(m, cfg.days, cfg.day_len, order)?;

    let mut subpops = (0..m)
        .map(|i| init_subpopulation(i, &plan, instance, n, cfg.p_z, &streams, 0))
        .collect::<Result<Vec<_>>>()?;
    let context_genome = Genome::new(subpops.iter().flat_map(|s| s.individuals[0].iter().copied()).collect());
    let eval = cfg.eval_config();
    let context_objectives = full_objectives(context_genome.slots(), &plan, instance, &eval);

    // Initial evaluation in context of the first individuals; the
    // reference point is frozen from these evaluations.
    let mut initial = Vec::with_capacity(m * n);
    {
        let env = StepEnv {
            instance,
            plan: &plan,
            context: &context_genome,
            eval: &eval,
            p_m: cfg.p_m,
            streams,
        };
        for sp in subpops.iter_mut() {
            initial.extend(evaluate_subpopulation(sp, &env).candidates);
        }
    }
    let samples: Vec<ObjectiveVector<T>> = initial.iter().map(|c| c.objectives).collect();
    let reference = choose_reference_point(&samples, cfg.ref_policy)?;
    let mut run = Run {
        instance,
        cfg,
        eval,
        streams,
        plan_arc: Arc::new(plan.clone()),
        plan,
        archive: ParetoArchive::new(cfg.archive_capacity),
        context: ContextSolution {
            hv_contrib: hv_contribution(&context_objectives, &reference),
            genome: context_genome,
            objectives: context_objectives,
        },
        reference,
        fes: m * n,
        setup_fes: m * n,
    };
    run.absorb(initial);

    let mut component_refs = component_references(&subpops, &run.reference, cfg)?;
    let sizes = (0..m).map(|i| instance.clusters()[run.plan.cluster(i)].len()).collect();
    let mut ledger = ResourceLedger::new(sizes, i_bas, i_add, cfg.delta_const);
    ledger.c = subpops.iter().zip(&component_refs).map(|(sp, r)| component_hv(sp, r)).collect();
    let mut budgets = vec![i_bas + i_add; m];
    let mut u = m;
    let mut history = Vec::new();
    let mut adjust_count = 0u64;
    let mut epoch = 0u64;
    let mut round = 0usize;
    let mut eval_context = vec![run.context.genome.clone(); m];

    while max_fes - run.fes >= n {
        round += 1;
        let mut spent = vec![0usize; m];
        for i in 0..m {
            let remaining = max_fes - run.fes;
            if remaining < n {
                break;
            }
            let mut budget = budgets[i].min(remaining);
            if cfg.refresh_stale && budget >= 2 * n && is_stale(&eval_context[i], &run.context.genome, &run.plan, i) {
                let out = evaluate_subpopulation(&mut subpops[i], &run.env());
                run.fes += out.fes_used;
                spent[i] += out.fes_used;
                budget -= out.fes_used;
                run.absorb(out.candidates);
            }
            eval_context[i] = run.context.genome.clone();
            let out = nsga2_step(&mut subpops[i], budget, &run.env());
            run.fes += out.fes_used;
            spent[i] += out.fes_used;
            run.absorb(out.candidates);
        }

        let c_new: Vec<T> = subpops.iter().zip(&component_refs).map(|(sp, r)| component_hv(sp, r)).collect();
        ledger.update(&c_new)?;
        let granted = std::mem::replace(
            &mut budgets,
            if cfg.ablations.no_resource_allocation {
                vec![i_bas + i_add; m]
            } else {
                allocate_resources(&ledger)
            },
        );
        let round_u = std::mem::replace(
            &mut u,
            if cfg.ablations.no_resource_allocation {
                m
            } else {
                ledger.non_stagnant().len()
            },
        );
        let mut snapshot = RoundSnapshot {
            round,
            u: round_u,
            allocated: granted.iter().sum(),
            balance: ledger.balance,
            components: (0..m)
                .map(|i| ComponentSnapshot {
                    cluster: run.plan.cluster(i),
                    days: run.plan.days()[i],
                    c: ledger.c[i],
                    delta: ledger.delta[i],
                    potential: ledger.potential[i],
                    stagnant: ledger.stagnant[i],
                    i_avl: granted[i],
                    spent: spent[i],
                })
                .collect(),
            fes: run.fes,
            archive_len: 0,
            context: run.context.objectives,
            context_hv: run.context.hv_contrib,
            adjustment: None,
        };

        let adjust_due = !cfg.ablations.no_structure_adjustment && round % cfg.period == 0;
        // isolated scoring, re-evaluation of every component, new context
        let adjust_cost = 2 * m * n + 1;
        if adjust_due && max_fes - run.fes >= adjust_cost {
            let (next_plan, outcome) =
                dynamic_adjust(&run.plan, &mut subpops, instance, cfg, &streams, adjust_count)?;
            run.fes += outcome.fes_used;
            run.setup_fes += outcome.fes_used;
            let mut dirty: Vec<usize> = Vec::new();
            if let Some(shift) = outcome.shift {
                let genome = adjust::reshape_genome(
                    &run.context.genome,
                    &run.plan,
                    &shift,
                    instance,
                    cfg,
                    &streams,
                    adjust_count,
                );
                run.plan = next_plan;
                run.plan_arc = Arc::new(run.plan.clone());
                let objectives = full_objectives(genome.slots(), &run.plan, instance, &run.eval);
                run.fes += 1;
                run.setup_fes += 1;
                run.context = ContextSolution {
                    hv_contrib: hv_contribution(&objectives, &run.reference),
                    genome: genome.clone(),
                    objectives,
                };
                run.absorb(vec![Candidate { genome, objectives }]);
                dirty = shift.touched(cfg.preserve_intermediate_days);
            }
            if cfg.ablations.no_population_inheritance {
                epoch += 1;
                for (i, sp) in subpops.iter_mut().enumerate() {
                    let generations = sp.generations;
                    *sp = init_subpopulation(i, &run.plan, instance, n, cfg.p_z, &streams, epoch)?;
                    sp.generations = generations;
                }
                dirty = (0..m).collect();
            }
            for &i in &dirty {
                run.evaluate(&mut subpops[i]);
                eval_context[i] = run.context.genome.clone();
            }
            if cfg.eval_mode == crate::objectives::EvalMode::Isolated && !dirty.is_empty() {
                component_refs = component_references(&subpops, &run.reference, cfg)?;
            }
            for &i in &dirty {
                ledger.c[i] = component_hv(&subpops[i], &component_refs[i]);
            }
            adjust_count += 1;
            snapshot.fes = run.fes;
            snapshot.adjustment = Some(outcome);
        }
        snapshot.archive_len = run.archive.len();
        snapshot.context = run.context.objectives;
        snapshot.context_hv = run.context.hv_contrib;
        history.push(snapshot);
        if spent.iter().all(|&s| s == 0) {
            break;
        }
    }

    Ok(RunResult {
        archive: run.archive,
        history,
        fes_total: run.fes,
        setup_fes: run.setup_fes,
        max_fes,
        plan: run.plan,
        reference: run.reference,
        context: Some(run.context),
        i_bas,
        i_add,
    })
}

/// Single-population NSGA-II over whole genomes under the fixed initial
/// decomposition, with the same operators applied segment by segment.
pub fn run_global_nsga2<T: Scalar>(instance: &ClusteredInstance<T>, cfg: &RunConfig<T>) -> Result<RunResult<T>> {
    let m = instance.num_clusters();
    cfg.validate(m)?;
    warn_if_not_decomposable(instance);
    let n = cfg.n;
    let max_fes = cfg.max_fes_for(m);
    let streams = Streams::new(cfg.seed);
    let order = cfg.component_order.clone().unwrap_or_else(|| (0..m).collect());
    let plan = initial_decomposition(m, cfg.days, cfg.day_len, order)?;
    let plan_arc = Arc::new(plan.clone());
    let eval = cfg.eval_config();

    let parts = (0..m)
        .map(|i| init_subpopulation::<T>(i, &plan, instance, n, cfg.p_z, &streams, 0))
        .collect::<Result<Vec<_>>>()?;
    let mut population: Vec<Vec<u32>> = (0..n)
        .map(|j| parts.iter().flat_map(|p| p.individuals[j].iter().copied()).collect())
        .collect();
    let mut objectives: Vec<ObjectiveVector<T>> = population
        .iter()
        .map(|g| full_objectives(g, &plan, instance, &eval))
        .collect();
    let mut fes = n;
    let reference = choose_reference_point(&objectives, cfg.ref_policy)?;
    let mut archive = ParetoArchive::new(cfg.archive_capacity);
    let record = |archive: &mut ParetoArchive<T>, genome: &[u32], v: ObjectiveVector<T>| {
        if archive.would_accept(&v) {
            archive.insert(ArchiveEntry {
                genome: Genome::new(genome.to_vec()),
                plan: Arc::clone(&plan_arc),
                objectives: v,
            });
        }
    };
    for (g, v) in population.iter().zip(&objectives) {
        record(&mut archive, g, *v);
    }

    let members: Vec<&[u32]> = (0..m).map(|i| instance.clusters()[plan.cluster(i)].as_slice()).collect();
    let mut generation = 0u64;
    while fes + n <= max_fes {
        let (rank, crowd) = rank_and_crowding(&objectives);
        let mut sel = streams.rng(StreamTag::Selection, 0, generation, 0);
        let pairs = n.div_ceil(2);
        let parents: Vec<(usize, usize)> = (0..pairs)
            .map(|_| (tournament(&rank, &crowd, &mut sel), tournament(&rank, &crowd, &mut sel)))
            .collect();
        let mut offspring = Vec::with_capacity(2 * pairs);
        for (p, &(a, b)) in parents.iter().enumerate() {
            let mut rng = streams.rng(StreamTag::Offspring, 0, generation, p as u64);
            let mut x = Vec::with_capacity(plan.genome_len());
            let mut y = Vec::with_capacity(plan.genome_len());
            for (i, cluster) in members.iter().enumerate() {
                let range = plan.segment_range(i);
                let (sx, sy) = breed(&population[a][range.clone()], &population[b][range], cluster, cfg.p_m, &mut rng);
                x.extend(sx);
                y.extend(sy);
            }
            offspring.push(x);
            offspring.push(y);
        }
        offspring.truncate(n);
        for child in &offspring {
            let v = full_objectives(child, &plan, instance, &eval);
            record(&mut archive, child, v);
            objectives.push(v);
        }
        fes += offspring.len();
        population.extend(offspring);
        let survivors = select_survivors(&objectives, n);
        population = survivors.iter().map(|&k| population[k].clone()).collect();
        objectives = survivors.iter().map(|&k| objectives[k]).collect();
        generation += 1;
    }

    Ok(RunResult {
        archive,
        history: Vec::new(),
        fes_total: fes,
        setup_fes: n,
        max_fes,
        plan,
        reference,
        context: None,
        i_bas: cfg.i_bas_value(),
        i_add: cfg.i_add_value(),
    })
}
