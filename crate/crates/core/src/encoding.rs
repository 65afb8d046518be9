//! Day-block genome encoding.
//!
//! A genome has `D * M` slots. Slots are grouped into one contiguous segment
//! per component (in plan order), and each segment into `d_i` day blocks of
//! `M` slots. A slot holds a POI id or `0` for "no visit"; zeros may sit
//! anywhere inside a day block.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::ClusteredInstance;
use crate::scalar::Scalar;

/// Empty slot marker.
pub const EMPTY: u32 = 0;

/// Assignment of travel days to components, in visiting order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    order: Vec<usize>,
    days: Vec<usize>,
    day_len: usize,
}

impl DecompositionPlan {
    /// `order[i]` is the cluster handled by component `i`; `days[i]` its
    /// day count; `day_len` the slots per day (`M`).
    pub fn new(order: Vec<usize>, days: Vec<usize>, day_len: usize) -> Result<Self> {
        let m = order.len();
        if m == 0 {
            return Err(Error::invalid("order", "at least one component is required"));
        }
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &c)| i != c) {
            return Err(Error::invalid("order", format!("{order:?} is not a permutation of 0..{m}")));
        }
        if days.len() != m {
            return Err(Error::invalid("days", format!("need {m} day counts, got {}", days.len())));
        }
        if let Some(i) = days.iter().position(|&d| d == 0) {
            return Err(Error::invalid(format!("days[{i}]"), "every component needs at least one day"));
        }
        if day_len == 0 {
            return Err(Error::invalid("day_len", "at least one slot per day is required"));
        }
        Ok(Self { order, days, day_len })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn days(&self) -> &[usize] {
        &self.days
    }

    pub fn day_len(&self) -> usize {
        self.day_len
    }

    pub fn num_components(&self) -> usize {
        self.order.len()
    }

    pub fn total_days(&self) -> usize {
        self.days.iter().sum()
    }

    pub fn genome_len(&self) -> usize {
        self.total_days() * self.day_len
    }

    /// Cluster index handled by component `i`.
    pub fn cluster(&self, i: usize) -> usize {
        self.order[i]
    }

    pub fn segment_len(&self, i: usize) -> usize {
        self.days[i] * self.day_len
    }

    pub fn segment_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.days[..i].iter().sum::<usize>() * self.day_len;
        start..start + self.segment_len(i)
    }

    /// Replaces the day counts, keeping order and day length.
    pub(crate) fn with_days(&self, days: Vec<usize>) -> Result<Self> {
        Self::new(self.order.clone(), days, self.day_len)
    }
}

/// Spreads `total_days` over `m` components as evenly as possible; the
/// first `total_days % m` components (in `order`) get one extra day.
pub fn initial_decomposition(
    m: usize,
    total_days: usize,
    day_len: usize,
    order: Vec<usize>,
) -> Result<DecompositionPlan> {
    if order.len() != m {
        return Err(Error::invalid("order", format!("expected {m} entries, got {}", order.len())));
    }
    if total_days < m {
        return Err(Error::TooFewDays(total_days, m));
    }
    let base = total_days / m;
    let extra = total_days % m;
    let days = (0..m).map(|i| base + usize::from(i < extra)).collect();
    DecompositionPlan::new(order, days, day_len)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Genome {
    slots: Vec<u32>,
}

impl Genome {
    pub fn new(slots: Vec<u32>) -> Self {
        Self { slots }
    }

    pub fn empty(plan: &DecompositionPlan) -> Self {
        Self::new(vec![EMPTY; plan.genome_len()])
    }

    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [u32] {
        &mut self.slots
    }

    pub fn into_slots(self) -> Vec<u32> {
        self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Visited ids in slot order.
    pub fn visited(&self) -> impl Iterator<Item = u32> + '_ {
        self.slots.iter().copied().filter(|&s| s != EMPTY)
    }

    /// Text form: slots comma-separated, `|` between days, `||` between
    /// segments, e.g. `1,0,2,0|3,4,0,0`.
    pub fn to_text(&self, plan: &DecompositionPlan) -> String {
        format_slots(&self.slots, plan)
    }
}

pub(crate) fn format_slots(slots: &[u32], plan: &DecompositionPlan) -> String {
    let mut out = String::with_capacity(slots.len() * 3);
    let mut pos = 0;
    for (seg, &d) in plan.days().iter().enumerate() {
        if seg > 0 {
            out.push_str("||");
        }
        for day in 0..d {
            if day > 0 {
                out.push('|');
            }
            for k in 0..plan.day_len() {
                if k > 0 {
                    out.push(',');
                }
                match slots.get(pos) {
                    Some(v) => out.push_str(&v.to_string()),
                    None => out.push('?'),
                }
                pos += 1;
            }
        }
    }
    out
}

/// Genome recovered from its text form together with the layout it encodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedGenome {
    pub genome: Genome,
    pub days: Vec<usize>,
    pub day_len: usize,
}

impl ParsedGenome {
    pub fn parse(text: &str) -> Result<Self> {
        let mut slots = Vec::new();
        let mut days = Vec::new();
        let mut day_len = None;
        for segment in text.trim().split("||") {
            let mut d = 0;
            for block in segment.split('|') {
                let before = slots.len();
                for tok in block.split(',') {
                    let v: u32 = tok
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad genome slot `{tok}`")))?;
                    slots.push(v);
                }
                let len = slots.len() - before;
                match day_len {
                    None => day_len = Some(len),
                    Some(l) if l != len => {
                        return Err(Error::Parse(format!("day block of {len} slots, expected {l}")))
                    }
                    _ => {}
                }
                d += 1;
            }
            days.push(d);
        }
        Ok(Self {
            genome: Genome::new(slots),
            days,
            day_len: day_len.unwrap_or(0),
        })
    }
}

/// Per-day routes: the ordered non-zero ids of each of the `D` day blocks.
pub fn decode(genome: &Genome, plan: &DecompositionPlan) -> Result<Vec<Vec<u32>>> {
    if genome.len() != plan.genome_len() {
        return Err(Error::invalid(
            "genome",
            format!("length {} does not match plan length {}", genome.len(), plan.genome_len()),
        ));
    }
    Ok(genome
        .slots()
        .chunks(plan.day_len())
        .map(|day| day.iter().copied().filter(|&s| s != EMPTY).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    LengthMismatch { expected: usize, found: usize },
    UnknownId(u32),
    Duplicate(u32),
    WrongCluster { id: u32, component: usize, expected_cluster: usize },
    EmptySegment(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { expected, found } => {
                write!(f, "length {found}, expected {expected}")
            }
            Violation::UnknownId(id) => write!(f, "unknown POI id {id}"),
            Violation::Duplicate(id) => write!(f, "POI id {id} appears more than once"),
            Violation::WrongCluster { id, component, expected_cluster } => write!(
                f,
                "POI id {id} in component {component} does not belong to cluster {expected_cluster}"
            ),
            Violation::EmptySegment(i) => write!(f, "component {i} visits no POI"),
        }
    }
}

/// Violations of one component's segment taken alone.
pub fn segment_violations<T: Scalar>(
    slots: &[u32],
    component: usize,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let expected = plan.segment_len(component);
    if slots.len() != expected {
        out.push(Violation::LengthMismatch { expected, found: slots.len() });
    }
    let cluster = plan.cluster(component);
    let mut seen = HashSet::new();
    for &id in slots.iter().filter(|&&s| s != EMPTY) {
        match instance.cluster_of(id) {
            None => out.push(Violation::UnknownId(id)),
            Some(c) if c != cluster => out.push(Violation::WrongCluster {
                id,
                component,
                expected_cluster: cluster,
            }),
            Some(_) => {}
        }
        if !seen.insert(id) {
            out.push(Violation::Duplicate(id));
        }
    }
    if seen.is_empty() {
        out.push(Violation::EmptySegment(component));
    }
    out
}

/// Structural validity of a whole genome against a plan.
pub fn validate<T: Scalar>(
    genome: &Genome,
    plan: &DecompositionPlan,
    instance: &ClusteredInstance<T>,
) -> std::result::Result<(), Vec<Violation>> {
    if genome.len() != plan.genome_len() {
        return Err(vec![Violation::LengthMismatch {
            expected: plan.genome_len(),
            found: genome.len(),
        }]);
    }
    let mut out = Vec::new();
    for i in 0..plan.num_components() {
        out.extend(segment_violations(&genome.slots()[plan.segment_range(i)], i, plan, instance));
    }
    // Segments hold disjoint clusters, so cross-segment duplicates can only
    // come from wrong-cluster ids; report them once more as duplicates.
    let mut seen = HashSet::new();
    let mut dup_reported: HashSet<u32> = out
        .iter()
        .filter_map(|v| match v {
            Violation::Duplicate(id) => Some(*id),
            _ => None,
        })
        .collect();
    for id in genome.visited() {
        if !seen.insert(id) && dup_reported.insert(id) {
            out.push(Violation::Duplicate(id));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Read-only view of one component's slots.
#[derive(Clone, Copy, Debug)]
pub struct SegmentView<'a> {
    pub component_index: usize,
    slots: &'a [u32],
    day_len: usize,
}

impl<'a> SegmentView<'a> {
    pub fn slots(&self) -> &'a [u32] {
        self.slots
    }

    pub fn day_blocks(&self) -> impl Iterator<Item = &'a [u32]> {
        self.slots.chunks(self.day_len)
    }
}

/// Mutable view of one component's slots; writes stay inside the segment.
#[derive(Debug)]
pub struct SegmentViewMut<'a> {
    pub component_index: usize,
    slots: &'a mut [u32],
    day_len: usize,
}

impl SegmentViewMut<'_> {
    pub fn slots(&mut self) -> &mut [u32] {
        self.slots
    }

    pub fn day_blocks(&mut self) -> impl Iterator<Item = &mut [u32]> {
        self.slots.chunks_mut(self.day_len)
    }
}

fn check_component(plan: &DecompositionPlan, genome: &Genome, i: usize) -> Result<()> {
    if i >= plan.num_components() {
        return Err(Error::OutOfRange { index: i, len: plan.num_components() });
    }
    if genome.len() != plan.genome_len() {
        return Err(Error::invalid(
            "genome",
            format!("length {} does not match plan length {}", genome.len(), plan.genome_len()),
        ));
    }
    Ok(())
}

pub fn segment_of<'a>(genome: &'a Genome, plan: &DecompositionPlan, i: usize) -> Result<SegmentView<'a>> {
    check_component(plan, genome, i)?;
    Ok(SegmentView {
        component_index: i,
        slots: &genome.slots()[plan.segment_range(i)],
        day_len: plan.day_len(),
    })
}

pub fn segment_of_mut<'a>(
    genome: &'a mut Genome,
    plan: &DecompositionPlan,
    i: usize,
) -> Result<SegmentViewMut<'a>> {
    check_component(plan, genome, i)?;
    let range = plan.segment_range(i);
    Ok(SegmentViewMut {
        component_index: i,
        slots: &mut genome.slots_mut()[range],
        day_len: plan.day_len(),
    })
}
