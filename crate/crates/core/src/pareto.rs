//! Pareto machinery for minimization: dominance, fast non-dominated
//! sorting, crowding distance, exact hypervolume in two and three
//! dimensions, reference-point selection and a non-dominated archive.

use std::cmp::Ordering;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoding::{format_slots, DecompositionPlan, Genome};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveVector;
use crate::scalar::Scalar;

/// `a` is no worse than `b` everywhere and differs somewhere.
#[inline]
pub fn dominates_point<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

#[inline]
pub fn dominates<T: Scalar>(a: &ObjectiveVector<T>, b: &ObjectiveVector<T>) -> bool {
    dominates_point(&a.to_array(), &b.to_array())
}

/// Fronts of indices; front 0 is the non-dominated set.
pub fn non_dominated_sort_points<T: Scalar, const D: usize>(points: &[[T; D]]) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates_point(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_point(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

pub fn non_dominated_sort<T: Scalar>(points: &[ObjectiveVector<T>]) -> Vec<Vec<usize>> {
    let arrays: Vec<[T; 3]> = points.iter().map(|p| p.to_array()).collect();
    non_dominated_sort_points(&arrays)
}

/// NSGA-II crowding distance of the members of one front.
pub fn crowding_distance_points<T: Scalar, const D: usize>(front: &[[T; D]]) -> Vec<T> {
    let n = front.len();
    let mut distance = vec![T::zero(); n];
    if n <= 2 {
        return vec![T::infinity(); n];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..D {
        idx.sort_by(|&a, &b| {
            front[a][k]
                .partial_cmp(&front[b][k])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let lo = front[idx[0]][k];
        let hi = front[idx[n - 1]][k];
        distance[idx[0]] = T::infinity();
        distance[idx[n - 1]] = T::infinity();
        let range = hi - lo;
        if range <= T::zero() {
            continue;
        }
        for w in 1..n - 1 {
            let i = idx[w];
            if distance[i].is_finite() {
                distance[i] = distance[i] + (front[idx[w + 1]][k] - front[idx[w - 1]][k]) / range;
            }
        }
    }
    distance
}

pub fn crowding_distance<T: Scalar>(front: &[ObjectiveVector<T>]) -> Vec<T> {
    let arrays: Vec<[T; 3]> = front.iter().map(|p| p.to_array()).collect();
    crowding_distance_points(&arrays)
}

fn strictly_inside<T: Scalar, const D: usize>(p: &[T; D], reference: &[T; D]) -> bool {
    p.iter().zip(reference).all(|(x, r)| x < r)
}

/// Number of points lying outside the reference box in some objective.
pub fn clipped_count<T: Scalar, const D: usize>(points: &[[T; D]], reference: &[T; D]) -> usize {
    points
        .iter()
        .filter(|p| p.iter().zip(reference).any(|(x, r)| x > r))
        .count()
}

/// Exact 2-D hypervolume by a sorted sweep.
pub fn hypervolume_2d<T: Scalar>(points: &[[T; 2]], reference: &[T; 2]) -> T {
    let mut pts: Vec<[T; 2]> = points
        .iter()
        .copied()
        .filter(|p| strictly_inside(p, reference))
        .collect();
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .unwrap_or(Ordering::Equal)
            .then(a[1].partial_cmp(&b[1]).unwrap_or(Ordering::Equal))
    });
    let mut area = T::zero();
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area = area + (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// 2-D non-dominated staircase sorted by x ascending (y strictly descending).
struct Staircase<T> {
    steps: Vec<[T; 2]>,
}

impl<T: Scalar> Staircase<T> {
    fn insert(&mut self, p: [T; 2]) {
        // First step with x > p.x; every step before it has x <= p.x.
        let pos = self.steps.partition_point(|s| s[0] <= p[0]);
        if pos > 0 && self.steps[pos - 1][1] <= p[1] {
            return;
        }
        // Steps at or after `pos`... and an equal-x step just before it.
        let mut start = pos;
        if pos > 0 && self.steps[pos - 1][0] == p[0] {
            start = pos - 1;
        }
        let mut end = pos;
        while end < self.steps.len() && self.steps[end][1] >= p[1] {
            end += 1;
        }
        self.steps.splice(start..end, std::iter::once(p));
    }

    fn area(&self, reference: &[T; 2]) -> T {
        let mut area = T::zero();
        for (k, s) in self.steps.iter().enumerate() {
            let right = self.steps.get(k + 1).map_or(reference[0], |n| n[0]);
            area = area + (right - s[0]) * (reference[1] - s[1]);
        }
        area
    }
}

/// Exact 3-D hypervolume by sweeping the third objective and maintaining
/// the dominated area of the first two.
pub fn hypervolume_3d<T: Scalar>(points: &[[T; 3]], reference: &[T; 3]) -> T {
    let mut pts: Vec<[T; 3]> = points
        .iter()
        .copied()
        .filter(|p| strictly_inside(p, reference))
        .collect();
    if pts.is_empty() {
        return T::zero();
    }
    pts.sort_by(|a, b| a[2].partial_cmp(&b[2]).unwrap_or(Ordering::Equal));
    let base = [reference[0], reference[1]];
    let mut stairs = Staircase { steps: Vec::with_capacity(pts.len()) };
    let mut volume = T::zero();
    for (k, p) in pts.iter().enumerate() {
        stairs.insert([p[0], p[1]]);
        let next_z = pts.get(k + 1).map_or(reference[2], |q| q[2]);
        let height = next_z - p[2];
        if height > T::zero() {
            volume = volume + stairs.area(&base) * height;
        }
    }
    volume
}

/// Hypervolume of objective vectors against a reference; points outside
/// the reference box are ignored.
pub fn hypervolume<T: Scalar>(points: &[ObjectiveVector<T>], reference: &ReferencePoint<T>) -> T {
    let arrays: Vec<[T; 3]> = points.iter().map(|p| p.to_array()).collect();
    let clipped = clipped_count(&arrays, &reference.coords);
    if clipped > 0 {
        log::trace!("hypervolume: {clipped} of {} points outside the reference box", arrays.len());
    }
    hypervolume_3d(&arrays, &reference.coords)
}

/// Volume of the box spanned by `v` and the reference point.
pub fn hv_contribution<T: Scalar>(v: &ObjectiveVector<T>, reference: &ReferencePoint<T>) -> T {
    let mut volume = T::one();
    for (x, r) in v.to_array().iter().zip(&reference.coords) {
        if x > r {
            log::trace!("hv_contribution: point outside the reference box");
            return T::zero();
        }
        volume = volume * (*r - *x);
    }
    volume
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum RefPolicy<T> {
    Fixed([T; 3]),
    /// Component-wise maximum of a sample, scaled by `margin`.
    Adaptive { margin: T },
}

impl<T: Scalar> Default for RefPolicy<T> {
    fn default() -> Self {
        RefPolicy::Adaptive { margin: T::of(1.1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReferencePoint<T> {
    pub coords: [T; 3],
    pub policy: RefPolicy<T>,
    pub frozen: bool,
}

impl<T: Scalar> ReferencePoint<T> {
    pub fn fixed(coords: [T; 3]) -> Self {
        Self {
            coords,
            policy: RefPolicy::Fixed(coords),
            frozen: true,
        }
    }
}

/// Scales a sample maximum away from the ideal. Non-positive maxima are
/// shifted by `margin - 1` instead, since scaling would not move them.
pub(crate) fn widen<T: Scalar>(max: T, margin: T) -> T {
    if max > T::zero() {
        max * margin
    } else {
        max + (margin - T::one())
    }
}

/// Picks a frozen reference point from `samples` under `policy`.
pub fn choose_reference_point<T: Scalar>(
    samples: &[ObjectiveVector<T>],
    policy: RefPolicy<T>,
) -> Result<ReferencePoint<T>> {
    match policy {
        RefPolicy::Fixed(coords) => Ok(ReferencePoint::fixed(coords)),
        RefPolicy::Adaptive { margin } => {
            if samples.is_empty() {
                return Err(Error::invalid("samples", "adaptive reference needs at least one sample"));
            }
            if !(margin >= T::one()) {
                return Err(Error::invalid("margin", "must be >= 1"));
            }
            let mut max = [T::neg_infinity(); 3];
            for s in samples {
                for (m, x) in max.iter_mut().zip(s.to_array()) {
                    *m = m.max(x);
                }
            }
            Ok(ReferencePoint {
                coords: max.map(|m| widen(m, margin)),
                policy,
                frozen: true,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry<T> {
    pub genome: Genome,
    /// Layout the genome was encoded under.
    pub plan: Arc<DecompositionPlan>,
    pub objectives: ObjectiveVector<T>,
}

impl<T: Scalar> ArchiveEntry<T> {
    pub fn genome_text(&self) -> String {
        format_slots(self.genome.slots(), &self.plan)
    }
}

/// Mutually non-dominated set of evaluated solutions.
#[derive(Clone, Debug, Default)]
pub struct ParetoArchive<T> {
    entries: Vec<ArchiveEntry<T>>,
    capacity: Option<usize>,
}

impl<T: Scalar> ParetoArchive<T> {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
        }
    }

    pub fn entries(&self) -> &[ArchiveEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector<T>> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    /// Quick check used to skip cloning genomes that would be rejected.
    pub fn would_accept(&self, v: &ObjectiveVector<T>) -> bool {
        let p = v.to_array();
        !self.entries.iter().any(|e| {
            let q = e.objectives.to_array();
            q == p || dominates_point(&q, &p)
        })
    }

    /// Inserts unless an incumbent dominates or equals the newcomer;
    /// entries the newcomer dominates are dropped. Returns whether it was kept.
    pub fn insert(&mut self, entry: ArchiveEntry<T>) -> bool {
        if !self.would_accept(&entry.objectives) {
            return false;
        }
        let p = entry.objectives.to_array();
        self.entries
            .retain(|e| !dominates_point(&p, &e.objectives.to_array()));
        self.entries.push(entry);
        if let Some(cap) = self.capacity {
            while self.entries.len() > cap.max(1) {
                let points: Vec<[T; 3]> = self.entries.iter().map(|e| e.objectives.to_array()).collect();
                let crowd = crowding_distance_points(&points);
                let worst = (0..crowd.len())
                    .min_by(|&a, &b| crowd[a].partial_cmp(&crowd[b]).unwrap_or(Ordering::Equal))
                    .expect("archive is non-empty");
                self.entries.remove(worst);
            }
        }
        true
    }

    /// CSV with columns `f_t,f_c,f_e,genome`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["f_t", "f_c", "f_e", "genome"])?;
        for e in &self.entries {
            let [a, b, c] = e.objectives.to_array();
            w.write_record([a.to_string(), b.to_string(), c.to_string(), e.genome_text()])?;
        }
        w.flush().map_err(|e| Error::io("archive.csv", e))?;
        Ok(())
    }
}
