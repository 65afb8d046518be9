//! Clustered-graph data model: points of interest partitioned into city
//! clusters, two symmetric edge channels, file I/O, synthetic generation,
//! the weak-decomposability check and a brute-force path oracle.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stream::{StreamTag, Streams};

/// Largest POI id accepted; ids index a dense lookup table.
pub const MAX_POI_ID: u32 = 10_000_000;

/// Largest vertex count the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Poi<T> {
    pub id: u32,
    /// Index into the cluster list; derived from `clusters`, not stored on disk.
    #[serde(skip)]
    pub cluster_id: usize,
    pub score: T,
    pub visit_cost: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visit_minutes: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl<T: Scalar> Poi<T> {
    pub fn new(id: u32, score: T, visit_cost: T) -> Self {
        Self {
            id,
            cluster_id: 0,
            score,
            visit_cost,
            visit_minutes: None,
            label: None,
        }
    }
}

/// Edge channel of the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Time,
    Cost,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Time, Channel::Cost];
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Channel::Time),
            "cost" => Ok(Channel::Cost),
            other => Err(Error::invalid("channel", format!("unknown channel `{other}`"))),
        }
    }
}

/// On-disk layout of an instance.
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct InstanceFile<T> {
    name: String,
    clusters: Vec<Vec<u32>>,
    pois: Vec<Poi<T>>,
    time_matrix: Vec<Vec<T>>,
    cost_matrix: Vec<Vec<T>>,
}

/// Complete undirected graph over POIs with a cluster partition.
///
/// Matrix rows and columns follow the order of `pois`. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusteredInstance<T> {
    name: String,
    pois: Vec<Poi<T>>,
    clusters: Vec<Vec<u32>>,
    n: usize,
    time: Vec<T>,
    cost: Vec<T>,
    /// POI id -> row index, `u32::MAX` when absent.
    index_of: Vec<u32>,
}

impl<T: Scalar> ClusteredInstance<T> {
    /// Builds and validates an instance. Each POI's `cluster_id` is
    /// overwritten from `clusters`.
    pub fn new(
        name: impl Into<String>,
        mut pois: Vec<Poi<T>>,
        clusters: Vec<Vec<u32>>,
        time_matrix: Vec<Vec<T>>,
        cost_matrix: Vec<Vec<T>>,
    ) -> Result<Self> {
        let n = pois.len();
        if n == 0 {
            return Err(Error::invalid("pois", "instance has no POIs"));
        }
        if clusters.is_empty() {
            return Err(Error::invalid("clusters", "at least one cluster is required"));
        }

        let max_id = pois.iter().map(|p| p.id).max().unwrap_or(0);
        if max_id > MAX_POI_ID {
            return Err(Error::invalid(
                "pois.id",
                format!("id {max_id} exceeds limit {MAX_POI_ID}"),
            ));
        }
        let mut index_of = vec![u32::MAX; max_id as usize + 1];
        for (idx, poi) in pois.iter().enumerate() {
            if poi.id == 0 {
                return Err(Error::invalid(format!("pois[{idx}].id"), "ids must be positive"));
            }
            if index_of[poi.id as usize] != u32::MAX {
                return Err(Error::invalid(
                    format!("pois[{idx}].id"),
                    format!("duplicate id {}", poi.id),
                ));
            }
            if !(poi.score > T::zero()) || !poi.score.is_finite() {
                return Err(Error::invalid(
                    format!("pois[{idx}].score"),
                    format!("score must be positive and finite, got {}", poi.score),
                ));
            }
            if !(poi.visit_cost >= T::zero()) || !poi.visit_cost.is_finite() {
                return Err(Error::invalid(
                    format!("pois[{idx}].visit_cost"),
                    format!("visit cost must be non-negative, got {}", poi.visit_cost),
                ));
            }
            if let Some(minutes) = poi.visit_minutes {
                if !(minutes >= T::zero()) {
                    return Err(Error::invalid(
                        format!("pois[{idx}].visit_minutes"),
                        "visit minutes must be non-negative",
                    ));
                }
            }
            index_of[poi.id as usize] = idx as u32;
        }

        let mut seen = HashSet::with_capacity(n);
        for (ci, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::invalid(format!("clusters[{ci}]"), "cluster is empty"));
            }
            for &id in members {
                let idx = index_of
                    .get(id as usize)
                    .copied()
                    .filter(|&i| i != u32::MAX)
                    .ok_or_else(|| {
                        Error::invalid(format!("clusters[{ci}]"), format!("unknown POI id {id}"))
                    })?;
                if !seen.insert(id) {
                    return Err(Error::invalid(
                        format!("clusters[{ci}]"),
                        format!("POI id {id} appears in more than one cluster slot"),
                    ));
                }
                pois[idx as usize].cluster_id = ci;
            }
        }
        if seen.len() != n {
            let missing = pois.iter().find(|p| !seen.contains(&p.id)).map(|p| p.id);
            return Err(Error::invalid(
                "clusters",
                format!("POI id {} is not assigned to any cluster", missing.unwrap_or(0)),
            ));
        }

        let time = flatten_matrix("time_matrix", time_matrix, n)?;
        let cost = flatten_matrix("cost_matrix", cost_matrix, n)?;

        Ok(Self {
            name: name.into(),
            pois,
            clusters,
            n,
            time,
            cost,
            index_of,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pois(&self) -> &[Poi<T>] {
        &self.pois
    }

    pub fn clusters(&self) -> &[Vec<u32>] {
        &self.clusters
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Row index of a POI id.
    #[inline]
    pub fn index_of(&self, id: u32) -> Option<usize> {
        match self.index_of.get(id as usize) {
            Some(&i) if i != u32::MAX => Some(i as usize),
            _ => None,
        }
    }

    pub fn poi(&self, id: u32) -> Option<&Poi<T>> {
        self.index_of(id).map(|i| &self.pois[i])
    }

    pub fn cluster_of(&self, id: u32) -> Option<usize> {
        self.poi(id).map(|p| p.cluster_id)
    }

    #[inline]
    pub fn time_at(&self, i: usize, j: usize) -> T {
        self.time[i * self.n + j]
    }

    #[inline]
    pub fn cost_at(&self, i: usize, j: usize) -> T {
        self.cost[i * self.n + j]
    }

    #[inline]
    pub fn edge_at(&self, channel: Channel, i: usize, j: usize) -> T {
        match channel {
            Channel::Time => self.time_at(i, j),
            Channel::Cost => self.cost_at(i, j),
        }
    }

    /// Vertex weight read alongside a channel: visit minutes (0 when
    /// unrecorded) for time, visit cost for cost.
    pub fn vertex_weight_at(&self, channel: Channel, i: usize) -> T {
        let poi = &self.pois[i];
        match channel {
            Channel::Time => poi.visit_minutes.unwrap_or_else(T::zero),
            Channel::Cost => poi.visit_cost,
        }
    }

    fn matrix_rows(&self, flat: &[T]) -> Vec<Vec<T>> {
        flat.chunks(self.n).map(<[T]>::to_vec).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            name: self.name.clone(),
            clusters: self.clusters.clone(),
            pois: self.pois.clone(),
            time_matrix: self.matrix_rows(&self.time),
            cost_matrix: self.matrix_rows(&self.cost),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile<T> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(
            file.name,
            file.pois,
            file.clusters,
            file.time_matrix,
            file.cost_matrix,
        )
    }
}

fn flatten_matrix<T: Scalar>(field: &str, rows: Vec<Vec<T>>, n: usize) -> Result<Vec<T>> {
    if rows.len() != n {
        return Err(Error::invalid(
            field,
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    let mut flat = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(
                format!("{field}[{i}]"),
                format!("expected {n} columns, found {}", row.len()),
            ));
        }
        flat.extend_from_slice(row);
    }
    for i in 0..n {
        for j in 0..n {
            let v = flat[i * n + j];
            if !v.is_finite() || v < T::zero() {
                return Err(Error::invalid(
                    format!("{field}[{i}][{j}]"),
                    format!("weight must be finite and non-negative, got {v}"),
                ));
            }
            if i == j && v != T::zero() {
                return Err(Error::invalid(
                    format!("{field}[{i}][{j}]"),
                    format!("diagonal must be zero, got {v}"),
                ));
            }
            if j > i && v != flat[j * n + i] {
                return Err(Error::invalid(
                    format!("{field}[{i}][{j}]"),
                    format!("asymmetric: {v} vs {field}[{j}][{i}] = {}", flat[j * n + i]),
                ));
            }
        }
    }
    Ok(flat)
}

pub fn load_instance<T: Scalar>(path: impl AsRef<Path>) -> Result<ClusteredInstance<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ClusteredInstance::from_json(&text)
}

pub fn save_instance<T: Scalar>(instance: &ClusteredInstance<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = instance.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parameters of the synthetic instance generator.
///
/// Intercluster weights are drawn in `[margin * S, 2 * margin * S]` where
/// `S` is the sum of per-cluster maximum intracluster weights of that
/// channel, so any `margin >= 1` yields a weakly decomposable graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GeneratorSpec<T> {
    #[serde(default)]
    pub name: Option<String>,
    pub m: usize,
    pub cluster_sizes: Vec<usize>,
    pub intra_weight_range: [T; 2],
    pub margin: T,
    pub score_range: [T; 2],
    pub cost_range: [T; 2],
    /// Optional per-cluster overrides of `score_range`.
    #[serde(default)]
    pub cluster_score_ranges: Option<Vec<[T; 2]>>,
    /// Optional per-cluster overrides of `intra_weight_range`.
    #[serde(default)]
    pub cluster_intra_weight_ranges: Option<Vec<[T; 2]>>,
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn uniform(m: usize, size: usize, margin: T) -> Self {
        Self {
            name: None,
            m,
            cluster_sizes: vec![size; m],
            intra_weight_range: [T::of(1.0), T::of(10.0)],
            margin,
            score_range: [T::of(1.0), T::of(5.0)],
            cost_range: [T::zero(), T::of(50.0)],
            cluster_score_ranges: None,
            cluster_intra_weight_ranges: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let check_range = |field: &str, r: [T; 2], positive: bool| -> Result<()> {
            let lower_ok = if positive { r[0] > T::zero() } else { r[0] >= T::zero() };
            if !lower_ok || !(r[0] <= r[1]) || !r[1].is_finite() {
                return Err(Error::invalid(field, format!("invalid range [{}, {}]", r[0], r[1])));
            }
            Ok(())
        };
        if self.m == 0 {
            return Err(Error::invalid("m", "at least one cluster is required"));
        }
        if self.cluster_sizes.len() != self.m || self.cluster_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid(
                "cluster_sizes",
                format!("need {} positive sizes", self.m),
            ));
        }
        if !(self.margin >= T::one()) || !self.margin.is_finite() {
            return Err(Error::invalid("margin", "margin must be >= 1"));
        }
        check_range("intra_weight_range", self.intra_weight_range, false)?;
        check_range("score_range", self.score_range, true)?;
        check_range("cost_range", self.cost_range, false)?;
        for (field, overrides, positive) in [
            ("cluster_score_ranges", &self.cluster_score_ranges, true),
            ("cluster_intra_weight_ranges", &self.cluster_intra_weight_ranges, false),
        ] {
            if let Some(list) = overrides {
                if list.len() != self.m {
                    return Err(Error::invalid(field, format!("need {} ranges", self.m)));
                }
                for r in list {
                    check_range(field, *r, positive)?;
                }
            }
        }
        Ok(())
    }
}

fn draw<T: Scalar, R: Rng>(rng: &mut R, r: [T; 2]) -> T {
    let (lo, hi) = (r[0].as_f64(), r[1].as_f64());
    if lo == hi {
        r[0]
    } else {
        T::of(rng.gen_range(lo..=hi))
    }
}

/// Generates a weakly decomposable instance. Ids run 1..=N, clusters are
/// contiguous id ranges. Deterministic for a fixed seed.
pub fn generate_instance<T: Scalar>(spec: &GeneratorSpec<T>, seed: u64) -> Result<ClusteredInstance<T>> {
    spec.validate()?;
    let mut rng = Streams::new(seed).rng(StreamTag::Generate, 0, 0, 0);
    let n: usize = spec.cluster_sizes.iter().sum();

    let mut pois = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(spec.m);
    let mut cluster_of = Vec::with_capacity(n);
    let mut next_id = 1u32;
    for (ci, &size) in spec.cluster_sizes.iter().enumerate() {
        let score_range = spec
            .cluster_score_ranges
            .as_ref()
            .map_or(spec.score_range, |v| v[ci]);
        let mut members = Vec::with_capacity(size);
        for _ in 0..size {
            let score = draw(&mut rng, score_range);
            let cost = draw(&mut rng, spec.cost_range);
            pois.push(Poi::new(next_id, score, cost));
            members.push(next_id);
            cluster_of.push(ci);
            next_id += 1;
        }
        clusters.push(members);
    }

    let mut matrices = [vec![vec![T::zero(); n]; n], vec![vec![T::zero(); n]; n]];
    for matrix in matrices.iter_mut() {
        let mut wmax = vec![T::zero(); spec.m];
        for i in 0..n {
            for j in (i + 1)..n {
                let ci = cluster_of[i];
                if ci == cluster_of[j] {
                    let range = spec
                        .cluster_intra_weight_ranges
                        .as_ref()
                        .map_or(spec.intra_weight_range, |v| v[ci]);
                    let w = draw(&mut rng, range);
                    matrix[i][j] = w;
                    matrix[j][i] = w;
                    wmax[ci] = wmax[ci].max(w);
                }
            }
        }
        let s: T = wmax.iter().copied().sum();
        let inter = [spec.margin * s, T::of(2.0) * spec.margin * s];
        for i in 0..n {
            for j in (i + 1)..n {
                if cluster_of[i] != cluster_of[j] {
                    let w = draw(&mut rng, inter);
                    matrix[i][j] = w;
                    matrix[j][i] = w;
                }
            }
        }
    }
    let [time, cost] = matrices;
    let name = spec
        .name
        .clone()
        .unwrap_or_else(|| format!("generated-m{}-n{}-s{}", spec.m, n, seed));
    ClusteredInstance::new(name, pois, clusters, time, cost)
}

/// Outcome of checking `sum_i wmax(V_i) <= min_{j != k} wmin(V_j, V_k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct DecomposabilityReport<T> {
    pub channel: Channel,
    pub lhs: T,
    /// `+inf` (serialized as `null`) when there is a single cluster.
    pub rhs: T,
    pub satisfied: bool,
    pub per_cluster_wmax: Vec<T>,
}

pub fn check_weak_decomposability<T: Scalar>(
    instance: &ClusteredInstance<T>,
    channel: Channel,
) -> DecomposabilityReport<T> {
    let n = instance.len();
    let mut per_cluster_wmax = vec![T::zero(); instance.num_clusters()];
    let mut rhs = T::infinity();
    let pois = instance.pois();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = instance.edge_at(channel, i, j);
            let (ci, cj) = (pois[i].cluster_id, pois[j].cluster_id);
            if ci == cj {
                per_cluster_wmax[ci] = per_cluster_wmax[ci].max(w);
            } else {
                rhs = rhs.min(w);
            }
        }
    }
    let lhs: T = per_cluster_wmax.iter().copied().sum();
    DecomposabilityReport {
        channel,
        lhs,
        rhs,
        satisfied: lhs <= rhs,
        per_cluster_wmax,
    }
}

/// Number of entries into cluster `cluster_index` along `path`, counting
/// the start vertex as one entry.
pub fn visit_count<T: Scalar>(
    path: &[u32],
    cluster_index: usize,
    instance: &ClusteredInstance<T>,
) -> Result<usize> {
    if path.is_empty() {
        return Err(Error::invalid("path", "path is empty"));
    }
    let clusters = path
        .iter()
        .map(|&id| {
            instance
                .cluster_of(id)
                .ok_or_else(|| Error::invalid("path", format!("unknown POI id {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let start = usize::from(clusters[0] == cluster_index);
    let entries = clusters
        .windows(2)
        .filter(|w| w[1] == cluster_index && w[0] != cluster_index)
        .count();
    Ok(start + entries)
}

/// `f(x) = alpha * sum w(x_i) + beta * sum w(x_i, x_{i+1})` over one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GenericObjectiveForm<T> {
    pub alpha_form: T,
    pub beta_form: T,
    pub channel: Channel,
}

impl<T: Scalar> GenericObjectiveForm<T> {
    pub fn new(alpha_form: T, beta_form: T, channel: Channel) -> Result<Self> {
        if !(alpha_form >= T::zero()) || !(beta_form >= T::zero()) {
            return Err(Error::invalid("form", "coefficients must be non-negative"));
        }
        if alpha_form == T::zero() && beta_form == T::zero() {
            return Err(Error::invalid("form", "alpha and beta cannot both be zero"));
        }
        Ok(Self {
            alpha_form,
            beta_form,
            channel,
        })
    }

    pub fn value(&self, instance: &ClusteredInstance<T>, path: &[u32]) -> Option<T> {
        let idx: Option<Vec<usize>> = path.iter().map(|&id| instance.index_of(id)).collect();
        let idx = idx?;
        let vertices: T = idx
            .iter()
            .map(|&i| instance.vertex_weight_at(self.channel, i))
            .sum();
        let edges: T = idx
            .windows(2)
            .map(|w| instance.edge_at(self.channel, w[0], w[1]))
            .sum();
        Some(self.alpha_form * vertices + self.beta_form * edges)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPath<T> {
    pub path: Vec<u32>,
    pub value: T,
}

/// Exhaustive minimizer of a [`GenericObjectiveForm`] over all non-empty
/// simple vertex sequences. Ties resolve to the lexicographically smallest
/// id sequence. Refuses graphs above [`BRUTE_FORCE_LIMIT`] vertices.
pub fn brute_force_optimal_path<T: Scalar>(
    instance: &ClusteredInstance<T>,
    form: &GenericObjectiveForm<T>,
    require_all_clusters: bool,
) -> Result<OptimalPath<T>> {
    let n = instance.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard(n, BRUTE_FORCE_LIMIT));
    }
    // Enumerate in ascending id order so the first minimum found is the
    // lexicographically smallest.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| instance.pois()[i].id);

    struct Search<'a, T> {
        instance: &'a ClusteredInstance<T>,
        form: &'a GenericObjectiveForm<T>,
        order: Vec<usize>,
        require_all: bool,
        used: Vec<bool>,
        cluster_hits: Vec<usize>,
        covered: usize,
        path: Vec<usize>,
        best: Option<(Vec<usize>, T)>,
    }

    impl<T: Scalar> Search<'_, T> {
        fn visit(&mut self, value: T) {
            if !self.path.is_empty()
                && (!self.require_all || self.covered == self.cluster_hits.len())
                && self.best.as_ref().map_or(true, |(_, b)| value < *b)
            {
                self.best = Some((self.path.clone(), value));
            }
            for k in 0..self.order.len() {
                let v = self.order[k];
                if self.used[v] {
                    continue;
                }
                let ch = self.form.channel;
                let mut next = value + self.form.alpha_form * self.instance.vertex_weight_at(ch, v);
                if let Some(&last) = self.path.last() {
                    next = next + self.form.beta_form * self.instance.edge_at(ch, last, v);
                }
                let c = self.instance.pois()[v].cluster_id;
                self.used[v] = true;
                self.cluster_hits[c] += 1;
                if self.cluster_hits[c] == 1 {
                    self.covered += 1;
                }
                self.path.push(v);
                self.visit(next);
                self.path.pop();
                if self.cluster_hits[c] == 1 {
                    self.covered -= 1;
                }
                self.cluster_hits[c] -= 1;
                self.used[v] = false;
            }
        }
    }

    let mut search = Search {
        instance,
        form,
        order,
        require_all: require_all_clusters,
        used: vec![false; n],
        cluster_hits: vec![0; instance.num_clusters()],
        covered: 0,
        path: Vec::with_capacity(n),
        best: None,
    };
    search.visit(T::zero());
    let (path, value) = search.best.expect("a non-empty instance has at least one path");
    Ok(OptimalPath {
        path: path.into_iter().map(|i| instance.pois()[i].id).collect(),
        value,
    })
}

/// Cluster id sequence of a path; convenience for tests and logs.
pub fn cluster_sequence<T: Scalar>(instance: &ClusteredInstance<T>, path: &[u32]) -> Vec<usize> {
    path.iter().filter_map(|&id| instance.cluster_of(id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(time: [[f64; 3]; 3]) -> ClusteredInstance<f64> {
        let pois = vec![
            Poi::new(1, 1.0, 0.0),
            Poi::new(2, 2.0, 1.0),
            Poi::new(3, 3.0, 2.0),
        ];
        let rows = |m: [[f64; 3]; 3]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        ClusteredInstance::new("tiny", pois, vec![vec![1, 3], vec![2]], rows(time), rows(time))
            .unwrap()
    }

    #[test]
    fn minimal_two_poi_file_loads() {
        let text = r#"{"name":"min","clusters":[[1,2]],
            "pois":[{"id":1,"score":1.0,"visit_cost":0.0},{"id":2,"score":2.0,"visit_cost":3.0,"label":"b"}],
            "time_matrix":[[0,5],[5,0]],"cost_matrix":[[0,1],[1,0]]}"#;
        let inst = ClusteredInstance::<f64>::from_json(text).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst.num_clusters(), 1);
        assert_eq!(inst.poi(2).unwrap().label.as_deref(), Some("b"));
    }

    #[test]
    fn asymmetric_matrix_names_cell() {
        let text = r#"{"name":"bad","clusters":[[1,2]],
            "pois":[{"id":1,"score":1.0,"visit_cost":0.0},{"id":2,"score":2.0,"visit_cost":3.0}],
            "time_matrix":[[0,5],[4,0]],"cost_matrix":[[0,1],[1,0]]}"#;
        let err = ClusteredInstance::<f64>::from_json(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("time_matrix[0][1]"), "{msg}");
    }

    #[test]
    fn rejects_empty_cluster_and_bad_score() {
        let pois = vec![Poi::new(1, 1.0, 0.0)];
        let err = ClusteredInstance::new("x", pois, vec![vec![1], vec![]], vec![vec![0.0]], vec![vec![0.0]])
            .unwrap_err();
        assert!(err.to_string().contains("clusters[1]"));

        let pois = vec![Poi::new(1, 0.0, 0.0)];
        let err = ClusteredInstance::new("x", pois, vec![vec![1]], vec![vec![0.0]], vec![vec![0.0]])
            .unwrap_err();
        assert!(err.to_string().contains("pois[0].score"));
    }

    #[test]
    fn check_on_hand_built_instances() {
        // Clusters A={1,3} (wmax 1), B={2} (wmax 0) plus a second intra pair below.
        let inst = tiny([[0.0, 3.0, 1.0], [3.0, 0.0, 4.0], [1.0, 4.0, 0.0]]);
        let r = check_weak_decomposability(&inst, Channel::Time);
        assert_eq!(r.per_cluster_wmax, vec![1.0, 0.0]);
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, 3.0);
        assert!(r.satisfied);
    }

    #[test]
    fn check_boundary_cases() {
        // Two clusters with wmax 1 and 2; min intercluster 3 then 2.5.
        let build = |inter: f64| {
            let pois = (1..=4).map(|i| Poi::new(i, 1.0, 0.0)).collect();
            let m = vec![
                vec![0.0, 1.0, inter, 10.0],
                vec![1.0, 0.0, 10.0, 10.0],
                vec![inter, 10.0, 0.0, 2.0],
                vec![10.0, 10.0, 2.0, 0.0],
            ];
            ClusteredInstance::new("b", pois, vec![vec![1, 2], vec![3, 4]], m.clone(), m).unwrap()
        };
        let r = check_weak_decomposability(&build(3.0), Channel::Cost);
        assert_eq!((r.lhs, r.rhs, r.satisfied), (3.0, 3.0, true));
        let r = check_weak_decomposability(&build(2.5), Channel::Cost);
        assert_eq!((r.lhs, r.rhs, r.satisfied), (3.0, 2.5, false));
    }

    #[test]
    fn single_cluster_is_trivially_satisfied() {
        let spec = GeneratorSpec::<f64>::uniform(1, 5, 1.0);
        let inst = generate_instance(&spec, 3).unwrap();
        let r = check_weak_decomposability(&inst, Channel::Time);
        assert!(r.satisfied);
        assert!(r.rhs.is_infinite());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"rhs\":null"), "{json}");
    }

    #[test]
    fn generator_satisfies_condition_and_is_deterministic() {
        let mut spec = GeneratorSpec::<f64>::uniform(2, 3, 1.0);
        spec.cluster_sizes = vec![3, 3];
        let a = generate_instance(&spec, 7).unwrap();
        for ch in Channel::ALL {
            assert!(check_weak_decomposability(&a, ch).satisfied);
        }
        let b = generate_instance(&spec, 7).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_instance(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_bad_specs() {
        let mut spec = GeneratorSpec::<f64>::uniform(2, 3, 0.5);
        assert!(generate_instance(&spec, 1).is_err());
        spec.margin = 1.0;
        spec.cluster_sizes = vec![3];
        assert!(generate_instance(&spec, 1).is_err());
        spec.cluster_sizes = vec![3, 3];
        spec.score_range = [0.0, 1.0];
        assert!(generate_instance(&spec, 1).is_err());
    }

    #[test]
    fn visit_count_examples() {
        // A = {1, 3}, B = {2}
        let inst = tiny([[0.0, 3.0, 1.0], [3.0, 0.0, 4.0], [1.0, 4.0, 0.0]]);
        assert_eq!(visit_count(&[1, 2, 3], 0, &inst).unwrap(), 2);
        assert_eq!(visit_count(&[1, 2, 3], 1, &inst).unwrap(), 1);
        assert_eq!(visit_count(&[1, 3], 0, &inst).unwrap(), 1);
        assert_eq!(visit_count(&[1, 3], 1, &inst).unwrap(), 0);
        assert!(visit_count(&[], 0, &inst).is_err());
        assert!(visit_count(&[9], 0, &inst).is_err());
    }

    #[test]
    fn visit_count_alternating() {
        let pois = (1..=4).map(|i| Poi::new(i, 1.0, 0.0)).collect();
        let m: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let inst = ClusteredInstance::new("alt", pois, vec![vec![1, 3], vec![2, 4]], m.clone(), m).unwrap();
        assert_eq!(visit_count(&[1, 2, 3, 4], 0, &inst).unwrap(), 2);
        assert_eq!(visit_count(&[1, 2, 3, 4], 1, &inst).unwrap(), 2);
    }

    #[test]
    fn brute_force_vertex_only_picks_cheapest_per_cluster() {
        // Cost channel vertex weights: id1=0, id2=1, id3=2; clusters {1,3},{2}.
        let inst = tiny([[0.0, 3.0, 1.0], [3.0, 0.0, 4.0], [1.0, 4.0, 0.0]]);
        let form = GenericObjectiveForm::new(1.0, 0.0, Channel::Cost).unwrap();
        let best = brute_force_optimal_path(&inst, &form, true).unwrap();
        assert_eq!(best.value, 1.0);
        assert_eq!(best.path, vec![1, 2]);
    }

    #[test]
    fn brute_force_two_singletons() {
        let pois = vec![Poi::new(4, 1.0, 1.0), Poi::new(9, 1.0, 1.0)];
        let m = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        let inst = ClusteredInstance::new("p", pois, vec![vec![4], vec![9]], m.clone(), m).unwrap();
        let form = GenericObjectiveForm::new(0.0, 1.0, Channel::Time).unwrap();
        let best = brute_force_optimal_path(&inst, &form, true).unwrap();
        assert_eq!(best.path, vec![4, 9]);
        assert_eq!(best.value, 2.0);
    }

    #[test]
    fn brute_force_guard() {
        let spec = GeneratorSpec::<f64>::uniform(2, 6, 1.0);
        let inst = generate_instance(&spec, 1).unwrap();
        let form = GenericObjectiveForm::new(1.0, 1.0, Channel::Time).unwrap();
        assert!(matches!(
            brute_force_optimal_path(&inst, &form, true),
            Err(Error::SizeGuard(12, 10))
        ));
    }

    #[test]
    fn form_rejects_zero_coefficients() {
        assert!(GenericObjectiveForm::<f64>::new(0.0, 0.0, Channel::Time).is_err());
    }
}
