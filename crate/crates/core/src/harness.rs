//! Batch experiments: instance × duration × variant × sweep value × repeat
//! cells, each scored against a reference point shared by every variant
//! of the same instance and duration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgcc::{run_dgcc, run_global_nsga2, Ablation, Ablations, RunConfig};
use crate::encoding::{initial_decomposition, Genome};
use crate::error::{Error, Result};
use crate::evolution::random_segment;
use crate::instance::{generate_instance, load_instance, ClusteredInstance, GeneratorSpec};
use crate::objectives::{full_objectives, ObjectiveVector};
use crate::pareto::{choose_reference_point, ReferencePoint};
use crate::scalar::Scalar;
use crate::stream::{hash_str, StreamTag, Streams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum InstanceSource<T> {
    Path(PathBuf),
    Generate { spec: GeneratorSpec<T>, seed: u64 },
}

impl<T: Scalar> InstanceSource<T> {
    pub fn load(&self) -> Result<ClusteredInstance<T>> {
        match self {
            InstanceSource::Path(path) => load_instance(path),
            InstanceSource::Generate { spec, seed } => generate_instance(spec, *seed),
        }
    }

    /// Label used before the instance is loaded (for error reports).
    pub fn label(&self) -> String {
        match self {
            InstanceSource::Path(path) => path.display().to_string(),
            InstanceSource::Generate { spec, seed } => {
                spec.name.clone().unwrap_or_else(|| format!("generated-{seed}"))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "dgcc")]
    Dgcc,
    #[serde(rename = "dgcc-ablation-structure")]
    NoStructure,
    #[serde(rename = "dgcc-ablation-resources")]
    NoResources,
    #[serde(rename = "dgcc-ablation-inheritance")]
    NoInheritance,
    #[serde(rename = "global-nsga2")]
    GlobalNsga2,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Dgcc,
        Variant::NoStructure,
        Variant::NoResources,
        Variant::NoInheritance,
        Variant::GlobalNsga2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dgcc => "dgcc",
            Variant::NoStructure => "dgcc-ablation-structure",
            Variant::NoResources => "dgcc-ablation-resources",
            Variant::NoInheritance => "dgcc-ablation-inheritance",
            Variant::GlobalNsga2 => "global-nsga2",
        }
    }

    pub fn ablations(self) -> Ablations {
        let none = Ablations::default();
        match self {
            Variant::Dgcc | Variant::GlobalNsga2 => none,
            Variant::NoStructure => none.with(Ablation::Structure),
            Variant::NoResources => none.with(Ablation::Resources),
            Variant::NoInheritance => none.with(Ablation::Inheritance),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown variant {s:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// Structure adjustment period in rounds.
    L,
    /// Mean per-component budget `(I_bas + I_add) / n`.
    Q,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(SweepParam::L),
            "Q" => Ok(SweepParam::Q),
            other => Err(Error::Parse(format!("unknown sweep parameter {other:?} (expected L or Q)"))),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::L => "L",
            SweepParam::Q => "Q",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Applies one sweep value to `cfg`.
    pub fn apply<T: Scalar>(&self, cfg: &mut RunConfig<T>, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::invalid("sweep.values", format!("{value} is not positive")));
        }
        match self.parameter {
            SweepParam::L => {
                if value.fract() != 0.0 {
                    return Err(Error::invalid("sweep.values", format!("L must be an integer, got {value}")));
                }
                cfg.period = value as usize;
            }
            SweepParam::Q => {
                let half = (value * cfg.n as f64 / 2.0).round() as usize;
                cfg.i_bas = Some(half);
                cfg.i_add = Some(half);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ExperimentSpec<T> {
    pub instances: Vec<InstanceSource<T>>,
    pub durations: Vec<usize>,
    pub repeats: usize,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub base: RunConfig<T>,
    #[serde(default)]
    pub seed_base: u64,
    /// Random genomes evaluated to place each shared reference point.
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    /// When false, `wall_ms` is written as 0 so reruns give identical files.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_reference_samples() -> usize {
    2_000
}

impl<T: Scalar> ExperimentSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::invalid("instances", "at least one instance is required"));
        }
        if self.durations.is_empty() || self.durations.contains(&0) {
            return Err(Error::invalid("durations", "need at least one positive D"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be at least 1"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("variants", "at least one variant is required"));
        }
        if self.reference_samples == 0 {
            return Err(Error::invalid("reference_samples", "must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::invalid("sweep.values", "empty sweep"));
            }
            let mut probe = self.base.clone();
            for &v in &sweep.values {
                sweep.apply(&mut probe, v)?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One executed cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub days: usize,
    pub variant: String,
    pub param: Option<String>,
    pub value: Option<f64>,
    pub repeat: usize,
    pub seed: u64,
    pub hv: f64,
    pub fes: usize,
    pub wall_ms: u64,
}

/// Aggregate over repeats of one (instance, days, variant, value) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: String,
    pub days: usize,
    pub variant: String,
    pub param: Option<String>,
    pub value: Option<f64>,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    /// 1 = highest mean HV among variants of the same instance, days and value.
    pub rank: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Shared reference point per `instance@D`.
    pub references: BTreeMap<String, [f64; 3]>,
    /// Instances that could not be loaded, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Seed of one cell: variants of the same cell share it so they face the
/// same random draws where their operators coincide.
pub fn cell_seed(seed_base: u64, instance: &str, days: usize, value: Option<f64>, repeat: usize) -> u64 {
    let key = match value {
        Some(v) => format!("{instance}|D{days}|{v}|{repeat}"),
        None => format!("{instance}|D{days}|-|{repeat}"),
    };
    seed_base.wrapping_add(hash_str(&key))
}

/// Reference point from random valid genomes under the initial
/// decomposition, independent of any variant.
pub fn shared_reference<T: Scalar>(
    instance: &ClusteredInstance<T>,
    base: &RunConfig<T>,
    days: usize,
    samples: usize,
    seed: u64,
) -> Result<ReferencePoint<T>> {
    let m = instance.num_clusters();
    let plan = initial_decomposition(m, days, base.day_len, (0..m).collect())?;
    let eval = base.eval_config();
    let streams = Streams::new(seed);
    let mut points: Vec<ObjectiveVector<T>> = Vec::with_capacity(samples);
    for j in 0..samples {
        let mut slots = Vec::with_capacity(plan.genome_len());
        for i in 0..m {
            let mut rng = streams.rng(StreamTag::Sample, i as u64, j as u64, 0);
            let members = &instance.clusters()[plan.cluster(i)];
            slots.extend(random_segment(members, plan.segment_len(i), base.p_z, &mut rng));
        }
        let genome = Genome::new(slots);
        points.push(full_objectives(genome.slots(), &plan, instance, &eval));
    }
    choose_reference_point(&points, base.ref_policy)
}

struct Cell {
    instance: usize,
    days: usize,
    variant: Variant,
    value: Option<f64>,
    repeat: usize,
}

/// Runs every cell of `spec`. Rows come back in canonical cell order
/// regardless of execution order.
pub fn run_experiment<T: Scalar>(spec: &ExperimentSpec<T>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let mut out = ExperimentOutput::default();
    let mut loaded: Vec<Option<ClusteredInstance<T>>> = Vec::new();
    for source in &spec.instances {
        match source.load() {
            Ok(inst) => loaded.push(Some(inst)),
            Err(e) => {
                log::error!("skipping instance {}: {e}", source.label());
                out.failures.push((source.label(), e.to_string()));
                loaded.push(None);
            }
        }
    }

    let mut references = BTreeMap::new();
    for (k, inst) in loaded.iter().enumerate() {
        let Some(inst) = inst else { continue };
        for &days in &spec.durations {
            let seed = spec.seed_base.wrapping_add(hash_str(&format!("reference|{}|D{days}", inst.name())));
            let reference = shared_reference(inst, &spec.base, days, spec.reference_samples, seed)?;
            out.references.insert(
                format!("{}@D{days}", inst.name()),
                reference.coords.map(|c| c.as_f64()),
            );
            references.insert((k, days), reference);
        }
    }

    let values: Vec<Option<f64>> = match &spec.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for (k, inst) in loaded.iter().enumerate() {
        if inst.is_none() {
            continue;
        }
        for &days in &spec.durations {
            for &variant in &spec.variants {
                for &value in &values {
                    for repeat in 0..spec.repeats {
                        cells.push(Cell { instance: k, days, variant, value, repeat });
                    }
                }
            }
        }
    }

    let results: Vec<Result<ResultRow>> = cells
        .par_iter()
        .map(|cell| {
            let inst = loaded[cell.instance].as_ref().expect("loaded instance");
            let seed = cell_seed(spec.seed_base, inst.name(), cell.days, cell.value, cell.repeat);
            let mut cfg = spec.base.clone();
            cfg.days = cell.days;
            cfg.seed = seed;
            cfg.ablations = cell.variant.ablations();
            if let (Some(sweep), Some(v)) = (&spec.sweep, cell.value) {
                sweep.apply(&mut cfg, v)?;
            }
            let start = Instant::now();
            let result = match cell.variant {
                Variant::GlobalNsga2 => run_global_nsga2(inst, &cfg)?,
                _ => run_dgcc(inst, &cfg)?,
            };
            let wall_ms = if spec.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 };
            let hv = result.hv_against(&references[&(cell.instance, cell.days)]).as_f64();
            log::info!(
                "{} D={} {} value={:?} repeat={} hv={hv}",
                inst.name(),
                cell.days,
                cell.variant,
                cell.value,
                cell.repeat
            );
            Ok(ResultRow {
                instance: inst.name().to_string(),
                days: cell.days,
                variant: cell.variant.name().to_string(),
                param: spec.sweep.as_ref().map(|s| s.parameter.to_string()),
                value: cell.value,
                repeat: cell.repeat,
                seed,
                hv,
                fes: result.fes_total,
                wall_ms,
            })
        })
        .collect();
    out.rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    out.summary = summarize(&out.rows);
    Ok(out)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Mean, sample standard deviation, median and rank per group, in
/// first-appearance order of the groups.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, usize, String, Option<String>, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(String, usize, String, Option<String>, Option<u64>), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.instance.clone(),
            r.days,
            r.variant.clone(),
            r.param.clone(),
            r.value.map(f64::to_bits),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.hv);
    }
    let mut summary: Vec<SummaryRow> = order
        .iter()
        .map(|key| {
            let hv = &groups[key];
            let n = hv.len() as f64;
            let mean = hv.iter().sum::<f64>() / n;
            let std = if hv.len() > 1 {
                (hv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let mut sorted = hv.clone();
            sorted.sort_by(f64::total_cmp);
            SummaryRow {
                instance: key.0.clone(),
                days: key.1,
                variant: key.2.clone(),
                param: key.3.clone(),
                value: key.4.map(f64::from_bits),
                runs: hv.len(),
                mean,
                std,
                median: median(&sorted),
                rank: 0,
            }
        })
        .collect();
    for i in 0..summary.len() {
        let better = summary
            .iter()
            .filter(|o| {
                o.instance == summary[i].instance
                    && o.days == summary[i].days
                    && o.value.map(f64::to_bits) == summary[i].value.map(f64::to_bits)
                    && o.mean > summary[i].mean
            })
            .count();
        summary[i].rank = better + 1;
    }
    summary
}

/// Min-max normalized mean HV over the sweep values of one group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub instance: String,
    pub days: usize,
    pub variant: String,
    pub value: f64,
    pub normalized: f64,
}

/// Normalizes each (instance, days, variant) curve to [0, 1]; a constant
/// curve maps to all zeros.
pub fn sweep_normalized_hv(summary: &[SummaryRow], parameter: SweepParam) -> Result<Vec<CurvePoint>> {
    let name = parameter.to_string();
    let mut groups: Vec<((String, usize, String), Vec<(f64, f64)>)> = Vec::new();
    for row in summary.iter().filter(|r| r.param.as_deref() == Some(name.as_str())) {
        let Some(value) = row.value else { continue };
        let key = (row.instance.clone(), row.days, row.variant.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, points)) => points.push((value, row.mean)),
            None => groups.push((key, vec![(value, row.mean)])),
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid("parameter", format!("no sweep over {name} in the results")));
    }
    let mut out = Vec::new();
    for ((instance, days, variant), mut points) in groups {
        if points.len() < 2 {
            return Err(Error::invalid("sweep.values", "need at least two sweep values"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        for (value, mean) in points {
            let normalized = if hi > lo { (mean - lo) / (hi - lo) } else { 0.0 };
            out.push(CurvePoint { instance: instance.clone(), days, variant: variant.clone(), value, normalized });
        }
    }
    Ok(out)
}

fn write_rows<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `results.csv`, `summary.csv` and `references.json`; with a
/// sweep, also one two-column `curves/<instance>-D<days>-<variant>.dat`
/// per curve.
pub fn write_experiment(dir: &Path, output: &ExperimentOutput, sweep: Option<SweepParam>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(&dir.join("results.csv"), &output.rows)?;
    write_rows(&dir.join("summary.csv"), &output.summary)?;
    let path = dir.join("references.json");
    let text = serde_json::to_string_pretty(&output.references)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    if let Some(param) = sweep {
        let curves = sweep_normalized_hv(&output.summary, param)?;
        let curve_dir = dir.join("curves");
        fs::create_dir_all(&curve_dir).map_err(|e| Error::io(&curve_dir, e))?;
        let mut files: BTreeMap<String, String> = BTreeMap::new();
        for p in &curves {
            let name = format!("{}-D{}-{}.dat", p.instance, p.days, p.variant);
            let body = files.entry(name).or_insert_with(|| format!("# {param} normalized_hv\n"));
            let _ = writeln!(body, "{} {}", p.value, p.normalized);
        }
        for (name, body) in files {
            let path = curve_dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>> {
    let path = dir.join("summary.csv");
    let mut r = csv::Reader::from_path(&path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?;
    Ok(rows)
}

pub fn read_results(dir: &Path) -> Result<Vec<ResultRow>> {
    let path = dir.join("results.csv");
    let mut r = csv::Reader::from_path(&path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// Plain-text aggregate table of an experiment directory.
pub fn report(dir: &Path) -> Result<String> {
    let rows = read_summary(dir)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<24} {:>4} {:<28} {:>8} {:>5} {:>14} {:>12} {:>14} {:>4}",
        "instance", "D", "variant", "value", "runs", "mean_hv", "std", "median", "rank"
    );
    for r in rows {
        let value = r.value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            text,
            "{:<24} {:>4} {:<28} {:>8} {:>5} {:>14.6e} {:>12.4e} {:>14.6e} {:>4}",
            r.instance, r.days, r.variant, value, r.runs, r.mean, r.std, r.median, r.rank
        );
    }
    Ok(text)
}
