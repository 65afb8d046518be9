use std::collections::BTreeMap;

use dgcc_core::harness::{read_results, read_summary, report, write_experiment, InstanceSource, Sweep, SweepParam};
use dgcc_core::{
    generate_instance, load_instance, run_dgcc, run_experiment, save_instance, validate, Error, ExperimentSpec,
    GeneratorSpec, Instance, InstanceF32, RunConfig, RunConfigF32, Variant,
};

fn small_spec(sweep: Option<Sweep>) -> ExperimentSpec {
    let mut base = RunConfig::default();
    base.n = 10;
    base.max_fes = Some(3_000);
    ExperimentSpec {
        instances: vec![InstanceSource::Generate {
            spec: GeneratorSpec { name: Some("tiny".into()), ..GeneratorSpec::uniform(2, 8, 1.5) },
            seed: 3,
        }],
        durations: vec![3],
        repeats: 3,
        variants: vec![Variant::Dgcc, Variant::GlobalNsga2],
        sweep,
        base,
        seed_base: 1,
        reference_samples: 100,
        record_wall_time: false,
    }
}

#[test]
fn instance_file_round_trip() {
    let inst: Instance = generate_instance(&GeneratorSpec::uniform(3, 5, 2.0), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    save_instance(&inst, &path).unwrap();
    let back: Instance = load_instance(&path).unwrap();
    assert_eq!(back.to_json().unwrap(), inst.to_json().unwrap());
    assert_eq!(back.clusters(), inst.clusters());

    std::fs::write(&path, "{\"name\": 1}").unwrap();
    assert!(load_instance::<f64>(&path).is_err());
    assert!(matches!(load_instance::<f64>(dir.path().join("missing.json")), Err(Error::Io { .. })));
}

#[test]
fn run_archive_holds_valid_nondominated_genomes() {
    let inst: Instance = generate_instance(&GeneratorSpec::uniform(3, 10, 1.5), 4).unwrap();
    let mut cfg = RunConfig::with_days(5);
    cfg.n = 12;
    cfg.period = 2;
    cfg.max_fes = Some(6_000);
    let result = run_dgcc(&inst, &cfg).unwrap();
    assert!(result.fes_total <= 6_000);
    let objs = result.archive.objectives();
    for (a, entry) in result.archive.entries().iter().enumerate() {
        validate(&entry.genome, &entry.plan, &inst).unwrap();
        for (b, other) in objs.iter().enumerate() {
            if a != b {
                assert!(!dgcc_core::pareto::dominates(other, &entry.objectives));
            }
        }
    }
    assert_eq!(result.plan.days().iter().sum::<usize>(), 5);
}

#[test]
fn single_precision_runs() {
    let inst: InstanceF32 = generate_instance(&dgcc_core::instance::GeneratorSpec::uniform(2, 6, 1.5f32), 2).unwrap();
    let mut cfg = RunConfigF32::with_days(3);
    cfg.n = 8;
    cfg.max_fes = Some(1_000);
    let result = run_dgcc(&inst, &cfg).unwrap();
    assert!(result.final_hv() > 0.0);
    assert!(result.fes_total <= 1_000);
}

#[test]
fn experiment_files_round_trip_and_summary_matches_rows() {
    let spec = small_spec(None);
    let out = run_experiment(&spec).unwrap();
    assert_eq!(out.rows.len(), 2 * 3);
    let dir = tempfile::tempdir().unwrap();
    write_experiment(dir.path(), &out, None).unwrap();
    let rows = read_results(dir.path()).unwrap();
    let summary = read_summary(dir.path()).unwrap();
    assert_eq!(rows.len(), out.rows.len());

    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.variant.clone()).or_default().push(r.hv);
    }
    for s in &summary {
        let mut hv = groups[&s.variant].clone();
        hv.sort_by(f64::total_cmp);
        let mean = hv.iter().sum::<f64>() / hv.len() as f64;
        let var = hv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (hv.len() - 1) as f64;
        assert_eq!(s.runs, 3);
        assert!((s.mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert!((s.std - var.sqrt()).abs() <= 1e-9 * mean.abs().max(1.0));
        assert_eq!(s.median, hv[1]);
    }
    let text = report(dir.path()).unwrap();
    assert!(text.contains("dgcc") && text.contains("global-nsga2"));

    // same spec, same files
    let again = tempfile::tempdir().unwrap();
    write_experiment(again.path(), &run_experiment(&spec).unwrap(), None).unwrap();
    for file in ["results.csv", "summary.csv", "references.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(file)).unwrap(),
            std::fs::read(again.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn sweep_writes_curves() {
    let spec = small_spec(Some(Sweep { parameter: SweepParam::L, values: vec![1.0, 3.0] }));
    let out = run_experiment(&spec).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 3);
    assert!(out.rows.iter().all(|r| r.param.as_deref() == Some("L")));
    let dir = tempfile::tempdir().unwrap();
    write_experiment(dir.path(), &out, Some(SweepParam::L)).unwrap();
    let curves: Vec<_> = std::fs::read_dir(dir.path().join("curves")).unwrap().collect();
    assert!(!curves.is_empty());
}

#[test]
fn missing_instance_is_reported_not_fatal() {
    let mut spec = small_spec(None);
    spec.instances.push(InstanceSource::Path("/nonexistent/instance.json".into()));
    let out = run_experiment(&spec).unwrap();
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.rows.len(), 6);
}
