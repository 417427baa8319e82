//! End-to-end stages on a coarse configuration.

use std::path::Path;

use hyperinv::config::RunConfig;
use hyperinv::io::{file_sha256, load_field, Dataset, Manifest};
use hyperinv::pipeline::*;
use hyperinv::Error;

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    for s in [
        "grid.cells=16",
        "basis.modes=4",
        "basis.intervals=64",
        "run.max_iterations=3",
        "solver.epsilon=1e-4",
    ] {
        c.set(s).unwrap();
    }
    c
}

fn hashes(dir: &Path) -> Manifest {
    let m = Manifest::load(dir).unwrap();
    for (name, hash) in &m.outputs {
        assert_eq!(&file_sha256(&dir.join(name)).unwrap(), hash, "{name}");
    }
    m
}

#[test]
fn pipeline_writes_every_artifact_and_is_reproducible() {
    let config = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let runs = stage_pipeline(&config, a.path()).unwrap();
    stage_pipeline(&config, b.path()).unwrap();
    assert_eq!(runs.len(), 1);
    let run = &runs[0];
    let history = run.history.as_ref().unwrap();
    assert_eq!(history.records.len(), 4);
    assert!(run.metrics.as_ref().unwrap().relative_l2.is_finite());

    let ma = hashes(a.path());
    let mb = hashes(b.path());
    assert!(ma.complete);
    assert_eq!(ma.config.as_ref(), Some(&config));
    for name in [
        DATASET_FILE,
        "dataset_series.csv",
        "dataset_projected.csv",
        "c_true.bin",
        "c_true.csv",
        HISTORY_FILE,
        SOLVER_FILE,
        FIELD_FILE,
        "c_comp.bin",
        "c_comp.csv",
        "c_comp_clipped.bin",
        "c_comp_clipped.csv",
        METRICS_FILE,
    ] {
        assert!(ma.outputs.contains_key(name), "{name} missing");
        if !matches!(name, HISTORY_FILE) {
            assert_eq!(ma.outputs[name], mb.outputs[name], "{name} differs between runs");
        }
    }
    let header = |name: &str| {
        std::fs::read_to_string(a.path().join(name))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(header(HISTORY_FILE), "k [1],J [1],iterate_diff [1],seconds [s]");
    assert_eq!(header("c_comp.csv"), "x1 [1],x2 [1],value [1]");
    assert!(header(METRICS_FILE).starts_with("relative_l2 [1],support_score [1]"));
    assert!(header(SOLVER_FILE).starts_with("k [1],unknowns [count]"));
}

#[test]
fn separate_stages_match_the_pipeline() {
    let config = small();
    let whole = tempfile::tempdir().unwrap();
    stage_pipeline(&config, whole.path()).unwrap();

    let sim = tempfile::tempdir().unwrap();
    stage_simulate(&config, sim.path()).unwrap();
    let inv = tempfile::tempdir().unwrap();
    let history = stage_invert(&config, &sim.path().join(DATASET_FILE), inv.path()).unwrap();
    let rec = tempfile::tempdir().unwrap();
    stage_reconstruct(&config, &inv.path().join(FIELD_FILE), rec.path()).unwrap();
    let sc = tempfile::tempdir().unwrap();
    let metrics = stage_score(&rec.path().join("c_comp.csv"), &sim.path().join("c_true.bin"), sc.path()).unwrap();

    let same = |a: &Path, b: &Path| assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{a:?}");
    same(&whole.path().join(DATASET_FILE), &sim.path().join(DATASET_FILE));
    same(&whole.path().join(FIELD_FILE), &inv.path().join(FIELD_FILE));
    same(&whole.path().join("c_comp.csv"), &rec.path().join("c_comp.csv"));
    same(&whole.path().join(METRICS_FILE), &sc.path().join(METRICS_FILE));
    assert_eq!(load_field(&inv.path().join(FIELD_FILE)).unwrap(), history.final_field);
    assert!(metrics.relative_l2 > 0.0);
    for dir in [sim.path(), inv.path(), rec.path(), sc.path()] {
        assert!(hashes(dir).complete);
    }
    let inputs = Manifest::load(inv.path()).unwrap().inputs;
    assert_eq!(inputs.values().next().unwrap(), &file_sha256(&sim.path().join(DATASET_FILE)).unwrap());
}

#[test]
fn dataset_noise_matches_the_configured_level() {
    let mut config = small();
    let basis = build_basis_for(&config).unwrap();
    let kind = config.phantoms().unwrap().remove(0);
    let noisy = simulate(&config, &basis, &kind).unwrap();
    config.set("noise.level=0").unwrap();
    let clean = simulate(&config, &basis, &kind).unwrap();
    assert_eq!(clean.dataset.vectors, clean.clean);
    let d = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let diff: f64 = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum();
        let norm: f64 = b.iter().flatten().map(|x| x * x).sum();
        (diff / norm).sqrt()
    };
    assert!((d(&noisy.dataset.series.dirichlet, &clean.dataset.series.dirichlet) - 0.05).abs() < 1e-12);
    assert!((d(&noisy.dataset.series.neumann, &clean.dataset.series.neumann) - 0.05).abs() < 1e-12);
}

#[test]
fn invalid_configuration_writes_nothing() {
    let mut config = small();
    config.set("carleman.lambda=0.5").unwrap();
    config.set("basis.intervals=16").unwrap();
    let out = tempfile::tempdir().unwrap();
    let target = out.path().join("run");
    let Err(Error::Config(text)) = stage_pipeline(&config, &target) else { panic!("expected a config error") };
    assert!(text.contains("carleman") && text.contains("cfl"), "{text}");
    assert!(!target.exists());
}

#[test]
fn mismatched_dataset_is_rejected() {
    let config = small();
    let sim = tempfile::tempdir().unwrap();
    stage_simulate(&config, sim.path()).unwrap();
    let mut other = config.clone();
    other.set("basis.modes=3").unwrap();
    let out = tempfile::tempdir().unwrap();
    let err = stage_invert(&other, &sim.path().join(DATASET_FILE), out.path()).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_)));
    assert!(!Manifest::load(out.path()).unwrap().complete);
    let d = Dataset::load(&sim.path().join(DATASET_FILE)).unwrap();
    assert_eq!(d.modes(), 4);
}

#[test]
fn multiple_phantoms_get_their_own_directories() {
    let mut config = small();
    config.set("forward.phantoms=[\"two_disks\", \"kite\"]").unwrap();
    config.set("run.max_iterations=1").unwrap();
    let out = tempfile::tempdir().unwrap();
    let runs = stage_pipeline(&config, out.path()).unwrap();
    assert_eq!(runs.len(), 2);
    for tag in ["two_disks", "kite"] {
        assert!(hashes(&out.path().join(tag)).complete);
    }
}

#[test]
fn carleman_diagnostic_stage() {
    let config = small();
    let out = tempfile::tempdir().unwrap();
    let rows = stage_diagnose(&config, &[2.0, 4.0], 5, out.path()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.min_ratio > 0.0 && r.trials == 5));
    let text = std::fs::read_to_string(out.path().join(CARLEMAN_FILE)).unwrap();
    assert_eq!(text.lines().count(), 3);
}
