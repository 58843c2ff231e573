use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use aims::experiments::{run_ensemble, EnsembleReport, RunConfig};
use aims::model::{ModelSpec, ParamVector, Support, TargetModel};
use aims::output::{emit_outputs, schedule_points, schedule_svg, Format};
use aims::rwmh::{run_rwmh, RwmhConfig};
use aims::AimsError;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn all_formats() -> BTreeSet<Format> {
    [Format::Csv, Format::Json, Format::Svg].into_iter().collect()
}

fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        runs: 3,
        ..RunConfig::new(ModelSpec::Mixture2d, 300, 0.5, 0.2, seed)
    }
}

fn read_without_timestamp(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("created_at");
    v
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = small_config(99);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let ens = run_ensemble(&cfg).unwrap();
        emit_outputs(dir, &ens.report, &ens.runs, &all_formats(), None).unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 5);
    for name in names {
        let (pa, pb) = (a.path().join(&name), b.path().join(&name));
        if name == "ensemble.json" {
            assert_eq!(read_without_timestamp(&pa), read_without_timestamp(&pb));
        } else {
            assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn different_seeds_differ() {
    let a = run_ensemble(&small_config(1)).unwrap();
    let b = run_ensemble(&small_config(2)).unwrap();
    assert_ne!(a.runs[0].final_chain().states, b.runs[0].final_chain().states);
}

#[test]
fn run_k_is_reproducible_in_isolation() {
    let cfg = small_config(5);
    let ens = run_ensemble(&cfg).unwrap();
    let model = cfg.build_model();
    let alone = aims::experiments::run_full_aims(&model, &cfg, 2).unwrap();
    assert_eq!(alone.final_chain().states, ens.runs[2].final_chain().states);
}

#[test]
fn csv_has_one_row_per_state() {
    let cfg = small_config(3);
    let ens = run_ensemble(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(dir.path(), &ens.report, &ens.runs, &[Format::Csv].into(), None).unwrap();
    for run in &ens.runs {
        let text = fs::read_to_string(dir.path().join(format!("run_{:03}_chain.csv", run.run_index))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "level,step,x1,x2,log_target");
        let rows: Vec<&str> = lines.collect();
        let expected: usize = (0..=run.m()).map(|j| cfg.n.at(j)).sum();
        assert_eq!(rows.len(), expected);
        assert!(rows.iter().all(|r| r.split(',').count() == 5));
    }
}

#[test]
fn report_round_trips_and_honors_run_count() {
    let cfg = small_config(8);
    let ens = run_ensemble(&cfg).unwrap();
    assert_eq!(ens.report.per_run.len(), cfg.runs);
    assert_eq!(ens.report.runs, cfg.runs);
    let text = serde_json::to_string(&ens.report).unwrap();
    let back: EnsembleReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, ens.report);
    for s in &ens.report.per_run {
        assert!(s.schedule.is_valid());
    }
}

#[test]
fn schedule_plot_structure() {
    let cfg = small_config(4);
    let ens = run_ensemble(&cfg).unwrap();
    let sched = &ens.runs[0].schedule;
    let pts = schedule_points(sched);
    assert_eq!(pts.len(), sched.m() + 1);
    assert_eq!(pts.first().unwrap().0, 0.0);
    assert_eq!(pts.last().unwrap().0, sched.m() as f64);
    assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.1)));
    assert!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));

    let svg = schedule_svg(sched);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), sched.m() + 1);
    // Larger beta is drawn higher up, i.e. with smaller pixel y.
    let poly = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: Vec<f64> = poly
        .split_whitespace()
        .map(|xy| xy.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(ys.windows(2).all(|w| w[1] < w[0]));
    let xticks: Vec<&str> = svg
        .lines()
        .filter(|l| l.contains("class=\"xtick\""))
        .map(|l| l.split('>').nth(1).unwrap().trim_end_matches("</text"))
        .collect();
    assert_eq!(xticks.first(), Some(&"0"));
    assert_eq!(xticks.last().map(|s| s.parse::<f64>().unwrap()), Some(sched.m() as f64));
}

#[test]
fn svg_files_written_for_first_run() {
    let cfg = small_config(6);
    let ens = run_ensemble(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(dir.path(), &ens.report, &ens.runs, &[Format::Svg].into(), None).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"run_000_schedule.svg".to_string()));
    assert!(names.contains(&"run_000_trace.svg".to_string()));
    let scatters = names.iter().filter(|n| n.contains("_scatter")).count();
    assert_eq!(scatters, ens.runs[0].m() + 1);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let cfg = small_config(6);
    let ens = run_ensemble(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = emit_outputs(&blocker.join("sub"), &ens.report, &ens.runs, &all_formats(), None).unwrap_err();
    assert!(matches!(err, AimsError::Io { .. }));
}

#[test]
fn shipped_configs_load_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap();
            let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg, "{}", path.display());
            count += 1;
        }
    }
    assert!(count >= 8);
}

/// Likelihood that is zero everywhere.
struct Hopeless;

impl TargetModel for Hopeless {
    fn dim(&self) -> usize {
        1
    }
    fn support(&self) -> &Support {
        &Support::Unbounded
    }
    fn log_prior(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn log_likelihood(&self, _: &[f64]) -> f64 {
        f64::NEG_INFINITY
    }
    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector {
        ParamVector::from(vec![rng.next_u32() as f64])
    }
    fn describe(&self) -> Value {
        Value::Null
    }
}

#[test]
fn rwmh_screening_fails_without_finite_likelihood() {
    let cfg = RwmhConfig { n0: 20, n: 10, scale: 1.0, burn_in: 0 };
    let err = run_rwmh(&mut ChaCha8Rng::seed_from_u64(0), &Hopeless, &cfg).unwrap_err();
    assert!(matches!(err, AimsError::ScreeningFailed(20)));
}
