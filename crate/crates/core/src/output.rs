//! Writing run artifacts: chain CSVs, JSON summaries and SVG plots.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{AimsError, Result};
use crate::experiments::{AimsRun, EnsembleReport, Predictive, RunSummary};
use crate::plot::Chart;
use crate::schedule::AnnealingSchedule;

/// Artifact kinds selectable with `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = AimsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(AimsError::InvalidConfig(format!("unknown output format `{other}`"))),
        }
    }
}

/// Parse a comma-separated format list such as `csv,json`.
pub fn parse_formats(list: &str) -> Result<BTreeSet<Format>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// One row per state: `level,step,x1..xd,log_target`, levels `0..=m`.
pub fn chain_csv(run: &AimsRun) -> String {
    let d = run.chains.first().and_then(|c| c.states.first()).map_or(0, |s| s.dim());
    let mut s = String::from("level,step");
    for a in 1..=d {
        let _ = write!(s, ",x{a}");
    }
    s.push_str(",log_target\n");
    for chain in &run.chains {
        for (step, (x, lt)) in chain.states.iter().zip(&chain.log_target_values).enumerate() {
            let _ = write!(s, "{},{}", chain.level, step);
            for v in x.iter() {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{lt}");
        }
    }
    s
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write(path: &Path, contents: &str) -> Result<PathBuf> {
    fs::write(path, contents).map_err(|e| AimsError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// `(level, beta)` pairs of a schedule.
pub fn schedule_points(schedule: &AnnealingSchedule) -> Vec<(f64, f64)> {
    schedule.levels.iter().map(|l| (l.level as f64, l.beta)).collect()
}

pub fn schedule_svg(schedule: &AnnealingSchedule) -> String {
    let pts = schedule_points(schedule);
    Chart::new(
        "annealing schedule",
        "level j",
        "beta_j",
        (0.0, schedule.m() as f64),
        (0.0, 1.0),
    )
    .line(pts.clone(), "steelblue")
    .points(pts, "steelblue", 3.0)
    .to_svg()
}

/// First two coordinates of every level, one panel per level.
pub fn scatter_svgs(run: &AimsRun) -> Vec<(usize, String)> {
    run.chains
        .iter()
        .filter(|c| c.states.first().is_some_and(|s| s.dim() >= 2))
        .map(|c| {
            let xy: Vec<(f64, f64)> = c.states.iter().map(|s| (s[0], s[1])).collect();
            let title = format!("level {}  beta = {:.4}", c.level, c.beta);
            (c.level, Chart::fitted(&title, "theta_1", "theta_2", &xy).points(xy, "black", 1.2).to_svg())
        })
        .collect()
}

/// First coordinate along the final chain.
pub fn trace_svg(run: &AimsRun) -> String {
    let c = run.final_chain();
    let xy: Vec<(f64, f64)> = c.states.iter().enumerate().map(|(i, s)| (i as f64, s[0])).collect();
    Chart::fitted("final level trace", "step", "theta_1", &xy)
        .line(xy, "darkred")
        .to_svg()
}

pub fn predictive_svg(p: &Predictive, data: &[(f64, f64)]) -> String {
    let zip = |y: &[f64]| p.x.iter().cloned().zip(y.iter().cloned()).collect::<Vec<_>>();
    let mut all = zip(&p.p05);
    all.extend(zip(&p.p95));
    all.extend(data.iter().cloned());
    Chart::fitted("posterior predictive", "x", "y", &all)
        .band(zip(&p.p05), zip(&p.p95), "steelblue")
        .line(zip(&p.mean), "steelblue")
        .dashed_line(zip(&p.truth), "black")
        .points(data.to_vec(), "black", 1.5)
        .to_svg()
}

/// Write the artifacts of an ensemble into `dir`. Returns the written paths.
pub fn emit_outputs(
    dir: &Path,
    report: &EnsembleReport,
    runs: &[AimsRun],
    formats: &BTreeSet<Format>,
    regression_data: Option<&[(f64, f64)]>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| AimsError::io(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        written.push(write(&dir.join("ensemble.json"), &to_json(report)?)?);
        for s in &report.per_run {
            written.push(write(&dir.join(format!("run_{:03}.json", s.run)), &to_json(s)?)?);
        }
    }
    if formats.contains(&Format::Csv) {
        for r in runs {
            written.push(write(&dir.join(format!("run_{:03}_chain.csv", r.run_index)), &chain_csv(r))?);
        }
    }
    if formats.contains(&Format::Svg) {
        if let Some(r) = runs.first() {
            let p = format!("run_{:03}", r.run_index);
            written.push(write(&dir.join(format!("{p}_schedule.svg")), &schedule_svg(&r.schedule))?);
            written.push(write(&dir.join(format!("{p}_trace.svg")), &trace_svg(r))?);
            for (level, svg) in scatter_svgs(r) {
                written.push(write(&dir.join(format!("{p}_level{level}_scatter.svg")), &svg)?);
            }
            let summary: Option<&RunSummary> = report.per_run.first();
            if let (Some(pred), Some(data)) = (summary.and_then(|s| s.predictive.as_ref()), regression_data) {
                written.push(write(&dir.join(format!("{p}_predictive.svg")), &predictive_svg(pred, data))?);
            }
        }
    }
    Ok(written)
}

/// Write any serializable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| AimsError::io(parent, e))?;
    }
    write(path, &to_json(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_parse() {
        let f = parse_formats("csv, json,svg").unwrap();
        assert_eq!(f.len(), 3);
        assert!(parse_formats("csv,png").is_err());
        assert!(parse_formats("").unwrap().is_empty());
    }
}
