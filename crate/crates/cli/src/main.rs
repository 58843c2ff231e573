use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aims::experiments::{
    bimodal_config, ffnn_config, mixture_config, run_ensemble, sweep_scale, Ensemble, RunConfig,
    BIMODAL_REFERENCE, DEFAULT_SEED,
};
use aims::model::Model;
use aims::output::{emit_outputs, parse_formats, write_json, Format};
use aims::{AimsError, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "aims", version, about = "Annealed independent Markov sampling of Bayesian posteriors")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of independent runs (overrides the config).
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated artifact kinds: csv, json, svg.
    #[arg(long, global = true, default_value = "csv,json,svg")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config once.
    Run { config: PathBuf },
    /// Run a config as an ensemble of independent runs.
    Ensemble { config: PathBuf },
    /// Reproduce a benchmark: 4.1 (mixture), 4.2 (bimodal table) or 4.3 (network).
    Repro {
        experiment: String,
        /// Bimodal case index 0-5 (default: all).
        #[arg(long)]
        case: Option<usize>,
    },
    /// Ensembles over a list of proposal scales, e.g. `c=0.1,0.2,0.4`.
    Sweep { config: PathBuf, scales: String },
}

fn apply_overrides(mut cfg: RunConfig, cli: &Cli) -> Result<RunConfig> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.runs {
        cfg.runs = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig, fallback: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn regression_data(cfg: &RunConfig) -> Option<Vec<(f64, f64)>> {
    match cfg.build_model() {
        Model::Ffnn(f) => Some(f.data),
        _ => None,
    }
}

fn run_and_emit(cfg: &RunConfig, dir: &Path, formats: &BTreeSet<Format>) -> Result<Ensemble> {
    let ens = run_ensemble(cfg)?;
    let data = regression_data(cfg);
    let files = emit_outputs(dir, &ens.report, &ens.runs, formats, data.as_deref())?;
    eprintln!(
        "{}",
        json!({"status": "ok", "model": ens.report.model, "runs": ens.report.runs, "files": files.len(), "out": dir})
    );
    Ok(ens)
}

fn print_estimators(ens: &Ensemble) {
    let r = &ens.report;
    println!(
        "{}: runs {}  m mean {:.2} (min {}, max {})",
        r.model, r.runs, r.schedule_stats.m_mean, r.schedule_stats.m_min, r.schedule_stats.m_max
    );
    for (k, s) in &r.estimators {
        match s.truth {
            Some(t) => println!("  {k:<16} mean {:.5}  cov {:.2}%  truth {t:.5}", s.mean, 100.0 * s.cov),
            None => println!("  {k:<16} mean {:.5}  cov {:.2}%", s.mean, 100.0 * s.cov),
        }
    }
}

fn repro(cli: &Cli, experiment: &str, case: Option<usize>, formats: &BTreeSet<Format>) -> Result<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match experiment {
        "4.1" => {
            let cfg = apply_overrides(mixture_config(seed, 50), cli)?;
            let ens = run_and_emit(&cfg, &base.join("mixture2d"), formats)?;
            print_estimators(&ens);
            let runs = &ens.report.per_run;
            let beaten = runs
                .iter()
                .filter_map(|r| r.mixture.as_ref())
                .filter(|m| m.rwmh_modes_visited.is_some_and(|v| v < m.modes_visited))
                .count();
            println!("  AIMS visits more modes than RWMH in {beaten}/{} runs", runs.len());
        }
        "4.2" => {
            let cases: Vec<usize> = match case {
                Some(c) if c < BIMODAL_REFERENCE.len() => vec![c],
                Some(c) => return Err(AimsError::InvalidConfig(format!("no bimodal case {c}"))),
                None => (0..BIMODAL_REFERENCE.len()).collect(),
            };
            let mut table = Vec::new();
            for c in cases {
                let r = BIMODAL_REFERENCE[c];
                let cfg = apply_overrides(bimodal_config(c, seed, 50), cli)?;
                let dir = base.join(format!("bimodal_d{}_n{}", r.dim, r.n));
                let ens = run_and_emit(&cfg, &dir, formats)?;
                print_estimators(&ens);
                let s = &ens.report.estimators["max_component"];
                println!(
                    "  reference h {:.2} ({:.1}%), m {:.2}",
                    r.h_bar,
                    100.0 * r.cov,
                    r.m_bar
                );
                table.push(json!({
                    "dim": r.dim, "n": r.n, "scale": r.scale,
                    "oracle": s.truth, "mean": s.mean, "cov": s.cov, "m_mean": ens.report.schedule_stats.m_mean,
                    "reference": r,
                }));
            }
            if formats.contains(&Format::Json) {
                write_json(&base.join("bimodal_table.json"), &table)?;
            }
        }
        "4.3" => {
            let cfg = apply_overrides(ffnn_config(seed, 1), cli)?;
            let ens = run_and_emit(&cfg, &base.join("ffnn"), formats)?;
            print_estimators(&ens);
        }
        other => {
            return Err(AimsError::InvalidConfig(format!(
                "unknown experiment `{other}`; expected 4.1, 4.2 or 4.3"
            )))
        }
    }
    Ok(())
}

fn parse_scales(arg: &str) -> Result<Vec<f64>> {
    let list = arg.strip_prefix("c=").unwrap_or(arg);
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| AimsError::InvalidConfig(format!("bad scale `{s}`")))
        })
        .collect()
}

fn execute(cli: &Cli) -> Result<()> {
    let formats = parse_formats(&cli.format)?;
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = apply_overrides(RunConfig::load(config)?, cli)?;
            cfg.runs = 1;
            let dir = out_dir(cli, &cfg, "out/run");
            print_estimators(&run_and_emit(&cfg, &dir, &formats)?);
        }
        Command::Ensemble { config } => {
            let cfg = apply_overrides(RunConfig::load(config)?, cli)?;
            let dir = out_dir(cli, &cfg, "out/ensemble");
            print_estimators(&run_and_emit(&cfg, &dir, &formats)?);
        }
        Command::Repro { experiment, case } => repro(cli, experiment, *case, &formats)?,
        Command::Sweep { config, scales } => {
            let cfg = apply_overrides(RunConfig::load(config)?, cli)?;
            let scales = parse_scales(scales)?;
            let report = sweep_scale(&cfg, &scales)?;
            let dir = out_dir(cli, &cfg, "out/sweep");
            let path = write_json(&dir.join("sweep.json"), &report)?;
            for p in &report.points {
                let covs: Vec<String> = p
                    .estimators
                    .iter()
                    .map(|(k, s)| format!("{k} cov {:.2}%", 100.0 * s.cov))
                    .collect();
                println!("c = {:<6} m {:.2}  {}", p.scale, p.m_mean, covs.join("  "));
            }
            eprintln!("{}", json!({"status": "ok", "out": path}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"status": "error", "kind": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
