use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use moltk::bench::config::{ExperimentConfig, ExperimentId, WeightSpec};
use moltk::bench::generators::sphere;
use moltk::bench::output::{read_rows_csv, write_outputs};
use moltk::bench::rate::{fit_rates, GroupCol};
use moltk::bench::run_experiment;
use moltk::complexity::{critical_radius, rademacher_estimate, TaskNorm};
use moltk::hypclass::{Ball, FeatureMap, FiniteClass, GridLipschitzClass, LinearClass, Link};
use moltk::rng::StreamRng;
use moltk::{Execution, HypothesisClass};
use rand::Rng;

#[derive(Parser)]
#[command(name = "moltk", version, about = "Multi-objective learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, timings.csv, meta.json and excess.svg.
    Run {
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed_base: Option<u64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Uniform weight grid with this many points per axis.
        #[arg(long)]
        weights: Option<usize>,
        #[arg(long)]
        zero_one_labels: bool,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        sequential: bool,
    },
    /// Fit log-log rates of median excess from a results CSV.
    Rate {
        csv: PathBuf,
        #[arg(long, default_value = "n")]
        group_col: String,
    },
    /// Monte-Carlo Rademacher complexity of a class.
    ///
    /// Class specs: `l2:d=2,r=1`, `l1:d=2,r=1`, `poly:d=2,deg=3,r=1`,
    /// `grid:m=33,L=1`, `binary:m=8`.
    Complexity {
        class_spec: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also estimate the critical radius (l2 classes, sphere covariates).
        #[arg(long)]
        critical: bool,
    },
}

fn kv(spec: &str) -> Result<(String, Vec<(String, f64)>)> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut pairs = Vec::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').with_context(|| format!("expected key=value, got `{part}`"))?;
        pairs.push((k.trim().to_string(), v.trim().parse::<f64>().with_context(|| format!("bad number in `{part}`"))?));
    }
    Ok((name.to_string(), pairs))
}

fn get(pairs: &[(String, f64)], key: &str, default: Option<f64>) -> Result<f64> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| *v).or(default).with_context(|| format!("missing `{key}`"))
}

type BoxSampler = Box<dyn Fn(&mut StreamRng) -> Vec<f64> + Sync>;

fn parse_class(spec: &str) -> Result<(HypothesisClass, BoxSampler)> {
    let (name, p) = kv(spec)?;
    Ok(match name.as_str() {
        "l2" | "l1" => {
            let d = get(&p, "d", None)? as usize;
            let ball = if name == "l2" { Ball::L2 } else { Ball::L1 };
            let class = LinearClass::new(d, FeatureMap::Identity, ball, get(&p, "r", Some(1.0))?, Link::Identity);
            (HypothesisClass::Linear(class), Box::new(move |rng| sphere(d, rng)))
        }
        "poly" => {
            let d = get(&p, "d", None)? as usize;
            let degree = get(&p, "deg", None)? as u32;
            let class = LinearClass::new(d, FeatureMap::Polynomial { degree }, Ball::L2, get(&p, "r", Some(1.0))?, Link::Identity);
            (HypothesisClass::Linear(class), Box::new(move |rng| sphere(d, rng)))
        }
        "grid" => {
            let m = get(&p, "m", None)? as usize;
            let l = p.iter().find(|(k, _)| k == "L").map(|(_, v)| *v);
            (HypothesisClass::Grid(GridLipschitzClass::new(m, l)), Box::new(|rng| vec![rng.random::<f64>()]))
        }
        "binary" => {
            let m = get(&p, "m", None)? as usize;
            if m < 2 {
                bail!("need m >= 2");
            }
            let dom: Vec<Vec<f64>> = (0..m).map(|j| vec![j as f64 / (m - 1) as f64]).collect();
            let pts = dom.clone();
            (HypothesisClass::Finite(FiniteClass::binary(dom)?), Box::new(move |rng| pts[rng.random_range(0..pts.len())].clone()))
        }
        other => bail!("unknown class `{other}`"),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { experiment, config, seed_base, seeds, out, weights, zero_one_labels, workers, sequential } => {
            let id = ExperimentId::parse(&experiment)?;
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
                None => ExperimentConfig::default_for(id),
            };
            if cfg.experiment != id {
                bail!("config describes `{}`, not `{experiment}`", cfg.experiment.name());
            }
            if let Some(s) = seed_base {
                cfg.seed_base = s;
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(m) = weights {
                cfg.weights = WeightSpec::Grid(m);
            }
            if zero_one_labels {
                cfg.zero_one_labels = true;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if sequential {
                cfg.execution = Execution::Sequential;
            }
            let dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from(format!("out/{experiment}")));
            let result = run_experiment(&cfg)?;
            write_outputs(&dir, &cfg, &result.references, &result.rows)?;
            let failed = result.rows.iter().filter(|r| r.status != "ok").count();
            println!("{} rows ({failed} failed) written to {}", result.rows.len(), dir.display());
        }
        Command::Rate { csv, group_col } => {
            let col = GroupCol::parse(&group_col)?;
            let rows = read_rows_csv(&std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?)?;
            let fits = fit_rates(&rows, col);
            let mut failures = 0;
            println!("method,scalarization,weights,slope,std_error,groups");
            for ((m, s, w), fit) in fits {
                match fit {
                    Ok(f) => println!("{m},{s},{w},{:.6},{:.6},{}", f.slope, f.std_error, f.medians.len()),
                    Err(e) => {
                        failures += 1;
                        eprintln!("{m},{s},{w}: {e}");
                    }
                }
            }
            if failures > 0 {
                bail!("{failures} series could not be fitted");
            }
        }
        Command::Complexity { class_spec, n, draws, seed, critical } => {
            let (class, sampler) = parse_class(&class_spec)?;
            let est = rademacher_estimate(&class, n, &*sampler, draws, seed, Execution::default())?;
            println!("{}", serde_json::to_string_pretty(&est)?);
            if critical {
                let HypothesisClass::Linear(lc) = &class else { bail!("critical radius needs a linear class") };
                let d = lc.feature_dim();
                let moment = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 / d as f64 } else { 0.0 }).collect()).collect();
                let center = class.model(vec![0.0; d]);
                let cr = critical_radius(
                    &class,
                    &center,
                    &TaskNorm::SecondMoment(moment),
                    n,
                    &*sampler,
                    draws,
                    seed,
                    2.0 * lc.radius,
                    Execution::default(),
                )?;
                println!("critical radius {:.6e}", cr.r_star);
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
