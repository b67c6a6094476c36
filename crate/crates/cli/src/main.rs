use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rumor_core::bounds::{
    bound_cor2, bound_prop2, bound_theorem1, bound_theorem1_opt, bound_theorem2, required_k, required_l,
};
use rumor_core::confidence::{confset_glued, confset_phi, confset_psi};
use rumor_core::diffusion::{simulate, SimConfig, SourcePlacement};
use rumor_core::estimators::score_all;
use rumor_core::harness::{
    emit, load_campaign, prop1_experiment, prop2_experiment, run_campaign, to_csv, workers_from_env,
    CampaignResult,
};
use rumor_core::tree::InfectionTree;
use rumor_core::urn::{
    coupled_dominance_check, dirichlet_moment_check, path_fraction_check, product_tail_check, sample_limits,
    LimitCheckReport,
};

#[derive(Parser)]
#[command(name = "rumor", version, about = "Rumor-source detection on regular trees")]
struct Cli {
    /// Worker threads for Monte Carlo work. The RUMOR_SOURCE_WORKERS
    /// environment variable takes precedence when set.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow one infection tree and write it as JSON.
    Simulate {
        #[arg(long, value_enum, default_value_t = Kind::Regular)]
        kind: Kind,
        #[arg(long)]
        d: u32,
        /// Degree of the large half (glued only).
        #[arg(long = "D")]
        big_d: Option<u32>,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Host distance of the source from the small-side bridge end (glued only).
        #[arg(long, default_value_t = 1)]
        source_dist: u32,
        /// Put the source next to the large-side bridge end instead (glued only).
        #[arg(long)]
        source_large: bool,
        /// Track a host path of this length from the source (regular only).
        #[arg(long)]
        probe: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every vertex of a tree: id,log_phi,log_R,psi,dist_to_source.
    Estimate {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a theoretical bound or threshold as JSON.
    Bound {
        #[arg(long, value_enum)]
        formula: FormulaArg,
        #[arg(long)]
        d: u32,
        #[arg(long = "D")]
        big_d: Option<u32>,
        #[arg(long = "K")]
        k: Option<u32>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long = "L")]
        radius: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Build a confidence set for the source of a tree.
    Confset {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_enum)]
        method: SetArg,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        radius: Option<u32>,
    },
    /// Monte Carlo checks of the urn limit laws.
    Urncheck {
        #[arg(long, value_enum)]
        test: UrnTest,
        #[arg(long, default_value_t = 3)]
        d: u32,
        /// Tree size (dirichlet, pathbeta) or number of urn steps (dominance).
        #[arg(long, default_value_t = 100_000)]
        n: u32,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of first vertices whose subtrees are tracked (dirichlet).
        #[arg(long = "K", default_value_t = 2)]
        k: u32,
        /// Probe path length (pathbeta).
        #[arg(long, default_value_t = 2)]
        ell: u32,
        /// Absolute tolerance (pathbeta) or standard-error multiple (dirichlet).
        #[arg(long)]
        tolerance: Option<f64>,
        /// Grid of s values (tail).
        #[arg(long, value_delimiter = ',', default_value = "1e-6,1e-4,1e-2,1e-1")]
        s: Vec<f64>,
        /// CSV of the raw per-trial statistic.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a campaign described by a JSON config.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bridge-end events on the glued host across checkpoints.
    Prop1 {
        #[arg(long)]
        d: u32,
        #[arg(long = "D")]
        big_d: u32,
        #[arg(long)]
        trials: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Failure rate of the split confidence set on the glued host.
    Prop2 {
        #[arg(long)]
        d: u32,
        #[arg(long = "D")]
        big_d: u32,
        #[arg(long)]
        n: u32,
        #[arg(long = "L")]
        radius: u32,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Regular,
    Glued,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulaArg {
    T1,
    T1opt,
    T2,
    Cor2,
    Prop2,
    #[value(name = "reqK")]
    ReqK,
    #[value(name = "reqL")]
    ReqL,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Psi,
    Phi,
    Glued,
}

#[derive(Clone, Copy, ValueEnum)]
enum UrnTest {
    Dirichlet,
    Pathbeta,
    Dominance,
    Tail,
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("--{flag} is required here"))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_tree(path: &Path) -> Result<InfectionTree> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(InfectionTree::from_json(&text)?)
}

fn scores_csv(tree: &InfectionTree) -> Result<String> {
    let table = score_all(tree);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "log_phi", "log_R", "psi", "dist_to_source"])?;
    for u in table.labels() {
        w.write_record([
            u.to_string(),
            table.log_phi(u).to_string(),
            table.log_r(u).to_string(),
            table.psi(u).to_string(),
            tree.depth(u).to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn bound_json(formula: FormulaArg, args: BoundArgs) -> Result<String> {
    let BoundArgs { d, big_d, k, eta, ell, radius, eps } = args;
    let json = match formula {
        FormulaArg::T1 => serde_json::to_string_pretty(&bound_theorem1(d, need(k, "K")?, need(eta, "eta")?)?)?,
        FormulaArg::T1opt => serde_json::to_string_pretty(&bound_theorem1_opt(d, need(k, "K")?)?.1)?,
        FormulaArg::T2 => serde_json::to_string_pretty(&bound_theorem2(d, need(ell, "ell")?)?)?,
        FormulaArg::Cor2 => serde_json::to_string_pretty(&bound_cor2(d, need(radius, "L")?)?)?,
        FormulaArg::Prop2 => serde_json::to_string_pretty(&bound_prop2(d, need(big_d, "D")?, need(radius, "L")?)?)?,
        FormulaArg::ReqK => serde_json::to_string_pretty(&required_k(d, need(eps, "eps")?)?)?,
        FormulaArg::ReqL => serde_json::to_string_pretty(&required_l(d, need(eps, "eps")?)?)?,
    };
    Ok(json)
}

struct BoundArgs {
    d: u32,
    big_d: Option<u32>,
    k: Option<u32>,
    eta: Option<f64>,
    ell: Option<u32>,
    radius: Option<u32>,
    eps: Option<f64>,
}

fn samples_csv(report: &LimitCheckReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "value"])?;
    for (i, x) in report.samples.iter().enumerate() {
        w.write_record([i.to_string(), x.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn urn_report(test: UrnTest, a: &UrnArgs) -> Result<LimitCheckReport> {
    Ok(match test {
        UrnTest::Dirichlet => {
            let samples = sample_limits(a.d, a.n, a.k, 0, a.trials, a.seed)?;
            dirichlet_moment_check(&samples, a.tolerance.unwrap_or(3.0))
        }
        UrnTest::Pathbeta => {
            let samples = sample_limits(a.d, a.n, 1, a.ell, a.trials, a.seed)?;
            path_fraction_check(&samples, a.d, a.tolerance.unwrap_or(0.01))
        }
        UrnTest::Dominance => coupled_dominance_check(a.d, a.n, a.trials, a.seed)?,
        UrnTest::Tail => product_tail_check(a.d, a.trials, &a.s, a.seed)?,
    })
}

struct UrnArgs {
    d: u32,
    n: u32,
    trials: u64,
    seed: u64,
    k: u32,
    ell: u32,
    tolerance: Option<f64>,
    s: Vec<f64>,
}

fn finish_campaign(result: &CampaignResult, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        let (csv, json) = emit(result, dir)?;
        eprintln!("wrote {} and {}", csv.display(), json.display());
    }
    print!("{}", to_csv(result));
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let workers = workers_from_env(
        cli.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    );
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;

    match cli.command {
        Command::Simulate { kind, d, big_d, n, seed, source_dist, source_large, probe, out } => {
            let mut config = match kind {
                Kind::Regular => {
                    if big_d.is_some() {
                        bail!("--D only applies to --kind glued");
                    }
                    SimConfig::regular(d, n, seed)
                }
                Kind::Glued => {
                    let placement = if source_large {
                        SourcePlacement::InDCapitalHalf
                    } else {
                        SourcePlacement::AtBridgeDistance(source_dist)
                    };
                    SimConfig::glued(d, need(big_d, "D")?, n, seed, placement)
                }
            };
            if let Some(len) = probe {
                config = config.with_probe(len);
            }
            let tree = simulate(&config)?;
            write_output(out.as_deref(), &(tree.to_json()? + "\n"))?;
        }
        Command::Estimate { tree, out } => {
            write_output(out.as_deref(), &scores_csv(&read_tree(&tree)?)?)?;
        }
        Command::Bound { formula, d, big_d, k, eta, ell, radius, eps } => {
            println!("{}", bound_json(formula, BoundArgs { d, big_d, k, eta, ell, radius, eps })?);
        }
        Command::Confset { tree, method, k, radius } => {
            let tree = read_tree(&tree)?;
            let set = match method {
                SetArg::Psi => confset_psi(&score_all(&tree), need(k, "k")?)?,
                SetArg::Phi => confset_phi(&tree, &score_all(&tree), need(radius, "radius")?)?,
                SetArg::Glued => confset_glued(&tree, need(radius, "radius")?)?,
            };
            print_json(&set)?;
        }
        Command::Urncheck { test, d, n, trials, seed, k, ell, tolerance, s, out } => {
            let args = UrnArgs { d, n, trials, seed, k, ell, tolerance, s };
            let report = pool.install(|| urn_report(test, &args))?;
            print_json(&report)?;
            if let Some(path) = out {
                write_output(Some(&path), &samples_csv(&report)?)?;
            }
            return Ok(report.pass);
        }
        Command::Montecarlo { config, out } => {
            let campaign = load_campaign(&config)?;
            finish_campaign(&run_campaign(&campaign, workers)?, Some(&out))?;
        }
        Command::Prop1 { d, big_d, trials, checkpoints, seed, out } => {
            let result = prop1_experiment(d, big_d, &checkpoints, trials, seed, workers)?;
            finish_campaign(&result, out.as_deref())?;
        }
        Command::Prop2 { d, big_d, n, radius, trials, seed, out } => {
            let result = prop2_experiment(d, big_d, n, radius, trials, seed, workers)?;
            finish_campaign(&result, out.as_deref())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
