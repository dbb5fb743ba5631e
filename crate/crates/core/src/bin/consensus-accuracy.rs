use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use consensus_accuracy::experiments::{
    self, CertifyMode, ExperimentConfig, Format, ScalingConfig, ScalingFamily, SimulateConfig, X0Spec,
};
use consensus_accuracy::graph::disagreement;
use consensus_accuracy::montecarlo::{SteadyRule, Stride};
use consensus_accuracy::{Error, Result, UpdateModel};

/// Accuracy certificates and experiments for randomized consensus.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse::<Format>)]
    format: Option<Format>,
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check or compute a certificate and print it as JSON.
    Certify {
        #[arg(long)]
        model: Option<String>,
        #[arg(long, conflicts_with_all = ["minimal", "theorem"])]
        gamma: Option<f64>,
        #[arg(long, conflicts_with = "theorem")]
        minimal: bool,
        /// Only `auto` is supported.
        #[arg(long, value_parser = ["auto"])]
        theorem: Option<String>,
        /// Initial state for the reported bound (default: V(x0) = 1).
        #[arg(long, value_parser = parse::<X0Spec>)]
        x0: Option<X0Spec>,
    },
    /// Monte Carlo mean-square drift of the average.
    Simulate {
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_parser = parse::<X0Spec>)]
        x0: Option<X0Spec>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// Record every K steps instead of the default schedule.
        #[arg(long)]
        every: Option<usize>,
    },
    /// Exact second-moment trajectory.
    Oracle {
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_parser = parse::<X0Spec>)]
        x0: Option<X0Spec>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Bound and steady-state MSE across network sizes.
    Scaling {
        #[arg(long, value_parser = parse::<ScalingFamily>)]
        family: Option<ScalingFamily>,
        /// Comma-separated, ascending.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_parser = parse::<X0Spec>)]
        x0: Option<X0Spec>,
    },
    /// Our bound next to the applicable earlier bounds.
    CompareBounds {
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_parser = parse::<X0Spec>)]
        x0: Option<X0Spec>,
        #[arg(long)]
        sigma2: Option<f64>,
    },
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn model(arg: Option<String>, cfg: &ExperimentConfig) -> Result<UpdateModel> {
    match (arg, &cfg.model) {
        (Some(a), _) => experiments::load_model(&a),
        (None, Some(spec)) => spec.build(),
        (None, None) => Err(Error::Config("a model is required (--model or config `model`)".into())),
    }
}

fn x0(arg: Option<X0Spec>, cfg: &ExperimentConfig, n: usize) -> Result<Vec<f64>> {
    arg.or_else(|| cfg.x0.clone())
        .ok_or_else(|| Error::Config("an initial state is required (--x0 or config `x0`)".into()))?
        .materialize(n)
}

fn run(cli: Cli) -> Result<i32> {
    let g = cli.global;
    let cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = g.seed.or(cfg.seed).unwrap_or(0);
    let out = g.out.as_deref();
    let table_format = g.format.unwrap_or_default();
    match cli.command {
        Command::Certify { model: m, gamma, minimal, theorem: _, x0: x } => {
            let model = model(m, &cfg)?;
            let mode = match (gamma.or(cfg.gamma), minimal) {
                (_, true) => CertifyMode::Minimal,
                (Some(v), false) => CertifyMode::Gamma(v),
                (None, false) => CertifyMode::Theorem,
            };
            let v0 = match x.or_else(|| cfg.x0.clone()) {
                Some(spec) => disagreement(&spec.materialize(model.n())?)?,
                None => 1.0,
            };
            let report = experiments::certify(&model, mode, v0)?;
            experiments::emit(&(serde_json::to_string_pretty(&report)? + "\n"), out)?;
            if report.gamma.is_none() {
                eprintln!("infeasible: no finite gamma satisfies the certificate condition");
            }
            Ok(report.exit_code())
        }
        Command::Simulate { model: m, x0: x, steps, trials, every } => {
            let model = model(m, &cfg)?;
            let x0 = x0(x, &cfg, model.n())?;
            let sim = SimulateConfig {
                steps: steps.or(cfg.steps).unwrap_or(100),
                trials: trials.or(cfg.trials).unwrap_or(10_000),
                seed,
                stride: every.map_or(Stride::Default, Stride::Every),
            };
            let rows = experiments::simulate(&model, &x0, sim)?;
            experiments::emit(&experiments::render(&rows, table_format)?, out)?;
            Ok(0)
        }
        Command::Oracle { model: m, x0: x, steps, gamma } => {
            let model = model(m, &cfg)?;
            let x0 = x0(x, &cfg, model.n())?;
            let rows = experiments::oracle_rows(&model, &x0, steps.or(cfg.steps).unwrap_or(100), gamma.or(cfg.gamma))?;
            experiments::emit(&experiments::render(&rows, table_format)?, out)?;
            Ok(0)
        }
        Command::Scaling { family, n_list, q, trials, x0: x } => {
            let sc = ScalingConfig {
                family: family
                    .or(cfg.family)
                    .ok_or_else(|| Error::Config("a family is required (--family or config `family`)".into()))?,
                n_list: n_list.or_else(|| cfg.n_list.clone()).unwrap_or_else(|| vec![8, 16, 32]),
                q: q.or(cfg.q).unwrap_or(0.5),
                trials: trials.or(cfg.trials).unwrap_or(1_000),
                seed,
                x0: x.or_else(|| cfg.x0.clone()).unwrap_or(X0Spec::IidUniform { seed }),
                rule: SteadyRule::default(),
            };
            let rows = experiments::scaling(&sc)?;
            experiments::emit(&experiments::render(&rows, table_format)?, out)?;
            Ok(0)
        }
        Command::CompareBounds { model: m, x0: x, sigma2 } => {
            let model = model(m, &cfg)?;
            let v0 = disagreement(&x0(x, &cfg, model.n())?)?;
            let rows = experiments::compare_bounds(&model, v0, sigma2.or(cfg.sigma2))?;
            experiments::emit(&experiments::render(&rows, table_format)?, out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
