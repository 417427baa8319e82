use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hyperinv::config::{validate_config, RunConfig, PRESETS};
use hyperinv::pipeline::{
    stage_diagnose, stage_invert, stage_pipeline, stage_reconstruct, stage_score, stage_simulate,
};

#[derive(Parser)]
#[command(name = "hyperinv", version, about = "Potential reconstruction from lateral Cauchy data of a nonlinear wave equation")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Override any key, e.g. `--set solver.epsilon=1e-4` (repeatable).
    #[arg(long = "set", value_name = "TABLE.KEY=VALUE")]
    overrides: Vec<String>,
    /// Same as `--set noise.level=...`.
    #[arg(long)]
    noise: Option<f64>,
    /// Same as `--set noise.seed=...`.
    #[arg(long)]
    seed: Option<u64>,
    /// Same as `--set basis.modes=...`.
    #[arg(long)]
    modes: Option<usize>,
    /// Same as `--set carleman.lambda=...`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Same as `--set run.max_iterations=...`.
    #[arg(long)]
    iterations: Option<usize>,
    /// Single phantom: two_disks, kite or peanut.
    #[arg(long)]
    phantom: Option<String>,
    /// sqrt-grad, quadratic or zero.
    #[arg(long)]
    nonlinearity: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::default(),
        };
        let mut sets = Vec::new();
        if let Some(v) = self.noise {
            sets.push(format!("noise.level={v:?}"));
        }
        if let Some(v) = self.seed {
            sets.push(format!("noise.seed={v}"));
        }
        if let Some(v) = self.modes {
            sets.push(format!("basis.modes={v}"));
        }
        if let Some(v) = self.lambda {
            sets.push(format!("carleman.lambda={v:?}"));
        }
        if let Some(v) = self.iterations {
            sets.push(format!("run.max_iterations={v}"));
        }
        if let Some(v) = &self.phantom {
            sets.push(format!("forward.phantoms=[{v:?}]"));
        }
        if let Some(v) = &self.nonlinearity {
            sets.push(format!("forward.nonlinearity={v:?}"));
        }
        for s in sets.iter().chain(&self.overrides) {
            config.set(s)?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Forward run, traces, projection and noise.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contraction iteration on a saved dataset.
    Invert {
        #[command(flatten)]
        config: ConfigArgs,
        /// `dataset.bin` written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// `c_comp` from a saved Fourier field.
    Reconstruct {
        #[command(flatten)]
        config: ConfigArgs,
        /// `u_comp.bin` written by `invert`.
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics of a reconstruction against the true potential.
    Score {
        /// Computed grid (.bin or .csv).
        #[arg(long)]
        computed: PathBuf,
        /// True grid (.bin or .csv).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// All stages for every configured phantom.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ratio of the weighted Laplacian to the gradient and value terms.
    DiagnoseCarleman {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks a configuration without running anything.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn announce(out: &Path) {
    eprintln!("artifacts in {}", out.display());
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, out } => {
            let dirs = stage_simulate(&config.resolve()?, &out)?;
            for d in dirs {
                announce(&d);
            }
        }
        Command::Invert { config, data, out } => {
            let history = stage_invert(&config.resolve()?, &data, &out)?;
            if let Some(last) = history.records.last() {
                println!("k = {}, J = {:.6e}, stop: {}", last.k, last.cost, history.stop.tag());
            }
            announce(&out);
        }
        Command::Reconstruct { config, field, out } => {
            let (raw, _) = stage_reconstruct(&config.resolve()?, &field, &out)?;
            println!("max c_comp = {:.6}", raw.max());
            announce(&out);
        }
        Command::Score { computed, truth, out } => {
            let m = stage_score(&computed, &truth, &out)?;
            println!(
                "relative L2 {:.4}, support score {:.3}, top-2 maxima in support: {}",
                m.relative_l2,
                m.min_component_score(),
                m.top_maxima_in_support(2)
            );
            announce(&out);
        }
        Command::Pipeline { config, out } => {
            let runs = stage_pipeline(&config.resolve()?, &out)?;
            let mut failed = false;
            for r in runs {
                match (&r.history, &r.metrics) {
                    (Ok(h), Some(m)) => println!(
                        "{}: {} iterations ({}), relative L2 {:.4}, support score {:.3}",
                        r.phantom,
                        h.records.len() - 1,
                        h.stop.tag(),
                        m.relative_l2,
                        m.min_component_score()
                    ),
                    (Err(e), _) => {
                        failed = true;
                        println!("{}: {e}", r.phantom);
                    }
                    (Ok(_), None) => {
                        failed = true;
                        println!("{}: no metrics", r.phantom);
                    }
                }
            }
            announce(&out);
            if failed {
                return Ok(ExitCode::from(3));
            }
        }
        Command::DiagnoseCarleman { config, lambdas, trials, out } => {
            if lambdas.is_empty() || trials == 0 {
                bail!("need at least one lambda and one trial");
            }
            let rows = stage_diagnose(&config.resolve()?, &lambdas, trials, &out)?;
            for r in rows {
                println!("lambda {:>6}: min {:.4e}, median {:.4e} over {} functions", r.lambda, r.min_ratio, r.median_ratio, r.trials);
            }
            announce(&out);
        }
        Command::Validate { config } => {
            let report = validate_config(&config.resolve()?);
            print!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
