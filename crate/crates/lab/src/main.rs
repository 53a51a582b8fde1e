use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use perc_lab::config::ExperimentConfig;
use perc_lab::runner::{self, FitArgs};
use perc_lab::LabError;
use perc_core::scaling::RationalExponent;

#[derive(Parser)]
#[command(name = "perc", about = "critical percolation laboratory", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// key=value config file applied before the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    /// comma-separated strictly increasing scales, e.g. 8,16,32
    #[arg(long)]
    n: Option<String>,
    /// conditioning radius rule m = FACTOR * n
    #[arg(long)]
    m_factor: Option<i32>,
    #[arg(long)]
    replicas: Option<u64>,
    /// first replica index (partial runs over disjoint ranges merge)
    #[arg(long)]
    offset: Option<u64>,
    /// master seed (PERC_MASTER_SEED overrides)
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// exponent slack for tail thresholds and pivotal detection
    #[arg(long)]
    epsilon: Option<f64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv (series files + JSON summary) or json (summary only)
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Exhaustive n=1 reference distribution (golden values)
    Oracle(RunOpts),
    /// Conditioned cluster-volume moment series
    Incipient(RunOpts),
    /// Unconditioned boundary-connected volume series with tail frequencies
    Sn(RunOpts),
    /// Annulus arm-crossing frequencies for (1,0), (1,1), (2,2)
    Arms(RunOpts),
    /// Interior pivotal-edge frequencies and exact symmetry check
    Pivotal(RunOpts),
    /// Exact martingale identity report and variance-decomposition check
    Bubble(RunOpts),
    /// Self-dual rectangle crossing probability
    Crossing(RunOpts),
    /// Log-log exponent regression on an emitted series
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// column holding the values (estimate, stderr or an extra name)
        #[arg(long, default_value = "estimate")]
        value_col: String,
        #[arg(long, default_value = "stderr")]
        stderr_col: String,
        /// report the negated slope (decaying series)
        #[arg(long)]
        negate: bool,
        /// exact rational target, e.g. 91/24
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Combine partial series over disjoint replica ranges
    Merge {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn build_config(opts: &RunOpts) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &opts.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = &opts.n {
        cfg.set("n", v)?;
    }
    if let Some(v) = opts.m_factor {
        cfg.set("m_factor", &v.to_string())?;
    }
    if let Some(v) = opts.replicas {
        cfg.set("replicas", &v.to_string())?;
    }
    if let Some(v) = opts.offset {
        cfg.set("offset", &v.to_string())?;
    }
    if let Some(v) = &opts.seed {
        cfg.set("seed", v)?;
    }
    if let Some(v) = opts.workers {
        cfg.set("workers", &v.to_string())?;
    }
    if let Some(v) = opts.epsilon {
        cfg.set("epsilon", &v.to_string())?;
    }
    if let Some(v) = &opts.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &opts.format {
        cfg.set("format", v)?;
    }
    cfg.apply_env()?;
    Ok(cfg)
}

fn parse_target(s: &str) -> Result<RationalExponent, LabError> {
    let (num, den) = s
        .split_once('/')
        .ok_or_else(|| LabError::Usage(format!("target must look like 91/24: {s:?}")))?;
    let num = num.trim().parse().map_err(|_| LabError::Usage(format!("bad target {s:?}")))?;
    let den: i64 =
        den.trim().parse().map_err(|_| LabError::Usage(format!("bad target {s:?}")))?;
    if den == 0 {
        return Err(LabError::Usage("target denominator must be nonzero".into()));
    }
    Ok(RationalExponent::new(num, den))
}

fn dispatch(cli: Cli) -> Result<serde_json::Value, LabError> {
    match &cli.command {
        Command::Oracle(o) => runner::run_and_emit("oracle", &build_config(o)?),
        Command::Incipient(o) => runner::run_and_emit("incipient", &build_config(o)?),
        Command::Sn(o) => runner::run_and_emit("sn", &build_config(o)?),
        Command::Arms(o) => runner::run_and_emit("arms", &build_config(o)?),
        Command::Pivotal(o) => runner::run_and_emit("pivotal", &build_config(o)?),
        Command::Bubble(o) => runner::run_and_emit("bubble", &build_config(o)?),
        Command::Crossing(o) => runner::run_and_emit("crossing", &build_config(o)?),
        Command::Fit { input, value_col, stderr_col, negate, target, lo, hi, output } => {
            let args = FitArgs {
                input: input.clone(),
                value_col: value_col.clone(),
                stderr_col: stderr_col.clone(),
                negate: *negate,
                target: target.as_deref().map(parse_target).transpose()?,
                lo: *lo,
                hi: *hi,
                output: output.clone(),
            };
            let report = runner::cmd_fit(&args)?;
            if let Some(path) = &args.output {
                std::fs::write(path, serde_json::to_string_pretty(&report).unwrap() + "\n")
                    .map_err(|e| LabError::Io(format!("write {}: {e}", path.display())))?;
            }
            Ok(report)
        }
        Command::Merge { inputs, output } => runner::cmd_merge(inputs, output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", serde_json::to_string(&err.to_json()).unwrap());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
