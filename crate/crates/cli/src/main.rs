//! `poisar` — simulate, classify, and numerically verify the two-lag Poisson
//! autoregression with inhibition.
//!
//! Defaults may come from a `--config` key-value file (one `key = value` per
//! line, keys named after the long flags); explicit flags always win.
//! Exit codes: 0 success, 1 domain errors, 2 usage errors.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poisar::{Error, Params};
use poisar_cli::{run, CommandConfig, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "poisar",
    version,
    about = "Two-lag Poisson autoregression with inhibition: simulation and stability analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify (a, b) against the critical curve and report sub-regions,
    /// the growth ratio, and strong irreducibility.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Half-width of the boundary band around b_c(a).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Simulate a seeded trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial counts, latest first: X1 X0.
        #[arg(long, num_args = 2, value_names = ["X1", "X0"])]
        init: Option<Vec<u64>>,
        /// Number of steps to simulate.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Build and verify a drift certificate for recurrent parameters.
    DriftCheck {
        #[command(flatten)]
        common: Common,
        /// Starting size of the verification box (doubles on demand).
        #[arg(long = "box")]
        box_size: Option<u64>,
    },
    /// Stationary distribution of the truncated kernel.
    Stationary {
        #[command(flatten)]
        common: Common,
        /// Box bound: states (i, j) with i, j <= N.
        #[arg(long = "N", visible_alias = "n")]
        n: Option<u64>,
        /// Convergence tolerance in total variation.
        #[arg(long)]
        tol: Option<f64>,
        /// Largest acceptable per-row truncation defect.
        #[arg(long)]
        defect_budget: Option<f64>,
    },
    /// Total-variation decay towards the stationary distribution and its
    /// fitted geometric rate.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Box bound: states (i, j) with i, j <= N.
        #[arg(long = "N", visible_alias = "n")]
        n: Option<u64>,
        /// Number of kernel applications.
        #[arg(long)]
        horizon: Option<usize>,
        /// Initial counts, latest first: X1 X0.
        #[arg(long, num_args = 2, value_names = ["X1", "X0"])]
        init: Option<Vec<u64>>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        defect_budget: Option<f64>,
    },
    /// Seeded escape/growth/ratio ensemble from the origin.
    Transience {
        #[command(flatten)]
        common: Common,
        /// Number of trajectories.
        #[arg(long)]
        runs: Option<usize>,
        /// Steps per trajectory.
        #[arg(long)]
        horizon: Option<usize>,
        /// A run escapes once two consecutive counts sum to this level.
        #[arg(long)]
        escape_level: Option<u64>,
        /// Counts at or above this enter the ratio check.
        #[arg(long)]
        ratio_threshold: Option<u64>,
        /// Tolerance around theta for the ratio check.
        #[arg(long)]
        ratio_eps: Option<f64>,
    },
    /// Strong-irreducibility verdict with an unreachable witness when
    /// applicable.
    Irreducibility {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a parameter rectangle and emit one row per grid point.
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        a_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        a_max: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        b_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        b_max: Option<f64>,
        /// Points per axis.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Also run a short seeded trajectory per grid point.
        #[arg(long)]
        with_simulation: bool,
        /// Steps for the per-point trajectory.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        escape_level: Option<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// Lag-1 coefficient.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Lag-2 coefficient.
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Baseline rate (default 1).
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Master seed for stochastic commands (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the primary artifact to this path instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Primary artifact format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Key-value defaults file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

/// Defaults loaded from a `--config` file.
struct FileDefaults(HashMap<String, String>);

impl FileDefaults {
    fn load(path: Option<&PathBuf>) -> Result<Self, String> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("--config {}: {e}", path.display()))?;
            for (line_no, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or(format!(
                    "--config {}: line {} is not `key = value`",
                    path.display(),
                    line_no + 1
                ))?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
        }
    }

    /// Flag, then config file, then the built-in default.
    fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String> {
        Ok(flag.or(self.get(key)?).unwrap_or(default))
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, String> {
        flag.or(self.get(key)?)
            .ok_or(format!("missing required flag --{key}"))
    }
}

fn parse_init(flag: Option<Vec<u64>>, defaults: &FileDefaults) -> Result<(u64, u64), String> {
    if let Some(values) = flag {
        return Ok((values[0], values[1]));
    }
    match defaults.0.get("init") {
        None => Ok((0, 0)),
        Some(raw) => {
            let parts: Vec<&str> = raw.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(format!(
                    "config key `init`: expected two integers, got `{raw}`"
                ));
            }
            let x1 = parts[0]
                .parse()
                .map_err(|_| format!("config key `init`: bad `{raw}`"))?;
            let x0 = parts[1]
                .parse()
                .map_err(|_| format!("config key `init`: bad `{raw}`"))?;
            Ok((x1, x0))
        }
    }
}

fn resolve_params(common: &Common, defaults: &FileDefaults) -> Result<Params, String> {
    let a = defaults.require(common.a, "a")?;
    let b = defaults.require(common.b, "b")?;
    let lambda = defaults.resolve(common.lambda, "lambda", 1.0)?;
    Params::new(a, b, lambda).map_err(|e| e.to_string())
}

/// Builds the resolved config; `Err` is a usage problem (exit 2).
fn resolve(cli: Cli) -> Result<(RunConfig, Option<PathBuf>), String> {
    let (common, default_format) = match &cli.command {
        Command::Classify { common, .. } => (common, OutputFormat::Json),
        Command::Simulate { common, .. } => (common, OutputFormat::Csv),
        Command::DriftCheck { common, .. } => (common, OutputFormat::Json),
        Command::Stationary { common, .. } => (common, OutputFormat::Csv),
        Command::Rate { common, .. } => (common, OutputFormat::Csv),
        Command::Transience { common, .. } => (common, OutputFormat::Json),
        Command::Irreducibility { common } => (common, OutputFormat::Json),
        Command::PhaseDiagram { common, .. } => (common, OutputFormat::Csv),
    };
    let defaults = FileDefaults::load(common.config.as_ref())?;
    let seed = defaults.resolve(common.seed, "seed", 0)?;
    let format = match common.format {
        Some(f) => f.into(),
        None => match defaults.get::<String>("format")? {
            Some(s) if s == "json" => OutputFormat::Json,
            Some(s) if s == "csv" => OutputFormat::Csv,
            Some(other) => return Err(format!("config key `format`: unknown format `{other}`")),
            None => default_format,
        },
    };
    let output = common
        .output
        .clone()
        .or(defaults.0.get("output").map(PathBuf::from));

    let command = match cli.command {
        Command::Classify { ref common, tol } => CommandConfig::Classify {
            params: resolve_params(common, &defaults)?,
            tol: defaults.resolve(tol, "tol", poisar::classify::BOUNDARY_TOL)?,
        },
        Command::Simulate {
            ref common,
            ref init,
            steps,
        } => CommandConfig::Simulate {
            params: resolve_params(common, &defaults)?,
            init: parse_init(init.clone(), &defaults)?,
            steps: defaults.resolve(steps, "steps", 1000)?,
        },
        Command::DriftCheck {
            ref common,
            box_size,
        } => CommandConfig::DriftCheck {
            params: resolve_params(common, &defaults)?,
            initial_box: defaults.resolve(box_size, "box", poisar::lyapunov::INITIAL_BOX)?,
        },
        Command::Stationary {
            ref common,
            n,
            tol,
            defect_budget,
        } => CommandConfig::Stationary {
            params: resolve_params(common, &defaults)?,
            n: defaults.resolve(n, "n", 50)?,
            tol: defaults.resolve(tol, "tol", 1e-10)?,
            defect_budget: defaults.resolve(
                defect_budget,
                "defect-budget",
                poisar::kernel::DEFAULT_DEFECT_BUDGET,
            )?,
        },
        Command::Rate {
            ref common,
            n,
            horizon,
            ref init,
            tol,
            defect_budget,
        } => CommandConfig::Rate {
            params: resolve_params(common, &defaults)?,
            n: defaults.resolve(n, "n", 50)?,
            horizon: defaults.resolve(horizon, "horizon", 60)?,
            init: parse_init(init.clone(), &defaults)?,
            tol: defaults.resolve(tol, "tol", 1e-10)?,
            defect_budget: defaults.resolve(
                defect_budget,
                "defect-budget",
                poisar::kernel::DEFAULT_DEFECT_BUDGET,
            )?,
        },
        Command::Transience {
            ref common,
            runs,
            horizon,
            escape_level,
            ratio_threshold,
            ratio_eps,
        } => CommandConfig::Transience {
            params: resolve_params(common, &defaults)?,
            runs: defaults.resolve(runs, "runs", 100)?,
            horizon: defaults.resolve(horizon, "horizon", poisar::transience::DEFAULT_HORIZON)?,
            escape_level: defaults.resolve(
                escape_level,
                "escape-level",
                poisar::transience::DEFAULT_ESCAPE_LEVEL,
            )?,
            ratio_threshold: defaults.resolve(
                ratio_threshold,
                "ratio-threshold",
                poisar::transience::DEFAULT_RATIO_THRESHOLD,
            )?,
            ratio_eps: defaults.resolve(
                ratio_eps,
                "ratio-eps",
                poisar::transience::DEFAULT_RATIO_EPS,
            )?,
        },
        Command::Irreducibility { ref common } => CommandConfig::Irreducibility {
            params: resolve_params(common, &defaults)?,
        },
        Command::PhaseDiagram {
            ref common,
            a_min,
            a_max,
            b_min,
            b_max,
            grid,
            tol,
            with_simulation,
            steps,
            escape_level,
        } => CommandConfig::PhaseDiagram {
            a_min: defaults.resolve(a_min, "a-min", -4.0)?,
            a_max: defaults.resolve(a_max, "a-max", 4.0)?,
            b_min: defaults.resolve(b_min, "b-min", -4.0)?,
            b_max: defaults.resolve(b_max, "b-max", 4.0)?,
            grid: defaults.resolve(grid, "grid", 200)?,
            lambda: defaults.resolve(common.lambda, "lambda", 1.0)?,
            tol: defaults.resolve(tol, "tol", poisar::classify::BOUNDARY_TOL)?,
            with_simulation: with_simulation
                || defaults.get::<bool>("with-simulation")?.unwrap_or(false),
            steps: defaults.resolve(steps, "steps", 200)?,
            escape_level: defaults.resolve(
                escape_level,
                "escape-level",
                poisar::transience::DEFAULT_ESCAPE_LEVEL,
            )?,
        },
    };

    Ok((
        RunConfig {
            command,
            seed,
            format,
        },
        output,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, output) = match resolve(cli) {
        Ok(resolved) => resolved,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };

    let artifacts = match run(&config) {
        Ok(artifacts) => artifacts,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::InvalidParams(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            };
        }
    };

    if let Some(meta) = &artifacts.meta {
        eprintln!("{meta}");
    }
    let written = match &output {
        Some(path) => std::fs::write(path, artifacts.primary.as_bytes())
            .map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(artifacts.primary.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(message) = written {
        eprintln!("error: {message}");
        return ExitCode::from(1);
    }
    if artifacts.check_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
