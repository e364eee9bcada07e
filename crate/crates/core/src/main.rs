use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use litfit2d::cli::{
    converge_csv, parse_nq_list, parse_values, run_converge, run_demo, run_eval, run_fit, summary_path, write_atomic,
    ApproximantFile, CliOverrides, ConvergeRequest, FitConfig, Reference, SweepParam,
};
use litfit2d::harness::{GridKind, PresetName};
use litfit2d::solver::TsvdMode;
use litfit2d::Error;

#[derive(Parser)]
#[command(name = "litfit2d", version, about = "Rational approximation of functions with line and curve singularities")]
struct Cli {
    /// Worker threads for the linear algebra (1 = sequential).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative singular value cutoff of the truncated SVD.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Pole clustering parameter.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Kron,
    Sep,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Sigma,
    Epsilon,
}

#[derive(Subcommand)]
enum Command {
    /// Fit from a JSON config and write the approximant.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Output path; defaults to the config's `output` entry.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure |f - r| of a stored approximant on a grid.
    Eval {
        approx: PathBuf,
        /// Built-in reference function; defaults to the one stored in the file.
        #[arg(long, conflicts_with = "samples")]
        function: Option<String>,
        /// Tabulated `x,y,f` reference points instead of a built-in function.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Points per axis of the cell-centered grid, or `sampling`.
        #[arg(long, default_value = "1000")]
        grid: String,
        /// Keep one table row in this many.
        #[arg(long, default_value_t = 1)]
        every: usize,
        /// Error table; the statistics go to `<out>.summary.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep degrees (and optionally sigma or epsilon) for a preset.
    Converge {
        #[arg(long)]
        preset: String,
        /// `a:b:sqrt`, `a:b:step`, `a:b` or a comma list.
        #[arg(long)]
        nq: Option<String>,
        #[arg(long)]
        np: Option<usize>,
        #[arg(long, value_enum, requires = "values")]
        sweep: Option<SweepArg>,
        #[arg(long, requires = "sweep")]
        values: Option<String>,
        /// Points per axis of the cell-centered grid, or `sampling`.
        #[arg(long, default_value = "sampling")]
        grid: String,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit and check one of the built-in problems.
    Demo {
        name: String,
        /// Also store the fitted approximant.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid(s: &str) -> Result<GridKind, Error> {
    if s == "sampling" {
        return Ok(GridKind::SamplingLike);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(GridKind::Equispaced(n)),
        _ => Err(Error::Config(format!("grid must be a positive count or 'sampling', got '{s}'"))),
    }
}

/// Runs one command and returns the process status (2 when a demo misses its tolerance).
fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    }
    let overrides = CliOverrides {
        sigma: cli.sigma,
        epsilon: cli.epsilon,
        mode: cli.mode.map(|m| match m {
            ModeArg::Kron => TsvdMode::Kronecker,
            ModeArg::Sep => TsvdMode::Separable,
        }),
    };
    match cli.command {
        Command::Fit { config, out } => {
            let cfg = FitConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            // a path inside the config is relative to the config itself
            let out = out
                .or_else(|| cfg.output.as_ref().map(|o| base.join(o)))
                .ok_or_else(|| Error::Config("no output path: pass --out or set 'output'".into()))?;
            let (file, summary) = run_fit(&cfg, base, &overrides)?;
            file.save(&out)?;
            println!("{}", serde_json::to_string(&summary).expect("plain struct serializes"));
        }
        Command::Eval {
            approx,
            function,
            samples,
            grid,
            every,
            out,
        } => {
            let kind = parse_grid(&grid)?;
            let file = ApproximantFile::load(&approx)?;
            let reference = match (samples, function.or_else(|| file.function.clone())) {
                (Some(path), _) => Reference::Samples(path),
                (None, Some(name)) => Reference::Builtin(name),
                (None, None) => {
                    return Err(Error::Config("no reference: pass --function or --samples".into()));
                }
            };
            let table = run_eval(&file, &reference, kind, every)?;
            write_atomic(&out, &table.points_csv()?)?;
            write_atomic(&summary_path(&out), &table.summary_csv()?)?;
            println!("{:e}", table.stats.max_error);
        }
        Command::Converge {
            preset,
            nq,
            np,
            sweep,
            values,
            grid,
            out,
        } => {
            let sweep = match (sweep, values) {
                (Some(param), Some(v)) => Some((
                    match param {
                        SweepArg::Sigma => SweepParam::Sigma,
                        SweepArg::Epsilon => SweepParam::Epsilon,
                    },
                    parse_values(&v)?,
                )),
                _ => None,
            };
            let req = ConvergeRequest {
                preset: PresetName::parse(&preset)?,
                nq: nq.as_deref().map(parse_nq_list).transpose()?,
                np,
                sweep,
                grid: parse_grid(&grid)?,
                overrides,
            };
            let text = converge_csv(&run_converge(&req)?)?;
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Demo { name, out } => {
            let name = PresetName::parse(&name)?;
            let (file, outcome) = run_demo(name, &overrides)?;
            if let Some(path) = out {
                file.save(&path)?;
            }
            println!(
                "{}: max_error={:.3e} reference={:.1e} tolerance={:.0e} seconds={:.2} {}",
                name.as_str(),
                outcome.max_error,
                outcome.reference_error,
                outcome.tolerance,
                outcome.seconds,
                if outcome.passed { "PASS" } else { "FAIL" }
            );
            if !outcome.passed {
                return Ok(2);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
