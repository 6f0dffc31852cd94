use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use oplearn::commands::{self, DataSplit, ModelKind, OracleCase, OracleRequest};
use oplearn::{ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "oplearn", version, about = "Learn the potential-to-solution map of a parabolic PDE")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training and/or test set (both if neither flag is given).
    GenData {
        #[arg(long)]
        train: bool,
        #[arg(long)]
        test: bool,
    },
    /// Train one model family on the training set.
    Train {
        #[arg(long, value_enum)]
        model: Model,
        /// A grid value, or `all`.
        #[arg(long, default_value = "all")]
        x: String,
    },
    /// Evaluate all checkpoints on the test set.
    Evaluate,
    /// Compare Monte Carlo estimates against closed forms for constant potentials.
    Oracle {
        #[arg(long, value_enum)]
        case: Case,
        #[arg(long, allow_negative_numbers = true)]
        kappa: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate basis functions and sampled potentials.
    Basis {
        #[arg(long, num_args = 3, value_names = ["LO", "HI", "N"], allow_negative_numbers = true)]
        dump_grid: Vec<String>,
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Frechet,
    Deeponet,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    ZeroC,
    ConstC,
    Custom,
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, HarnessError> {
    s.parse()
        .map_err(|_| HarnessError::Validation(format!("cannot parse {what} from {s:?}")))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let path = cli
        .config
        .ok_or_else(|| HarnessError::Validation("--config <file> is required".into()))?;
    let cfg = ExperimentConfig::load(&path)?;
    match cli.command {
        Command::GenData { train, test } => {
            let splits = match (train, test) {
                (true, false) => vec![DataSplit::Train],
                (false, true) => vec![DataSplit::Test],
                _ => vec![DataSplit::Train, DataSplit::Test],
            };
            for p in commands::gen_data(&cfg, &splits)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Train { model, x } => {
            let x = if x == "all" { None } else { Some(parse("--x", &x)?) };
            let kind = match model {
                Model::Frechet => ModelKind::Frechet,
                Model::Deeponet => ModelKind::DeepONet,
            };
            if kind == ModelKind::DeepONet && x.is_some() {
                return Err(HarnessError::Validation(
                    "the DeepONet is trained on all grid points at once; drop --x".into(),
                ));
            }
            for p in commands::train_models(&cfg, kind, x)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Evaluate => {
            let report = commands::evaluate_models(&cfg)?;
            print!("{}", report.table());
            println!(
                "parameters: Fréchet {} per x, DeepONet {}",
                report.metadata.param_counts.frechet, report.metadata.param_counts.deeponet
            );
        }
        Command::Oracle {
            case,
            kappa,
            x,
            paths,
            seed,
        } => {
            let req = OracleRequest {
                case: match case {
                    Case::ZeroC => OracleCase::ZeroC,
                    Case::ConstC => OracleCase::ConstC,
                    Case::Custom => OracleCase::Custom,
                },
                kappas: kappa,
                xs: x,
                n_paths: paths,
                seed,
            };
            let checks = commands::oracle(&cfg, &req)?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} kappa={} x={} estimate={:.6} closed_form={:.6} std_error={:.2e} z={:+.2}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.kappa,
                    c.x,
                    c.estimate,
                    c.closed_form,
                    c.std_error,
                    c.z_score
                );
                failed += usize::from(!c.pass);
            }
            if failed > 0 {
                return Err(HarnessError::Oracle(format!(
                    "{failed} of {} checks outside 3 standard errors",
                    checks.len()
                )));
            }
        }
        Command::Basis {
            dump_grid,
            samples,
            seed,
        } => {
            let (lo, hi, n) = match dump_grid.as_slice() {
                [lo, hi, n] => (parse("LO", lo)?, parse("HI", hi)?, parse("N", n)?),
                _ => (-3.0, 3.0, 601),
            };
            for p in commands::dump_basis(&cfg, lo, hi, n, samples, seed)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
