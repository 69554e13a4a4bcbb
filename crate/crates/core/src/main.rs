use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use liesegang::cli::{cmd_report, cmd_run, cmd_sweep, parse_config, parse_list, ConfigValues};
use liesegang::Error;

#[derive(Parser)]
#[command(name = "liesegang", version, about = "Self-similar Liesegang profiles and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print Psi(alpha), u*_0, the regime and the matched profile.
    Report(RunArgs),
    /// Run one simulation and write CSV diagnostics.
    Run(RunArgs),
    /// Run one simulation per threshold value.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Comma-separated threshold values.
        #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
        ustars: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    ustar: Option<f64>,
    /// Cells on [0, alpha].
    #[arg(long)]
    n: Option<usize>,
    /// Number of time steps.
    #[arg(long)]
    m: Option<usize>,
    /// Final similarity time.
    #[arg(long)]
    smax: Option<f64>,
    /// Diagnostics sampling stride in steps.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated times at which to dump profiles.
    #[arg(long = "profiles-at", value_name = "LIST")]
    profiles_at: Option<String>,
}

impl RunArgs {
    fn values(&self) -> Result<ConfigValues, Error> {
        let profiles_at = match &self.profiles_at {
            Some(list) => Some(parse_list(list, "--profiles-at")?),
            None => None,
        };
        Ok(ConfigValues {
            alpha: self.alpha,
            beta: self.beta,
            ustar: self.ustar,
            n: self.n,
            m: self.m,
            smax: self.smax,
            stride: self.stride,
            out: self.out.clone(),
            profiles_at,
        })
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Report(args) => {
            let config = parse_config(&args.values()?, args.config.as_deref())?;
            print!("{}", cmd_report(&config.params)?);
        }
        Command::Run(args) => {
            let config = parse_config(&args.values()?, args.config.as_deref())?;
            let outcome = cmd_run(&config)?;
            println!("regime = {}", outcome.regime);
            if let Some(last) = outcome.record.last() {
                println!("final sup_err = {:e}", last.sup_err);
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { args, ustars } => {
            let flags = args.values()?;
            let base = match &args.config {
                Some(path) => ConfigValues::from_file(path)?.overridden_by(&flags),
                None => flags,
            };
            let list = parse_list(&ustars, "--ustars")?;
            let rows = cmd_sweep(&base, &list)?;
            for row in rows {
                match row.outcome {
                    Ok(r) => println!("{} {} gamma={}", row.dir.display(), r.regime, r.gamma),
                    Err(msg) => println!("{} failed: {msg}", row.dir.display()),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Parse { .. } | Error::Validation(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
