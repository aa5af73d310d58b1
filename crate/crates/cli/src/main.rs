use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ask_core::harness::{self, Method, SweepParam, SweepSpec};
use ask_core::models::round_up_to_even;
use ask_core::{ask_solve, AskConfig, DynamicalSystem, Error, ModelRegistry};
use clap::{Args, Parser, Subcommand};
use log::info;

/// Adaptive spectral Koopman solver: solves, sweeps and RK4 comparisons.
#[derive(Parser)]
#[command(name = "ask", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and print states.
    Solve {
        #[command(flatten)]
        ask: AskFlags,
        /// Comma-separated output times (default: the horizon)
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Final-time error of ASK over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        ask: AskFlags,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-resolved errors of ASK and RK4 on a uniform grid.
    Compare {
        #[command(flatten)]
        ask: AskFlags,
        #[arg(long, value_delimiter = ',', default_value = "ask,rk4")]
        methods: Vec<Method>,
        #[arg(long = "rk4-steps", default_value_t = 0)]
        rk4_steps: usize,
        /// Number of grid intervals over [0, T]
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the registered models and their defaults.
    Models,
}

/// Unset flags fall back to the model's defaults.
#[derive(Args)]
struct AskFlags {
    #[arg(long)]
    model: String,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long = "N")]
    order: Option<usize>,
    #[arg(long = "n")]
    check_count: Option<usize>,
    #[arg(long = "r")]
    radius: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

impl AskFlags {
    fn resolve(&self, registry: &ModelRegistry) -> Result<(DynamicalSystem, AskConfig), Error> {
        let system = registry.get(&self.model)?.clone();
        let mut config = AskConfig::from_defaults(&system);
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t <= system.horizon()) {
                return Err(Error::InvalidConfig(format!(
                    "T must lie in (0, {}] for {}, got {t}",
                    system.horizon(),
                    system.name()
                )));
            }
            config.horizon = t;
        }
        if let Some(n) = self.order {
            let even = round_up_to_even(n);
            if even != n {
                info!("order N = {n} rounded up to {even}");
            }
            config.order = even;
        }
        if let Some(n) = self.check_count {
            config.check_count = n;
        }
        if let Some(r) = self.radius {
            config.radius = r;
        }
        if let Some(g) = self.gamma {
            config.gamma = g;
        }
        config.validate()?;
        Ok((system, config))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Io(_) | Error::Csv(_) => 4,
        e if e.is_solver_failure() => 3,
        _ => 2,
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let registry = ModelRegistry::new();
    match cli.command {
        Command::Solve { ask, at, out } => {
            let (system, config) = ask.resolve(&registry)?;
            let sol = ask_solve(&system, system.x0(), &config)?;
            let times = if at.is_empty() { vec![config.horizon] } else { at };
            let states = times.iter().map(|&t| sol.evaluate_at(t)).collect::<Result<Vec<_>, _>>()?;
            eprintln!(
                "{}: N={} n={} r={} gamma={} T={} segments={} f_calls={}",
                system.name(),
                config.order,
                config.check_count,
                config.radius,
                config.gamma,
                config.horizon,
                sol.segments().len(),
                sol.f_calls()
            );
            harness::emit_states_csv(&times, &states, open_output(out.as_deref())?)
        }
        Command::Sweep { ask, param, values, out } => {
            let (model, fixed) = ask.resolve(&registry)?;
            let spec = SweepSpec {
                model,
                param,
                values,
                fixed,
            };
            let records = harness::run_sweep(&spec)?;
            harness::emit_csv_to_path(&records, &out)
        }
        Command::Compare {
            ask,
            methods,
            rk4_steps,
            grid,
            out,
        } => {
            let (system, config) = ask.resolve(&registry)?;
            let times = harness::uniform_grid(config.horizon, grid);
            let records = harness::run_compare(&system, &methods, &times, &config, rk4_steps)?;
            harness::emit_csv_to_path(&records, &out)
        }
        Command::Models => {
            let mut w = io::stdout().lock();
            writeln!(w, "{:<18} {:>3} {:>5} {:>3} {:>4} {:>10} {:>6}  x0", "model", "d", "T", "N", "n", "r", "gamma")?;
            for m in registry.iter() {
                let d = m.defaults();
                writeln!(
                    w,
                    "{:<18} {:>3} {:>5} {:>3} {:>4} {:>10.6} {:>6}  {:?}",
                    m.name(),
                    m.dim(),
                    m.horizon(),
                    d.even_order(),
                    d.check_count,
                    d.radius,
                    d.gamma,
                    m.x0()
                )?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
