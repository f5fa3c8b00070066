use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mspg_core::harness::experiment::Offline;
use mspg_core::harness::report::emit_report;
use mspg_core::harness::{run_validation, ExperimentConfig};
use mspg_core::test_space::write_eigen_csv;
use mspg_core::Error;

#[derive(Parser)]
#[command(name = "mspg", version, about = "Multiscale Petrov-Galerkin convection-diffusion experiments")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run(Flags),
    /// Cartesian sweep over comma-separated trial, test, eig values; online rows for every iteration.
    Sweep(Flags),
    /// Run the invariant suite on a small copy of the configuration.
    Validate(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<String>,
    /// Diffusion or velocity scale; fractions like 1/250 are accepted.
    #[arg(long)]
    alpha: Option<String>,
    /// Coarse subdivisions per side.
    #[arg(long)]
    coarse: Option<String>,
    /// Fine subdivisions per side.
    #[arg(long)]
    fine: Option<String>,
    /// Trial functions per neighborhood.
    #[arg(long)]
    trial: Option<String>,
    /// Test functions per coarse edge.
    #[arg(long)]
    test: Option<String>,
    /// Edge eigenproblem, 1 or 2.
    #[arg(long)]
    eig: Option<String>,
    /// Online enrichment iterations.
    #[arg(long)]
    online: Option<String>,
    /// Partition of unity: multiscale or bilinear.
    #[arg(long)]
    pou: Option<String>,
    /// Projection inner product: euclidean or mass.
    #[arg(long)]
    projection: Option<String>,
    /// Bubble right-hand side: euclidean or mass.
    #[arg(long)]
    bubble: Option<String>,
    /// Example 2 perturbation amplitude.
    #[arg(long)]
    delta: Option<String>,
    /// Example 5 permeability raster file.
    #[arg(long)]
    raster: Option<String>,
    /// Example 5 velocity sign (1 or -1).
    #[arg(long, allow_hyphen_values = true)]
    velocity_sign: Option<String>,
    /// Also estimate the inf-sup constant.
    #[arg(long)]
    infsup: bool,
    /// Compute the online residual once per sweep instead of after every color class.
    #[arg(long)]
    residual_once: bool,
    #[arg(long)]
    out: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Write the per-edge eigenvalue table of the first (eig, test) pair here.
    #[arg(long)]
    eigen_csv: Option<PathBuf>,
}

impl Flags {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("example", &self.example),
            ("alpha", &self.alpha),
            ("coarse", &self.coarse),
            ("fine", &self.fine),
            ("trial", &self.trial),
            ("test", &self.test),
            ("eig", &self.eig),
            ("online", &self.online),
            ("pou", &self.pou),
            ("projection", &self.projection),
            ("bubble", &self.bubble),
            ("delta", &self.delta),
            ("raster", &self.raster),
            ("velocity_sign", &self.velocity_sign),
            ("out", &self.out),
            ("format", &self.format),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.infsup {
            cfg.infsup = true;
        }
        if self.residual_once {
            cfg.residual_per_class = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cfg: &ExperimentConfig, eigen_csv: Option<&PathBuf>) -> Result<(), Error> {
    let off = Offline::build(cfg)?;
    if let Some(path) = eigen_csv {
        let e = cfg.eig[0];
        let mut w = BufWriter::new(File::create(path)?);
        write_eigen_csv(&mut w, &off.spectra[&e], cfg.test[0])?;
    }
    let rows = off.run()?;
    emit_report(&rows, cfg.format, cfg.out.as_deref())
}

fn dispatch(command: &Command) -> Result<bool, Error> {
    match command {
        Command::Run(flags) => {
            let cfg = flags.config()?;
            if cfg.trial.len() > 1 || cfg.test.len() > 1 || cfg.eig.len() > 1 {
                return Err(Error::Config("run takes single values; use sweep for lists".into()));
            }
            execute(&cfg, flags.eigen_csv.as_ref())?;
            Ok(true)
        }
        Command::Sweep(flags) => {
            execute(&flags.config()?, flags.eigen_csv.as_ref())?;
            Ok(true)
        }
        Command::Validate(flags) => {
            let checks = run_validation(&flags.config()?)?;
            let mut ok = true;
            for c in &checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    println!("{mark}  {}", c.name);
                } else {
                    println!("{mark}  {} ({})", c.name, c.detail);
                }
                ok &= c.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
