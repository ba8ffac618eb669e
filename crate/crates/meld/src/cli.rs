use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::files::{meld_csv, num, summary, trace_csv, write_atomic, CertificateFile, TraceColumns};
use crate::pipeline::{certify, simulate, Certification, Setup};
use crate::verify::verify;

#[derive(Debug, Parser)]
#[command(name = "meld", version, about = "Meld-based switching feedback linearization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify every square output choice at the operating point.
    Enumerate(Common),
    /// Estimate the assumption constants and compute dwell times.
    Certify(Common),
    /// Certify, then run the closed loop and write the trace.
    Simulate(Common),
    /// Check a trace against a certificate.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub certificate: PathBuf,
    /// Directory for `verify.txt`; the report is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(Setup, PathBuf), CliError> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epsilon {
            cfg.certificate.epsilon = e;
        }
        if let Some(dt) = self.dt {
            cfg.simulation.dt = dt;
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        Ok((Setup::new(cfg)?, out))
    }
}

fn certificate_text(setup: &Setup, cert: &Certification) -> String {
    CertificateFile::new(setup, cert).to_text()
}

fn enumerate(args: &Common) -> Result<String, CliError> {
    let (setup, out) = args.load()?;
    let certs = setup.sweep()?;
    let found = certs.iter().filter(|c| c.is_meld()).count();
    write_atomic(&out.join("melds.csv"), &meld_csv(&certs)?)?;
    if found == 0 {
        return Err(CliError::Evaluation(meld_core::Error::InvalidArgument("no meld at the operating point")));
    }
    Ok(format!("{found} of {} choices are melds\n", certs.len()))
}

fn run_certify(args: &Common) -> Result<String, CliError> {
    let (setup, out) = args.load()?;
    let cert = certify(&setup)?;
    let text = certificate_text(&setup, &cert);
    write_atomic(&out.join("certificate.txt"), text.as_bytes())?;
    Ok(text)
}

fn run_simulate(args: &Common) -> Result<String, CliError> {
    let (setup, out) = args.load()?;
    let cert = certify(&setup)?;
    let trace = simulate(&setup, &cert)?;
    let csv = trace_csv(&trace, cert.dwell.s, cert.schedule.t0() + cert.dwell.t)?;
    let text = summary(&setup, &cert, &trace);
    write_atomic(&out.join("certificate.txt"), certificate_text(&setup, &cert).as_bytes())?;
    write_atomic(&out.join("trace.csv"), &csv)?;
    write_atomic(&out.join("summary.txt"), text.as_bytes())?;
    Ok(text)
}

fn run_verify(args: &VerifyArgs) -> Result<(String, bool), CliError> {
    let cert = CertificateFile::load(&args.certificate)?;
    let trace = TraceColumns::load(&args.trace)?;
    let report = verify(&trace, &cert)?;
    let text = report.to_string();
    if let Some(dir) = &args.out {
        write_atomic(&dir.join("verify.txt"), text.as_bytes())?;
    }
    Ok((text, report.passed()))
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Enumerate(a) => enumerate(a).map(|s| (s, true)),
        Command::Certify(a) => run_certify(a).map(|s| (s, true)),
        Command::Simulate(a) => run_simulate(a).map(|s| (s, true)),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            match &e {
                CliError::Simulation { t, .. } if t.is_finite() => eprintln!("error at t = {}: {e}", num(*t)),
                _ => eprintln!("error: {e}"),
            }
            e.exit_code()
        }
    }
}

pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

/// Convenience for callers holding paths.
pub fn run_args(args: &[&str]) -> i32 {
    main(std::iter::once("meld").chain(args.iter().copied()))
}

