//! Command-line front end of the `affinelab` binary.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::catalog;
use crate::error::{Error, Result};
use crate::report::{self, Command, Format, GridSpec, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "affinelab", version, about = "Equiaffine invariants, parallel families and isoparametric tubes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Blaschke invariants and structure-equation residuals over a grid.
    Invariants(RunArgs),
    /// Parallel-family identities for each mu.
    Parallel(RunArgs),
    /// Tube, level-function and constant-principal-curvature checks.
    Isoparametric(RunArgs),
    /// Everything above plus the catalog oracles.
    VerifyAll(RunArgs),
    /// List the named surfaces.
    Catalog {
        #[arg(long, value_parser = parse_format)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Catalog name such as `sphere(1)`, or `custom:<expression in u, v>`.
    #[arg(long)]
    pub surface: Option<String>,
    /// `NUxNV@[a,b]x[c,d]`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Comma-separated list, e.g. `-0.25,0.25,0.5`.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// Jet order, 4 to 10.
    #[arg(long)]
    pub order: Option<usize>,
    /// Loose tolerance deciding pass/fail.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON file mirroring the run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse::<Format>().map_err(|e| e.to_string())
}

/// Merge the config file and the flags.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &args.surface {
        cfg.surface = s.clone();
    }
    if let Some(g) = &args.grid {
        cfg.grid = Some(g.parse::<GridSpec>()?);
    }
    if let Some(m) = &args.mu {
        cfg.mu_values = Some(report::parse_mu_list(m)?);
    }
    if let Some(k) = args.order {
        cfg.jet_order = k;
    }
    if let Some(t) = args.tol {
        cfg.tolerances.loose = t;
    }
    if let Some(o) = &args.out {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(j) = args.jobs {
        cfg.parallelism = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let io_err = |e: io::Error| Error::Config(format!("cannot write output: {e}"));
    match path {
        Some(p) => fs::write(p, bytes).map_err(io_err),
        None => io::stdout().write_all(bytes).map_err(io_err),
    }
}

fn run_analysis(command: Command, args: &RunArgs) -> Result<i32> {
    let cfg = resolve_config(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rep = pool.install(|| report::run(command, &cfg))?;
    let bytes = match cfg.output.format {
        Format::Json => {
            let mut s = rep.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut buf = Vec::new();
            rep.write_csv(&mut buf)?;
            buf
        }
    };
    emit(cfg.output.path.as_deref(), &bytes)?;
    eprintln!("{}", report::summary(&rep));
    Ok(if report::is_success(&rep) { EXIT_OK } else { EXIT_VIOLATION })
}

fn run_catalog(format: Option<Format>, out: Option<&Path>) -> Result<i32> {
    let entries = catalog::listing();
    let bytes = match format.unwrap_or_default() {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&entries)
                .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Numerical(format!("csv output failed: {e}"));
            w.write_record(["name", "syntax", "expected_verdict", "description"]).map_err(csv_err)?;
            for e in &entries {
                let verdict = e.expected_verdict.map_or(String::new(), |v| v.to_string());
                w.write_record([e.name, e.syntax, &verdict, e.description]).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| Error::Numerical(format!("csv output failed: {e}")))?
        }
    };
    emit(out, &bytes)?;
    Ok(EXIT_OK)
}

/// Parse `argv` and run; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Cmd::Invariants(a) => run_analysis(Command::Invariants, a),
        Cmd::Parallel(a) => run_analysis(Command::Parallel, a),
        Cmd::Isoparametric(a) => run_analysis(Command::Isoparametric, a),
        Cmd::VerifyAll(a) => run_analysis(Command::VerifyAll, a),
        Cmd::Catalog { format, out } => run_catalog(*format, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if report::is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_VIOLATION
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"surface": "paraboloid", "jet_order": 6, "mu_values": [0.1]}"#).unwrap();
        let cli = Cli::try_parse_from([
            "affinelab",
            "parallel",
            "--config",
            path.to_str().unwrap(),
            "--order",
            "7",
            "--mu",
            "-0.25,0.5",
        ])
        .unwrap();
        let Cmd::Parallel(args) = cli.command else { panic!("wrong subcommand") };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.surface, "paraboloid");
        assert_eq!(cfg.jet_order, 7);
        assert_eq!(cfg.mu_values, Some(vec![-0.25, 0.5]));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["affinelab", "nosuch"]), EXIT_USAGE);
        assert_eq!(main_with_args(["affinelab", "invariants", "--order", "11"]), EXIT_USAGE);
        assert_eq!(main_with_args(["affinelab", "invariants", "--surface", "custom:0.5*(u^2+"]), EXIT_USAGE);
        assert_eq!(main_with_args(["affinelab", "invariants", "--grid", "3x3@[-2,2]x[0,0.1]"]), EXIT_USAGE);
        assert_eq!(main_with_args(["affinelab", "invariants", "--format", "xml"]), EXIT_USAGE);
    }
}
