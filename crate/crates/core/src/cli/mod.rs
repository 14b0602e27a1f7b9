//! Command-line interface: `run`, `verify`, `plot` and `list-models`.

pub mod config;
pub mod plot;
pub mod run;
pub mod svg;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;

/// Configs shipped with the binary, `(file name, contents)`.
pub const BUNDLED: [(&str, &str); 2] = [
    ("warped_goodness.toml", include_str!("../../configs/warped_goodness.toml")),
    ("bracket_circle.toml", include_str!("../../configs/bracket_circle.toml")),
];

#[derive(Debug)]
pub enum CliError {
    /// Invalid config or artifact layout (exit 2).
    Schema(String),
    /// A pipeline stage failed (exit 3).
    Stage { stage: String, error: Error },
    /// Invariants failed during `verify` (exit 1).
    Verify { checks: Vec<verify::Check>, failed: Vec<String> },
    Io(String),
}

impl CliError {
    pub fn stage(stage: &str, error: Error) -> Self {
        match error {
            Error::Schema(m) => CliError::Schema(m),
            error => CliError::Stage {
                stage: stage.to_string(),
                error,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Stage { .. } => 3,
            CliError::Verify { .. } | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Stage { stage, error } => write!(f, "stage '{stage}' failed: {error}"),
            CliError::Verify { failed, .. } => write!(f, "{} invariant(s) failed: {}", failed.len(), failed.join("; ")),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "semilab", version, about = "Semiclassical eigenfunction laboratory")]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SEMILAB_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the pipelines of a config and write artifacts.
    Run {
        /// Config file, or the name of a bundled config.
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Re-check invariants from the artifacts of a run directory.
    Verify { dir: PathBuf },
    /// Rebuild SVG plots from the CSV artifacts of a run directory.
    Plot { dir: PathBuf },
    /// List model kinds and bundled configs.
    ListModels,
}

const MODELS: [(&str, &str); 6] = [
    ("warped", "surface of revolution over a circle or interval, fixed fiber frequency"),
    ("schrodinger", "1D Schrödinger operator -h^2 d^2 + V"),
    ("torus", "plane waves on the flat circle"),
    ("carleman: circle | sphere | concave_sphere | flat", "geodesic-sphere normal forms for bracket scans"),
    ("factorize", "periodic symbol factorization Q ~ A (hD_n - i B)"),
    ("lacunarity: identity | resolvent_ratio", "cutoff operators for lacunarity fits"),
];

fn resolve_config(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.exists() {
        return Ok(path);
    }
    let name = path.to_string_lossy().to_string();
    let wanted = if name.ends_with(".toml") { name.clone() } else { format!("{name}.toml") };
    match BUNDLED.iter().find(|(n, _)| *n == wanted) {
        Some((n, text)) => {
            let dir = std::env::temp_dir().join("semilab-bundled");
            fs::create_dir_all(&dir).map_err(|e| CliError::Io(e.to_string()))?;
            let p = dir.join(n);
            fs::write(&p, text).map_err(|e| CliError::Io(e.to_string()))?;
            Ok(p)
        }
        None => Err(CliError::Io(format!("{name}: no such file or bundled config"))),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let path = resolve_config(config)?;
            let outcome = run::run_file(&path, out.as_deref(), cli.workers)?;
            let m = &outcome.manifest;
            println!("run '{}' -> {}", m.name, outcome.dir.display());
            for t in &m.timings {
                println!("  {:<24} {:>9.3} s", t.stage, t.seconds);
            }
            for p in &m.provenance {
                println!("  {:<24} = {}", p.quantity, p.value);
            }
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Verify { dir } => {
            let result = verify::verify(&dir);
            let checks = match &result {
                Ok(c) => c.as_slice(),
                Err(CliError::Verify { checks, .. }) => checks.as_slice(),
                Err(_) => &[],
            };
            for c in checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.invariant, c.detail);
            }
            result.map(|_| ())
        }
        Command::Plot { dir } => {
            let plots = plot::plots_for_dir(&dir).map_err(|e| CliError::stage("plots", e))?;
            for (name, svg) in plots {
                fs::write(dir.join(&name), svg).map_err(|e| CliError::Io(e.to_string()))?;
                println!("{}", dir.join(name).display());
            }
            Ok(())
        }
        Command::ListModels => {
            for (name, about) in MODELS {
                println!("{name:<52} {about}");
            }
            println!();
            for (name, _) in BUNDLED {
                println!("bundled config: {name}");
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.workers == Some(0) {
        eprintln!("schema error: --workers / SEMILAB_WORKERS must be at least 1");
        return 2;
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
