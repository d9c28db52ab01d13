use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qillume::experiments::{emit, preset, render, run_sweep_with, Format, SweepConfig, PRESETS};

#[derive(Parser)]
#[command(
    name = "qillume",
    version,
    about = "Quantum illumination parameter sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML sweep file
    Run {
        /// Preset name (see `qillume list`) or path to a TOML config
        target: String,
        /// Output file; stdout when neither this nor the config sets one
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output encoding
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: Format,
        /// Worker threads (QILLUME_THREADS overrides)
        #[arg(long)]
        parallel: Option<usize>,
        /// Write every assembled rho0/rho1 pair as sparse CSV triplets
        #[arg(long)]
        dump_matrices: bool,
        /// Refine p* by bisection below the grid step
        #[arg(long)]
        refine_pstar: bool,
        /// Record per-row wall time
        #[arg(long)]
        timings: bool,
    },
    /// List built-in presets
    List,
    /// Print a preset as an editable TOML config
    Show { name: String },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: qillume::Error| e.to_string())
}

fn load(target: &str) -> qillume::Result<SweepConfig> {
    if let Some(cfg) = preset(target) {
        return Ok(cfg);
    }
    let path = Path::new(target);
    if !path.exists() {
        return Err(qillume::Error::Config(format!(
            "{target:?} is neither a preset nor a readable file"
        )));
    }
    SweepConfig::from_path(path)
}

fn dump_dir(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            p.with_file_name(format!("{stem}_matrices"))
        }
        None => PathBuf::from("matrices"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (name, about) in PRESETS {
                println!("{name:<26} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match preset(&name).map(|c| c.to_toml_string()) {
            Some(Ok(text)) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Some(Err(e)) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
            None => {
                eprintln!("error: unknown preset {name:?}");
                ExitCode::from(1)
            }
        },
        Command::Run {
            target,
            out,
            format,
            parallel,
            dump_matrices,
            refine_pstar,
            timings,
        } => {
            let mut cfg = match load(&target) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(n) = parallel {
                cfg.parallelism = n;
            }
            cfg.refine_p_star |= refine_pstar;
            cfg.timings |= timings;
            let out = out.or_else(|| cfg.output_path.clone());
            let dump = dump_matrices.then(|| dump_dir(out.as_deref()));
            let rows = match run_sweep_with(&cfg, dump.as_deref()) {
                Ok(rows) => rows,
                Err(qillume::Error::Config(m)) => {
                    eprintln!("error: config: {m}");
                    return ExitCode::from(1);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let written = match &out {
                Some(path) => emit(&rows, format, path),
                None => render(&rows, format).and_then(|text| {
                    std::io::stdout()
                        .write_all(text.as_bytes())
                        .map_err(|e| qillume::Error::Io {
                            path: "<stdout>".into(),
                            message: e.to_string(),
                        })
                }),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            let failed = rows.iter().filter(|r| r.failed()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows failed", rows.len());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
    }
}
