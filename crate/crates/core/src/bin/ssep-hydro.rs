use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssep_hydro::harness::{self, Overrides, StudyConfig, StudyKind};

#[derive(Parser)]
#[command(
    name = "ssep-hydro",
    version,
    about = "Studies of boundary-driven exclusion with non-reversible boundary blocks"
)]
struct Cli {
    /// Print the available studies and exit.
    #[arg(long)]
    list_studies: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; falls back to SSEP_HYDRO_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the available studies.
    ListStudies,
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

fn list() {
    for k in StudyKind::ALL {
        println!("{:<14} {}", k.name(), k.summary());
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("SSEP_HYDRO_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("SSEP_HYDRO_THREADS must be a positive integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn load(path: &PathBuf) -> Result<StudyConfig, ExitCode> {
    let cfg = StudyConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })?;
    cfg.resolve().map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(2)
    })?;
    Ok(cfg)
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    thread_flag: Option<usize>,
) -> ExitCode {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match threads(thread_flag) {
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Ok(Some(0)) => {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(2);
        }
        Ok(Some(k)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
            {
                eprintln!("error: cannot start {k} threads: {e}");
                return ExitCode::from(1);
            }
        }
        Ok(None) => {}
    }
    let overrides = Overrides { seed, out };
    let dir = harness::output_dir(&cfg, &overrides);
    let result = harness::execute(&cfg, &overrides).and_then(|r| {
        harness::write_outputs(&r, &dir)?;
        Ok(r)
    });
    match result {
        Ok(r) => {
            for v in &r.report.verdicts {
                let mark = if v.pass { "PASS" } else { "FAIL" };
                println!("{mark} {} {}: {:.4e}", v.criterion, v.check, v.observed);
            }
            println!("report written to {}", dir.join("report.json").display());
            if r.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: study {} failed: {e}", cfg.study);
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_studies {
        list();
        return ExitCode::SUCCESS;
    }
    match cli.command {
        Some(Command::Run {
            config,
            seed,
            out,
            threads,
        }) => run(config, seed, out, threads),
        Some(Command::ListStudies) => {
            list();
            ExitCode::SUCCESS
        }
        Some(Command::Validate { config }) => match load(&config) {
            Ok(cfg) => {
                println!("{}: valid {} config", config.display(), cfg.study);
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        None => {
            eprintln!("error: no command given; try `ssep-hydro --help`");
            ExitCode::from(2)
        }
    }
}
