//! `repint`: run repeated-interaction scenarios from JSON configs.
//!
//! Exit codes: 0 success, 1 I/O or usage error, 2 config schema
//! violation (the diagnostic names the offending field), 3 numerical
//! failure or invariant violation during the run.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use repint_core::error::Error;
use repint_core::scenario::{parse_config, preset, preset_catalog, run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "repint",
    about = "Repeated-interaction scenario runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs and write their CSV outputs.
    Run(RunArgs),
    /// List the built-in presets, or print one as a JSON config.
    ListPresets {
        /// Print the full JSON config of this preset instead of the catalog.
        #[arg(long, value_name = "NAME")]
        json: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Paths to scenario JSON configs.
    configs: Vec<PathBuf>,
    /// Run a built-in preset by name (see `list-presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override the seed of every config in this invocation.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV outputs (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Validate the configs and exit without running anything.
    #[arg(long)]
    validate_only: bool,
    /// Number of scenarios to run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Map a core error onto the documented process exit code.
fn exit_for(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::InvalidState(_) => 2,
        Error::Numerical(_) | Error::Unsupported(_) => 3,
    }
}

struct Job {
    label: String,
    config: ScenarioConfig,
}

fn load_jobs(args: &RunArgs) -> Result<Vec<Job>, (u8, String)> {
    let mut jobs = Vec::new();
    if let Some(name) = &args.preset {
        let config = preset(name).map_err(|e| (exit_for(&e), format!("--preset {name}: {e}")))?;
        jobs.push(Job {
            label: format!("preset:{name}"),
            config,
        });
    }
    for path in &args.configs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| (1, format!("{}: {e}", path.display())))?;
        let config =
            parse_config(&text).map_err(|e| (exit_for(&e), format!("{}: {e}", path.display())))?;
        jobs.push(Job {
            label: path.display().to_string(),
            config,
        });
    }
    if jobs.is_empty() {
        return Err((1, "no configs given; pass a path or --preset NAME".into()));
    }
    if let Some(seed) = args.seed {
        for job in &mut jobs {
            job.config.seed = seed;
        }
    }
    Ok(jobs)
}

/// Run one scenario: write its CSV under `out`, print its report to
/// stdout, and fail if any inline invariant check failed.
fn run_job(job: &Job, out: &Path, io_lock: &Mutex<()>) -> Result<(), (u8, String)> {
    let output = run_scenario(&job.config)
        .map_err(|e| (exit_for(&e), format!("{}: {e}", job.label)))?;
    let csv_path = out.join(&job.config.output);
    let report = serde_json::to_string_pretty(&output.report)
        .map_err(|e| (1, format!("{}: report serialization: {e}", job.label)))?;
    {
        // Serialize all file writes and stdout output across workers.
        let _guard = io_lock.lock().unwrap();
        if let Some(parent) = csv_path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| (1, format!("{}: {e}", parent.display())))?;
            }
        }
        std::fs::write(&csv_path, output.csv.as_bytes())
            .map_err(|e| (1, format!("{}: {e}", csv_path.display())))?;
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{report}");
    }
    if let Some(check) = output.report.checks.iter().find(|c| !c.passed) {
        return Err((
            3,
            format!("{}: invariant `{}` failed: {}", job.label, check.name, check.detail),
        ));
    }
    Ok(())
}

fn run_command(args: &RunArgs) -> Result<(), (u8, String)> {
    let jobs = load_jobs(args)?;
    if args.validate_only {
        for job in &jobs {
            println!("ok: {}", job.label);
        }
        return Ok(());
    }
    let workers = args.jobs.max(1).min(jobs.len());
    let io_lock = Mutex::new(());
    if workers == 1 {
        for job in &jobs {
            run_job(job, &args.out, &io_lock)?;
        }
        return Ok(());
    }
    // Fixed worker pool over a shared index; exit status aggregates the
    // worst failure across all jobs.
    let next = std::sync::atomic::AtomicUsize::new(0);
    let failures: Mutex<Vec<(u8, String)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                if let Err(fail) = run_job(job, &args.out, &io_lock) {
                    failures.lock().unwrap().push(fail);
                }
            });
        }
    });
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by(|a, b| b.0.cmp(&a.0));
    match failures.into_iter().next() {
        None => Ok(()),
        Some(worst) => Err(worst),
    }
}

fn list_presets(json: Option<&str>) -> Result<(), (u8, String)> {
    match json {
        Some(name) => {
            let config = preset(name).map_err(|e| (exit_for(&e), format!("{name}: {e}")))?;
            let text = config
                .to_json()
                .map_err(|e| (1, format!("{name}: {e}")))?;
            println!("{text}");
        }
        None => {
            for (name, description) in preset_catalog() {
                println!("{name:24} {description}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::ListPresets { json } => list_presets(json.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
