//! Command-line front end. Exit status: 0 feasible or valid, 2 infeasible,
//! 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use modsynth::library_file::{library_to_json, LibraryDocument};
use modsynth::report::{history_csv, path_csv, torque_csv, torque_profile_svg};
use modsynth::result_file::{load_composition, load_result};
use modsynth::{emit_urdf, load_task, resolve_library, CompositionDocument, ParallelEvaluator, ResultDocument};
use modsynth_core::dynamics::Payload;
use modsynth_core::planner::{plan, shortcut, verify_path_torques, Timing};
use modsynth_core::synthesis::{check_composition, synthesize_observed, verify, SearchMode};
use modsynth_core::{build_chain, Composition, LibraryConfig};
use nalgebra::Vector3;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "modsynth", version, about = "Task-based synthesis of modular manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Conventional,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a composition that solves a task file.
    Synth {
        task: PathBuf,
        /// Overrides the task file's mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Overrides the GA seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Evaluation threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Library file; overrides the task file and MODSYNTH_LIBRARY.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Point payload at the tool frame (kg); overrides the task file.
        #[arg(long)]
        payload: Option<f64>,
        /// No per-generation log.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Check a given composition against a task.
    Check {
        task: PathBuf,
        composition: PathBuf,
        #[arg(long)]
        library: Option<PathBuf>,
        /// Also write the verification report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan a collision-free motion between two TSLs of a synthesis result.
    Plan {
        result: PathBuf,
        /// Start TSL index (0-based).
        #[arg(long)]
        from: usize,
        /// Goal TSL index (0-based).
        #[arg(long)]
        to: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the planner seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write URDF for a composition file.
    Export {
        composition: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "modular_arm")]
        name: String,
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Print the effective library (defaults, MODSYNTH_LIBRARY or --library) as JSON.
    Library {
        #[arg(long)]
        library: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Synth {
            task,
            mode,
            seed,
            out,
            workers,
            library,
            payload,
            quiet,
        } => synth(&task, mode, seed, &out, workers, library.as_deref(), payload, quiet),
        Command::Check {
            task,
            composition,
            library,
            out,
        } => check(&task, &composition, library.as_deref(), out.as_deref()),
        Command::Plan {
            result,
            from,
            to,
            out,
            seed,
        } => plan_motion(&result, from, to, &out, seed),
        Command::Export {
            composition,
            out,
            name,
            library,
        } => export(&composition, out.as_deref(), &name, library.as_deref()),
        Command::Library { library } => {
            say!("{}", library_to_json(&library_for(library.as_deref(), None)?));
            Ok(true)
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn csv_to(path: &Path, f: impl FnOnce(fs::File) -> csv::Result<()>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(file).with_context(|| format!("writing {}", path.display()))
}

/// Command line first, then the task file's `library`, then the environment.
fn library_for(cli: Option<&Path>, task: Option<&Path>) -> Result<LibraryConfig> {
    Ok(resolve_library(cli.or(task))?.0)
}

#[allow(clippy::too_many_arguments)]
fn synth(
    task_path: &Path,
    mode: Option<Mode>,
    seed: Option<u64>,
    out: &Path,
    workers: Option<usize>,
    library: Option<&Path>,
    payload: Option<f64>,
    quiet: bool,
) -> Result<bool> {
    let mut loaded = load_task(task_path)?;
    let library = library_for(library, loaded.library_path.as_deref())?;
    if let Some(m) = mode {
        loaded.ga.mode = match m {
            Mode::Full => SearchMode::Full,
            Mode::Conventional => SearchMode::ConventionalOnly,
        };
        loaded.document.mode = loaded.ga.mode;
    }
    if let Some(s) = seed {
        loaded.ga.rng_seed = s;
    }
    if let Some(mass) = payload {
        if !(mass >= 0.0) {
            bail!("--payload must be non-negative");
        }
        let p = Payload {
            mass,
            offset: Vector3::zeros(),
        };
        loaded.task.payload = Some(p);
        loaded.document.payload = Some(p);
    }
    loaded.document.ga = Some(loaded.ga);

    let evaluator = ParallelEvaluator::new(workers).context("building the worker pool")?;
    let population = loaded.ga.population;
    let result = synthesize_observed(&loaded.task, &loaded.scene, &library, &loaded.ga, &evaluator, |g| {
        if !quiet {
            eprintln!(
                "gen {:>4}  best {:>14.6}  mean {:>14.6}  feasible {}/{}",
                g.generation, g.best, g.mean, g.feasible, population
            );
        }
    })?;
    let mut composition = result.composition.clone();
    composition.base_pose = loaded.task.base_pose;
    let verification = verify(&composition, &result.ik_solutions, &loaded.task, &loaded.scene, &library)?;
    let doc = ResultDocument::new(&loaded, &library, &loaded.ga, &result, verification);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("result.json"), doc.to_json())?;
    write(
        &out.join("composition.json"),
        serde_json::to_string_pretty(&CompositionDocument::new(&result.composition))? + "\n",
    )?;
    let name = loaded.document.name.as_deref().unwrap_or("modular_arm");
    write(&out.join("model.urdf"), emit_urdf(&result.composition, &result.chain, name))?;
    csv_to(&out.join("history.csv"), |f| history_csv(&result.history, f))?;
    csv_to(&out.join("torques.csv"), |f| {
        torque_csv(&result.torques, &result.chain.effort_limits(), f)
    })?;

    say!("composition  {}", result.composition.notation());
    say!("feasible     {}", doc.feasible);
    say!("objective    {:.6} N·m", result.objective_value);
    say!("fitness      {:.6}", result.fitness);
    say!("evaluations  {}", result.evaluations);
    say!("written to   {}", out.display());
    Ok(doc.feasible)
}

fn check(task_path: &Path, composition_path: &Path, library: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let loaded = load_task(task_path)?;
    let library = library_for(library, loaded.library_path.as_deref())?;
    let composition = load_composition(composition_path)?;
    let (solutions, verification) =
        check_composition(&composition, &loaded.task, &loaded.scene, &library, &loaded.ga)?;

    say!("composition  {}", composition.notation());
    if !verification.assembly.ok() {
        say!("assembly     violates {:?}", verification.assembly.rules());
    }
    for (j, q) in solutions.iter().enumerate() {
        let ori = verification.orientation_residuals[j].map_or("-".to_string(), |r| format!("{r:.2e}"));
        say!(
            "tsl {j}  pos {:.2e} m  ori {ori} rad  collision {:.4} m  q {:?}",
            verification.position_residuals[j], verification.collision[j], q
        );
    }
    for v in &verification.torque.violations {
        say!(
            "torque       joint {} at tsl {}: {:.3} N·m over limit {:.3}",
            v.joint + 1,
            v.sample,
            v.torque,
            v.limit
        );
    }
    say!("objective    {:.6} N·m", verification.objective);
    say!("feasible     {}", verification.feasible);
    if let Some(path) = out {
        let report = serde_json::json!({
            "format_version": modsynth::FORMAT_VERSION,
            "composition": CompositionDocument::new(&composition),
            "ik_solutions": solutions,
            "verification": verification,
        });
        write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(verification.feasible)
}

fn plan_motion(result_path: &Path, from: usize, to: usize, out: &Path, seed: Option<u64>) -> Result<bool> {
    let doc = load_result(result_path)?;
    let origin = result_path.parent().unwrap_or(Path::new("."));
    let loaded = doc.task.resolve(origin)?;
    let library = LibraryDocument::clone(&doc.library).into_config();
    let count = doc.ik_solutions.len();
    if from >= count || to >= count {
        bail!("TSL index out of range: the result has {count} TSLs");
    }
    let mut composition: Composition = doc.composition.composition();
    composition.base_pose = loaded.task.base_pose;
    let chain = build_chain(&composition, &library).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut settings = loaded.planner;
    if let Some(s) = seed {
        settings.rng_seed = s;
    }
    let raw = match plan(&chain, &loaded.scene, &doc.ik_solutions[from], &doc.ik_solutions[to], &settings) {
        Ok(p) => p,
        Err(e) => {
            say!("no path: {e}");
            return Ok(false);
        }
    };
    let path = shortcut(&raw, &chain, &loaded.scene, settings.shortcut_attempts, settings.rng_seed);
    let timing = Timing {
        gravity: loaded.task.gravity,
        payload: loaded.task.payload,
        ..Timing::default()
    };
    let profile = verify_path_torques(&chain, &path, &timing);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    csv_to(&out.join("path.csv"), |f| path_csv(&path.waypoints, Some(&profile.times), f))?;
    let limits = chain.effort_limits();
    csv_to(&out.join("path_torques.csv"), |f| torque_csv(&profile.torques, &limits, f))?;
    write(
        &out.join("torque_profile.svg"),
        torque_profile_svg(&profile.times, &profile.torques, &limits),
    )?;

    say!("waypoints    {} (before shortcutting {})", path.waypoints.len(), raw.waypoints.len());
    say!("length       {:.4} rad", path.length());
    say!("duration     {:.3} s", profile.times.last().copied().unwrap_or(0.0));
    for (i, m) in profile.report.margins.iter().enumerate() {
        say!("joint {}      torque margin {:.3} N·m", i + 1, m);
    }
    say!("torques ok   {}", profile.report.ok());
    Ok(profile.report.ok())
}

fn export(composition_path: &Path, out: Option<&Path>, name: &str, library: Option<&Path>) -> Result<bool> {
    let library = library_for(library, None)?;
    let composition = load_composition(composition_path)?;
    let chain = build_chain(&composition, &library).map_err(|e| anyhow::anyhow!("{e}"))?;
    let urdf = emit_urdf(&composition, &chain, name);
    match out {
        Some(path) => write(path, urdf)?,
        None => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(urdf.as_bytes());
        }
    }
    Ok(true)
}
