use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use avsfe::config::{self, RunConfig, ScenarioName};
use avsfe::study::{run_study, StudyResult};
use avsfe::Error;

#[derive(Parser)]
#[command(name = "avsfe", version, about = "AVS-FE solver for 2D convection-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the refinement study described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every shipped study config.
    PaperSuite {
        #[command(flatten)]
        common: Common,
    },
    /// Print the available scenarios.
    ListScenarios,
}

#[derive(Args, Clone)]
struct Common {
    /// Worker threads (falls back to AVSFE_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Force sequential dense kernels so repeated runs are bitwise identical.
    #[arg(long)]
    deterministic: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of uniform refinements.
    #[arg(long)]
    max_refine: Option<usize>,
}

fn thread_count(flag: Option<usize>, cfg: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag.or(cfg) {
        return Ok(Some(n));
    }
    match std::env::var("AVSFE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::config(None, format!("AVSFE_THREADS must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn run_one(mut cfg: RunConfig, common: &Common, out: PathBuf) -> Result<StudyResult, Error> {
    if let Some(k) = common.max_refine {
        cfg.refinements = k;
    }
    cfg.deterministic |= common.deterministic;
    cfg.out_dir = Some(out);
    let threads = thread_count(common.threads, cfg.threads)?;
    if cfg.deterministic {
        faer::set_global_parallelism(faer::Par::Seq);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(None, format!("cannot start thread pool: {e}")))?;
    let result = pool.install(|| run_study(&cfg))?;
    print_summary(&result);
    Ok(result)
}

fn print_summary(r: &StudyResult) {
    println!("== {}", r.label);
    for l in &r.levels {
        println!(
            "level {:>2}  h {:.4e}  dofs {:>8}  max|u| {:.4e}  eta {:.4e}  {}  {:.2}s",
            l.level, l.h, l.dofs, l.max_abs_u, l.eta, l.report.kind, l.seconds
        );
    }
    if let Some(rates) = &r.rates {
        println!("fitted slopes: {rates}");
    }
    if let Some(dir) = &r.out_dir {
        println!("artifacts in {}", dir.display());
    }
}

fn list_scenarios() {
    let rows = [
        (ScenarioName::Manufactured, "§3.1", "pe", "smooth exact solution with layers at x=1, y=1; D = 1/pe, b = (1,1)"),
        (ScenarioName::Homogeneous, "§3.2", "pe", "f = 1, D = 1/pe, b = (1,1); boundary layers of width 1/pe"),
        (ScenarioName::Checkerboard, "§3.3", "pe, mask", "D = pe on masked quadrants, 1/pe elsewhere; f = 1, b = (1,1)"),
        (ScenarioName::VariableConvection, "§3.4", "pe", "b = ((1-2x)/2, 0), internal layer on x = 1/2"),
        (ScenarioName::Polynomial, "test", "pe", "u = x(1-x)y(1-y), D = 1/pe, b = (1,1); reproduced exactly for p >= 2"),
    ];
    for (name, section, params, text) in rows {
        println!("{name} ({section})\n    parameters: {params}\n    {text}");
    }
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_config() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            list_scenarios();
            ExitCode::SUCCESS
        }
        Command::Run { config, common } => {
            let cfg = match RunConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = common
                .out
                .clone()
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.label));
            match run_one(cfg, &common, out) {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => exit_for(&e),
            }
        }
        Command::PaperSuite { common } => {
            let root = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            for (label, _) in config::SHIPPED {
                let cfg = match config::shipped(label) {
                    Ok(c) => c,
                    Err(e) => return exit_for(&e),
                };
                if let Err(e) = run_one(cfg, &common, root.join(label)) {
                    return exit_for(&e);
                }
            }
            ExitCode::SUCCESS
        }
    }
}
