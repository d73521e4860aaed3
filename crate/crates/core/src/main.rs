use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use archopt::fixtures::CASE_STUDIES;
use archopt::harness::{self, ProblemConfig, BRF_LEVELS, EVOLUTION_LEVELS, FUZZINESS_LEVELS};
use archopt::refactoring::DEFAULT_SEQUENCE_LENGTH;

#[derive(Parser)]
#[command(
    name = "archopt",
    version,
    about = "Many-objective refactoring of architecture models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run NSGA-II over a configuration grid. Grid dimensions left
    /// unspecified take every eligible value.
    Run {
        /// Case study: `ttbs`, `cocome`, `all`, or a JSON model path.
        #[arg(long, default_value = "all")]
        case: String,
        #[arg(long, value_enum)]
        brf: Option<OnOff>,
        /// Detection threshold; 0 disables antipattern detection.
        #[arg(long)]
        fuzziness: Option<f64>,
        #[arg(long)]
        evolutions: Option<usize>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Recompute reference frontiers and indicator tables from persisted fronts.
    Indicators {
        #[arg(long, default_value = "all")]
        case: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print the size of the solution space.
    Space {
        #[arg(long, default_value = "all")]
        case: String,
        #[arg(long, default_value_t = DEFAULT_SEQUENCE_LENGTH)]
        length: usize,
    },
    /// Load and validate a model.
    Validate {
        #[arg(long, default_value = "all")]
        case: String,
    },
}

fn cases(case: &str) -> Vec<String> {
    if case.eq_ignore_ascii_case("all") {
        CASE_STUDIES.iter().map(|s| s.to_string()).collect()
    } else {
        vec![case.to_string()]
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            case,
            brf,
            fuzziness,
            evolutions,
            runs,
            seed,
            jobs,
            out,
        } => {
            let brf_levels = match brf {
                Some(OnOff::On) => vec![true],
                Some(OnOff::Off) => vec![false],
                None => BRF_LEVELS.to_vec(),
            };
            let fuzz_levels = match fuzziness {
                Some(0.0) => vec![None],
                Some(f) if f > 0.0 && f <= 1.0 => vec![Some(f)],
                Some(f) => {
                    eprintln!("fuzziness {f} outside [0,1]");
                    return ExitCode::from(2);
                }
                None => FUZZINESS_LEVELS.to_vec(),
            };
            let evo_levels = evolutions
                .map(|e| vec![e])
                .unwrap_or_else(|| EVOLUTION_LEVELS.to_vec());
            let configs: Vec<ProblemConfig> = cases(&case)
                .iter()
                .flat_map(|c| harness::grid(c, &brf_levels, &fuzz_levels, &evo_levels, runs))
                .collect();
            if runs == 0 {
                eprintln!("nothing to run");
                return ExitCode::from(2);
            }
            match harness::run_grid(&configs, seed, jobs, Some(&out)) {
                Ok(results) => {
                    let failed: usize = results.iter().map(|r| r.failed_runs()).sum();
                    for r in &results {
                        println!(
                            "{}: {} configs, reference front of {} points, {} failed runs",
                            r.case_study,
                            r.configs.len(),
                            r.reference.len(),
                            r.failed_runs()
                        );
                    }
                    if failed > 0 {
                        ExitCode::from(1)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e @ harness::HarnessError::NothingToRun)
                | Err(e @ harness::HarnessError::UnknownCase(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Indicators { case, out } => {
            let mut status = ExitCode::SUCCESS;
            for c in cases(&case) {
                match harness::recompute_indicators(&out, &c) {
                    Ok(r) => {
                        for row in &r.indicators {
                            println!(
                                "{},{},{},{},{},{}",
                                c, row.brf, row.maxeval, row.probpas, row.q_indicator, row.value
                            );
                        }
                    }
                    Err(e) => {
                        error!("{c}: {e}");
                        status = ExitCode::from(1);
                    }
                }
            }
            status
        }
        Command::Space { case, length } => {
            if length == 0 {
                eprintln!("length must be at least 1");
                return ExitCode::from(2);
            }
            let mut status = ExitCode::SUCCESS;
            for c in cases(&case) {
                match harness::load_case(&c) {
                    Ok(model) => {
                        let (omega, factors) = harness::solution_space_size(&model, length);
                        for f in &factors {
                            println!(
                                "{c} {} n={} C(n,{length})={}",
                                f.kind, f.targets, f.combinations
                            );
                        }
                        println!("{c} omega={omega} ({:.3e})", harness::to_f64(&omega));
                    }
                    Err(e) => {
                        eprintln!("{c}: {e}");
                        status = ExitCode::from(2);
                    }
                }
            }
            status
        }
        Command::Validate { case } => {
            let mut status = ExitCode::SUCCESS;
            for c in cases(&case) {
                match harness::load_case(&c)
                    .and_then(|m| m.validate().map(|_| m).map_err(Into::into))
                {
                    Ok(m) => println!(
                        "{c}: ok, {} components, {} nodes, {} links, {} scenarios",
                        m.components.len(),
                        m.nodes.len(),
                        m.links.len(),
                        m.scenarios.len()
                    ),
                    Err(e) => {
                        eprintln!("{c}: {e}");
                        status = ExitCode::from(1);
                    }
                }
            }
            status
        }
    }
}
