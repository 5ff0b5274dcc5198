use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jitkit::experiment::{
    cmd_layout, cmd_run, cmd_sweep, cmd_validate, resolve_scenario, ExperimentConfig, Overrides, Validation,
};
use jitkit::{ExperimentError, LayoutError, PlannerConfig, StrategyKind};

/// Just-in-time kitting: plan kits, arrange trays, simulate the line.
#[derive(Parser)]
#[command(name = "jitkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file. Exit 0 if valid, 1 with a violation list if not.
    Validate { scenario: PathBuf },
    /// Simulate every strategy in an experiment config and write metrics.csv.
    Run {
        /// Experiment TOML, or bundled:example_experiment
        config: String,
        #[command(flatten)]
        common: Common,
        /// Also write trace.jsonl with every processed event.
        #[arg(long)]
        trace: bool,
    },
    /// Run the MAT × MTTF grid of an experiment config.
    Sweep {
        /// Experiment TOML with a [sweep] section, or bundled:shopfloor_sweep
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Arrange the parts of the given tasks on the tray.
    Layout {
        /// Scenario JSON, or bundled:stool / bundled:table_12task
        scenario: String,
        #[arg(required = true)]
        tasks: Vec<String>,
        /// Take [planner] settings from this experiment TOML.
        #[arg(long)]
        config: Option<String>,
        /// Solver seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write layout.svg.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Base seed; replication r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this strategy.
    #[arg(long)]
    strategy: Option<StrategyKind>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<usize>,
}

impl Common {
    fn overrides(&self, trace: bool) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            strategy: self.strategy,
            replications: self.reps,
            trace,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let ExperimentError::Layout(LayoutError::Infeasible { .. }) = e {
                eprintln!("best layout found was written anyway");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(spec: &str, o: &Overrides) -> Result<(ExperimentConfig, PathBuf), ExperimentError> {
    let (mut c, base) = ExperimentConfig::load_spec(spec)?;
    c.apply(o);
    Ok((c, base))
}

fn dispatch(cmd: Command) -> Result<u8, ExperimentError> {
    match cmd {
        Command::Validate { scenario } => validate(&scenario),
        Command::Run { config, common, trace } => {
            let (c, base) = load(&config, &common.overrides(trace))?;
            let out = cmd_run(&c, &base, trace)?;
            println!(
                "{:<16} {:>5} {:>12} {:>10} {:>12} {:>10} {:>8}",
                "strategy", "runs", "total_s", "sd", "idle_s", "sd", "kits"
            );
            for s in &out.summary {
                println!(
                    "{:<16} {:>5} {:>12.1} {:>10.1} {:>12.1} {:>10.1} {:>8.1}",
                    s.strategy.as_str(),
                    s.runs,
                    s.mean_total_s,
                    s.std_total_s,
                    s.mean_idle_s,
                    s.std_idle_s,
                    s.mean_kits
                );
            }
            print_files(&out.files);
            Ok(0)
        }
        Command::Sweep { config, common } => {
            let (c, base) = load(&config, &common.overrides(false))?;
            let out = cmd_sweep(&c, &base)?;
            for cell in &out.cells {
                println!("mat={} mttf={}", cell.cell.mat, cell.cell.mttf);
                for s in &cell.strategies {
                    println!(
                        "  {:<16} total {:>9.1} ± {:<8.1} idle {:>9.1} ± {:<8.1} kits {:.1}",
                        s.strategy.as_str(),
                        s.mean_total,
                        s.std_total,
                        s.mean_idle,
                        s.std_idle,
                        s.mean_kits
                    );
                }
                for cmp in &cell.comparisons {
                    println!(
                        "  optimized vs {:<16} total {:>+6.1}% [{:.1}, {:.1}] s  idle {:>+6.1}% [{:.1}, {:.1}] s",
                        cmp.baseline.as_str(),
                        cmp.total_improvement_pct,
                        cmp.total_diff_ci.lo,
                        cmp.total_diff_ci.hi,
                        cmp.idle_improvement_pct,
                        cmp.idle_diff_ci.lo,
                        cmp.idle_diff_ci.hi
                    );
                }
            }
            print_files(&out.files);
            Ok(0)
        }
        Command::Layout {
            scenario,
            tasks,
            config,
            seed,
            out,
            svg,
        } => {
            let planner = match config {
                Some(spec) => ExperimentConfig::load_spec(&spec)?.0.planner,
                None => PlannerConfig::default(),
            };
            let mut planner = planner;
            if let Some(s) = seed {
                planner.ce.seed = s;
            }
            let scenario = resolve_scenario(&scenario, Path::new(""))?;
            let r = cmd_layout(&scenario, &tasks, &planner, &out, svg)?;
            let t = r.terms;
            println!("d_same  {:.3}", t.d_same);
            println!("d_diff  {:.3}", t.d_diff);
            println!("z       {:.3}", t.overlap);
            println!("cost    {:.3}", t.cost(&planner.fitness_weights));
            println!("iterations {}  attempts {}", r.kit.best_score_trace.len(), r.kit.attempts);
            print_files(&r.files);
            Ok(0)
        }
    }
}

fn validate(path: &Path) -> Result<u8, ExperimentError> {
    match cmd_validate(path)? {
        Validation::Valid(s) => {
            println!(
                "{}: valid ({} tasks, {} parts)",
                path.display(),
                s.graph.len(),
                s.catalog.parts().count()
            );
            Ok(0)
        }
        Validation::Invalid(v) => {
            eprintln!("{}: invalid", path.display());
            for line in v {
                eprintln!("  {line}");
            }
            Ok(1)
        }
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}
