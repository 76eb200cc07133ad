use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rcmdp_harness::checks;
use rcmdp_harness::config::{ExperimentConfig, Mode};
use rcmdp_harness::experiment::{self, Experiment};
use rcmdp_harness::{output, HarnessError, Result};

/// Robust constrained MDP training, robustness sweeps and invariant checks.
#[derive(Parser)]
#[command(name = "rcmdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run primal-dual training and write the per-iteration log.
    Train(Common),
    /// Train, then evaluate the final policy on every distorted kernel.
    Sweep(Common),
    /// Run the invariant suite on the configured instance.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        Ok(cfg)
    }

    fn base_dir(&self) -> &Path {
        self.config.parent().unwrap_or(Path::new("."))
    }
}

fn train(args: &Common, then_sweep: bool) -> Result<()> {
    let cfg = args.load()?;
    let exp = Experiment::from_config(&cfg, args.base_dir())?;
    // fail on a non-rectangular set before spending time on training
    let n_groups = if then_sweep { Some(exp.n_groups()?) } else { None };
    let outcome = exp.train()?;
    let run_path = cfg.output.dir.join(&cfg.output.run_csv);
    output::write_run_log(&outcome.log, &run_path)?;
    println!("wrote {} ({} rows)", run_path.display(), outcome.log.rows.len());

    if let Some(last) = outcome.log.rows.last() {
        println!("final V = {:.6}, lagrangian = {:.6}", last.value, last.lagrangian);
    }
    let avg = outcome.log.average_constraints();
    if !avg.is_empty() {
        let shown: Vec<String> = avg.iter().map(|v| format!("{v:.6}")).collect();
        println!("average constraint values: {}", shown.join(", "));
    }

    if let Some(n_groups) = n_groups {
        let table = exp.sweep(&outcome.policy)?;
        let sweep_path = cfg.output.dir.join(&cfg.output.sweep_csv);
        output::write_sweep(&table, n_groups, &sweep_path)?;
        println!("wrote {} ({} rows)", sweep_path.display(), table.rows.len());
    }
    Ok(())
}

fn check(args: &Common) -> Result<()> {
    let cfg = args.load()?;
    let (spec, nominal) = experiment::load_problem(&cfg.problem, args.base_dir())?;
    let set = experiment::build_set(&cfg.uncertainty, nominal)?;
    let results = checks::run_checks(&spec, &set, cfg.seed);
    for r in &results {
        let tag = if r.passed() { "ok  " } else { "FAIL" };
        println!("{tag} {:<50} worst {:.3e} (tolerance {:.0e})", r.name, r.worst, r.tolerance);
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(HarnessError::ChecksFailed {
            failed,
            total: results.len(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a, false),
        Command::Sweep(a) => train(a, true),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
