use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};

use ris_core::complexity::{table1_rows, table_csv};
use ris_core::experiments::{
    frequency_sweep, nris_sweep, run_scenario, summary_csv, sweep_csv, write_outputs, write_sweep, SweepKind,
};
use ris_core::fspl::{fspl_report, DEFAULT_REPORT_SAMPLES};
use ris_core::optimizer::OptimizerRegistry;
use ris_core::scenario::{load_scenario, resolve_scenario, Scale, Scenario};

#[derive(Parser)]
#[command(name = "ris-sim", version, about = "Rate optimization experiments for RIS-aided MIMO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a scenario file and write trace/summary CSVs and a gnuplot script.
    Run(RunArgs),
    /// Print multiplication counts.
    Complexity(ComplexityArgs),
    /// Print the FSPL applicability metric for a scenario's geometry.
    Fspl(FsplArgs),
    /// Sweep the carrier frequency or the RIS element count.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use paper-scale array sizes and trial counts.
    #[arg(long)]
    paper_scale: bool,
}

impl Common {
    fn scale(&self) -> Scale {
        if self.paper_scale {
            Scale::Paper
        } else {
            Scale::Desk
        }
    }

    fn apply(&self, s: &mut Scenario) {
        if let Some(t) = self.trials {
            s.trials = t;
        }
        if let Some(seed) = self.seed {
            s.base_seed = seed;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or path to a TOML scenario.
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    common: Common,
    /// Output directory [default: out/<scenario>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    /// The paper-scale comparison table.
    #[arg(long, required = true)]
    table1: bool,
    /// Also write the CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FsplArgs {
    /// TOML scenario whose [geometry] is evaluated.
    #[arg(long)]
    geometry: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPORT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("axis").required(true).args(["freq", "nris"])))]
struct SweepArgs {
    /// Frequencies in Hz, comma separated.
    #[arg(long, value_delimiter = ',')]
    freq: Vec<f64>,
    /// Square RIS element counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    nris: Vec<usize>,
    /// Base scenario.
    #[arg(long, default_value = "outdoor-asym-near-tx")]
    scenario: String,
    /// RIS side length in meters for frequency sweeps.
    #[arg(long, default_value_t = 1.0)]
    aperture: f64,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "out/sweep")]
    out: PathBuf,
}

fn write_or_print(csv: &str, out: Option<&Path>) -> Result<()> {
    print!("{csv}");
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(args: RunArgs, registry: &OptimizerRegistry) -> Result<()> {
    let mut scenario = resolve_scenario(&args.scenario, args.common.scale())?;
    args.common.apply(&mut scenario);
    scenario.validate(registry)?;
    let result = run_scenario(&scenario, registry)?;
    let dir = args.out.unwrap_or_else(|| Path::new("out").join(&scenario.name));
    write_outputs(&result, &dir)?;
    print!("{}", summary_csv(&result));
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn fspl(args: FsplArgs) -> Result<()> {
    let scale = if args.paper_scale { Scale::Paper } else { Scale::Desk };
    let scenario = load_scenario(&args.geometry, scale)?;
    let r = fspl_report(&scenario.geometry, args.samples, args.seed)?;
    println!("n_ris,beta_dir_total,beta_indir_total_bound,t,e_estimate,samples");
    println!(
        "{},{:e},{:e},{},{},{}",
        scenario.geometry.n_ris(),
        r.beta_dir_total,
        r.beta_indir_total_bound,
        r.t,
        r.e_estimate,
        r.samples_used
    );
    if r.t > 1.0 {
        eprintln!("T > 1: the direct link dominates; the RIS adds little");
    } else {
        eprintln!("T <= 1: the RIS path is at least as strong as the direct link");
    }
    Ok(())
}

fn sweep(args: SweepArgs, registry: &OptimizerRegistry) -> Result<()> {
    let mut base = resolve_scenario(&args.scenario, args.common.scale())?;
    args.common.apply(&mut base);
    base.validate(registry)?;
    let (kind, points) = match (args.freq.is_empty(), args.nris.is_empty()) {
        (false, true) => (SweepKind::Frequency, frequency_sweep(&base, &args.freq, args.aperture, registry)?),
        (true, false) => (SweepKind::Elements, nris_sweep(&base, &args.nris, registry)?),
        _ => bail!("give exactly one of --freq and --nris"),
    };
    write_sweep(kind, &points, &args.out)?;
    print!("{}", sweep_csv(kind, &points));
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let registry = OptimizerRegistry::default();
    let outcome = match cli.command {
        Command::Run(a) => run(a, &registry),
        Command::Complexity(a) => {
            debug_assert!(a.table1);
            write_or_print(&table_csv(&table1_rows()), a.out.as_deref())
        }
        Command::Fspl(a) => fspl(a),
        Command::Sweep(a) => sweep(a, &registry),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
