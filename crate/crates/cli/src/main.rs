use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rsma_core::asymptotics::{ergodic_common_rate, ergodic_private_rate, AsymptoticParams};
use rsma_core::channel::{db_to_linear, dbm_to_watts, estimation_error_variance, ChannelStats};
use rsma_core::harness::{preset_with_pt, run_sweep, write_csv, write_json, SweepSpec};
use rsma_core::precoding::PowerSplit;
use rsma_core::specfun::DEFAULT_TOL;

mod verify;

#[derive(Parser)]
#[command(name = "rsma-sim", version, about = "Rate-splitting downlink simulator for matched-filter massive MIMO")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "RSMA_SIM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write per-point ergodic rates.
    Sweep(SweepArgs),
    /// Tabulate the large-system ergodic rates over power splits.
    Analytic(AnalyticArgs),
    /// Run the convergence and MGF checks; exits non-zero on any failure.
    Verify(verify::VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
#[command(group = clap::ArgGroup::new("power"))]
struct SweepArgs {
    /// Built-in scenario: fig3, fig4, fig5 or fig6.
    #[arg(long, group = "source")]
    preset: Option<String>,
    /// JSON sweep description.
    #[arg(long, group = "source")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fading trials per grid point and drop.
    #[arg(long)]
    trials: Option<usize>,
    /// User drops (macro-cell scenarios).
    #[arg(long)]
    drops: Option<usize>,
    /// Transmit power in dB relative to the unit noise power.
    #[arg(long, group = "power", allow_hyphen_values = true)]
    pt_db: Option<f64>,
    /// Transmit power in dBm (macro-cell scenarios).
    #[arg(long, group = "power", allow_hyphen_values = true)]
    pt_dbm: Option<f64>,
    /// Training symbols for the CSIT estimate.
    #[arg(long)]
    n_train: Option<u32>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, default_value_t = 5.0)]
    theta: f64,
    #[arg(long, default_value_t = 100)]
    users: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Transmit power in dB relative to the noise power.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pt_db: f64,
    /// Training symbols; perfect CSIT when absent.
    #[arg(long)]
    n_train: Option<u32>,
    /// Power splits to tabulate.
    #[arg(long, value_delimiter = ',', default_values_t = (0..=10).map(|i| i as f64 / 10.0).collect::<Vec<_>>())]
    rho: Vec<f64>,
}

fn build_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let pt = args.pt_db.map(db_to_linear).or(args.pt_dbm.map(dbm_to_watts));
    let mut spec = match (&args.preset, &args.config) {
        (Some(name), _) => preset_with_pt(name, pt)?,
        (None, Some(path)) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let mut spec: SweepSpec =
                serde_json::from_reader(file).with_context(|| format!("parsing {}", path.display()))?;
            if let Some(pt) = pt {
                spec.fixed.pt = pt;
            }
            spec
        }
        (None, None) => bail!("either --preset or --config is required"),
    };
    if let Some(seed) = args.seed {
        spec.fixed.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials_per_point = trials;
    }
    if let Some(drops) = args.drops {
        spec.drops = drops;
    }
    if let Some(n) = args.n_train {
        spec.fixed.training_symbols = Some(n);
    }
    spec.validate()?;
    Ok(spec)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = build_spec(args)?;
    let rows = run_sweep(&spec)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match args.format {
        Format::Csv => write_csv(&rows, &mut out)?,
        Format::Json => write_json(&spec, &rows, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn analytic(args: &AnalyticArgs) -> Result<()> {
    let pt = db_to_linear(args.pt_db);
    let antennas = (args.theta * args.users as f64).round() as usize;
    let err = match args.n_train {
        Some(n) => estimation_error_variance(pt, n)?,
        None => 0.0,
    };
    let stats = ChannelStats::symmetric(antennas, args.users, args.beta, err)?;
    if (stats.theta() - args.theta).abs() > 1e-9 {
        bail!("theta * users must be an integer antenna count");
    }
    let mut out = io::stdout().lock();
    writeln!(out, "{:>6} {:>14} {:>14} {:>14}", "rho", "common", "private", "esr")?;
    for &r in &args.rho {
        let p = AsymptoticParams::from_stats(&stats, 0, args.sigma2, pt, PowerSplit::new(r)?)?;
        let common = ergodic_common_rate(&p, DEFAULT_TOL)?;
        let private = ergodic_private_rate(&p);
        let esr = common + args.users as f64 * private;
        writeln!(out, "{r:>6.3} {common:>14.8} {private:>14.8} {esr:>14.8}")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Analytic(a) => analytic(a).map(|_| true),
        Command::Verify(a) => verify::run(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
