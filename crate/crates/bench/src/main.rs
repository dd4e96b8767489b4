use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use slabdens::estimators::{
    build_slabs, dual_solve, fit_greedy, fit_intersection, soft_threshold, EstimateRecord, TraceSummary,
};
use slabdens::fnspace::{gram, project_cap};
use slabdens::{DensityName, EstimatorConfig, IntervalMethod, IntervalTag, Sample, UnionBound};
use slabdens_bench::experiments::{doubling, run_coverage, run_figure2, run_rates, CoverageReport};
use slabdens_bench::{BasisPreset, CoverageConfig, Figure2Config, RateBasis, RatesConfig};

#[derive(Parser)]
#[command(name = "slabdens", version, about = "Density estimation by projection onto confidence slabs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimate to a sample file.
    Estimate(EstimateArgs),
    /// Run a simulation study.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Algo {
    Greedy,
    Intersection,
    Soft,
    Dual,
}

#[derive(Args)]
struct EstimateArgs {
    /// One observation per line.
    #[arg(long)]
    data: PathBuf,
    /// Preset (histogram:8, haar:4, trig:16, kernel:64, data-gaussian:16) or JSON descriptor.
    #[arg(long)]
    basis: BasisPreset,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value = "theorem1")]
    method: IntervalTag,
    #[arg(long, default_value = "all")]
    union: UnionBound,
    #[arg(long, value_enum, default_value = "greedy")]
    algo: Algo,
    /// Density bound for the coefficient cap (orthonormal families).
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Mean squared distance of three estimators on three test densities.
    Figure2 {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint coverage frequency of an interval method.
    Coverage {
        #[arg(long)]
        density: DensityName,
        #[arg(long)]
        basis: BasisPreset,
        #[arg(long)]
        method: IntervalTag,
        #[arg(long, default_value = "all")]
        union: UnionBound,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Risk against sample size for the soft-threshold estimator.
    Rates {
        #[arg(long, default_value = "cosine")]
        density: DensityName,
        #[arg(long, default_value = "trig")]
        basis: RateBasis,
        #[arg(long, default_value_t = 128)]
        n_min: usize,
        #[arg(long, default_value_t = 4096)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let sample = Sample::read_text(text.as_bytes())?;
    let (family, cert) = args.basis.build(Some(&sample))?;
    let method = IntervalMethod::new(args.method, args.union)?;
    let mut config = EstimatorConfig::new(method, args.eps)?;
    if let Some(c) = args.cap {
        config = config.with_cap(c)?;
    }
    let mut trace = None;
    let g = match args.algo {
        Algo::Greedy => {
            let (g, t) = fit_greedy(&sample, &family, &cert, &config)?;
            trace = Some(TraceSummary::from(&t));
            g
        }
        Algo::Intersection => fit_intersection(&sample, &family, &cert, &config)?,
        Algo::Soft => soft_threshold(&sample, &family, &cert, &config)?,
        Algo::Dual => {
            let set = build_slabs(&sample, &family, &cert, &config)?;
            dual_solve(&set.slabs, &gram(&family)?)?
        }
    };
    let g = match (args.algo, config.cap_c) {
        (Algo::Soft, _) | (_, None) => g,
        (_, Some(c)) => project_cap(&family, &g, c)?,
    };
    let record = EstimateRecord {
        family: family.descriptor().clone(),
        coefficients: g.into_coefficients(),
        config,
        algorithm: match args.algo {
            Algo::Greedy => "greedy",
            Algo::Intersection => "intersection",
            Algo::Soft => "soft",
            Algo::Dual => "dual",
        }
        .into(),
        trace,
    };
    let mut w = create(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &record)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn bench(cmd: BenchCommand) -> anyhow::Result<()> {
    match cmd {
        BenchCommand::Figure2 { n, reps, eps, seed, out } => {
            let report = run_figure2(&Figure2Config { n, reps, eps, seed, ..Figure2Config::default() })?;
            let mut w = create(&out)?;
            report.write_csv(&mut w)?;
            w.flush()?;
            for r in &report.rows {
                eprintln!("{:<10} {:<20} mean_d2 = {:.4}", r.density, r.estimator, r.mean_d2);
            }
        }
        BenchCommand::Coverage { density, basis, method, union, eps, n, reps, seed, out } => {
            let method = IntervalMethod::new(method, union)?;
            let report = run_coverage(&CoverageConfig { density, basis, method, eps, n, reps, seed })?;
            eprintln!(
                "coverage {:.3} [{:.3}, {:.3}] over {} replicates",
                report.coverage, report.band_lo, report.band_hi, report.reps
            );
            let mut w = create(&out)?;
            CoverageReport::write_csv(&[report], &mut w)?;
            w.flush()?;
        }
        BenchCommand::Rates { density, basis, n_min, n_max, reps, seed, out } => {
            let ns = doubling(n_min, n_max);
            if ns.len() < 4 {
                bail!("n-min..n-max must span at least 4 doublings");
            }
            let study = run_rates(&RatesConfig { density, basis, ns, reps, seed })?;
            eprintln!("fitted slope {:.3}", study.fitted_slope);
            let mut w = create(&out)?;
            study.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Estimate(args) => estimate(args),
        Command::Bench(cmd) => bench(cmd),
    }
}
