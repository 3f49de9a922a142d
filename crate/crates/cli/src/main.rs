use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ncflab_core::harness::{self, Experiment, ExperimentConfig, ResultRecord};
use ncflab_core::interp::{self, BoundaryMajorant};
use ncflab_core::{io, sqmax, LabError};

#[derive(Parser)]
#[command(name = "ncflab", version, about = "Numerical lab for operator-valued Fourier analysis")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bochner-Riesz means on a rational quantum torus.
    RieszQt {
        #[arg(long, default_value = "1/5")]
        theta: String,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 10)]
        spectrum_radius: i64,
        #[arg(long, default_value_t = 0.3)]
        lambda: f64,
    },
    /// L_p ratio sweep of Bochner-Riesz multipliers on operator grids.
    RieszGrid {
        #[arg(long, default_value_t = 0.25)]
        lambda: f64,
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        r_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "focusing,diagonal-embedding,random-matrix,smooth")]
        families: Vec<String>,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Directional and Kakeya maximal experiments.
    #[command(subcommand)]
    Kakeya(KakeyaCmd),
    /// Audits of the dyadic and angular decomposition.
    #[command(subcommand)]
    Audit(AuditCmd),
    /// Randomized checks of matrix inequalities.
    Fuzz {
        #[arg(long, value_delimiter = ',', default_value = "convexity,trace-cs,holder-sq,monotone,khintchine")]
        kinds: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,8")]
        dims: Vec<usize>,
    },
    /// Two-sided estimate of the maximal norm of positive matrices.
    Maxnorm {
        /// JSON file with a matrix or a list of matrices of `[re, im]` pairs.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        p: f64,
    },
    /// Interpolation constant M(t) for boundary majorants.
    Interp {
        /// `const:c`, `poly:C:alpha` or `gauss:C:beta`.
        #[arg(long)]
        m0: String,
        #[arg(long)]
        m1: String,
        /// Number of interior points k/(n+1).
        #[arg(long, default_value_t = 9)]
        t_grid: usize,
    },
    /// Interpolation exponents for complex Bochner-Riesz orders.
    RieszExponents {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.4,0.5")]
        lambda_list: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
    },
    /// Run experiments from a TOML configuration; exits 1 if any check fails.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and NCFLAB_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List registered experiment ids.
    List,
}

#[derive(Subcommand)]
enum KakeyaCmd {
    Scaling {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256")]
        n_list: Vec<u32>,
        #[arg(long, default_value = "radial")]
        family: String,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    KeyInequality {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        m_list: Vec<u32>,
        #[arg(long, default_value = "radial")]
        family: String,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    Sandwich {
        #[arg(long, default_value_t = 12)]
        trials: usize,
        #[arg(long, default_value_t = 128)]
        grid: usize,
    },
}

#[derive(Subcommand)]
enum AuditCmd {
    Overlap {
        #[arg(long, value_delimiter = ',', default_value = "22,24,26")]
        k_list: Vec<u32>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        threshold: i64,
    },
    KernelL1 {
        #[arg(long, value_delimiter = ',', default_value = "6,7,8,9,10,11,12,13,14")]
        k_list: Vec<u32>,
    },
    MultiplierSum {
        #[arg(long, value_delimiter = ',', default_value = "4,5,6,7,8,9,10")]
        m_list: Vec<u32>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    Partition(PartitionArgs),
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,14")]
    k_list: Vec<u32>,
}

fn experiment(cmd: &Cmd) -> Result<Option<Experiment>> {
    use harness::*;
    let e = match cmd {
        Cmd::RieszQt { theta, seeds, spectrum_radius, lambda } => Experiment::QtRiesz(QtRieszParams {
            theta: theta.clone(),
            seeds: *seeds,
            spectrum_radius: *spectrum_radius,
            lambda: *lambda,
            ..Default::default()
        }),
        Cmd::RieszGrid { lambda, p, r_list, families, grid, n } => Experiment::RieszGrid(RieszGridParams {
            lambda: *lambda,
            p: *p,
            r_list: r_list.clone(),
            families: families.clone(),
            grid: *grid,
            n: *n,
            ..Default::default()
        }),
        Cmd::Kakeya(KakeyaCmd::Scaling { n_list, family, grid }) => Experiment::KakeyaScaling(KakeyaScalingParams {
            n_list: n_list.clone(),
            family: family.clone(),
            grid: *grid,
            ..Default::default()
        }),
        Cmd::Kakeya(KakeyaCmd::KeyInequality { m_list, family, grid }) => {
            Experiment::KakeyaKey(KakeyaKeyParams { m_list: m_list.clone(), family: family.clone(), grid: *grid })
        }
        Cmd::Kakeya(KakeyaCmd::Sandwich { trials, grid }) => Experiment::KakeyaSandwich(SandwichParams { trials: *trials, grid: *grid }),
        Cmd::Audit(AuditCmd::Overlap { k_list, samples, threshold }) => Experiment::Overlap(OverlapParams {
            k_list: k_list.clone(),
            samples: *samples,
            threshold: *threshold,
            ..Default::default()
        }),
        Cmd::Audit(AuditCmd::KernelL1 { k_list }) => Experiment::KernelL1(KernelL1Params { k_list: k_list.clone(), ..Default::default() }),
        Cmd::Audit(AuditCmd::MultiplierSum { m_list, samples }) => Experiment::MultiplierSum(MultiplierSumParams {
            m_list: m_list.clone(),
            samples: *samples,
            ..Default::default()
        }),
        Cmd::Audit(AuditCmd::Partition(a)) => Experiment::Partition(PartitionParams {
            points: a.points,
            k_list: a.k_list.clone(),
            ..Default::default()
        }),
        Cmd::Fuzz { kinds, trials, dims } => Experiment::Fuzz(FuzzParams {
            kinds: kinds.clone(),
            trials: *trials,
            dims: dims.clone(),
            ..Default::default()
        }),
        Cmd::RieszExponents { lambda_list, eps } => Experiment::RieszExponents(RieszExponentParams { lambdas: lambda_list.clone(), eps: *eps }),
        _ => return Ok(None),
    };
    e.validate()?;
    Ok(Some(e))
}

fn emit(records: &[ResultRecord], format: Format) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(records)?),
        Format::Csv => print!("{}", harness::records_csv(records)?),
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    if let Some(exp) = experiment(&cli.cmd)? {
        let rec = harness::run_one(&exp, None, cli.seed)?;
        emit(std::slice::from_ref(&rec), cli.format)?;
        return Ok(ExitCode::SUCCESS);
    }
    match cli.cmd {
        Cmd::Maxnorm { input, p } => {
            let xs = io::read_matrices::<f64>(&input).with_context(|| format!("reading {}", input.display()))?;
            let est = sqmax::maxnorm_positive(&xs, p, cli.seed)?;
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Cmd::Interp { m0, m1, t_grid } => {
            let (a, b) = (BoundaryMajorant::parse(&m0)?, BoundaryMajorant::parse(&m1)?);
            let rows = interp::t_grid(t_grid)
                .into_iter()
                .map(|t| interp::interp_constant(&a, &b, t))
                .collect::<ncflab_core::Result<Vec<_>>>()?;
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
                Format::Csv => print!("{}", io::csv_string(&rows)?),
            }
        }
        Cmd::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let records = harness::run(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.output_root());
            harness::write_records(&dir, &records)?;
            for r in &records {
                let failed: Vec<_> = r.outcome.failed_checks().iter().map(|c| c.name.clone()).collect();
                let status = if r.passed { "PASS".to_string() } else { format!("FAIL ({})", failed.join(", ")) };
                eprintln!("{:<18} {:>9.2}s  {status}", r.experiment, r.wall_time_s);
            }
            emit(&records, cli.format)?;
            if !records.iter().all(|r| r.passed) {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::List => {
            for id in harness::REGISTRY {
                println!("{id}");
            }
        }
        _ => unreachable!("handled by experiment()"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<LabError>(), Some(LabError::Usage(_)) | Some(LabError::InvalidInput(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
