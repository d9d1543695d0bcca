use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imdd_vbc::sim::SweepOptions;
use imdd_vbc::{ChannelParams, Scheme, SimConfig, SimReport, VbcParams};
use serde::Serialize;
use vbc_cli::commands::{
    capacity_row, grid_for, noise_table, parse_range, parse_rates, rate_table, sim_template, simulate, sweep_table,
    CapacityMode, CAPACITY_HEADER,
};
use vbc_cli::output::{write_bytes, write_json, Table};
use vbc_cli::recipes::{listing, parse_overrides, run_recipe};
use vbc_cli::{CliError, CliResult, Config};

/// Binary decomposition of the optical intensity channel: noise statistics,
/// achievable rates, capacities and polar-coded simulation.
#[derive(Parser)]
#[command(name = "vbc", version)]
struct Cli {
    /// TOML configuration; absent sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for relative output paths and recipe files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChannelArgs {
    /// `A/sigma` in dB (`A = sigma 10^(dB/10)`).
    #[arg(long)]
    peak_db: Option<f64>,
    /// `E/A`.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Noise-bit marginals, or the joint pmf with --joint.
    Noise {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        joint: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best achievable rate of a scheme over a range of SNRs.
    Rate {
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        q: Option<usize>,
        /// `start:stop:step`, a comma list or one value.
        #[arg(long)]
        peak_db_range: Option<String>,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity of the quantized channel or of the IM/DD reference.
    Capacity {
        #[arg(long, value_enum, default_value = "vbc")]
        mode: CapacityMode,
        #[arg(long)]
        peak_db_range: Option<String>,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Polar-coded Monte Carlo simulation.
    Simulate {
        /// `id` or `sd-bsc`.
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Pick (beta, gamma) and code lengths to meet the FER target.
        #[arg(long)]
        auto_params: bool,
        /// Code rates of the highest usable pipes, e.g. `23/64,47/64,63/64`,
        /// or `pipe:rate` pairs.
        #[arg(long)]
        rates: Option<String>,
        /// Rebuild carries from the transmitted bits.
        #[arg(long)]
        genie: bool,
        /// Aim for FER 1e-2 with --auto-params.
        #[arg(long)]
        deep: bool,
        /// CSV path; the JSON report goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a published table or figure dataset.
    #[command(after_help = recipe_help())]
    Recipe {
        name: String,
        /// `key=value` overrides of the recipe defaults.
        overrides: Vec<String>,
    },
}

fn recipe_help() -> String {
    format!("Recipes:\n{}", listing())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let out_dir = &cli.out_dir;
    match cli.command {
        Command::Noise { channel, joint, out } => {
            apply(&mut cfg, &channel)?;
            let ch = cfg.channel()?;
            let table = noise_table(&ch, &cfg.vbc(&ch)?, joint)?;
            emit(&table, out_dir, out.as_deref())
        }
        Command::Rate {
            scheme,
            q,
            peak_db_range,
            channel,
            out,
        } => {
            apply(&mut cfg, &channel)?;
            let snrs = snr_list(&cfg, peak_db_range.as_deref())?;
            let scheme = scheme.unwrap_or(cfg.rate.scheme);
            let q = q.unwrap_or(cfg.rate.q);
            let fixed = match (channel.beta, channel.gamma) {
                (Some(b), Some(g)) => Some((b, g)),
                (None, None) => None,
                _ => return Err(CliError::Usage("give both --beta and --gamma, or neither".into())),
            };
            let table = rate_table(&cfg, &[(scheme, q)], &snrs, cfg.channel.ratio, fixed)?;
            emit(&table, out_dir, out.as_deref())
        }
        Command::Capacity {
            mode,
            peak_db_range,
            channel,
            out,
        } => {
            apply(&mut cfg, &channel)?;
            let mut table = Table::new(&CAPACITY_HEADER);
            for snr in snr_list(&cfg, peak_db_range.as_deref())? {
                let ch = ChannelParams::from_snr_db(snr, cfg.channel.ratio, cfg.channel.sigma)?;
                table.push(capacity_row(&cfg, &ch, mode, cfg.vbc.beta, cfg.vbc.gamma)?);
            }
            emit(&table, out_dir, out.as_deref())
        }
        Command::Simulate {
            scheme,
            n,
            frames,
            channel,
            auto_params,
            rates,
            genie,
            deep,
            out,
        } => {
            apply(&mut cfg, &channel)?;
            if let Some(n) = n {
                cfg.simulation.n = n;
            }
            if let Some(frames) = frames {
                cfg.simulation.frames = frames;
            }
            cfg.simulation.genie |= genie;
            if deep {
                cfg.simulation.target_fer = 1e-2;
            }
            cfg.validate()?;
            let scheme = scheme.unwrap_or(cfg.rate.scheme);
            if !matches!(scheme, Scheme::Id | Scheme::SdBsc) {
                return Err(CliError::Usage(format!("only id and sd-bsc can be simulated, not {scheme}")));
            }
            let ch = cfg.channel()?;
            let vbc = cfg.vbc(&ch)?;
            let sim = if auto_params {
                if rates.is_some() {
                    return Err(CliError::Usage("--rates and --auto-params exclude each other".into()));
                }
                let template = sim_template(&cfg, ch, vbc, scheme, &[])?;
                let opts = SweepOptions {
                    ratio: cfg.channel.ratio,
                    target_fer: cfg.simulation.target_fer,
                    grid: match (&cfg.rate.betas, &cfg.rate.gammas) {
                        (None, None) => None,
                        _ => Some(grid_for(&cfg, &ch)?),
                    },
                };
                let (points, _) = sweep_table(&template, &[ch.snr_db()], &opts)?;
                let point = &points[0];
                let mut sim = template;
                sim.channel = ch;
                sim.vbc = VbcParams::new(&ch, point.beta, point.gamma)?;
                sim.info_lengths = point.info_lengths.clone();
                sim
            } else {
                let text = rates.ok_or_else(|| CliError::Usage("give --rates or --auto-params".into()))?;
                // highest pipe the peak constraint lets carry data
                let top = ((vbc.gamma() * ch.peak()).log2().floor().max(0.0) as usize).min(vbc.n_bits() as usize - 1);
                let pairs = parse_rates(&text, top)?;
                sim_template(&cfg, ch, vbc, scheme, &pairs)?
            };
            let (report, table) = simulate(&sim)?;
            let csv = resolve(out_dir, out.as_deref().unwrap_or(Path::new("simulate.csv")));
            table.write(&csv)?;
            write_json(
                &csv.with_extension("json"),
                &SimulationRecord {
                    seed: cfg.seed,
                    config: &sim,
                    report: &report,
                },
            )?;
            eprintln!(
                "wrote {} (overall FER {}, rate {:.4})",
                csv.display(),
                report.overall_fer,
                report.rate
            );
            Ok(())
        }
        Command::Recipe { name, overrides } => {
            let overrides = parse_overrides(&overrides)?;
            let output = run_recipe(&name, &cfg, &overrides, out_dir)?;
            for (path, _) in &output.tables {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    seed: u64,
    config: &'a SimConfig,
    report: &'a SimReport,
}

/// Command-line channel flags shadow the config.
fn apply(cfg: &mut Config, args: &ChannelArgs) -> CliResult<()> {
    if let Some(db) = args.peak_db {
        cfg.channel.peak = None;
        cfg.channel.peak_db = Some(db);
    }
    if let Some(r) = args.ratio {
        cfg.channel.ratio = r;
    }
    if let Some(b) = args.beta {
        cfg.vbc.beta = b;
    }
    if let Some(g) = args.gamma {
        cfg.vbc.gamma = g;
    }
    cfg.validate()
}

fn snr_list(cfg: &Config, range: Option<&str>) -> CliResult<Vec<f64>> {
    match range {
        Some(r) => parse_range(r),
        None => Ok(vec![cfg.channel()?.snr_db()]),
    }
}

fn resolve(out_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    }
}

/// Writes the table to `out` (under the output directory) or stdout.
fn emit(table: &Table, out_dir: &Path, out: Option<&Path>) -> CliResult<()> {
    let bytes = table.to_csv()?;
    match out {
        Some(path) => write_bytes(&resolve(out_dir, path), &bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Usage(format!("stdout: {e}")))
        }
    }
}
