//! Table builders shared by the subcommands and the recipes.

use imdd_vbc::capacity::vbc_capacity;
use imdd_vbc::sim::{sweep_rates, SweepOptions};
use imdd_vbc::{
    imdd_capacity_proxy, optimize_params, run_simulation, ChannelParams, NoiseModel, ParamGrid,
    RateReport, Scheme, SimConfig, SimReport, SweepPoint, VbcParams,
};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{join, sig6, Table};

/// Parses `start:stop:step` (inclusive), a comma list, or a single value.
pub fn parse_range(text: &str) -> CliResult<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("`{s}` is not a number in range `{text}`")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(CliError::Usage(format!("range `{text}` needs start <= stop and step > 0")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            // round to the step's resolution so 0.1 steps print cleanly
            Ok((0..=count).map(|i| round12(start + i as f64 * step)).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(CliError::Usage(format!("cannot parse range `{text}`"))),
    }
}

/// Parses code rates `r4,r5,...` (each a decimal or `k/n`) for the pipes
/// ending at `top`, or `pipe:rate` pairs.
pub fn parse_rates(text: &str, top: usize) -> CliResult<Vec<(usize, f64)>> {
    let bad = |item: &str| CliError::Usage(format!("cannot parse code rate `{item}` in `{text}`"));
    let rate = |item: &str| -> CliResult<f64> {
        let v = match item.split_once('/') {
            Some((k, n)) => {
                let (k, n): (f64, f64) = (k.trim().parse().map_err(|_| bad(item))?, n.trim().parse().map_err(|_| bad(item))?);
                k / n
            }
            None => item.trim().parse().map_err(|_| bad(item))?,
        };
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(CliError::Usage(format!("code rate `{item}` is outside [0, 1]")))
        }
    };
    let items: Vec<&str> = text.split(',').filter(|s| !s.trim().is_empty()).collect();
    if items.len() > top + 1 {
        return Err(CliError::Usage(format!("{} code rates for {} pipes", items.len(), top + 1)));
    }
    let first = top + 1 - items.len();
    items
        .iter()
        .enumerate()
        .map(|(j, item)| match item.split_once(':') {
            Some((pipe, r)) => Ok((pipe.trim().parse().map_err(|_| bad(item))?, rate(r)?)),
            None => Ok((first + j, rate(item)?)),
        })
        .collect()
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

pub fn noise_table(ch: &ChannelParams, vbc: &VbcParams, joint: bool) -> CliResult<Table> {
    let model = NoiseModel::build(ch, vbc)?;
    let n = model.n_bits() as usize;
    Ok(if joint {
        let mut t = Table::new(&["index", "bit_pattern", "probability"]);
        for (w, &p) in model.joint_pmf().iter().enumerate() {
            t.push(vec![w.to_string(), format!("{w:0n$b}"), sig6(p)]);
        }
        t
    } else {
        let mut t = Table::new(&["pipe", "alpha"]);
        for (i, &a) in model.marginals().iter().enumerate() {
            t.push(vec![i.to_string(), sig6(a)]);
        }
        t
    })
}

pub const RATE_HEADER: [&str; 8] = ["snr_db", "scheme", "q", "beta", "gamma", "total_rate", "active_pipes", "p_values"];

/// Parameter grid from the config, or the default grid for `ch`.
pub fn grid_for(cfg: &Config, ch: &ChannelParams) -> CliResult<ParamGrid> {
    let default = ParamGrid::default_for(ch);
    let betas = cfg.rate.betas.clone().unwrap_or(default.betas);
    let gammas = cfg.rate.gammas.clone().unwrap_or(default.gammas);
    Ok(ParamGrid::new(betas, gammas)?)
}

/// Best rate of `scheme` at `snr_db` over the parameter grid (or at the
/// fixed `(beta, gamma)`).
pub fn best_rate(
    cfg: &Config,
    scheme: Scheme,
    q: usize,
    snr_db: f64,
    ratio: f64,
    fixed: Option<(f64, f64)>,
) -> CliResult<RateReport> {
    let ch = ChannelParams::from_snr_db(snr_db, ratio, cfg.channel.sigma)?;
    let grid = match fixed {
        Some((b, g)) => ParamGrid::single(b, g),
        None => grid_for(cfg, &ch)?,
    };
    Ok(optimize_params(&ch, &cfg.scheme(scheme, q), &grid)?)
}

pub fn rate_row(snr_db: f64, r: &RateReport) -> Vec<String> {
    let active = r.active_pipes();
    vec![
        sig6(snr_db),
        r.scheme.to_string(),
        r.q.to_string(),
        sig6(r.beta),
        sig6(r.gamma),
        sig6(r.total),
        join(&active, |i| i.to_string()),
        join(&active, |&i| sig6(r.allocation.probs()[i])),
    ]
}

pub fn rate_table(
    cfg: &Config,
    schemes: &[(Scheme, usize)],
    snrs: &[f64],
    ratio: f64,
    fixed: Option<(f64, f64)>,
) -> CliResult<Table> {
    let mut t = Table::new(&RATE_HEADER);
    for &snr in snrs {
        for &(scheme, q) in schemes {
            let r = best_rate(cfg, scheme, q, snr, ratio, fixed)?;
            t.push(rate_row(snr, &r));
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMode {
    Vbc,
    Imdd,
}

pub const CAPACITY_HEADER: [&str; 6] = ["snr_db", "mode", "beta", "gamma", "N", "capacity_bits"];

pub fn capacity_row(cfg: &Config, ch: &ChannelParams, mode: CapacityMode, beta: f64, gamma: f64) -> CliResult<Vec<String>> {
    Ok(match mode {
        CapacityMode::Imdd => {
            let r = imdd_capacity_proxy(ch, &cfg.proxy())?;
            vec![sig6(ch.snr_db()), "imdd".into(), String::new(), String::new(), String::new(), sig6(r.capacity)]
        }
        CapacityMode::Vbc => {
            let vbc = VbcParams::new(ch, beta, gamma)?;
            let r = vbc_capacity(ch, &vbc, &cfg.solver())?;
            vec![
                sig6(ch.snr_db()),
                "vbc".into(),
                sig6(beta),
                sig6(gamma),
                vbc.n_bits().to_string(),
                sig6(r.capacity),
            ]
        }
    })
}

pub const SIM_HEADER: [&str; 6] = ["pipe", "alpha", "capacity", "code_rate", "ber", "fer"];

/// Per-pipe rows followed by an `overall` row (summed capacity and rate).
pub fn sim_table(r: &SimReport) -> Table {
    let mut t = Table::new(&SIM_HEADER);
    for p in &r.pipes {
        t.push(vec![
            p.pipe.to_string(),
            sig6(p.alpha),
            sig6(p.capacity),
            sig6(p.code_rate),
            sig6(p.ber),
            sig6(p.fer),
        ]);
    }
    let capacity: f64 = r.pipes.iter().map(|p| p.capacity).sum();
    t.push(vec![
        "overall".into(),
        String::new(),
        sig6(capacity),
        sig6(r.rate),
        sig6(r.overall_ber),
        sig6(r.overall_fer),
    ]);
    t
}

pub fn simulate(cfg: &SimConfig) -> CliResult<(SimReport, Table)> {
    let report = run_simulation(cfg)?;
    let table = sim_table(&report);
    Ok((report, table))
}

pub const SWEEP_HEADER: [&str; 10] = [
    "snr_db",
    "scheme",
    "n",
    "beta",
    "gamma",
    "theoretical_rate",
    "achieved_rate",
    "info_lengths",
    "overall_fer",
    "frames",
];

pub fn sweep_table(template: &SimConfig, snrs: &[f64], opts: &SweepOptions) -> CliResult<(Vec<SweepPoint>, Table)> {
    let points = sweep_rates(template, snrs, opts)?;
    let mut t = Table::new(&SWEEP_HEADER);
    for p in &points {
        t.push(vec![
            sig6(p.snr_db),
            template.scheme.to_string(),
            template.n.to_string(),
            sig6(p.beta),
            sig6(p.gamma),
            sig6(p.theoretical_rate),
            sig6(p.achieved_rate),
            join(&p.info_lengths, |k| k.to_string()),
            sig6(p.overall_fer),
            p.frames.to_string(),
        ]);
    }
    Ok((points, t))
}

/// Simulation template from the config's `[simulation]` section.
pub fn sim_template(cfg: &Config, ch: ChannelParams, vbc: VbcParams, scheme: Scheme, rates: &[(usize, f64)]) -> CliResult<SimConfig> {
    let sim = &cfg.simulation;
    let mut s = SimConfig::from_rates(ch, vbc, scheme, sim.n, rates)?;
    s.frames = sim.frames;
    s.seed = cfg.seed;
    s.genie = sim.genie;
    s.erasure_fill = sim.erasure_fill;
    s.check = sim.check;
    s.q = cfg.rate.q;
    Ok(s)
}
