//! Named experiments that regenerate each published table and figure
//! dataset. Every recipe writes its CSV files and a manifest into the output
//! directory.

use std::path::{Path, PathBuf};

use imdd_vbc::sim::SweepOptions;
use imdd_vbc::{ChannelParams, NoiseModel, Scheme, StateSelection, VbcParams};

use crate::commands::{
    best_rate, capacity_row, grid_for, noise_table, parse_range, rate_table, simulate, sim_template,
    sweep_table, CapacityMode, CAPACITY_HEADER,
};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{join, sig6, write_json, Manifest, Table};

/// Tables of one recipe, keyed by file-name suffix.
type Parts = Vec<(&'static str, Table)>;

/// All state bits below the pipe.
const ALL_LOWER: usize = usize::MAX;

pub struct Recipe {
    pub name: &'static str,
    pub about: &'static str,
    /// Override keys the recipe understands.
    pub keys: &'static [&'static str],
    run: fn(&Ctx) -> CliResult<Parts>,
}

pub const RECIPES: &[Recipe] = &[
    Recipe { name: "table1", about: "noise-bit marginals", keys: &["peak", "beta", "gamma"], run: table1 },
    Recipe { name: "table2", about: "pipe crossovers across the rate plateau", keys: &["snr"], run: table2 },
    Recipe { name: "table3", about: "joint and conditional noise bits", keys: &["peak", "beta", "gamma"], run: table3 },
    Recipe { name: "table4", about: "capacity of the quantized channel vs scale", keys: &["peak", "beta", "gamma", "imdd"], run: table4 },
    Recipe { name: "table5", about: "polar-coded independent decoding", keys: &["n", "frames", "rates", "genie"], run: table5 },
    Recipe { name: "table6", about: "polar-coded state-flip decoding", keys: &["n", "frames", "rates", "genie"], run: table6 },
    Recipe { name: "fig3a", about: "independent-decoding rate, peak only", keys: &["snr", "capacity"], run: fig3a },
    Recipe { name: "fig3b", about: "independent-decoding rate, E = A/3", keys: &["snr", "capacity"], run: fig3b },
    Recipe { name: "fig4a", about: "state-assisted rates, peak only", keys: &["snr"], run: fig4a },
    Recipe { name: "fig4b", about: "state-assisted rates, E = A/3", keys: &["snr"], run: fig4b },
    Recipe { name: "fig5a", about: "carry-assisted rates, peak only", keys: &["snr"], run: fig5a },
    Recipe { name: "fig5b", about: "carry-assisted rates, E = A/3", keys: &["snr"], run: fig5b },
    Recipe { name: "fig6", about: "polar-coded rates at a target FER", keys: &["snr", "n", "frames", "target_fer"], run: fig6 },
];

pub fn find(name: &str) -> CliResult<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name).ok_or_else(|| CliError::UnknownRecipe {
        name: name.to_owned(),
        available: RECIPES.iter().map(|r| r.name).collect::<Vec<_>>().join(", "),
    })
}

/// Splits `key=value` arguments.
pub fn parse_overrides(args: &[String]) -> CliResult<Vec<(String, String)>> {
    args.iter()
        .map(|a| match a.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
            _ => Err(CliError::Override {
                key: a.clone(),
                reason: "expected key=value".into(),
            }),
        })
        .collect()
}

#[derive(Debug)]
pub struct RecipeOutput {
    pub manifest: Manifest,
    /// Written files with the tables they hold.
    pub tables: Vec<(PathBuf, Table)>,
}

impl RecipeOutput {
    pub fn table(&self, suffix: &str) -> Option<&Table> {
        self.tables
            .iter()
            .find(|(p, _)| p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.ends_with(suffix)))
            .map(|(_, t)| t)
    }
}

/// Runs recipe `name` and writes `<name>[_part].csv` plus
/// `<name>.manifest.json` into `out_dir`.
pub fn run_recipe(name: &str, cfg: &Config, overrides: &[(String, String)], out_dir: &Path) -> CliResult<RecipeOutput> {
    let recipe = find(name)?;
    for (k, _) in overrides {
        if !recipe.keys.contains(&k.as_str()) {
            return Err(CliError::Override {
                key: k.clone(),
                reason: format!("not used by {name}; known keys: {}", recipe.keys.join(", ")),
            });
        }
    }
    let ctx = Ctx { cfg, overrides };
    let parts = (recipe.run)(&ctx)?;
    let mut tables = Vec::with_capacity(parts.len());
    for (suffix, table) in parts {
        let file = if suffix.is_empty() {
            format!("{name}.csv")
        } else {
            format!("{name}_{suffix}.csv")
        };
        let path = out_dir.join(file);
        table.write(&path)?;
        tables.push((path, table));
    }
    let manifest = Manifest {
        recipe: name.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: cfg.seed,
        overrides: overrides.to_vec(),
        config: cfg.clone(),
        outputs: tables.iter().map(|(p, _)| p.file_name().map(PathBuf::from).unwrap_or_default()).collect(),
    };
    write_json(&out_dir.join(format!("{name}.manifest.json")), &manifest)?;
    Ok(RecipeOutput { manifest, tables })
}

struct Ctx<'a> {
    cfg: &'a Config,
    overrides: &'a [(String, String)],
}

impl Ctx<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.overrides.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn bad(key: &str, reason: impl Into<String>) -> CliError {
        CliError::Override {
            key: key.to_owned(),
            reason: reason.into(),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::bad(key, format!("`{v}` is not a number"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::bad(key, format!("`{v}` is not a count"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> CliResult<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::bad(key, format!("`{v}` is not true/false"))),
        }
    }

    fn list_or(&self, key: &str, default: &str) -> CliResult<Vec<f64>> {
        parse_range(self.raw(key).unwrap_or(default)).map_err(|e| Self::bad(key, e.to_string()))
    }
}

fn channel(peak: f64, cfg: &Config) -> CliResult<ChannelParams> {
    Ok(ChannelParams::new(peak, peak, cfg.channel.sigma)?)
}

fn table1(ctx: &Ctx) -> CliResult<Parts> {
    let ch = channel(ctx.f64_or("peak", 10.0)?, ctx.cfg)?;
    let vbc = VbcParams::new(&ch, ctx.f64_or("beta", 5.0)?, ctx.f64_or("gamma", 10.0)?)?;
    Ok(vec![("", noise_table(&ch, &vbc, false)?)])
}

fn table2(ctx: &Ctx) -> CliResult<Parts> {
    let mut t = Table::new(&["snr_db", "beta", "gamma", "pipe", "alpha_prime", "active", "total_rate"]);
    for snr in ctx.list_or("snr", "9:9.3:0.1")? {
        let r = best_rate(ctx.cfg, Scheme::Id, 0, snr, 1.0, None)?;
        let ch = ChannelParams::from_snr_db(snr, 1.0, ctx.cfg.channel.sigma)?;
        let noise = NoiseModel::build(&ch, &VbcParams::new(&ch, r.beta, r.gamma)?)?;
        let active = r.active_pipes();
        for (i, &a) in noise.marginals().iter().enumerate() {
            t.push(vec![
                sig6(snr),
                sig6(r.beta),
                sig6(r.gamma),
                i.to_string(),
                sig6(a.min(1.0 - a)),
                active.contains(&i).to_string(),
                sig6(r.total),
            ]);
        }
    }
    Ok(vec![("", t)])
}

fn table3(ctx: &Ctx) -> CliResult<Parts> {
    let ch = channel(ctx.f64_or("peak", 2.0)?, ctx.cfg)?;
    let vbc = VbcParams::new(&ch, ctx.f64_or("beta", 3.0)?, ctx.f64_or("gamma", 1.0)?)?;
    let noise = NoiseModel::build(&ch, &vbc)?;
    let n = noise.n_bits();
    if n < 2 {
        return Err(CliError::Usage("need at least two noise bits".into()));
    }
    let top = n as usize - 1;
    let sel = StateSelection::previous(n, top)?;
    let members = sel.set(top);
    let states = noise.state_table(top, members);
    let mut t = Table::new(&["pipe", "state_bits", "state_probability", "conditional", "alpha"]);
    for (s, (&p, &c)) in states.probs.iter().zip(&states.conditionals).enumerate() {
        // state bit j holds pipe members[j]; print lowest pipe first
        let mut bits: Vec<(i64, usize)> = members.iter().enumerate().map(|(j, &m)| (m, (s >> j) & 1)).collect();
        bits.sort();
        t.push(vec![
            top.to_string(),
            bits.iter().map(|(_, b)| b.to_string()).collect(),
            sig6(p),
            sig6(c),
            sig6(noise.alpha(top)),
        ]);
    }
    Ok(vec![("", t)])
}

fn table4(ctx: &Ctx) -> CliResult<Parts> {
    let beta = ctx.f64_or("beta", 5.0)?;
    let gammas = ctx.list_or("gamma", "0.2,0.5,1.5,4,6")?;
    let mut t = Table::new(&CAPACITY_HEADER);
    for peak in ctx.list_or("peak", "10,100")? {
        let ch = channel(peak, ctx.cfg)?;
        for &g in &gammas {
            t.push(capacity_row(ctx.cfg, &ch, CapacityMode::Vbc, beta, g)?);
        }
        if ctx.bool_or("imdd", true)? {
            t.push(capacity_row(ctx.cfg, &ch, CapacityMode::Imdd, beta, 0.0)?);
        }
    }
    Ok(vec![("", t)])
}

/// Shared body of the two polar-code tables (`A = 25`, pipes 4..6).
fn coded(ctx: &Ctx, scheme: Scheme, beta: f64, short: [f64; 3], long: [f64; 3]) -> CliResult<Parts> {
    let mut cfg = ctx.cfg.clone();
    cfg.simulation.n = ctx.usize_or("n", cfg.simulation.n)?;
    cfg.simulation.frames = ctx.usize_or("frames", cfg.simulation.frames)?;
    cfg.simulation.genie = ctx.bool_or("genie", cfg.simulation.genie)?;
    cfg.rate.q = 1;
    cfg.validate()?;
    let default = if cfg.simulation.n >= 1 << 20 { long } else { short };
    let rates = match ctx.raw("rates") {
        None => default.to_vec(),
        Some(_) => ctx.list_or("rates", "")?,
    };
    if rates.len() != 3 {
        return Err(Ctx::bad("rates", "need three code rates for pipes 4, 5 and 6"));
    }
    let ch = channel(25.0, &cfg)?;
    let vbc = VbcParams::new(&ch, beta, 4.4801)?;
    let pairs: Vec<(usize, f64)> = (4..7).zip(rates).collect();
    let sim = sim_template(&cfg, ch, vbc, scheme, &pairs)?;
    let (_, table) = simulate(&sim)?;
    Ok(vec![("", table)])
}

fn table5(ctx: &Ctx) -> CliResult<Parts> {
    coded(ctx, Scheme::Id, 5.0, [0.359, 0.734, 0.984], [0.399, 0.722, 0.999])
}

fn table6(ctx: &Ctx) -> CliResult<Parts> {
    coded(ctx, Scheme::SdBsc, 3.5, [0.359, 0.843, 0.984], [0.45, 0.916, 0.972])
}

fn fig3(ctx: &Ctx, ratio: f64) -> CliResult<Parts> {
    let snrs = ctx.list_or("snr", "0:20:1")?;
    let mut out = vec![("", rate_table(ctx.cfg, &[(Scheme::Id, 0)], &snrs, ratio, None)?)];
    if ctx.bool_or("capacity", true)? {
        let mut t = Table::new(&CAPACITY_HEADER);
        for &snr in &snrs {
            let ch = ChannelParams::from_snr_db(snr, ratio, ctx.cfg.channel.sigma)?;
            t.push(capacity_row(ctx.cfg, &ch, CapacityMode::Imdd, 0.0, 0.0)?);
        }
        out.push(("capacity", t));
    }
    Ok(out)
}

fn fig3a(ctx: &Ctx) -> CliResult<Parts> {
    fig3(ctx, 1.0)
}

fn fig3b(ctx: &Ctx) -> CliResult<Parts> {
    fig3(ctx, 1.0 / 3.0)
}

const STATE_SCHEMES: [(Scheme, usize); 4] = [(Scheme::Id, 0), (Scheme::Sd, ALL_LOWER), (Scheme::Sd, 1), (Scheme::SdBsc, 1)];
const CARRY_SCHEMES: [(Scheme, usize); 4] = [(Scheme::Id, 0), (Scheme::Sd, ALL_LOWER), (Scheme::Cd, 1), (Scheme::CdBac, 1)];

fn fig4a(ctx: &Ctx) -> CliResult<Parts> {
    Ok(vec![("", rate_table(ctx.cfg, &STATE_SCHEMES, &ctx.list_or("snr", "0:20:1")?, 1.0, None)?)])
}

fn fig4b(ctx: &Ctx) -> CliResult<Parts> {
    Ok(vec![("", rate_table(ctx.cfg, &STATE_SCHEMES, &ctx.list_or("snr", "0:20:1")?, 1.0 / 3.0, None)?)])
}

fn fig5a(ctx: &Ctx) -> CliResult<Parts> {
    Ok(vec![("", rate_table(ctx.cfg, &CARRY_SCHEMES, &ctx.list_or("snr", "0:10:1")?, 1.0, None)?)])
}

fn fig5b(ctx: &Ctx) -> CliResult<Parts> {
    Ok(vec![("", rate_table(ctx.cfg, &CARRY_SCHEMES, &ctx.list_or("snr", "0:10:1")?, 1.0 / 3.0, None)?)])
}

fn fig6(ctx: &Ctx) -> CliResult<Parts> {
    let mut cfg = ctx.cfg.clone();
    cfg.simulation.n = ctx.usize_or("n", cfg.simulation.n)?;
    cfg.simulation.frames = ctx.usize_or("frames", cfg.simulation.frames)?;
    cfg.simulation.target_fer = ctx.f64_or("target_fer", cfg.simulation.target_fer)?;
    cfg.rate.q = 1;
    cfg.validate()?;
    let snrs = ctx.list_or("snr", "6.0206,10,13.9794,17.78,20")?;
    let mut out = Vec::new();
    for (suffix, scheme) in [("id", Scheme::Id), ("sd_bsc", Scheme::SdBsc)] {
        // the sweep replaces channel and parameters per point
        let ch = ChannelParams::from_snr_db(snrs[0], 1.0, cfg.channel.sigma)?;
        let vbc = VbcParams::new(&ch, cfg.vbc.beta, cfg.vbc.gamma)?;
        let template = sim_template(&cfg, ch, vbc, scheme, &[])?;
        let opts = SweepOptions {
            ratio: 1.0,
            target_fer: cfg.simulation.target_fer,
            grid: match (&cfg.rate.betas, &cfg.rate.gammas) {
                (None, None) => None,
                _ => Some(grid_for(&cfg, &ch)?),
            },
        };
        let (_, table) = sweep_table(&template, &snrs, &opts)?;
        out.push((suffix, table));
    }
    Ok(out)
}

/// One line per recipe for `--help` style listings.
pub fn listing() -> String {
    RECIPES
        .iter()
        .map(|r| format!("  {:<8} {} (overrides: {})", r.name, r.about, join(r.keys, |k| (*k).to_owned())))
        .collect::<Vec<_>>()
        .join("\n")
}
