//! TOML run configuration. Every section is optional and unknown keys are
//! rejected.

use std::path::Path;

use imdd_vbc::capacity::ProxyConfig;
use imdd_vbc::rate::DEFAULT_ENUMERATION_BUDGET;
use imdd_vbc::{BlahutArimoto, ChannelParams, ErasureFill, Scheme, SchemeConfig, SoftCheck, VbcParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub channel: ChannelSection,
    pub vbc: VbcSection,
    pub rate: RateSection,
    pub capacity: CapacitySection,
    pub simulation: SimulationSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            channel: ChannelSection::default(),
            vbc: VbcSection::default(),
            rate: RateSection::default(),
            capacity: CapacitySection::default(),
            simulation: SimulationSection::default(),
        }
    }
}

/// `peak` and `peak_db` are alternatives; with neither, `A = 10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub peak: Option<f64>,
    /// `10 log10(A / sigma)`.
    pub peak_db: Option<f64>,
    /// `E / A`.
    pub ratio: f64,
    pub sigma: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            peak: None,
            peak_db: None,
            ratio: 1.0,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VbcSection {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for VbcSection {
    fn default() -> Self {
        Self { beta: 5.0, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub scheme: Scheme,
    pub q: usize,
    pub state_search: bool,
    pub enumeration_budget: u64,
    /// Sample count of the Monte Carlo fallback for CD; absent disables it.
    pub montecarlo_samples: Option<usize>,
    /// Margin grid of the parameter search; absent means the default grid.
    pub betas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::Id,
            q: 1,
            state_search: false,
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET as u64,
            montecarlo_samples: None,
            betas: None,
            gammas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub grid_points: usize,
    /// Output bin width of the reference channel, in units of sigma.
    pub bin_width: f64,
    pub tail: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CapacitySection {
    fn default() -> Self {
        let p = ProxyConfig::default();
        Self {
            grid_points: p.grid_points,
            bin_width: p.bin_width,
            tail: p.tail,
            tol: p.solver.tol,
            max_iters: p.solver.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n: usize,
    pub frames: usize,
    pub check: SoftCheck,
    pub erasure_fill: ErasureFill,
    pub genie: bool,
    pub target_fer: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n: 64,
            frames: 1000,
            check: SoftCheck::MinSum,
            erasure_fill: ErasureFill::Neutral,
            genie: false,
            target_fer: 0.1,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(key, format!("must be positive, got {v}")))
            }
        };
        let ch = &self.channel;
        if ch.peak.is_some() && ch.peak_db.is_some() {
            return Err(CliError::config("channel.peak_db", "give either `peak` or `peak_db`, not both"));
        }
        if let Some(a) = ch.peak {
            positive("channel.peak", a)?;
        }
        if let Some(db) = ch.peak_db {
            if !db.is_finite() {
                return Err(CliError::config("channel.peak_db", "must be finite"));
            }
        }
        positive("channel.sigma", ch.sigma)?;
        if !(ch.ratio > 0.0 && ch.ratio <= 1.0) {
            return Err(CliError::config("channel.ratio", format!("must lie in (0, 1], got {}", ch.ratio)));
        }
        positive("vbc.beta", self.vbc.beta)?;
        positive("vbc.gamma", self.vbc.gamma)?;
        for (key, grid) in [("rate.betas", &self.rate.betas), ("rate.gammas", &self.rate.gammas)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(CliError::config(key, "must not be empty"));
                }
                for &v in g {
                    positive(key, v)?;
                }
            }
        }
        if self.rate.enumeration_budget == 0 {
            return Err(CliError::config("rate.enumeration_budget", "must be positive"));
        }
        if self.capacity.grid_points < 256 {
            return Err(CliError::config("capacity.grid_points", "need at least 256"));
        }
        positive("capacity.bin_width", self.capacity.bin_width)?;
        positive("capacity.tail", self.capacity.tail)?;
        positive("capacity.tol", self.capacity.tol)?;
        let sim = &self.simulation;
        if sim.n < 2 || !sim.n.is_power_of_two() {
            return Err(CliError::config("simulation.n", format!("{} is not a power of two", sim.n)));
        }
        if sim.frames == 0 {
            return Err(CliError::config("simulation.frames", "need at least one frame"));
        }
        if !(sim.target_fer > 0.0 && sim.target_fer < 1.0) {
            return Err(CliError::config("simulation.target_fer", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn channel(&self) -> CliResult<ChannelParams> {
        let ch = &self.channel;
        let built = match ch.peak_db {
            Some(db) => ChannelParams::from_snr_db(db, ch.ratio, ch.sigma),
            None => {
                let a = ch.peak.unwrap_or(10.0);
                ChannelParams::new(a, ch.ratio * a, ch.sigma)
            }
        };
        Ok(built?)
    }

    pub fn vbc(&self, ch: &ChannelParams) -> CliResult<VbcParams> {
        Ok(VbcParams::new(ch, self.vbc.beta, self.vbc.gamma)?)
    }

    pub fn scheme(&self, scheme: Scheme, q: usize) -> SchemeConfig {
        SchemeConfig {
            scheme,
            q,
            state_search: self.rate.state_search,
            enumeration_budget: u128::from(self.rate.enumeration_budget),
            montecarlo_samples: self.rate.montecarlo_samples,
            seed: self.seed,
        }
    }

    pub fn solver(&self) -> BlahutArimoto {
        BlahutArimoto {
            tol: self.capacity.tol,
            max_iters: self.capacity.max_iters,
            ..BlahutArimoto::default()
        }
    }

    pub fn proxy(&self) -> ProxyConfig {
        ProxyConfig {
            grid_points: self.capacity.grid_points,
            bin_width: self.capacity.bin_width,
            tail: self.capacity.tail,
            solver: self.solver(),
        }
    }
}
