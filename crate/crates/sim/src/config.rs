//! Experiment configuration file.
//!
//! The file is TOML. Every key is optional; missing keys take the values of
//! the `paper-v` preset, so an empty file reproduces the reference scenario.
//!
//! ```toml
//! preset = "paper-v"
//!
//! [scenario]
//! length_m = 100.0          # coverage area
//! width_m = 100.0
//! ap_height_m = 10.0
//! ue_height_m = 0.0
//! carrier_hz = 2.4e9
//! bandwidth_hz = 24e6
//! bins = 9                  # occupied bins S (odd)
//! noise_dbm = -94.0         # N_0 on the per-sample scale
//! energy_dbm = 20.0         # normalized energy per sample, split over the APs
//!
//! [run]
//! seed = 1
//! trials = 200              # fading draws per sweep point
//! reference_trials = 50000  # cheap draws for control-variate means
//!
//! [dither]
//! aps = [4, 16]
//! fronthaul_gbps = [86.4, 345.6, 1382.4]
//! ues = 1
//! placement = "center"      # center | grid | random
//! combiners = ["zf", "lmmse"]
//! ed_db = { start = -20.0, stop = 20.0, step = 1.0 }   # or a list
//! ```
//!
//! `[fronthaul]`, `[availability]` and `[pilots]` are documented on their
//! structs below.

use std::path::Path;

use rofmimo_core::channel::UePlacement;
use rofmimo_core::combiners::CombinerKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, SimError, SimResult};

pub const PRESET: &str = "paper-v";

/// A swept axis: an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Grid::Range { start, stop, step }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                // Rounded so that e.g. -3 dB prints as -3 and not -2.9999999.
                (0..=n)
                    .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                    .collect()
            }
        }
    }
}

fn strictly_increasing(name: &str, v: &[f64]) -> SimResult<()> {
    if v.is_empty() {
        return Err(SimError::Config(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::Config(format!(
            "{name} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

fn increasing_counts(name: &str, v: &[usize]) -> SimResult<()> {
    if v.is_empty() || v.windows(2).any(|w| w[1] <= w[0]) || v[0] == 0 {
        return Err(SimError::Config(format!(
            "{name} must be nonempty, positive and strictly increasing"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Mr,
    Zf,
    Lmmse,
}

impl From<Combiner> for CombinerKind {
    fn from(c: Combiner) -> Self {
        match c {
            Combiner::Mr => CombinerKind::Mr,
            Combiner::Zf => CombinerKind::Zf,
            Combiner::Lmmse => CombinerKind::Lmmse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Center,
    Grid,
    Random,
}

impl From<Placement> for UePlacement {
    fn from(p: Placement) -> Self {
        match p {
            Placement::Center => UePlacement::Center,
            Placement::Grid => UePlacement::Grid,
            Placement::Random => UePlacement::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub length_m: f64,
    pub width_m: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub bins: usize,
    pub noise_dbm: f64,
    pub energy_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            length_m: 100.0,
            width_m: 100.0,
            ap_height_m: 10.0,
            ue_height_m: 0.0,
            carrier_hz: 2.4e9,
            bandwidth_hz: 24e6,
            bins: 9,
            noise_dbm: -94.0,
            energy_dbm: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub reference_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 200,
            reference_trials: 50_000,
        }
    }
}

/// EVM against E_d/N_0 for every (B, R_fh, combiner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DitherConfig {
    pub aps: Vec<usize>,
    pub fronthaul_gbps: Vec<f64>,
    pub ues: usize,
    pub placement: Placement,
    pub combiners: Vec<Combiner>,
    pub ed_db: Grid,
}

impl Default for DitherConfig {
    fn default() -> Self {
        Self {
            aps: vec![4, 16],
            fronthaul_gbps: vec![86.4, 345.6, 1382.4],
            ues: 1,
            placement: Placement::Center,
            combiners: vec![Combiner::Zf, Combiner::Lmmse],
            ed_db: Grid::range(-20.0, 20.0, 1.0),
        }
    }
}

/// EVM against R_fh with E_d optimized per point. The inner grid is first
/// scanned with `coarse_trials` draws; the `refine` grid points on each side
/// of the coarse optimum are then re-evaluated with the full trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FronthaulConfig {
    pub aps: Vec<usize>,
    pub fronthaul_gbps: Vec<f64>,
    pub ues: usize,
    pub placement: Placement,
    pub combiners: Vec<Combiner>,
    pub ed_db: Grid,
    pub coarse_trials: usize,
    pub refine: usize,
}

impl Default for FronthaulConfig {
    fn default() -> Self {
        Self {
            aps: vec![4, 16, 64],
            fronthaul_gbps: vec![21.6, 43.2, 86.4, 172.8, 345.6, 691.2, 1382.4, 2764.8],
            ues: 1,
            placement: Placement::Center,
            combiners: vec![Combiner::Zf, Combiner::Lmmse],
            ed_db: Grid::range(-20.0, 20.0, 1.0),
            coarse_trials: 40,
            refine: 2,
        }
    }
}

/// Fraction of random UE drops whose EVM is below `threshold_percent`.
///
/// Each drop's EVM averages over fading. A drop starts with `fading_min`
/// draws, doubled up to `fading_max` while the estimate is within two
/// standard errors of the threshold. E_d is picked per (B, R_fh) from
/// `ed_db` by the mean squared EVM of the first `tune_drops` drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvailabilityConfig {
    pub aps: Vec<usize>,
    pub fronthaul_gbps: Vec<f64>,
    pub ues: usize,
    pub combiner: Combiner,
    pub drops: usize,
    pub threshold_percent: f64,
    pub fading_min: usize,
    pub fading_max: usize,
    pub tune_drops: usize,
    pub ed_db: Grid,
    /// Antennas of the co-located baseline at the area center; 0 disables it.
    pub colocated_antennas: usize,
    pub colocated_fading: usize,
}

impl Default for AvailabilityConfig {
    fn default() -> Self {
        Self {
            aps: vec![4, 16, 64],
            fronthaul_gbps: vec![172.8, 345.6, 691.2, 1382.4, 2764.8],
            ues: 4,
            combiner: Combiner::Lmmse,
            drops: 1000,
            threshold_percent: 12.5,
            fading_min: 8,
            fading_max: 64,
            tune_drops: 16,
            ed_db: Grid::range(-10.0, 6.0, 2.0),
            colocated_antennas: 64,
            colocated_fading: 64,
        }
    }
}

/// EVM against the number of pilots with estimated CSI. Both the pilot and
/// the data dither are optimized per pilot count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotConfig {
    pub aps: usize,
    pub fronthaul_gbps: f64,
    pub ues: usize,
    pub placement: Placement,
    pub combiner: Combiner,
    pub counts: Vec<usize>,
    pub pilot_ed_db: Grid,
    pub data_ed_db: Grid,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            aps: 4,
            fronthaul_gbps: 43.2,
            ues: 1,
            placement: Placement::Center,
            combiner: Combiner::Zf,
            counts: vec![9, 18, 36, 90, 180],
            pilot_ed_db: Grid::range(-10.0, 20.0, 1.0),
            data_ed_db: Grid::range(-10.0, 4.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub preset: String,
    pub scenario: ScenarioConfig,
    pub run: RunConfig,
    pub dither: DitherConfig,
    pub fronthaul: FronthaulConfig,
    pub availability: AvailabilityConfig,
    pub pilots: PilotConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            preset: PRESET.into(),
            scenario: ScenarioConfig::default(),
            run: RunConfig::default(),
            dither: DitherConfig::default(),
            fronthaul: FronthaulConfig::default(),
            availability: AvailabilityConfig::default(),
            pilots: PilotConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = Self::from_toml(&text).map_err(|source| SimError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> SimResult<String> {
        Ok(toml::to_string(self)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> SimResult<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.preset != PRESET {
            return Err(SimError::Config(format!(
                "unknown preset {:?}; the only preset is {PRESET:?}",
                self.preset
            )));
        }
        let s = &self.scenario;
        if !(s.length_m > 0.0 && s.width_m > 0.0) {
            return Err(SimError::Config("area sides must be positive".into()));
        }
        if !(s.noise_dbm.is_finite() && s.energy_dbm.is_finite()) {
            return Err(SimError::Config("noise and energy must be finite".into()));
        }
        if self.run.trials < 2 {
            return Err(SimError::Config("run.trials must be at least 2".into()));
        }
        let d = &self.dither;
        strictly_increasing("dither.fronthaul_gbps", &d.fronthaul_gbps)?;
        strictly_increasing("dither.ed_db", &d.ed_db.values())?;
        increasing_counts("dither.aps", &d.aps)?;
        let f = &self.fronthaul;
        strictly_increasing("fronthaul.fronthaul_gbps", &f.fronthaul_gbps)?;
        strictly_increasing("fronthaul.ed_db", &f.ed_db.values())?;
        increasing_counts("fronthaul.aps", &f.aps)?;
        if f.coarse_trials < 2 {
            return Err(SimError::Config("fronthaul.coarse_trials must be at least 2".into()));
        }
        let a = &self.availability;
        strictly_increasing("availability.fronthaul_gbps", &a.fronthaul_gbps)?;
        strictly_increasing("availability.ed_db", &a.ed_db.values())?;
        increasing_counts("availability.aps", &a.aps)?;
        if !(a.threshold_percent > 0.0) || a.drops == 0 || a.fading_min < 2 || a.fading_max < a.fading_min {
            return Err(SimError::Config(
                "availability needs a positive threshold, drops > 0 and 2 <= fading_min <= fading_max".into(),
            ));
        }
        let p = &self.pilots;
        increasing_counts("pilots.counts", &p.counts)?;
        strictly_increasing("pilots.pilot_ed_db", &p.pilot_ed_db.values())?;
        strictly_increasing("pilots.data_ed_db", &p.data_ed_db.values())?;
        if p.counts[0] < p.ues {
            return Err(SimError::Config(
                "pilots.counts must be at least the number of UEs".into(),
            ));
        }
        Ok(())
    }
}
