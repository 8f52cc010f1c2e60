//! The configured scenario in linear units, and the per-deployment objects
//! derived from it.

use rofmimo_core::channel::{path_loss, place_aps_grid, place_ues, PathLoss, Point3, Topology, UePlacement};
use rofmimo_core::montecarlo::{trial_rng, Domain};
use rofmimo_core::sysconfig::{bandpass_zone, build_grid, DerivedGrid, LinkBudget, SystemParams};
use rofmimo_core::units::{db_to_linear, dbm_to_mw};

use crate::config::ScenarioConfig;
use crate::error::SimResult;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub length_m: f64,
    pub width_m: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub bins: usize,
    /// N_0, linear.
    pub noise: f64,
    /// Ē_s, linear.
    pub energy_norm: f64,
}

impl Scenario {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            length_m: c.length_m,
            width_m: c.width_m,
            ap_height_m: c.ap_height_m,
            ue_height_m: c.ue_height_m,
            carrier_hz: c.carrier_hz,
            bandwidth_hz: c.bandwidth_hz,
            bins: c.bins,
            noise: dbm_to_mw(c.noise_dbm),
            energy_norm: dbm_to_mw(c.energy_dbm),
        }
    }

    /// The validated parameters of `aps` APs sharing `fronthaul_bps`.
    pub fn params(&self, aps: usize, ues: usize, fronthaul_bps: f64, ed_db: f64) -> SimResult<SystemParams> {
        Ok(SystemParams::from_fronthaul(
            self.carrier_hz,
            self.bandwidth_hz,
            fronthaul_bps,
            self.bins,
            aps,
            ues,
            self.energy_norm,
            self.dither(ed_db),
            self.noise,
        )?)
    }

    pub fn grid(&self, aps: usize, ues: usize, fronthaul_bps: f64) -> SimResult<DerivedGrid> {
        Ok(build_grid(&self.params(aps, ues, fronthaul_bps, f64::NEG_INFINITY)?)?)
    }

    /// E_d for a dither-to-noise ratio in dB.
    pub fn dither(&self, ed_db: f64) -> f64 {
        self.noise * db_to_linear(ed_db)
    }

    /// Energies for `aps` APs under the energy-efficient normalization.
    pub fn link(&self, aps: usize, ed_db: f64) -> LinkBudget {
        LinkBudget::new(self.energy_norm / aps as f64, self.noise, self.dither(ed_db))
    }

    /// Whether the bandpass sampling condition holds at oversampling `osr`.
    pub fn sampling_valid(&self, osr: usize) -> bool {
        bandpass_zone(self.carrier_hz, self.bandwidth_hz, osr as f64 * self.bandwidth_hz).is_valid()
    }

    pub fn ap_grid(&self, aps: usize) -> SimResult<Topology> {
        let mut t = place_aps_grid(aps, self.length_m, self.width_m, self.ap_height_m)?;
        t.ue_height = self.ue_height_m;
        Ok(t)
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.length_m / 2.0, self.width_m / 2.0, self.ap_height_m)
    }

    /// UE positions of drop `drop`; deterministic placements ignore it.
    pub fn ues(&self, ues: usize, placement: UePlacement, seed: u64, drop: u64) -> SimResult<Vec<Point3>> {
        let mut rng = trial_rng(seed, Domain::UeDrop, drop);
        Ok(place_ues(
            ues,
            placement,
            self.length_m,
            self.width_m,
            self.ue_height_m,
            &mut rng,
        )?)
    }

    pub fn deployment(
        &self,
        aps: usize,
        ues: usize,
        placement: UePlacement,
        seed: u64,
    ) -> SimResult<(Topology, PathLoss)> {
        let topo = self.ap_grid(aps)?.with_ues(self.ues(ues, placement, seed, 0)?);
        let pl = path_loss(&topo);
        Ok((topo, pl))
    }
}
