//! Seeded per-trial random streams and channel sources.
//!
//! Every trial owns a ChaCha stream derived from `(seed, domain, index)`, so a
//! trial's draws do not depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{draw_channel, ChannelRealization, PathLoss};
use crate::linalg::CMat;

/// Independent stream families. Mixing the domain into the seed keeps, for
/// instance, UE drops and fading draws of the same index unrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Fading,
    UeDrop,
    Waveform,
    Pilot,
    Reference,
}

impl Domain {
    fn salt(self) -> u64 {
        match self {
            Domain::Fading => 0x9e37_79b9_7f4a_7c15,
            Domain::UeDrop => 0xbf58_476d_1ce4_e5b9,
            Domain::Waveform => 0x94d0_49bb_1331_11eb,
            Domain::Pilot => 0xd6e8_feb8_6659_fd93,
            Domain::Reference => 0xa076_1d64_78bd_642f,
        }
    }
}

/// The RNG for trial `index` of `domain` under `seed`.
pub fn trial_rng(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.salt());
    rng.set_stream(index);
    rng
}

/// Something that yields the channel of trial `index`.
pub trait ChannelSource: Sync {
    fn draw(&self, index: u64) -> ChannelRealization;
}

/// I.i.d. Rayleigh draws around fixed large-scale gains.
#[derive(Debug, Clone)]
pub struct RayleighSource {
    pub path_loss: PathLoss,
    pub seed: u64,
}

impl RayleighSource {
    pub fn new(path_loss: PathLoss, seed: u64) -> Self {
        Self { path_loss, seed }
    }
}

impl ChannelSource for RayleighSource {
    fn draw(&self, index: u64) -> ChannelRealization {
        draw_channel(&self.path_loss, &mut trial_rng(self.seed, Domain::Fading, index))
    }
}

/// The same channel for every trial.
#[derive(Debug, Clone)]
pub struct FixedSource(pub ChannelRealization);

impl FixedSource {
    pub fn flat(h: CMat) -> Self {
        Self(ChannelRealization::Flat(h))
    }
}

impl ChannelSource for FixedSource {
    fn draw(&self, _index: u64) -> ChannelRealization {
        self.0.clone()
    }
}
