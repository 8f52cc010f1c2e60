//! System parameters, the discrete frequency grid, and the sampling and
//! fronthaul constraints that tie them together.
//!
//! All energies are linear. `noise` is the per-bin noise energy N_0 and
//! `energy_norm` is the normalized per-bin signal energy Ē_s on the same
//! scale, so only their ratio matters for EVM. `dither` is E_d: the sampled
//! dither has per-sample variance E_d/2, which puts energy E_d in every
//! frequency bin after down-conversion.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Relative slack used when checking that a ratio of frequencies is integral.
const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// f_c in Hz.
    pub carrier_hz: f64,
    /// W in Hz.
    pub bandwidth_hz: f64,
    /// f_s in Hz.
    pub sampling_hz: f64,
    /// S, number of occupied frequency bins (odd).
    pub bins: usize,
    /// B, number of single-antenna APs.
    pub aps: usize,
    /// U, number of single-antenna UEs.
    pub ues: usize,
    /// Ē_s.
    pub energy_norm: f64,
    /// E_d.
    pub dither: f64,
    /// N_0.
    pub noise: f64,
}

fn integral_ratio(num: f64, den: f64) -> Option<u64> {
    let r = num / den;
    let k = libm::round(r);
    if k >= 1.0 && (r - k).abs() <= INTEGRAL_TOL * r.max(1.0) {
        Some(k as u64)
    } else {
        None
    }
}

impl SystemParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        carrier_hz: f64,
        bandwidth_hz: f64,
        sampling_hz: f64,
        bins: usize,
        aps: usize,
        ues: usize,
        energy_norm: f64,
        dither: f64,
        noise: f64,
    ) -> Result<Self> {
        let p = Self {
            carrier_hz,
            bandwidth_hz,
            sampling_hz,
            bins,
            aps,
            ues,
            energy_norm,
            dither,
            noise,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters whose sampling rate is set by a total fronthaul budget:
    /// `f_s = O W` with `O = floor(R_fh / (B W))`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fronthaul(
        carrier_hz: f64,
        bandwidth_hz: f64,
        fronthaul_bps: f64,
        bins: usize,
        aps: usize,
        ues: usize,
        energy_norm: f64,
        dither: f64,
        noise: f64,
    ) -> Result<Self> {
        let osr = fronthaul_to_osr(fronthaul_bps, aps, bandwidth_hz)?;
        Self::new(
            carrier_hz,
            bandwidth_hz,
            osr as f64 * bandwidth_hz,
            bins,
            aps,
            ues,
            energy_norm,
            dither,
            noise,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParams(msg));
        if self.bins == 0 || self.bins.is_multiple_of(2) {
            return bad(format!("S = {} must be a positive odd integer", self.bins));
        }
        if self.aps == 0 || self.ues == 0 {
            return bad(format!("B = {} and U = {} must be positive", self.aps, self.ues));
        }
        if !(self.bandwidth_hz > 0.0) || !(self.carrier_hz > 0.0) {
            return bad(format!(
                "f_c = {} Hz and W = {} Hz must be positive",
                self.carrier_hz, self.bandwidth_hz
            ));
        }
        if integral_ratio(self.carrier_hz, self.bandwidth_hz).is_none() {
            return bad(format!(
                "f_c / W = {} must be a positive integer",
                self.carrier_hz / self.bandwidth_hz
            ));
        }
        if !(self.sampling_hz > self.bandwidth_hz) {
            return bad(format!(
                "f_s = {} Hz must exceed W = {} Hz",
                self.sampling_hz, self.bandwidth_hz
            ));
        }
        if !(self.energy_norm >= 0.0) || !(self.dither >= 0.0) || !(self.noise > 0.0) {
            return bad(format!(
                "need Ē_s >= 0, E_d >= 0, N_0 > 0 (got {}, {}, {})",
                self.energy_norm, self.dither, self.noise
            ));
        }
        Ok(())
    }

    /// E_s = Ē_s / B.
    pub fn energy_per_sample(&self) -> f64 {
        energy_per_sample(self.energy_norm, self.aps)
    }

    /// The linear-model energies for this configuration.
    pub fn link(&self) -> LinkBudget {
        LinkBudget {
            es: self.energy_per_sample(),
            n0: self.noise,
            ed: self.dither,
        }
    }

    pub fn with_dither(&self, dither: f64) -> Self {
        Self { dither, ..self.clone() }
    }

    /// f_c / W.
    pub fn carrier_ratio(&self) -> u64 {
        integral_ratio(self.carrier_hz, self.bandwidth_hz).unwrap_or(0)
    }
}

/// The three energies that enter every covariance formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// E_s, per-bin transmit energy per UE.
    pub es: f64,
    /// N_0, per-bin noise energy.
    pub n0: f64,
    /// E_d, dither energy per bin (per-sample variance E_d / 2).
    pub ed: f64,
}

impl LinkBudget {
    pub fn new(es: f64, n0: f64, ed: f64) -> Self {
        Self { es, n0, ed }
    }

    pub fn with_dither(self, ed: f64) -> Self {
        Self { ed, ..self }
    }
}

/// The discrete observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedGrid {
    /// N = O S samples per window.
    pub n: usize,
    /// O = f_s / W.
    pub osr: usize,
    /// The occupied bins: `0..=(S-1)/2` followed by `N-(S-1)/2..N`.
    pub bins: Vec<usize>,
    /// f_c / W.
    pub carrier_ratio: u64,
    /// f_c T = (f_c / W) S reduced modulo N; the carrier as a bin offset.
    pub carrier_offset: usize,
    /// T = N / f_s in seconds (zero when built without a sampling rate).
    pub window_s: f64,
}

impl DerivedGrid {
    /// Grid for `bins` occupied bins, oversampling `osr`, and carrier ratio
    /// `f_c / W`.
    pub fn new(bins: usize, osr: usize, carrier_ratio: u64) -> Result<Self> {
        if bins == 0 || bins.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("S = {bins} must be odd")));
        }
        if osr == 0 {
            return Err(Error::InvalidParams("O must be at least 1".into()));
        }
        let n = osr * bins;
        let half = (bins - 1) / 2;
        let mut set: Vec<usize> = (0..=half).collect();
        set.extend((n - half..n).filter(|&k| k > half));
        let carrier_offset = ((carrier_ratio % n as u64) * (bins as u64 % n as u64) % n as u64) as usize;
        Ok(Self {
            n,
            osr,
            bins: set,
            carrier_ratio,
            carrier_offset,
            window_s: 0.0,
        })
    }

    /// S.
    pub fn s(&self) -> usize {
        self.bins.len()
    }

    /// Bin index interpreted as a signed frequency in `(-N/2, N/2]`.
    pub fn signed_bin(&self, k: usize) -> i64 {
        if 2 * k > self.n {
            k as i64 - self.n as i64
        } else {
            k as i64
        }
    }

    /// Index `t` such that `e^{-j 2 pi (k/N + f_c/f_s) m} = e^{-j 2 pi t / N}`.
    #[inline]
    pub fn phase_index(&self, k: usize, m: usize) -> usize {
        let step = (k + self.carrier_offset) % self.n;
        ((step as u64 * m as u64) % self.n as u64) as usize
    }

    /// Index `t` with `e^{j 2 pi (f_c/f_s) m} = e^{j 2 pi t / N}`.
    #[inline]
    pub fn carrier_index(&self, m: usize) -> usize {
        ((self.carrier_offset as u64 * m as u64) % self.n as u64) as usize
    }

    /// f_c / f_s.
    pub fn carrier_over_sampling(&self) -> f64 {
        self.carrier_ratio as f64 / self.osr as f64
    }
}

/// Builds the grid of a configuration. `f_s / W` is rounded to the nearest
/// integer to give O.
pub fn build_grid(p: &SystemParams) -> Result<DerivedGrid> {
    p.validate()?;
    let osr = libm::round(p.sampling_hz / p.bandwidth_hz) as usize;
    let mut g = DerivedGrid::new(p.bins, osr, p.carrier_ratio())?;
    g.window_s = g.n as f64 / p.sampling_hz;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingVerdict {
    /// Valid for the smallest admissible integer ℓ (the Nyquist zone index).
    Valid {
        zone: u64,
    },
    Invalid,
}

impl SamplingVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, SamplingVerdict::Valid { .. })
    }
}

/// Whether the band `[f_c - W/2, f_c + W/2]` can be reconstructed from
/// samples at `f_s`: the smallest `ℓ` in `1..=floor((f_c + W/2)/W)` with
/// `(2f_c + W)/ℓ <= f_s <= (2f_c - W)/(ℓ - 1)`, the upper bound being absent
/// for `ℓ = 1`.
pub fn bandpass_zone(carrier_hz: f64, bandwidth_hz: f64, sampling_hz: f64) -> SamplingVerdict {
    let upper_l = libm::floor((carrier_hz + bandwidth_hz / 2.0) / bandwidth_hz) as u64;
    let lo_num = 2.0 * carrier_hz + bandwidth_hz;
    let hi_num = 2.0 * carrier_hz - bandwidth_hz;
    let slack = 1e-12 * sampling_hz;
    // The left inequality fixes the smallest candidate; larger ℓ only shrink
    // the right bound, so one candidate decides.
    let l = libm::ceil(lo_num / sampling_hz - 1e-12).max(1.0) as u64;
    if l > upper_l {
        return SamplingVerdict::Invalid;
    }
    if l == 1 || sampling_hz <= hi_num / (l - 1) as f64 + slack {
        SamplingVerdict::Valid { zone: l }
    } else {
        SamplingVerdict::Invalid
    }
}

pub fn validate_bandpass_sampling(p: &SystemParams) -> SamplingVerdict {
    bandpass_zone(p.carrier_hz, p.bandwidth_hz, p.sampling_hz)
}

/// O = floor(R_fh / (B W)), the largest oversampling that respects
/// `B O <= R_fh / W`.
pub fn fronthaul_to_osr(fronthaul_bps: f64, aps: usize, bandwidth_hz: f64) -> Result<usize> {
    let required = aps as f64 * bandwidth_hz;
    if !(fronthaul_bps >= required * (1.0 - 1e-12)) {
        return Err(Error::FronthaulBudgetTooSmall {
            rate: fronthaul_bps,
            required,
        });
    }
    // Absorb representation error in decimal rates such as 86.4e9 / 96e6.
    let ratio = fronthaul_bps / required;
    Ok(libm::floor(ratio * (1.0 + 1e-12)) as usize)
}

/// E_s = Ē_s / B.
pub fn energy_per_sample(energy_norm: f64, aps: usize) -> f64 {
    energy_norm / aps as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{dbm_to_mw, mw_to_dbm};

    fn preset(fs: f64) -> SystemParams {
        SystemParams::new(2.4e9, 24e6, fs, 9, 4, 1, 100.0, 0.0, 1e-9).unwrap()
    }

    /// Exhaustive scan over every admissible ℓ.
    fn brute_force_zone(fc: f64, w: f64, fs: f64) -> SamplingVerdict {
        let max_l = libm::floor((fc + w / 2.0) / w) as u64;
        for l in 1..=max_l {
            let lo_ok = (2.0 * fc + w) / l as f64 <= fs * (1.0 + 1e-12);
            let hi_ok = l == 1 || fs <= (2.0 * fc - w) / (l - 1) as f64 * (1.0 + 1e-12);
            if lo_ok && hi_ok {
                return SamplingVerdict::Valid { zone: l };
            }
        }
        SamplingVerdict::Invalid
    }

    #[test]
    fn bandpass_examples() {
        assert_eq!(
            validate_bandpass_sampling(&preset(21.6e9)),
            SamplingVerdict::Valid { zone: 1 }
        );
        assert_eq!(bandpass_zone(2.4e9, 24e6, 1e6), SamplingVerdict::Invalid);
        let v = validate_bandpass_sampling(&preset(4.8e9));
        assert_eq!(v, brute_force_zone(2.4e9, 24e6, 4.8e9));
        assert_eq!(v, SamplingVerdict::Invalid);
    }

    #[test]
    fn bandpass_agrees_with_brute_force_over_osr() {
        let (fc, w) = (2.4e9, 24e6);
        for osr in 2..400u64 {
            let fs = osr as f64 * w;
            assert_eq!(bandpass_zone(fc, w, fs), brute_force_zone(fc, w, fs), "O = {osr}");
        }
        // O = 4 puts the carrier on a multiple of f_s/2.
        assert_eq!(bandpass_zone(fc, w, 4.0 * w), SamplingVerdict::Invalid);
        assert!(bandpass_zone(fc, w, 64.0 * w).is_valid());
    }

    #[test]
    fn osr_from_fronthaul() {
        assert_eq!(fronthaul_to_osr(86.4e9, 4, 24e6).unwrap(), 900);
        assert_eq!(fronthaul_to_osr(345.6e9, 16, 24e6).unwrap(), 900);
        assert_eq!(fronthaul_to_osr(21.6e9, 4, 24e6).unwrap(), 225);
        assert_eq!(fronthaul_to_osr(43.2e9, 16, 24e6).unwrap(), 112);
        assert!(matches!(
            fronthaul_to_osr(50e6, 4, 24e6),
            Err(Error::FronthaulBudgetTooSmall { .. })
        ));
    }

    #[test]
    fn energy_normalization() {
        assert_eq!(energy_per_sample(100.0, 1), 100.0);
        assert_eq!(energy_per_sample(100.0, 4), 25.0);
        let es = energy_per_sample(dbm_to_mw(20.0), 64);
        assert!((mw_to_dbm(es) - 1.938).abs() < 1e-3);
    }

    #[test]
    fn grid_examples() {
        let g = DerivedGrid::new(9, 2, 100).unwrap();
        assert_eq!(g.n, 18);
        assert_eq!(g.bins, [0, 1, 2, 3, 4, 14, 15, 16, 17]);
        let g = DerivedGrid::new(1, 5, 100).unwrap();
        assert_eq!((g.n, g.bins.as_slice()), (5, &[0usize][..]));
        let p = preset(900.0 * 24e6);
        let g = build_grid(&p).unwrap();
        assert_eq!((g.n, g.osr, g.s()), (8100, 900, 9));
        assert!((g.window_s - 8100.0 / 21.6e9).abs() < 1e-18);
        assert_eq!(g.carrier_offset, 900);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SystemParams::new(2.4e9, 24e6, 1e9, 8, 4, 1, 1.0, 0.0, 1.0).is_err());
        assert!(SystemParams::new(2.41e9, 24e6, 1e9, 9, 4, 1, 1.0, 0.0, 1.0).is_err());
        assert!(SystemParams::new(2.4e9, 24e6, 20e6, 9, 4, 1, 1.0, 0.0, 1.0).is_err());
        assert!(SystemParams::new(2.4e9, 24e6, 1e9, 9, 4, 1, 1.0, 0.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn osr_never_exceeds_budget(rate in 1e8f64..1e13, aps in 1usize..128, w in 1e6f64..1e8) {
                prop_assume!(rate >= aps as f64 * w);
                let o = fronthaul_to_osr(rate, aps, w).unwrap();
                prop_assert!(o as f64 * aps as f64 * w <= rate * (1.0 + 1e-12));
                prop_assert!((o + 1) as f64 * aps as f64 * w > rate);
            }

            #[test]
            fn bins_form_centered_band(half in 0usize..20, osr in 1usize..50) {
                let s = 2 * half + 1;
                let g = DerivedGrid::new(s, osr, 100).unwrap();
                prop_assert_eq!(g.bins.len(), s);
                let mut signed: Vec<i64> = g.bins.iter().map(|&k| g.signed_bin(k)).collect();
                signed.sort();
                let expect: Vec<i64> = (-(half as i64)..=half as i64).collect();
                prop_assert_eq!(signed, expect);
            }

            #[test]
            fn energy_is_homogeneous(e in 0.0f64..1e3, a in 0.0f64..10.0, b in 1usize..100) {
                let lhs = energy_per_sample(a * e, b);
                let rhs = a * energy_per_sample(e, b);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }
    }
}
