//! Bussgang MR, ZF and LMMSE combining and their exact squared EVM.
//!
//! Perfect-CSI combiners are written as `A_k = M_k G^{-1}`, and all MSE terms
//! are evaluated through `M_k` and the effective distortion
//! `D_k = G^{-1} C_k G^{-1}`. The asymptotic substitution then only has to
//! supply `D_k`, which stays finite as the dither vanishes.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bussgang::{input_variance, linearize_with, BussgangGain, BussgangLinearization, FlatKernel};
use crate::channel::ChannelRealization;
use crate::linalg::{fro_sq, hpd_inverse, hpd_solve, sandwich_trace, scale_both, scale_cols, trace_re, CMat};
use crate::math::mean_and_stderr;
use crate::montecarlo::ChannelSource;
use crate::sysconfig::LinkBudget;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CombinerKind {
    Mr,
    Zf,
    Lmmse,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 3] = [CombinerKind::Mr, CombinerKind::Zf, CombinerKind::Lmmse];

    pub fn name(self) -> &'static str {
        match self {
            CombinerKind::Mr => "mr",
            CombinerKind::Zf => "zf",
            CombinerKind::Lmmse => "lmmse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiKind {
    Perfect,
    Estimated,
}

/// One U x B combining matrix per occupied bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerMatrix {
    pub kind: CombinerKind,
    pub csi: CsiKind,
    pub per_bin: Vec<CMat>,
}

/// `diag(H^H H)^{-1} H^H`, unit gain towards each UE.
pub fn mr_filter(h: &CMat) -> Result<CMat> {
    let mut e = h.adjoint();
    for u in 0..h.ncols() {
        let norm: f64 = h.column(u).iter().map(|x| x.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::DegenerateChannel { ue: u });
        }
        e.row_mut(u).iter_mut().for_each(|x| *x /= norm);
    }
    Ok(e)
}

/// `(H^H H)^{-1} H^H`.
pub fn zf_filter(h: &CMat) -> Result<CMat> {
    if h.ncols() > h.nrows() {
        return Err(Error::SingularChannel);
    }
    if h.ncols() == 1 {
        // A 1x1 solve is a division; sharing the MR arithmetic keeps the two
        // bit-identical for a single UE.
        return mr_filter(h).map_err(|_| Error::SingularChannel);
    }
    let gram = h.adjoint() * h;
    hpd_solve(&gram, &h.adjoint()).map_err(|_| Error::SingularChannel)
}

/// `H^H (H H^H + P)^{-1}` with `P = ((N_0 + E_d) I + D) / E_s`, formed as
/// `(I + Z)^{-1} H^H P^{-1}` where `Z = H^H P^{-1} H`. Returns the filter and Z.
fn lmmse_filter_and_z(h: &CMat, distortion: &CMat, link: &LinkBudget) -> Result<(CMat, CMat)> {
    let b = h.nrows();
    let mut p = distortion.clone();
    for i in 0..b {
        p[(i, i)] += link.n0 + link.ed;
    }
    p /= Complex64::new(link.es, 0.0);
    let x = hpd_solve(&p, h)?;
    let z = h.adjoint() * &x;
    let mut iz = z.clone();
    for u in 0..iz.nrows() {
        iz[(u, u)] += 1.0;
    }
    let m = hpd_solve(&iz, &x.adjoint())?;
    Ok((m, z))
}

/// `G^{-1} C G^{-1}`.
pub fn effective_distortion(gain: &BussgangGain, ce: &CMat) -> CMat {
    scale_both(ce, &gain.inverse_diag())
}

pub fn mr_combiner(h: &CMat, gain: &BussgangGain) -> Result<CMat> {
    Ok(scale_cols(&mr_filter(h)?, &gain.inverse_diag()))
}

pub fn zf_combiner(h: &CMat, gain: &BussgangGain) -> Result<CMat> {
    Ok(scale_cols(&zf_filter(h)?, &gain.inverse_diag()))
}

/// `H^H (H H^H + ((N_0+E_d)/E_s) I + (1/E_s) G^{-1} C G^{-1})^{-1} G^{-1}`.
pub fn lmmse_combiner(h: &CMat, gain: &BussgangGain, ce: &CMat, link: &LinkBudget) -> Result<CMat> {
    let (m, _) = lmmse_filter_and_z(h, &effective_distortion(gain, ce), link)?;
    Ok(scale_cols(&m, &gain.inverse_diag()))
}

/// Builds the perfect-CSI combiner for every bin.
pub fn build_combiner(
    kind: CombinerKind,
    channel: &ChannelRealization,
    lin: &BussgangLinearization,
    link: &LinkBudget,
) -> Result<CombinerMatrix> {
    let per_bin = lin
        .spectrum
        .per_bin
        .iter()
        .enumerate()
        .map(|(idx, ce)| {
            let h = channel.at(idx);
            match kind {
                CombinerKind::Mr => mr_combiner(h, &lin.gain),
                CombinerKind::Zf => zf_combiner(h, &lin.gain),
                CombinerKind::Lmmse => lmmse_combiner(h, &lin.gain, ce, link),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinerMatrix {
        kind,
        csi: CsiKind::Perfect,
        per_bin,
    })
}

/// Unnormalized per-bin MSE contributions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvmTerms {
    /// `E_s ‖A G H - I‖²`.
    pub interference: f64,
    /// `(N_0 + E_d) ‖A G‖²`.
    pub noise_dither: f64,
    /// `tr(A C A^H)`.
    pub distortion: f64,
}

impl EvmTerms {
    pub fn total(&self) -> f64 {
        self.interference + self.noise_dither + self.distortion
    }

    fn add(&mut self, o: &EvmTerms) {
        self.interference += o.interference;
        self.noise_dither += o.noise_dither;
        self.distortion += o.distortion;
    }

    fn scaled(&self, k: f64) -> EvmTerms {
        EvmTerms {
            interference: self.interference * k,
            noise_dither: self.noise_dither * k,
            distortion: self.distortion * k,
        }
    }
}

/// MSE of `A = M G^{-1}`, given `M` (= A G) and `D = G^{-1} C G^{-1}`.
pub fn mse_terms(m: &CMat, h: &CMat, distortion: &CMat, link: &LinkBudget) -> EvmTerms {
    let mut resid = m * h;
    for u in 0..resid.nrows() {
        resid[(u, u)] -= 1.0;
    }
    EvmTerms {
        interference: link.es * fro_sq(&resid),
        noise_dither: (link.n0 + link.ed) * fro_sq(m),
        distortion: sandwich_trace(m, distortion),
    }
}

/// MSE of an arbitrary combiner `A` against the true channel, gain and
/// distortion covariance.
pub fn mse_terms_explicit(a: &CMat, gain: &BussgangGain, h: &CMat, ce: &CMat, link: &LinkBudget) -> EvmTerms {
    let ag = scale_cols(a, &gain.diag);
    let mut resid = &ag * h;
    for u in 0..resid.nrows() {
        resid[(u, u)] -= 1.0;
    }
    EvmTerms {
        interference: link.es * fro_sq(&resid),
        noise_dither: (link.n0 + link.ed) * fro_sq(&ag),
        distortion: sandwich_trace(a, ce),
    }
}

/// `tr((I + Z)^{-1})` with `Z = H^H ((N_0+E_d) I + D)^{-1} H E_s`.
pub fn lmmse_trace(h: &CMat, distortion: &CMat, link: &LinkBudget) -> Result<f64> {
    let (_, z) = lmmse_filter_and_z(h, distortion, link)?;
    let mut iz = z;
    for u in 0..iz.nrows() {
        iz[(u, u)] += 1.0;
    }
    Ok(trace_re(&hpd_inverse(&iz)?))
}

/// Per-bin MSE of one perfect-CSI combiner. For LMMSE the total is
/// `E_s tr((I+Z)^{-1})`; the split comes from the explicit combiner.
pub fn bin_terms(kind: CombinerKind, h: &CMat, distortion: &CMat, link: &LinkBudget) -> Result<EvmTerms> {
    match kind {
        CombinerKind::Mr => Ok(mse_terms(&mr_filter(h)?, h, distortion, link)),
        CombinerKind::Zf => Ok(mse_terms(&zf_filter(h)?, h, distortion, link)),
        CombinerKind::Lmmse => {
            let (m, _) = lmmse_filter_and_z(h, distortion, link)?;
            Ok(mse_terms(&m, h, distortion, link))
        }
    }
}

/// Squared EVM of one draw, already normalized by `E_s U S`.
pub fn draw_terms(
    kind: CombinerKind,
    channel: &ChannelRealization,
    lin: &BussgangLinearization,
    link: &LinkBudget,
) -> Result<EvmTerms> {
    let u = channel.ues();
    let s = lin.spectrum.per_bin.len();
    let mut acc = EvmTerms::default();
    for (idx, ce) in lin.spectrum.per_bin.iter().enumerate() {
        let d = effective_distortion(&lin.gain, ce);
        acc.add(&bin_terms(kind, channel.at(idx), &d, link)?);
    }
    Ok(acc.scaled(1.0 / (link.es * (u * s) as f64)))
}

/// Eq.-33-style LMMSE value of one draw: `(1/US) Σ_k tr((I+Z_k)^{-1})`.
pub fn draw_lmmse_trace(channel: &ChannelRealization, lin: &BussgangLinearization, link: &LinkBudget) -> Result<f64> {
    let u = channel.ues();
    let s = lin.spectrum.per_bin.len();
    let mut acc = 0.0;
    for (idx, ce) in lin.spectrum.per_bin.iter().enumerate() {
        acc += lmmse_trace(channel.at(idx), &effective_distortion(&lin.gain, ce), link)?;
    }
    Ok(acc / (u * s) as f64)
}

/// Monte-Carlo squared EVM.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmResult {
    pub eta_sq: f64,
    /// Normalized split of `eta_sq`, when the estimator separates it.
    pub terms: Option<EvmTerms>,
    pub n_trials: usize,
    pub n_discarded: usize,
    /// Standard error of `eta_sq`.
    pub std_err: f64,
}

impl EvmResult {
    pub fn eta(&self) -> f64 {
        libm::sqrt(self.eta_sq)
    }

    pub fn eta_percent(&self) -> f64 {
        100.0 * self.eta()
    }

    /// Averages per-trial values in index order; `None` marks a discarded draw.
    pub fn from_trials(values: &[Option<(f64, Option<EvmTerms>)>]) -> Self {
        let kept: Vec<f64> = values.iter().filter_map(|v| v.map(|(x, _)| x)).collect();
        let n = kept.len();
        let (mean, se) = mean_and_stderr(&kept);
        let with_terms: Vec<EvmTerms> = values.iter().filter_map(|v| v.and_then(|(_, t)| t)).collect();
        let terms = (!with_terms.is_empty() && with_terms.len() == n).then(|| {
            let mut s = [crate::math::CompensatedSum::new(); 3];
            for t in &with_terms {
                s[0].add(t.interference);
                s[1].add(t.noise_dither);
                s[2].add(t.distortion);
            }
            EvmTerms {
                interference: s[0].total() / n as f64,
                noise_dither: s[1].total() / n as f64,
                distortion: s[2].total() / n as f64,
            }
        });
        Self {
            eta_sq: mean,
            terms,
            n_trials: n,
            n_discarded: values.len() - n,
            std_err: se,
        }
    }
}

/// Whether an error marks a degenerate draw that is discarded and counted.
pub fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateChannel { .. } | Error::SingularChannel | Error::SingularEstimate | Error::NotPositiveDefinite
    )
}

/// Squared EVM of trial `index`, `None` if the draw is degenerate.
pub fn evaluate_trial(
    kind: CombinerKind,
    kernel: &FlatKernel,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    index: u64,
) -> Result<Option<(f64, Option<EvmTerms>)>> {
    let channel = source.draw(index);
    let run = || -> Result<(f64, Option<EvmTerms>)> {
        let lin = linearize_with(kernel, &channel, link)?;
        let terms = draw_terms(kind, &channel, &lin, link)?;
        let eta_sq = match kind {
            CombinerKind::Lmmse => draw_lmmse_trace(&channel, &lin, link)?,
            _ => terms.total(),
        };
        Ok((eta_sq, Some(terms)))
    };
    match run() {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_degenerate(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

fn evm_sequential(
    kind: CombinerKind,
    kernel: &FlatKernel,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    n_trials: usize,
) -> Result<EvmResult> {
    if n_trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let values = (0..n_trials as u64)
        .map(|i| evaluate_trial(kind, kernel, link, source, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvmResult::from_trials(&values))
}

pub fn evm_mr(
    kernel: &FlatKernel,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    n_trials: usize,
) -> Result<EvmResult> {
    evm_sequential(CombinerKind::Mr, kernel, link, source, n_trials)
}

pub fn evm_zf(
    kernel: &FlatKernel,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    n_trials: usize,
) -> Result<EvmResult> {
    evm_sequential(CombinerKind::Zf, kernel, link, source, n_trials)
}

pub fn evm_lmmse(
    kernel: &FlatKernel,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    n_trials: usize,
) -> Result<EvmResult> {
    evm_sequential(CombinerKind::Lmmse, kernel, link, source, n_trials)
}

/// Gain the receiver would compute from an estimated flat channel.
pub fn estimated_gain(h_est: &CMat, link: &LinkBudget, kernel: &FlatKernel) -> Result<BussgangGain> {
    let p_sq = input_variance(h_est, link, kernel.grid());
    if let Some(ap) = p_sq.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::SingularConfiguration { ap });
    }
    let p: Vec<f64> = p_sq.iter().map(|&x| libm::sqrt(x)).collect();
    Ok(BussgangGain::from_input_std(&p))
}

/// Squared EVM of ZF (or MR) built from an estimate: `A = F̃ G̃^{-1}` applied
/// to the true channel, gain and distortion. Normalized by `E_s U S`.
pub fn imperfect_csi_terms(
    kind: CombinerKind,
    h: &CMat,
    h_est: &CMat,
    lin: &BussgangLinearization,
    link: &LinkBudget,
    kernel: &FlatKernel,
) -> Result<EvmTerms> {
    let filter = match kind {
        CombinerKind::Mr => mr_filter(h_est),
        CombinerKind::Zf => zf_filter(h_est),
        CombinerKind::Lmmse => return Err(Error::InvalidParams("imperfect-CSI evaluation covers MR and ZF".into())),
    }
    .map_err(|_| Error::SingularEstimate)?;
    let g_est = estimated_gain(h_est, link, kernel).map_err(|_| Error::SingularEstimate)?;
    let a = scale_cols(&filter, &g_est.inverse_diag());
    let mut acc = EvmTerms::default();
    for ce in &lin.spectrum.per_bin {
        acc.add(&mse_terms_explicit(&a, &lin.gain, h, ce, link));
    }
    let s = lin.spectrum.per_bin.len();
    Ok(acc.scaled(1.0 / (link.es * (h.ncols() * s) as f64)))
}
