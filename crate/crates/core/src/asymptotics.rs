//! Infinite-oversampling limits, Lemma-style lag bounds and the domination
//! quantities used to justify the limits.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::bussgang::{flat_aux, FlatFadingAux};
use crate::channel::ChannelRealization;
use crate::combiners::{bin_terms, is_degenerate, lmmse_trace, CombinerKind, EvmResult, EvmTerms};
use crate::linalg::{CMat, RMat};
use crate::math::{asin_minus_identity, roots_of_unity};
use crate::montecarlo::ChannelSource;
use crate::sysconfig::{DerivedGrid, LinkBudget};
use crate::{Error, Result};

/// `π/2 - 1`, the value of `asin(1) - 1`.
pub const LAG_ZERO_DISTORTION: f64 = PI / 2.0 - 1.0;

/// Limit of every diagonal entry of the distortion spectrum, `2(1 - 2/π)`.
pub const CE_LIMIT: f64 = 2.0 * (1.0 - 2.0 / PI);

/// `(G_limit, Ce_limit)` with `G_limit = sqrt(4/(π E_d))`.
pub fn matrix_limits(dither: f64) -> Result<(f64, f64)> {
    if !(dither > 0.0) {
        return Err(Error::UndefinedLimit("gain limit needs E_d > 0"));
    }
    Ok((libm::sqrt(4.0 / (PI * dither)), CE_LIMIT))
}

/// Effective distortion `G^{-1} C G^{-1}` in the limit: `(π/2 - 1) E_d I`.
/// Vanishes at `E_d = 0`, which is the analytic continuation of the limit.
pub fn limit_distortion(aps: usize, dither: f64) -> CMat {
    CMat::identity(aps, aps) * num_complex::Complex64::new(LAG_ZERO_DISTORTION * dither, 0.0)
}

/// Warning for configurations outside the scope of the single-UE limit.
pub fn scope_note(aps: usize) -> Option<&'static str> {
    (aps == 1).then_some("with one AP under Rayleigh fading E[1/|h|^2] diverges; the MR/ZF limit is infinite")
}

fn channel_energy(h: &CMat) -> f64 {
    h.iter().map(|x| x.norm_sqr()).sum()
}

/// Single-UE MR/ZF limit for one channel, `(N_0 + π E_d/2) / (E_s ‖h‖²)`.
pub fn mrzf_limit_draw(h: &CMat, link: &LinkBudget) -> Result<f64> {
    let e = channel_energy(h);
    if !(e > 0.0) {
        return Err(Error::DegenerateChannel { ue: 0 });
    }
    Ok((link.n0 + PI / 2.0 * link.ed) / (link.es * e))
}

/// Single-UE LMMSE limit for one channel, `(1 + E_s ‖h‖² / (N_0 + π E_d/2))^{-1}`.
pub fn lmmse_limit_draw(h: &CMat, link: &LinkBudget) -> f64 {
    1.0 / (1.0 + link.es * channel_energy(h) / (link.n0 + PI / 2.0 * link.ed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticEvm {
    pub eta_sq_mrzf: f64,
    pub eta_sq_lmmse: f64,
    pub n_trials: usize,
    pub std_err_mrzf: f64,
    pub std_err_lmmse: f64,
}

fn single_ue_check(channel: &ChannelRealization) -> Result<&CMat> {
    let h = channel
        .flat()
        .ok_or_else(|| Error::InvalidParams("the single-UE limit needs a flat channel".into()))?;
    if h.ncols() != 1 {
        return Err(Error::InvalidParams("the single-UE limit needs U = 1".into()));
    }
    Ok(h)
}

fn run_limit<F>(source: &dyn ChannelSource, n_trials: usize, f: F) -> Result<EvmResult>
where
    F: Fn(&CMat) -> Result<f64>,
{
    if n_trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let mut values = Vec::with_capacity(n_trials);
    for i in 0..n_trials as u64 {
        let ch = source.draw(i);
        let h = single_ue_check(&ch)?;
        values.push(match f(h) {
            Ok(x) => Some((x, None)),
            Err(e) if is_degenerate(&e) => None,
            Err(e) => return Err(e),
        });
    }
    Ok(EvmResult::from_trials(&values))
}

/// Monte-Carlo estimate of the MR/ZF limit. Draws with `h = 0` are discarded.
pub fn evm_mrzf_asymptotic(link: &LinkBudget, source: &dyn ChannelSource, n_trials: usize) -> Result<EvmResult> {
    if !(link.es > 0.0) {
        return Err(Error::InvalidParams("the MR/ZF limit needs E_s > 0".into()));
    }
    run_limit(source, n_trials, |h| mrzf_limit_draw(h, link))
}

pub fn evm_lmmse_asymptotic(link: &LinkBudget, source: &dyn ChannelSource, n_trials: usize) -> Result<EvmResult> {
    run_limit(source, n_trials, |h| Ok(lmmse_limit_draw(h, link)))
}

pub fn asymptotic_evm(link: &LinkBudget, source: &dyn ChannelSource, n_trials: usize) -> Result<AsymptoticEvm> {
    let a = evm_mrzf_asymptotic(link, source, n_trials)?;
    let b = evm_lmmse_asymptotic(link, source, n_trials)?;
    Ok(AsymptoticEvm {
        eta_sq_mrzf: a.eta_sq,
        eta_sq_lmmse: b.eta_sq,
        n_trials: a.n_trials,
        std_err_mrzf: a.std_err,
        std_err_lmmse: b.std_err,
    })
}

/// Squared EVM of one flat draw with the limiting gain and distortion
/// substituted, any U. Normalized by `E_s U`.
pub fn substituted_draw(kind: CombinerKind, h: &CMat, link: &LinkBudget) -> Result<(f64, EvmTerms)> {
    let d = limit_distortion(h.nrows(), link.ed);
    let terms = bin_terms(kind, h, &d, link)?;
    let norm = 1.0 / (link.es * h.ncols() as f64);
    let scaled = EvmTerms {
        interference: terms.interference * norm,
        noise_dither: terms.noise_dither * norm,
        distortion: terms.distortion * norm,
    };
    let eta_sq = match kind {
        CombinerKind::Lmmse => lmmse_trace(h, &d, link)? / h.ncols() as f64,
        _ => scaled.interference + scaled.noise_dither + scaled.distortion,
    };
    Ok((eta_sq, scaled))
}

/// Monte-Carlo squared EVM with the limiting gain and distortion substituted
/// into the finite-N formulas. At `E_d = 0` the dither terms drop out and the
/// result is the unquantized EVM.
pub fn multiuser_asymptotic_evm(
    kind: CombinerKind,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    n_trials: usize,
) -> Result<EvmResult> {
    if n_trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let mut values = Vec::with_capacity(n_trials);
    for i in 0..n_trials as u64 {
        let ch = source.draw(i);
        let h = ch
            .flat()
            .ok_or_else(|| Error::InvalidParams("the substitution needs a flat channel".into()))?;
        values.push(match substituted_draw(kind, h, link) {
            Ok((x, t)) => Some((x, Some(t))),
            Err(e) if is_degenerate(&e) => None,
            Err(e) => return Err(e),
        });
    }
    Ok(EvmResult::from_trials(&values))
}

/// Per-AP whitening margin
/// `[E_d/(2N_0)] / [(S/N)((E_s/N_0)|h_b|² + 1)]`; the distortion is close to
/// white when every margin is large.
pub fn whitening_margin(h: &CMat, link: &LinkBudget, bins: usize, n: usize) -> Vec<f64> {
    let ratio = bins as f64 / n as f64;
    (0..h.nrows())
        .map(|b| {
            let e: f64 = h.row(b).iter().map(|x| x.norm_sqr()).sum();
            (link.ed / (2.0 * link.n0)) / (ratio * (link.es / link.n0 * e + 1.0))
        })
        .collect()
}

/// Lag statistics of `r` for one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSummary {
    pub n: usize,
    /// Largest entry of `r` over all pairs and lags.
    pub max_r: f64,
    /// Largest `|r|` away from the diagonal lag-zero entries.
    pub max_off_peak: f64,
    /// Smallest and largest diagonal lag-zero entries.
    pub lag_zero_range: (f64, f64),
    /// `Σ_{m≥1} |r_{bb'}[m]|` per pair.
    pub tail_sum: RMat,
    /// `N f(min{1, 2S(E_s|h_b||h_b'| + N_0)/(N E_d)})` per pair.
    pub tail_bound: RMat,
    /// Whether the bound's argument is below 1 for every pair, i.e. the
    /// bound is in its decaying regime.
    pub bound_decaying: bool,
}

impl LagSummary {
    pub fn bound_holds(&self) -> bool {
        self.tail_sum
            .iter()
            .zip(self.tail_bound.iter())
            .all(|(s, b)| *s <= b * (1.0 + 1e-12) + 1e-300)
    }
}

/// Numerical report of the lag properties over a ladder of window lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub ladder: Vec<LagSummary>,
}

impl Lemma1Report {
    pub fn peak_bounded(&self) -> bool {
        self.ladder.iter().all(|l| l.max_r <= LAG_ZERO_DISTORTION + 1e-15)
    }

    pub fn lag_zero_exact(&self) -> bool {
        self.ladder.iter().all(|l| {
            (l.lag_zero_range.0 - LAG_ZERO_DISTORTION).abs() <= 1e-15
                && (l.lag_zero_range.1 - LAG_ZERO_DISTORTION).abs() <= 1e-15
        })
    }

    pub fn bounds_hold(&self) -> bool {
        self.ladder.iter().all(LagSummary::bound_holds)
    }

    /// First rung from which the tail bound decays for every pair.
    pub fn decaying_from(&self) -> Option<usize> {
        let first = self.ladder.iter().position(|l| l.bound_decaying)?;
        self.ladder[first..].iter().all(|l| l.bound_decaying).then_some(first)
    }

    /// Whether the total tail mass and the off-peak maximum decrease from
    /// rung `from` onwards.
    pub fn decreasing_from(&self, from: usize) -> bool {
        self.ladder[from..].windows(2).all(|w| {
            w[1].tail_sum.iter().sum::<f64>() < w[0].tail_sum.iter().sum::<f64>()
                && w[1].max_off_peak < w[0].max_off_peak
        })
    }
}

/// Summary of the `r` sequences for one grid.
pub fn lag_summary(aux: &FlatFadingAux, h: &CMat, link: &LinkBudget, grid: &DerivedGrid) -> LagSummary {
    let b = aux.p.len();
    let (n, s) = (grid.n as f64, grid.s() as f64);
    let mut max_r = f64::NEG_INFINITY;
    let mut max_off_peak: f64 = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut tail_sum = RMat::zeros(b, b);
    for (m, r) in aux.r.iter().enumerate() {
        for j in 0..b {
            for i in 0..b {
                let x = r[(i, j)];
                max_r = max_r.max(x);
                if m == 0 && i == j {
                    lo = lo.min(x);
                    hi = hi.max(x);
                } else {
                    max_off_peak = max_off_peak.max(x.abs());
                }
                if m >= 1 {
                    tail_sum[(i, j)] += x.abs();
                }
            }
        }
    }
    let norms: Vec<f64> = (0..b)
        .map(|i| libm::sqrt(h.row(i).iter().map(|x| x.norm_sqr()).sum()))
        .collect();
    let arg = |i: usize, j: usize| 2.0 * s * (link.es * norms[i] * norms[j] + link.n0) / (n * link.ed);
    let tail_bound = RMat::from_fn(b, b, |i, j| n * asin_minus_identity(arg(i, j).min(1.0)));
    let bound_decaying = (0..b).all(|i| (0..b).all(|j| arg(i, j) < 1.0));
    LagSummary {
        n: grid.n,
        max_r,
        max_off_peak,
        lag_zero_range: (lo, hi),
        tail_sum,
        tail_bound,
        bound_decaying,
    }
}

/// Evaluates the lag properties of `r` for each oversampling in `osrs`.
pub fn lemma1_numeric_check(
    h: &CMat,
    link: &LinkBudget,
    bins: usize,
    carrier_ratio: u64,
    osrs: &[usize],
) -> Result<Lemma1Report> {
    if !(link.ed > 0.0) {
        return Err(Error::InvalidParams("the lag bounds need E_d > 0".into()));
    }
    let ladder = osrs
        .iter()
        .map(|&o| {
            let grid = DerivedGrid::new(bins, o, carrier_ratio)?;
            let aux = flat_aux(h, link, &grid)?;
            Ok(lag_summary(&aux, h, link, &grid))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lemma1Report { ladder })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationDiagnostics {
    /// `(π/2 - 1) γ_b γ_b'`.
    pub t: RMat,
    /// `(π/2 - 1) S γ_b γ_b' (2 S E_s |h_b||h_b'| + N_0) / E_d`.
    pub t_bar: RMat,
    /// `‖h‖² (Σ_b γ_b² (π/2-1) + (2/E_s) Σ t + (2/(E_s S)) Σ t̄)^{-1}`.
    pub gamma_bar: f64,
    pub gamma: Vec<f64>,
    pub whitening_margins: Vec<f64>,
}

/// Domination quantities for a single-UE flat channel.
pub fn domination_diagnostics(h: &CMat, link: &LinkBudget, grid: &DerivedGrid) -> Result<DominationDiagnostics> {
    if h.ncols() != 1 {
        return Err(Error::InvalidParams("the domination quantities need U = 1".into()));
    }
    let b = h.nrows();
    let s = grid.s() as f64;
    let mag: Vec<f64> = (0..b).map(|i| h[(i, 0)].norm()).collect();
    let gamma: Vec<f64> = mag
        .iter()
        .map(|m| libm::sqrt(s * (link.es * m * m + link.n0) + link.ed / 2.0))
        .collect();
    let t = RMat::from_fn(b, b, |i, j| LAG_ZERO_DISTORTION * gamma[i] * gamma[j]);
    let t_bar = RMat::from_fn(b, b, |i, j| {
        LAG_ZERO_DISTORTION * s * gamma[i] * gamma[j] * (2.0 * s * link.es * mag[i] * mag[j] + link.n0) / link.ed
    });
    let denom = gamma.iter().map(|g| g * g).sum::<f64>() * LAG_ZERO_DISTORTION
        + 2.0 / link.es * t.iter().sum::<f64>()
        + 2.0 / (link.es * s) * t_bar.iter().sum::<f64>();
    Ok(DominationDiagnostics {
        t,
        t_bar,
        gamma_bar: channel_energy(h) / denom,
        gamma,
        whitening_margins: whitening_margin(h, link, grid.s(), grid.n),
    })
}

/// Result of checking the domination inequalities on one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationCheck {
    /// `p_b ≤ γ_b` for all b.
    pub gamma_dominates: bool,
    /// `|p_b p_b' r_bb'[0]| ≤ t_bb'`.
    pub lag_zero: bool,
    /// `|Σ_{m≥1} p_b p_b' r_bb'[m] c[m] e^{-j 2π (f_c/f_s) m}| ≤ t̄_bb'`.
    pub tail: bool,
    /// Largest ratio of the tail sum to `t̄`.
    pub worst_tail_ratio: f64,
}

impl DominationCheck {
    pub fn all(&self) -> bool {
        self.gamma_dominates && self.lag_zero && self.tail
    }
}

pub fn check_domination(h: &CMat, link: &LinkBudget, grid: &DerivedGrid) -> Result<DominationCheck> {
    let diag = domination_diagnostics(h, link, grid)?;
    let aux = flat_aux(h, link, grid)?;
    let b = h.nrows();
    let tw = roots_of_unity(grid.n);
    let gamma_dominates = aux.p.iter().zip(&diag.gamma).all(|(p, g)| p <= g);
    let mut lag_zero = true;
    let mut worst: f64 = 0.0;
    for i in 0..b {
        for j in 0..b {
            let pp = aux.p[i] * aux.p[j];
            lag_zero &= (pp * aux.r[0][(i, j)]).abs() <= diag.t[(i, j)] * (1.0 + 1e-12);
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for m in 1..grid.n {
                acc += tw[grid.carrier_index(m)] * (pp * aux.r[m][(i, j)] * aux.c[m]);
            }
            worst = worst.max(acc.norm() / diag.t_bar[(i, j)]);
        }
    }
    Ok(DominationCheck {
        gamma_dominates,
        lag_zero,
        tail: worst <= 1.0,
        worst_tail_ratio: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::FixedSource;
    use num_complex::Complex64;

    #[test]
    fn limits() {
        let (g, c) = matrix_limits(2.0).unwrap();
        assert!((g - 0.7978845608028654).abs() < 1e-15);
        assert!((c - 0.7267604552648372).abs() < 1e-15);
        assert!(matrix_limits(0.0).is_err());
    }

    #[test]
    fn deterministic_channel_limits() {
        let h = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let src = FixedSource::flat(h);
        let link = LinkBudget::new(4.0, 0.5, 0.0);
        let a = evm_mrzf_asymptotic(&link, &src, 3).unwrap();
        assert!((a.eta_sq - 0.125).abs() < 1e-15);
        let l = evm_lmmse_asymptotic(&link, &src, 3).unwrap();
        assert!((l.eta_sq - 1.0 / 9.0).abs() < 1e-15);
        let doubled = evm_mrzf_asymptotic(&link.with_dither(2.0 * 0.5 / PI), &src, 1).unwrap();
        assert!((doubled.eta_sq - 0.25).abs() < 1e-15);
        let zero = FixedSource::flat(CMat::zeros(2, 1));
        assert_eq!(evm_lmmse_asymptotic(&link, &zero, 2).unwrap().eta_sq, 1.0);
    }

    #[test]
    fn scalar_substitution_reduces_by_hand() {
        // B = U = 1: ZF gives (N_0 + E_d + (π/2 - 1) E_d) / (E_s |h|²).
        let h = CMat::from_element(1, 1, Complex64::new(0.6, 0.8));
        let link = LinkBudget::new(2.0, 0.3, 0.4);
        let (zf, _) = substituted_draw(CombinerKind::Zf, &h, &link).unwrap();
        assert!((zf - (0.3 + PI / 2.0 * 0.4) / 2.0).abs() < 1e-15);
        assert!((zf - mrzf_limit_draw(&h, &link).unwrap()).abs() < 1e-15);
        let (lm, _) = substituted_draw(CombinerKind::Lmmse, &h, &link).unwrap();
        assert!((lm - lmmse_limit_draw(&h, &link)).abs() < 1e-15);
    }

    #[test]
    fn margins_scale_with_window() {
        let h = CMat::from_element(2, 1, Complex64::new(1.0, 0.0));
        let link = LinkBudget::new(1.0, 0.1, 0.0);
        assert!(whitening_margin(&h, &link, 9, 90).iter().all(|&m| m == 0.0));
        let link = link.with_dither(1.0);
        let a = whitening_margin(&h, &link, 9, 90);
        let b = whitening_margin(&h, &link, 9, 180);
        for (x, y) in a.iter().zip(&b) {
            assert!((y / x - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_ap_scope_note() {
        assert!(scope_note(1).is_some());
        assert!(scope_note(4).is_none());
    }
}
