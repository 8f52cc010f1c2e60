//! Second-order statistics of the dithered sign quantizer.
//!
//! The generic path materializes every lag of the autocovariances and is
//! meant for small grids and frequency-selective channels. Frequency-flat
//! channels go through [`FlatKernel`], which never stores a lag sequence.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::linalg::{min_eigenvalue, trace_re, CMat, RMat};
use crate::math::{asin_minus_identity, asin_tail_coefficients, clamp_unit, roots_of_unity};
use crate::sysconfig::{DerivedGrid, LinkBudget};
use crate::{Error, Result};

/// Tolerance for normalized covariances that overshoot `[-1, 1]`.
pub const ARCSINE_TOL: f64 = 1e-12;

/// Eigenvalue floor, relative to the trace, below which a quantization-error
/// spectrum is reported as not positive semidefinite.
pub const PSD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutocovKind {
    /// Unquantized RF signal.
    Received,
    /// Quantizer input, signal plus dither.
    QuantizerInput,
    /// Sign-quantizer output.
    Output,
    /// Bussgang distortion.
    Distortion,
}

/// `R[m]` for `m = 0..N`, each a real B x B matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    pub kind: AutocovKind,
    pub lags: Vec<RMat>,
}

impl AutocovSequence {
    pub fn dim(&self) -> usize {
        self.lags[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn lag(&self, m: usize) -> &RMat {
        &self.lags[m]
    }

    fn expect(&self, kind: AutocovKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "expected a {kind:?} autocovariance, got {:?}",
                self.kind
            )))
        }
    }
}

fn check_channel(grid: &DerivedGrid, channel: &ChannelRealization) -> Result<()> {
    if let ChannelRealization::Selective(hs) = channel {
        if hs.len() != grid.s() {
            return Err(Error::Dimension(format!(
                "{} per-bin channels for {} bins",
                hs.len(),
                grid.s()
            )));
        }
    }
    Ok(())
}

/// Autocovariance of the RF signal,
/// `R[m] = (1/N) Re Σ_k (E_s H_k H_k^H + N_0 I) e^{j 2π (k/N + f_c/f_s) m}`.
pub fn ry_rf(grid: &DerivedGrid, channel: &ChannelRealization, link: &LinkBudget) -> Result<AutocovSequence> {
    check_channel(grid, channel)?;
    let n = grid.n;
    let tw = roots_of_unity(n);
    let b = channel.aps();
    let per_bin: Vec<CMat> = (0..grid.s())
        .map(|idx| {
            let h = channel.at(idx);
            let mut m = h * h.adjoint() * Complex64::new(link.es, 0.0);
            for i in 0..b {
                m[(i, i)] += link.n0;
            }
            m
        })
        .collect();
    let lags = (0..n)
        .map(|m| {
            let mut acc = RMat::zeros(b, b);
            match channel {
                ChannelRealization::Flat(_) => {
                    let z: Complex64 = grid.bins.iter().map(|&k| tw[grid.phase_index(k, m)].conj()).sum();
                    let c = &per_bin[0];
                    for j in 0..b {
                        for i in 0..b {
                            acc[(i, j)] = (c[(i, j)] * z).re;
                        }
                    }
                }
                ChannelRealization::Selective(_) => {
                    for (idx, &k) in grid.bins.iter().enumerate() {
                        let z = tw[grid.phase_index(k, m)].conj();
                        let c = &per_bin[idx];
                        for j in 0..b {
                            for i in 0..b {
                                acc[(i, j)] += (c[(i, j)] * z).re;
                            }
                        }
                    }
                }
            }
            acc / n as f64
        })
        .collect();
    Ok(AutocovSequence {
        kind: AutocovKind::Received,
        lags,
    })
}

/// Adds the dither, `R_q[m] = R_y[m] + (E_d/2) I δ[m]`.
pub fn rq(ry: &AutocovSequence, dither: f64) -> Result<AutocovSequence> {
    ry.expect(AutocovKind::Received)?;
    let mut lags = ry.lags.clone();
    for i in 0..ry.dim() {
        lags[0][(i, i)] += dither / 2.0;
    }
    Ok(AutocovSequence {
        kind: AutocovKind::QuantizerInput,
        lags,
    })
}

/// The diagonal Bussgang gain `G = sqrt(2/π) diag(R_q[0])^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangGain {
    pub diag: Vec<f64>,
}

impl BussgangGain {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn inverse_diag(&self) -> Vec<f64> {
        self.diag.iter().map(|g| 1.0 / g).collect()
    }

    pub fn to_matrix(&self) -> RMat {
        RMat::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag))
    }

    /// Gain from the per-AP input standard deviations `p_b`.
    pub fn from_input_std(p: &[f64]) -> Self {
        let k = libm::sqrt(FRAC_2_PI);
        Self {
            diag: p.iter().map(|pb| k / pb).collect(),
        }
    }
}

pub fn bussgang_gain(rq0: &RMat) -> Result<BussgangGain> {
    let mut diag = Vec::with_capacity(rq0.nrows());
    for b in 0..rq0.nrows() {
        let v = rq0[(b, b)];
        if !(v > 0.0) {
            return Err(Error::SingularConfiguration { ap: b });
        }
        diag.push(libm::sqrt(FRAC_2_PI / v));
    }
    Ok(BussgangGain { diag })
}

/// Arcsine law, `R_z[m] = (2/π) asin(D^{-1/2} R_q[m] D^{-1/2})`.
pub fn rz_arcsine(rq: &AutocovSequence) -> Result<AutocovSequence> {
    rq.expect(AutocovKind::QuantizerInput)?;
    let b = rq.dim();
    let mut inv_std = Vec::with_capacity(b);
    for i in 0..b {
        let v = rq.lags[0][(i, i)];
        if !(v > 0.0) {
            return Err(Error::SingularConfiguration { ap: i });
        }
        inv_std.push(1.0 / libm::sqrt(v));
    }
    let mut lags = Vec::with_capacity(rq.len());
    for (m, r) in rq.lags.iter().enumerate() {
        let mut out = RMat::zeros(b, b);
        for j in 0..b {
            for i in 0..b {
                let x = if m == 0 && i == j {
                    1.0
                } else {
                    clamp_unit(r[(i, j)] * inv_std[i] * inv_std[j], ARCSINE_TOL)
                        .map_err(|value| Error::ArcsineDomain { value })?
                };
                out[(i, j)] = FRAC_2_PI * libm::asin(x);
            }
        }
        lags.push(out);
    }
    Ok(AutocovSequence {
        kind: AutocovKind::Output,
        lags,
    })
}

/// Bussgang distortion autocovariance, `R_e[m] = R_z[m] - G R_q[m] G`.
pub fn re(rz: &AutocovSequence, rq: &AutocovSequence, gain: &BussgangGain) -> Result<AutocovSequence> {
    rz.expect(AutocovKind::Output)?;
    rq.expect(AutocovKind::QuantizerInput)?;
    let g = &gain.diag;
    let lags = rz
        .lags
        .iter()
        .zip(&rq.lags)
        .map(|(z, q)| RMat::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] - g[i] * q[(i, j)] * g[j]))
        .collect();
    Ok(AutocovSequence {
        kind: AutocovKind::Distortion,
        lags,
    })
}

/// Per-bin covariance of the down-converted distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantErrorSpectrum {
    /// Bin indices, in the grid's order.
    pub bins: Vec<usize>,
    /// One Hermitian B x B matrix per bin.
    pub per_bin: Vec<CMat>,
}

/// Outcome of the positive-semidefiniteness check.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    /// Smallest `λ_min / tr` over bins.
    pub worst_ratio: f64,
    /// Bins whose ratio is below `-PSD_FLOOR`.
    pub flagged: Vec<usize>,
}

impl PsdReport {
    pub fn ok(&self) -> bool {
        self.flagged.is_empty()
    }
}

impl QuantErrorSpectrum {
    pub fn dim(&self) -> usize {
        self.per_bin[0].nrows()
    }

    pub fn psd_report(&self) -> PsdReport {
        let mut worst = f64::INFINITY;
        let mut flagged = Vec::new();
        for (&k, c) in self.bins.iter().zip(&self.per_bin) {
            let tr = trace_re(c);
            let ratio = if tr > 0.0 { min_eigenvalue(c) / tr } else { 0.0 };
            worst = worst.min(ratio);
            if ratio < -PSD_FLOOR {
                flagged.push(k);
            }
        }
        PsdReport {
            worst_ratio: worst,
            flagged,
        }
    }
}

/// `C_k = 2 Σ_{m=0}^{N-1} R_e[m] e^{-j 2π (k/N + f_c/f_s) m}` for every
/// occupied bin. Only the S needed outputs are formed, so this is a direct
/// transform with the carrier folded into the twiddle index.
pub fn ce_spectrum(re: &AutocovSequence, grid: &DerivedGrid) -> Result<QuantErrorSpectrum> {
    re.expect(AutocovKind::Distortion)?;
    if re.len() != grid.n {
        return Err(Error::Dimension(format!("{} lags for N = {}", re.len(), grid.n)));
    }
    let tw = roots_of_unity(grid.n);
    let b = re.dim();
    let per_bin = grid
        .bins
        .iter()
        .map(|&k| {
            let mut acc = CMat::zeros(b, b);
            for (m, r) in re.lags.iter().enumerate() {
                let w = tw[grid.phase_index(k, m)] * 2.0;
                for j in 0..b {
                    for i in 0..b {
                        acc[(i, j)] += w * r[(i, j)];
                    }
                }
            }
            acc
        })
        .collect();
    Ok(QuantErrorSpectrum {
        bins: grid.bins.clone(),
        per_bin,
    })
}

/// What the combiners need: the gain and the per-bin distortion covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangLinearization {
    pub gain: BussgangGain,
    pub spectrum: QuantErrorSpectrum,
}

/// Generic path through every lag. Works for any channel realization.
pub fn linearize(grid: &DerivedGrid, channel: &ChannelRealization, link: &LinkBudget) -> Result<BussgangLinearization> {
    let ry = ry_rf(grid, channel, link)?;
    let q = rq(&ry, link.ed)?;
    let gain = bussgang_gain(&q.lags[0])?;
    let z = rz_arcsine(&q)?;
    let e = re(&z, &q, &gain)?;
    let spectrum = ce_spectrum(&e, grid)?;
    Ok(BussgangLinearization { gain, spectrum })
}

/// `c[m] = 1 + 2 Σ_{k=1}^{(S-1)/2} cos(2π m k / N)`, exact phase indices.
pub fn cosine_sum(grid: &DerivedGrid) -> Vec<f64> {
    let n = grid.n;
    let tw = roots_of_unity(n);
    let half = (grid.s() - 1) / 2;
    (0..n)
        .map(|m| 1.0 + 2.0 * (1..=half).map(|k| tw[(k * m) % n].re).sum::<f64>())
        .collect()
}

/// `a_{bb'} = E_s h_b^T h_{b'}^* + N_0 δ[b-b']`, with `h_b` the b-th row.
fn pair_covariance(h: &CMat, link: &LinkBudget, b: usize, bp: usize) -> Complex64 {
    let mut a = Complex64::new(0.0, 0.0);
    for u in 0..h.ncols() {
        a += h[(b, u)] * h[(bp, u)].conj();
    }
    a *= link.es;
    if b == bp {
        a += link.n0;
    }
    a
}

/// Per-AP input variance `p_b^2 = (S/N)(E_s ‖h_b‖² + N_0) + E_d/2`.
pub fn input_variance(h: &CMat, link: &LinkBudget, grid: &DerivedGrid) -> Vec<f64> {
    let ratio = grid.s() as f64 / grid.n as f64;
    (0..h.nrows())
        .map(|b| {
            let e: f64 = h.row(b).iter().map(|x| x.norm_sqr()).sum();
            ratio * (link.es * e + link.n0) + link.ed / 2.0
        })
        .collect()
}

/// The flat-fading auxiliary sequences, all lags materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatFadingAux {
    /// Input standard deviation per AP.
    pub p: Vec<f64>,
    /// Cosine sum over the occupied bins, `c[0] = S`.
    pub c: Vec<f64>,
    /// `v[m]`: carrier-modulated spatial covariance.
    pub v: Vec<RMat>,
    /// Normalized input covariance.
    pub s: Vec<RMat>,
    /// `r = asin(s) - s`.
    pub r: Vec<RMat>,
    /// `γ_b = sqrt(S (E_s ‖h_b‖² + N_0) + E_d/2)`, an upper bound on `p_b`.
    pub gamma: Vec<f64>,
}

pub fn flat_aux(h: &CMat, link: &LinkBudget, grid: &DerivedGrid) -> Result<FlatFadingAux> {
    let n = grid.n;
    let b = h.nrows();
    let tw = roots_of_unity(n);
    let p_sq = input_variance(h, link, grid);
    if let Some(ap) = p_sq.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::SingularConfiguration { ap });
    }
    let p: Vec<f64> = p_sq.iter().map(|&x| libm::sqrt(x)).collect();
    let c = cosine_sum(grid);
    let a = CMat::from_fn(b, b, |i, j| pair_covariance(h, link, i, j));
    let mut v = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for m in 0..n {
        let rot = tw[grid.carrier_index(m)].conj();
        let vm = RMat::from_fn(b, b, |i, j| (a[(i, j)] * rot).re);
        let mut sm = RMat::zeros(b, b);
        for j in 0..b {
            for i in 0..b {
                let x = if m == 0 && i == j {
                    1.0
                } else {
                    let raw = (c[m] / n as f64 * vm[(i, j)]) / (p[i] * p[j]);
                    clamp_unit(raw, ARCSINE_TOL).map_err(|value| Error::ArcsineDomain { value })?
                };
                sm[(i, j)] = x;
            }
        }
        r.push(sm.map(asin_minus_identity));
        s.push(sm);
        v.push(vm);
    }
    let sf = grid.s() as f64;
    let gamma = (0..b)
        .map(|i| {
            let e: f64 = h.row(i).iter().map(|x| x.norm_sqr()).sum();
            libm::sqrt(sf * (link.es * e + link.n0) + link.ed / 2.0)
        })
        .collect();
    Ok(FlatFadingAux { p, c, v, s, r, gamma })
}

/// `(4/π) Σ_m r[m] e^{-j 2π (k/N + f_c/f_s) m}` for bin `k`.
pub fn flat_ce_entry(aux: &FlatFadingAux, k: usize, grid: &DerivedGrid) -> CMat {
    let tw = roots_of_unity(grid.n);
    let b = aux.p.len();
    let mut acc = CMat::zeros(b, b);
    for (m, r) in aux.r.iter().enumerate() {
        let w = tw[grid.phase_index(k, m)] * (4.0 / PI);
        for j in 0..b {
            for i in 0..b {
                acc[(i, j)] += w * r[(i, j)];
            }
        }
    }
    acc
}

pub fn flat_ce_matrix(aux: &FlatFadingAux, grid: &DerivedGrid) -> QuantErrorSpectrum {
    QuantErrorSpectrum {
        bins: grid.bins.clone(),
        per_bin: grid.bins.iter().map(|&k| flat_ce_entry(aux, k, grid)).collect(),
    }
}

/// Number of series terms, covering odd powers 3 ..= 2 SERIES_TERMS + 1.
const SERIES_TERMS: usize = 20;
const SERIES_COEFF: [f64; SERIES_TERMS + 1] = asin_tail_coefficients();
/// Absolute truncation budget for a pair to take the series route.
const SERIES_BUDGET: f64 = 1e-16;

/// Precomputed tables for the flat-fading path on one grid.
///
/// For lags `m ≥ 1` the normalized covariance of a pair is
/// `s[m] = ρ_re u[m] + ρ_im w[m]`, with pair-independent sequences
/// `u[m] = (c[m]/S) cos(θ m)` and `w[m] = -(c[m]/S) sin(θ m)`. Pairs whose
/// `|ρ|` is small enough use the power series of `asin(x) - x` against
/// precomputed moments `Σ_m u^j w^(p-j) e^{-j φ_k m}`; the rest are summed lag
/// by lag.
#[derive(Debug, Clone)]
pub struct FlatKernel {
    grid: DerivedGrid,
    u: Vec<f64>,
    w: Vec<f64>,
    /// Per-bin twiddles, real and imaginary parts, `[bin][m]`.
    tw_re: Vec<Vec<f64>>,
    tw_im: Vec<Vec<f64>>,
    /// Moments laid out as `[(p, j)][bin]`.
    mom_re: Vec<f64>,
    mom_im: Vec<f64>,
    /// `Σ_{m≥1} |c[m]/S|^(2 SERIES_TERMS + 3)`.
    tail_mass: f64,
    binom: Vec<Vec<f64>>,
}

impl FlatKernel {
    pub fn new(grid: &DerivedGrid) -> Self {
        let n = grid.n;
        let s = grid.s();
        let sf = s as f64;
        let tw = roots_of_unity(n);
        let c = cosine_sum(grid);
        let mut u = vec![0.0; n];
        let mut w = vec![0.0; n];
        for m in 0..n {
            let rot = tw[grid.carrier_index(m)];
            // e^{jθm} = conj(rot)
            u[m] = c[m] / sf * rot.re;
            w[m] = c[m] / sf * rot.im;
        }
        let tw_re = grid
            .bins
            .iter()
            .map(|&k| (0..n).map(|m| tw[grid.phase_index(k, m)].re).collect())
            .collect::<Vec<Vec<f64>>>();
        let tw_im = grid
            .bins
            .iter()
            .map(|&k| (0..n).map(|m| tw[grid.phase_index(k, m)].im).collect())
            .collect::<Vec<Vec<f64>>>();

        let max_pow = 2 * SERIES_TERMS + 1;
        let n_pj = Self::moment_count();
        let mut mom_re = vec![0.0; n_pj * s];
        let mut mom_im = vec![0.0; n_pj * s];
        let mut up = vec![0.0; max_pow + 1];
        let mut wp = vec![0.0; max_pow + 1];
        let mut prod = vec![0.0; n_pj];
        for m in 1..n {
            up[0] = 1.0;
            wp[0] = 1.0;
            for e in 1..=max_pow {
                up[e] = up[e - 1] * u[m];
                wp[e] = wp[e - 1] * w[m];
            }
            let mut idx = 0;
            for t in 1..=SERIES_TERMS {
                let p = 2 * t + 1;
                for j in 0..=p {
                    prod[idx] = up[j] * wp[p - j];
                    idx += 1;
                }
            }
            for bin in 0..s {
                let (tr, ti) = (tw_re[bin][m], tw_im[bin][m]);
                for (pj, &x) in prod.iter().enumerate() {
                    mom_re[pj * s + bin] += x * tr;
                    mom_im[pj * s + bin] += x * ti;
                }
            }
        }
        let tail_mass = (1..n).map(|m| libm::pow((c[m] / sf).abs(), (max_pow + 2) as f64)).sum();
        let mut binom = vec![vec![1.0]];
        for p in 1..=max_pow {
            let prev = &binom[p - 1];
            let mut row = vec![1.0; p + 1];
            for j in 1..p {
                row[j] = prev[j - 1] + prev[j];
            }
            binom.push(row);
        }
        Self {
            grid: grid.clone(),
            u,
            w,
            tw_re,
            tw_im,
            mom_re,
            mom_im,
            tail_mass,
            binom,
        }
    }

    fn moment_count() -> usize {
        (1..=SERIES_TERMS).map(|t| 2 * t + 2).sum()
    }

    pub fn grid(&self) -> &DerivedGrid {
        &self.grid
    }

    /// Gain and per-bin distortion covariance for a flat channel `h` (B x U).
    pub fn linearize(&self, h: &CMat, link: &LinkBudget) -> Result<BussgangLinearization> {
        let grid = &self.grid;
        let (n, s) = (grid.n, grid.s());
        let nb = h.nrows();
        let p_sq = input_variance(h, link, grid);
        if let Some(ap) = p_sq.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::SingularConfiguration { ap });
        }
        let p: Vec<f64> = p_sq.iter().map(|&x| libm::sqrt(x)).collect();
        let ratio = s as f64 / n as f64;
        let scale = 4.0 / PI;
        let mut per_bin = vec![CMat::zeros(nb, nb); s];
        let mut scratch = vec![0.0; n];
        let mut acc_re = vec![0.0; s];
        let mut acc_im = vec![0.0; s];
        for b in 0..nb {
            for bp in b..nb {
                let a = pair_covariance(h, link, b, bp);
                let pp = p[b] * p[bp];
                let rho_re = ratio * a.re / pp;
                let rho_im = ratio * a.im / pp;
                let s0 = if b == bp {
                    1.0
                } else {
                    clamp_unit(rho_re, ARCSINE_TOL).map_err(|value| Error::ArcsineDomain { value })?
                };
                let r0 = asin_minus_identity(s0);
                let rho_sq = rho_re * rho_re + rho_im * rho_im;
                if rho_sq > 1.0 + ARCSINE_TOL {
                    return Err(Error::ArcsineDomain {
                        value: libm::sqrt(rho_sq),
                    });
                }
                let tail = if rho_sq < 1.0 {
                    SERIES_COEFF[SERIES_TERMS] * libm::pow(rho_sq, (SERIES_TERMS + 1) as f64 + 0.5) * self.tail_mass
                        / (1.0 - rho_sq)
                } else {
                    f64::INFINITY
                };
                if tail < SERIES_BUDGET {
                    self.series_pair(rho_re, rho_im, &mut acc_re, &mut acc_im);
                } else {
                    self.direct_pair(rho_re, rho_im, &mut scratch, &mut acc_re, &mut acc_im);
                }
                for bin in 0..s {
                    let v = Complex64::new(r0 + acc_re[bin], acc_im[bin]) * scale;
                    per_bin[bin][(b, bp)] = v;
                    if b != bp {
                        per_bin[bin][(bp, b)] = v.conj();
                    } else {
                        per_bin[bin][(b, b)] = Complex64::new(v.re, 0.0);
                    }
                }
            }
        }
        Ok(BussgangLinearization {
            gain: BussgangGain::from_input_std(&p),
            spectrum: QuantErrorSpectrum {
                bins: grid.bins.clone(),
                per_bin,
            },
        })
    }

    fn series_pair(&self, rho_re: f64, rho_im: f64, acc_re: &mut [f64], acc_im: &mut [f64]) {
        let s = acc_re.len();
        acc_re.fill(0.0);
        acc_im.fill(0.0);
        let max_pow = 2 * SERIES_TERMS + 1;
        let mut rp = [0.0; 2 * SERIES_TERMS + 2];
        let mut ip = [0.0; 2 * SERIES_TERMS + 2];
        rp[0] = 1.0;
        ip[0] = 1.0;
        for e in 1..=max_pow {
            rp[e] = rp[e - 1] * rho_re;
            ip[e] = ip[e - 1] * rho_im;
        }
        let mut idx = 0;
        for t in 1..=SERIES_TERMS {
            let p = 2 * t + 1;
            let coeff = SERIES_COEFF[t - 1];
            for j in 0..=p {
                let wt = coeff * self.binom[p][j] * rp[j] * ip[p - j];
                if wt != 0.0 {
                    let base = idx * s;
                    for bin in 0..s {
                        acc_re[bin] += wt * self.mom_re[base + bin];
                        acc_im[bin] += wt * self.mom_im[base + bin];
                    }
                }
                idx += 1;
            }
        }
    }

    fn direct_pair(&self, rho_re: f64, rho_im: f64, scratch: &mut [f64], acc_re: &mut [f64], acc_im: &mut [f64]) {
        let n = scratch.len();
        scratch[0] = 0.0;
        for m in 1..n {
            let x = (rho_re * self.u[m] + rho_im * self.w[m]).clamp(-1.0, 1.0);
            scratch[m] = asin_minus_identity(x);
        }
        for bin in 0..acc_re.len() {
            acc_re[bin] = dot(&scratch[1..], &self.tw_re[bin][1..]);
            acc_im[bin] = dot(&scratch[1..], &self.tw_im[bin][1..]);
        }
    }
}

/// Dot product with four independent accumulators.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let o = 4 * i;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dispatches a realization to the flat kernel when possible.
pub fn linearize_with(
    kernel: &FlatKernel,
    channel: &ChannelRealization,
    link: &LinkBudget,
) -> Result<BussgangLinearization> {
    match channel {
        ChannelRealization::Flat(h) => kernel.linearize(h, link),
        ChannelRealization::Selective(_) => linearize(kernel.grid(), channel, link),
    }
}
