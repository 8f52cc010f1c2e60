//! Time-domain reference simulator: synthesizes oversampled RF sample paths,
//! dithers and sign-quantizes them, down-converts, combines, and measures
//! the error directly.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bussgang::{linearize_with, BussgangGain, FlatKernel};
use crate::channel::{complex_normal, ChannelRealization};
use crate::combiners::{build_combiner, draw_lmmse_trace, draw_terms, is_degenerate, CombinerKind, EvmResult};
use crate::linalg::{CMat, CVec, RMat};
use crate::math::{mean_and_stderr, roots_of_unity};
use crate::montecarlo::{trial_rng, ChannelSource, Domain};
use crate::sysconfig::{DerivedGrid, LinkBudget};
use crate::{Error, Result};

/// One observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFrame {
    /// U x S transmitted symbols.
    pub s_hat: CMat,
    /// B x S frequency-domain noise.
    pub w_hat: CMat,
    /// B x N complex baseband samples.
    pub y_bb: CMat,
    /// B x N real RF samples.
    pub y_rf: RMat,
    /// B x N dither.
    pub d: RMat,
    /// B x N quantizer input.
    pub q: RMat,
    /// B x N quantizer output, every entry ±1.
    pub z_rf: RMat,
    /// B x S down-converted quantizer output.
    pub z_hat: CMat,
}

/// `sgn` with `sgn(0) = +1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Draws symbols, noise and dither and runs them through the receive chain.
pub fn synthesize_frame<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    link: &LinkBudget,
    grid: &DerivedGrid,
    rng: &mut R,
) -> WaveformFrame {
    let (nb, nu, s, n) = (channel.aps(), channel.ues(), grid.s(), grid.n);
    let s_hat = CMat::from_fn(nu, s, |_, _| complex_normal(rng, link.es));
    let w_hat = CMat::from_fn(nb, s, |_, _| complex_normal(rng, link.n0));
    let dither_std = libm::sqrt(link.ed / 2.0);
    let d = RMat::from_fn(nb, n, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        dither_std * x
    });
    synthesize_from(channel, grid, s_hat, w_hat, d)
}

/// Deterministic part of [`synthesize_frame`] for given symbols, noise and
/// dither.
pub fn synthesize_from(
    channel: &ChannelRealization,
    grid: &DerivedGrid,
    s_hat: CMat,
    w_hat: CMat,
    d: RMat,
) -> WaveformFrame {
    let (nb, n) = (channel.aps(), grid.n);
    let tw = roots_of_unity(n);
    let bins: Vec<CVec> = (0..grid.s())
        .map(|idx| channel.at(idx) * s_hat.column(idx) + w_hat.column(idx))
        .collect();
    let scale = 1.0 / libm::sqrt(n as f64);
    let mut y_bb = CMat::zeros(nb, n);
    let mut y_rf = RMat::zeros(nb, n);
    for t in 0..n {
        let carrier = tw[grid.carrier_index(t)].conj();
        for b in 0..nb {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, &k) in grid.bins.iter().enumerate() {
                acc += bins[idx][b] * tw[(k * t) % n].conj();
            }
            let v = acc * scale;
            y_bb[(b, t)] = v;
            y_rf[(b, t)] = core::f64::consts::SQRT_2 * (v * carrier).re;
        }
    }
    let q = &y_rf + &d;
    let z_rf = q.map(sign);
    let z_hat = down_convert(&z_rf, grid);
    WaveformFrame {
        s_hat,
        w_hat,
        y_bb,
        y_rf,
        d,
        q,
        z_rf,
        z_hat,
    }
}

/// `sqrt(2/N) Σ_n x_n e^{-j 2π (k/N + f_c/f_s) n}` for every occupied bin.
pub fn down_convert(x: &RMat, grid: &DerivedGrid) -> CMat {
    let n = grid.n;
    let tw = roots_of_unity(n);
    let scale = libm::sqrt(2.0 / n as f64);
    CMat::from_fn(x.nrows(), grid.s(), |b, idx| {
        let k = grid.bins[idx];
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..n {
            acc += tw[grid.phase_index(k, t)] * x[(b, t)];
        }
        acc * scale
    })
}

/// `(1/N) Σ_n x_n y_{n-m}^T` with cyclic indexing.
pub fn cyclic_cross_covariance(x: &RMat, y: &RMat, m: usize) -> RMat {
    let n = x.ncols();
    RMat::from_fn(x.nrows(), y.nrows(), |i, j| {
        (0..n).map(|t| x[(i, t)] * y[(j, (t + n - m % n) % n)]).sum::<f64>() / n as f64
    })
}

/// `(1/N) Σ_n (z_n - G q_n) q_n^T`, the sample correlation between the
/// Bussgang residual and the quantizer input.
pub fn residual_correlation(frame: &WaveformFrame, gain: &BussgangGain) -> RMat {
    let resid = RMat::from_fn(frame.z_rf.nrows(), frame.z_rf.ncols(), |b, t| {
        frame.z_rf[(b, t)] - gain.diag[b] * frame.q[(b, t)]
    });
    cyclic_cross_covariance(&resid, &frame.q, 0)
}

/// Paired empirical and analytical squared EVM over the same channel draws.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub empirical: Vec<f64>,
    pub analytical: Vec<f64>,
    pub n_discarded: usize,
}

impl OracleRun {
    pub fn empirical_result(&self) -> EvmResult {
        summarize(&self.empirical, self.n_discarded)
    }

    pub fn analytical_result(&self) -> EvmResult {
        summarize(&self.analytical, self.n_discarded)
    }

    /// Mean and standard error of the per-frame difference.
    pub fn paired_gap(&self) -> (f64, f64) {
        let diff: Vec<f64> = self
            .empirical
            .iter()
            .zip(&self.analytical)
            .map(|(a, b)| a - b)
            .collect();
        mean_and_stderr(&diff)
    }
}

fn summarize(xs: &[f64], discarded: usize) -> EvmResult {
    let (m, se) = mean_and_stderr(xs);
    EvmResult {
        eta_sq: m,
        terms: None,
        n_trials: xs.len(),
        n_discarded: discarded,
        std_err: se,
    }
}

/// Squared EVM measured on one frame with the matched analytical combiner,
/// and the analytical value for the same channel.
pub fn frame_evm<R: Rng + ?Sized>(
    kind: CombinerKind,
    kernel: &FlatKernel,
    link: &LinkBudget,
    channel: &ChannelRealization,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let grid = kernel.grid();
    let lin = linearize_with(kernel, channel, link)?;
    let comb = build_combiner(kind, channel, &lin, link)?;
    let analytical = match kind {
        CombinerKind::Lmmse => draw_lmmse_trace(channel, &lin, link)?,
        _ => draw_terms(kind, channel, &lin, link)?.total(),
    };
    let frame = synthesize_frame(channel, link, grid, rng);
    let mut err = 0.0;
    for (idx, a) in comb.per_bin.iter().enumerate() {
        let est = a * frame.z_hat.column(idx);
        err += (est - frame.s_hat.column(idx)).norm_squared();
    }
    let norm = link.es * (channel.ues() * grid.s()) as f64;
    Ok((err / norm, analytical))
}

/// Runs `n_frames` frames, frame `i` on channel `source.draw(i)` with its own
/// waveform stream under `seed`.
pub fn empirical_evm(
    kind: CombinerKind,
    kernel: &FlatKernel,
    link: &LinkBudget,
    source: &dyn ChannelSource,
    n_frames: usize,
    seed: u64,
) -> Result<OracleRun> {
    if n_frames == 0 {
        return Err(Error::InvalidParams("need at least one frame".into()));
    }
    let mut run = OracleRun {
        empirical: Vec::with_capacity(n_frames),
        analytical: Vec::with_capacity(n_frames),
        n_discarded: 0,
    };
    for i in 0..n_frames as u64 {
        let channel = source.draw(i);
        let mut rng = trial_rng(seed, Domain::Waveform, i);
        match frame_evm(kind, kernel, link, &channel, &mut rng) {
            Ok((e, a)) => {
                run.empirical.push(e);
                run.analytical.push(a);
            }
            Err(e) if is_degenerate(&e) => run.n_discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysconfig::DerivedGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_tone_is_a_sampled_carrier() {
        let grid = DerivedGrid::new(1, 8, 3).unwrap();
        let ch = ChannelRealization::Flat(CMat::from_element(1, 1, c(1.0, 0.0)));
        let s = CMat::from_element(1, 1, c(0.6, -0.3));
        let f = synthesize_from(&ch, &grid, s, CMat::zeros(1, 1), RMat::zeros(1, 8));
        let theta = 2.0 * core::f64::consts::PI * grid.carrier_over_sampling();
        for t in 0..8 {
            let ang = theta * t as f64;
            let expect =
                core::f64::consts::SQRT_2 * (c(0.6, -0.3) / libm::sqrt(8.0) * c(libm::cos(ang), libm::sin(ang))).re;
            assert!((f.y_rf[(0, t)] - expect).abs() < 1e-14);
        }
        assert!(f.z_rf.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn sign_of_zero_is_plus_one() {
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
        assert_eq!(sign(-1e-300), -1.0);
    }

    #[test]
    fn down_conversion_recovers_bins() {
        let grid = DerivedGrid::new(3, 4, 101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = CMat::from_fn(2, 1, |_, _| complex_normal(&mut rng, 1.0));
        let ch = ChannelRealization::Flat(h.clone());
        let f = synthesize_frame(&ch, &LinkBudget::new(1.0, 0.1, 0.0), &grid, &mut rng);
        let rec = down_convert(&f.y_rf, &grid);
        let expect = &h * &f.s_hat + &f.w_hat;
        assert!((rec - &expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn down_conversion_is_linear() {
        let grid = DerivedGrid::new(3, 5, 7).unwrap();
        let x = RMat::from_fn(2, grid.n, |i, j| (i * 7 + j) as f64 * 0.1);
        let y = RMat::from_fn(2, grid.n, |i, j| libm::sin((i + 3 * j) as f64));
        let lhs = down_convert(&(&x * 2.0 + &y * -0.5), &grid);
        let rhs = down_convert(&x, &grid) * c(2.0, 0.0) + down_convert(&y, &grid) * c(-0.5, 0.0);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn parseval() {
        let grid = DerivedGrid::new(5, 6, 101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = CMat::from_fn(3, 2, |_, _| complex_normal(&mut rng, 1.0));
        let f = synthesize_frame(
            &ChannelRealization::Flat(h.clone()),
            &LinkBudget::new(1.0, 0.3, 0.2),
            &grid,
            &mut rng,
        );
        let freq = (&h * &f.s_hat + &f.w_hat).norm_squared();
        assert!((f.y_bb.norm_squared() - freq).abs() < 1e-8 * freq);
    }

    #[test]
    fn identical_seeds_give_identical_frames() {
        let grid = DerivedGrid::new(3, 4, 101).unwrap();
        let ch = ChannelRealization::Flat(CMat::from_element(2, 1, c(0.3, 0.1)));
        let link = LinkBudget::new(1.0, 0.1, 0.5);
        let a = synthesize_frame(&ch, &link, &grid, &mut ChaCha8Rng::seed_from_u64(3));
        let b = synthesize_frame(&ch, &link, &grid, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
