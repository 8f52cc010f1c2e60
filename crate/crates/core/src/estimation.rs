//! Pilot-based channel estimation for the imperfect-CSI evaluation.
//!
//! The default estimator works on a Gaussian surrogate of the linearized
//! pilot observations: pilot `t` rides on bin `t mod S` of frame `t / S`, and
//! AP `b` observes `y_b[t] = G_b (h_b^T x[t] + w + d) + e_b[t]` with the true
//! gain, the true distortion spectrum at the pilot dither, and independent
//! frames. The estimator itself only knows the large-scale gains, so it works
//! with the gain and distortion it expects on average and not the
//! instantaneous ones.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::bussgang::{BussgangLinearization, FlatKernel};
use crate::channel::complex_normal;
use crate::linalg::{CMat, RMat};
use crate::sysconfig::LinkBudget;
use crate::{Error, Result};

/// Produces an estimate of a flat channel from one pilot phase.
pub trait ChannelEstimator: Sync {
    fn estimate(&self, h: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat>;
}

/// Per-AP LMMSE estimation from Bussgang-linearized pilots.
pub struct BussgangPilotEstimator<'a> {
    kernel: &'a FlatKernel,
    /// Energies during the pilot phase; `ed` is the pilot dither.
    link: LinkBudget,
    /// B x U large-scale gains, the prior variances of `h`.
    prior: RMat,
    pilots: usize,
}

impl<'a> BussgangPilotEstimator<'a> {
    pub fn link(&self) -> &LinkBudget {
        &self.link
    }

    pub fn new(kernel: &'a FlatKernel, link: LinkBudget, prior: RMat, pilots: usize) -> Result<Self> {
        if pilots < prior.ncols() {
            return Err(Error::InvalidParams(alloc::format!(
                "{pilots} pilots cannot separate {} UEs",
                prior.ncols()
            )));
        }
        Ok(Self {
            kernel,
            link,
            prior,
            pilots,
        })
    }

    /// Orthogonal pilot `x_u[t] = sqrt(E_s) e^{j 2π u t / n_p}`.
    fn pilot(&self, u: usize, t: usize) -> Complex64 {
        let ang = 2.0 * PI * ((u * t) % self.pilots) as f64 / self.pilots as f64;
        Complex64::new(libm::cos(ang), libm::sin(ang)) * libm::sqrt(self.link.es)
    }

    /// Average input standard deviation and effective noise variance seen
    /// after dividing by the average gain.
    fn statistical_model(&self, b: usize) -> (f64, f64) {
        let grid = self.kernel.grid();
        let ratio = grid.s() as f64 / grid.n as f64;
        let mean_energy: f64 = self.prior.row(b).iter().sum();
        let p_sq = ratio * (self.link.es * mean_energy + self.link.n0) + self.link.ed / 2.0;
        let gain = libm::sqrt(FRAC_2_PI / p_sq);
        let noise = gain * gain * (self.link.n0 + self.link.ed) + 2.0 * (1.0 - 2.0 / PI);
        (gain, noise)
    }
}

impl BussgangPilotEstimator<'_> {
    /// Like [`ChannelEstimator::estimate`] with the pilot-phase linearization
    /// of `h` supplied by the caller.
    pub fn estimate_with(&self, h: &CMat, lin: &BussgangLinearization, rng: &mut ChaCha8Rng) -> Result<CMat> {
        let (nb, nu) = (h.nrows(), h.ncols());
        if self.link.es == 0.0 {
            return Ok(CMat::zeros(nb, nu));
        }
        let s = lin.spectrum.per_bin.len();
        // Square roots of the per-bin distortion covariances.
        let roots: Vec<CMat> = lin
            .spectrum
            .per_bin
            .iter()
            .map(|c| {
                let mut c = c.clone();
                let jitter = 1e-14 * crate::linalg::trace_re(&c).max(1e-300);
                for i in 0..nb {
                    c[(i, i)] += jitter;
                }
                c.cholesky().map(|l| l.unpack()).ok_or(Error::NotPositiveDefinite)
            })
            .collect::<Result<_>>()?;

        // X^* y per AP and UE, accumulated over pilots.
        let mut corr = CMat::zeros(nb, nu);
        let mut white = vec_cn(nb);
        for t in 0..self.pilots {
            let bin = t % s;
            for v in white.iter_mut() {
                *v = complex_normal(rng, 1.0);
            }
            let e = &roots[bin] * CMat::from_column_slice(nb, 1, &white);
            let x: Vec<Complex64> = (0..nu).map(|u| self.pilot(u, t)).collect();
            for b in 0..nb {
                let mut rx = complex_normal(rng, self.link.n0) + complex_normal(rng, self.link.ed);
                for (u, xu) in x.iter().enumerate() {
                    rx += h[(b, u)] * xu;
                }
                let y = rx * lin.gain.diag[b] + e[(b, 0)];
                for (u, xu) in x.iter().enumerate() {
                    corr[(b, u)] += xu.conj() * y;
                }
            }
        }
        let energy = self.pilots as f64 * self.link.es;
        let mut est = CMat::zeros(nb, nu);
        for b in 0..nb {
            let (g, noise) = self.statistical_model(b);
            for u in 0..nu {
                let prior = self.prior[(b, u)];
                if prior > 0.0 {
                    est[(b, u)] = corr[(b, u)] * (g / noise) / (1.0 / prior + g * g * energy / noise);
                }
            }
        }
        Ok(est)
    }
}

impl ChannelEstimator for BussgangPilotEstimator<'_> {
    fn estimate(&self, h: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat> {
        if self.link.es == 0.0 {
            return Ok(CMat::zeros(h.nrows(), h.ncols()));
        }
        let lin = self.kernel.linearize(h, &self.link)?;
        self.estimate_with(h, &lin, rng)
    }
}

fn vec_cn(n: usize) -> Vec<Complex64> {
    alloc::vec![Complex64::new(0.0, 0.0); n]
}
