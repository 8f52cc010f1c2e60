//! Monte-Carlo averaging of per-draw squared EVM with control variates.
//!
//! The finite-oversampling EVM of a draw is strongly correlated with cheap
//! closed-form functions of the same channel: the value with the limiting
//! gain and distortion substituted, and two per-AP input-power moments. Their
//! exact means are replaced by averages over a large independent reference
//! stream, and the regression-adjusted mean
//! `mean(X) - beta^T (mean(F) - mu_F)` is reported with a standard error that
//! includes the uncertainty of `mu_F`.

use std::f64::consts::PI;

use rofmimo_core::channel::{draw_channel, ChannelRealization, PathLoss};
use rofmimo_core::combiners::CombinerKind;
use rofmimo_core::linalg::{hpd_inverse, trace_re, CMat, RMat};
use rofmimo_core::math::mean_and_stderr;
use rofmimo_core::montecarlo::{trial_rng, Domain};
use rofmimo_core::sysconfig::{DerivedGrid, LinkBudget};

use crate::parallel::Runner;

/// Number of control features.
pub const FEATURES: usize = 3;

pub type Features = [f64; FEATURES];

/// A squared-EVM average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
    pub discarded: usize,
}

impl Estimate {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let kept: Vec<f64> = values.iter().flatten().copied().collect();
        let (mean, std_err) = mean_and_stderr(&kept);
        Self {
            mean,
            std_err,
            n: kept.len(),
            discarded: values.len() - kept.len(),
        }
    }

    /// EVM in percent.
    pub fn eta_percent(&self) -> f64 {
        100.0 * self.mean.max(0.0).sqrt()
    }

    /// Standard error of the EVM in percent, by the delta method.
    pub fn eta_std_err_percent(&self) -> f64 {
        if self.mean > 0.0 {
            100.0 * self.std_err / (2.0 * self.mean.sqrt())
        } else {
            f64::NAN
        }
    }
}

/// Ed-independent summary of a flat channel for the substituted EVM.
#[derive(Debug, Clone)]
pub struct LimitSummary {
    kind: CombinerKind,
    /// ZF: `tr((H^H H)^{-1})`. MR: `sum_u 1/|h_u|^2`. LMMSE: unused.
    inverse_trace: f64,
    /// MR only: `sum_{u != v} |h_u^H h_v|^2 / |h_u|^4`.
    crosstalk: f64,
    /// LMMSE only: eigenvalues of `H^H H`.
    eigen: Vec<f64>,
    /// Per-AP `sum_u |h_bu|^2`.
    ap_energy: Vec<f64>,
    ues: usize,
}

impl LimitSummary {
    /// `None` when the channel is degenerate for `kind`.
    pub fn new(kind: CombinerKind, h: &CMat) -> Option<Self> {
        let (b, u) = (h.nrows(), h.ncols());
        let ap_energy: Vec<f64> = (0..b).map(|i| h.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
        let col_energy: Vec<f64> = (0..u).map(|j| h.column(j).norm_squared()).collect();
        if col_energy.iter().any(|&e| !(e > 0.0)) {
            return None;
        }
        let gram = h.adjoint() * h;
        let mut s = Self {
            kind,
            inverse_trace: 0.0,
            crosstalk: 0.0,
            eigen: Vec::new(),
            ap_energy,
            ues: u,
        };
        match kind {
            CombinerKind::Mr => {
                s.inverse_trace = col_energy.iter().map(|e| 1.0 / e).sum();
                for i in 0..u {
                    for j in 0..u {
                        if i != j {
                            s.crosstalk += gram[(i, j)].norm_sqr() / (col_energy[i] * col_energy[i]);
                        }
                    }
                }
            }
            CombinerKind::Zf => {
                if u > b {
                    return None;
                }
                s.inverse_trace = trace_re(&hpd_inverse(&gram).ok()?);
            }
            CombinerKind::Lmmse => {
                s.eigen = gram.symmetric_eigenvalues().iter().map(|&l| l.max(0.0)).collect();
            }
        }
        Some(s)
    }

    /// Squared EVM with the limiting gain and distortion, normalized by
    /// `E_s U`; at `E_d = 0` this is the unquantized EVM.
    pub fn substituted(&self, link: &LinkBudget) -> f64 {
        let c = link.n0 + PI / 2.0 * link.ed;
        let u = self.ues as f64;
        match self.kind {
            CombinerKind::Mr => (link.es * self.crosstalk + c * self.inverse_trace) / (link.es * u),
            CombinerKind::Zf => c * self.inverse_trace / (link.es * u),
            CombinerKind::Lmmse => self.eigen.iter().map(|l| 1.0 / (1.0 + link.es * l / c)).sum::<f64>() / u,
        }
    }

    /// Control features at one operating point.
    pub fn features(&self, link: &LinkBudget, grid: &DerivedGrid) -> Features {
        let ratio = grid.s() as f64 / grid.n as f64;
        let total: f64 = self.ap_energy.iter().sum();
        let mut moments = [0.0; 2];
        for &e in &self.ap_energy {
            let signal = ratio * (link.es * e + link.n0);
            let p_sq = signal + link.ed / 2.0;
            let share = signal / p_sq;
            moments[0] += e * p_sq;
            moments[1] += e * p_sq * share * share;
        }
        let norm = 1.0 / (total * total);
        [self.substituted(link), moments[0] * norm, moments[1] * norm]
    }
}

/// Running mean and co-moment of feature vectors (Chan et al. merge).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    n: usize,
    mean: Features,
    comoment: [[f64; FEATURES]; FEATURES],
}

impl Moments {
    fn new() -> Self {
        Self {
            n: 0,
            mean: [0.0; FEATURES],
            comoment: [[0.0; FEATURES]; FEATURES],
        }
    }

    fn push(&mut self, f: &Features) {
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = (0..FEATURES).map(|i| f[i] - self.mean[i]).collect();
        for i in 0..FEATURES {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..FEATURES {
            for j in 0..FEATURES {
                self.comoment[i][j] += delta[i] * (f[j] - self.mean[j]);
            }
        }
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..FEATURES).map(|i| o.mean[i] - self.mean[i]).collect();
        for i in 0..FEATURES {
            for j in 0..FEATURES {
                self.comoment[i][j] += o.comoment[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..FEATURES {
            self.mean[i] += delta[i] * nb / n;
        }
        self.n += o.n;
    }
}

/// Feature means from the reference stream, one entry per operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub n: usize,
    pub mean: Vec<Features>,
    /// Covariance of a single draw's features.
    pub cov: Vec<[[f64; FEATURES]; FEATURES]>,
}

impl Reference {
    /// Mean of the substituted EVM at point `p`, with its standard error.
    pub fn substituted(&self, p: usize) -> Estimate {
        let var = self.cov[p][0][0];
        Estimate {
            mean: self.mean[p][0],
            std_err: (var / self.n as f64).sqrt(),
            n: self.n,
            discarded: 0,
        }
    }
}

const REFERENCE_CHUNK: u64 = 512;

/// Channel of reference draw `index`.
pub fn reference_channel(path_loss: &PathLoss, seed: u64, index: u64) -> ChannelRealization {
    draw_channel(path_loss, &mut trial_rng(seed, Domain::Reference, index))
}

/// Feature moments over `n` reference draws for every link in `links`.
/// Chunks are merged in index order, so the result does not depend on the
/// number of workers.
pub fn reference_moments(
    runner: &Runner,
    kind: CombinerKind,
    path_loss: &PathLoss,
    grid: &DerivedGrid,
    links: &[LinkBudget],
    seed: u64,
    n: usize,
) -> Reference {
    let chunks = (n as u64).div_ceil(REFERENCE_CHUNK);
    let parts = runner.map(0..chunks, |c| {
        let mut acc = vec![Moments::new(); links.len()];
        let end = ((c + 1) * REFERENCE_CHUNK).min(n as u64);
        for i in c * REFERENCE_CHUNK..end {
            let ch = reference_channel(path_loss, seed, i);
            let Some(h) = ch.flat() else { continue };
            let Some(s) = LimitSummary::new(kind, h) else { continue };
            for (m, link) in acc.iter_mut().zip(links) {
                m.push(&s.features(link, grid));
            }
        }
        acc
    });
    let mut total = vec![Moments::new(); links.len()];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let n_kept = total.first().map_or(0, |m| m.n);
    let denom = (n_kept.max(2) - 1) as f64;
    Reference {
        n: n_kept,
        mean: total.iter().map(|m| m.mean).collect(),
        cov: total
            .iter()
            .map(|m| {
                let mut c = m.comoment;
                c.iter_mut().flatten().for_each(|x| *x /= denom);
                c
            })
            .collect(),
    }
}

/// Regression-adjusted mean of `values` using features with known means.
/// Falls back to the plain mean with too few draws.
pub fn controlled(
    values: &[Option<(f64, Features)>],
    mu: &Features,
    mu_cov: &[[f64; FEATURES]; FEATURES],
    n_ref: usize,
) -> Estimate {
    let kept: Vec<&(f64, Features)> = values.iter().flatten().collect();
    let n = kept.len();
    let discarded = values.len() - n;
    let plain = Estimate::from_values(&values.iter().map(|v| v.map(|(x, _)| x)).collect::<Vec<_>>());
    if n < FEATURES + 4 {
        return plain;
    }
    let nf = n as f64;
    let xbar = kept.iter().map(|(x, _)| x).sum::<f64>() / nf;
    let mut fbar = [0.0; FEATURES];
    for (_, f) in &kept {
        for i in 0..FEATURES {
            fbar[i] += f[i] / nf;
        }
    }
    // Standardized design; near-collinear columns are cut by the SVD.
    let mut scale = [0.0; FEATURES];
    for i in 0..FEATURES {
        let v = kept.iter().map(|(_, f)| (f[i] - fbar[i]).powi(2)).sum::<f64>() / (nf - 1.0);
        scale[i] = if v > 0.0 { v.sqrt() } else { 0.0 };
    }
    let design = RMat::from_fn(n, FEATURES, |r, i| {
        if scale[i] > 0.0 {
            (kept[r].1[i] - fbar[i]) / scale[i]
        } else {
            0.0
        }
    });
    let y = RMat::from_fn(n, 1, |r, _| kept[r].0 - xbar);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return plain;
    }
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-8 * smax).count();
    let Ok(coef) = svd.solve(&y, 1e-8 * smax) else {
        return plain;
    };
    let beta: Vec<f64> = (0..FEATURES)
        .map(|i| if scale[i] > 0.0 { coef[(i, 0)] / scale[i] } else { 0.0 })
        .collect();
    let resid = &y - &design * &coef;
    let dof = (n - 1 - rank) as f64;
    let s2 = resid.iter().map(|r| r * r).sum::<f64>() / dof;
    let shift: f64 = (0..FEATURES).map(|i| beta[i] * (fbar[i] - mu[i])).sum();
    let mut ref_var = 0.0;
    for i in 0..FEATURES {
        for j in 0..FEATURES {
            ref_var += beta[i] * beta[j] * mu_cov[i][j];
        }
    }
    let est = Estimate {
        mean: xbar - shift,
        std_err: (s2 / nf + ref_var / n_ref.max(1) as f64).sqrt(),
        n,
        discarded,
    };
    if est.std_err.is_finite() && est.std_err <= plain.std_err {
        est
    } else {
        plain
    }
}
