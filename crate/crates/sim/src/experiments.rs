//! The experiment suite: dither sweeps, fronthaul sweeps, availability over
//! random UE drops, and pilot sweeps with estimated channels.
//!
//! Every sweep point is evaluated on the same fading draws (trial `i` always
//! uses stream `i`), so curves over E_d, R_fh or B share their randomness.

use std::fmt;
use std::str::FromStr;

use rofmimo_core::bussgang::{linearize_with, BussgangLinearization, FlatKernel};
use rofmimo_core::channel::{
    colocated_array, draw_channel, path_loss, ChannelRealization, PathLoss, Topology, UePlacement,
};
use rofmimo_core::combiners::{draw_lmmse_trace, draw_terms, imperfect_csi_terms, is_degenerate, CombinerKind};
use rofmimo_core::estimation::BussgangPilotEstimator;
use rofmimo_core::linalg::RMat;
use rofmimo_core::montecarlo::{trial_rng, ChannelSource, Domain, RayleighSource};
use rofmimo_core::sysconfig::{DerivedGrid, LinkBudget};
use serde::Serialize;

use crate::config::{AvailabilityConfig, Config, DitherConfig, FronthaulConfig, PilotConfig};
use crate::error::{SimError, SimResult};
use crate::mc::{controlled, reference_moments, Estimate, Features, LimitSummary, Reference};
use crate::parallel::Runner;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Dither,
    Fronthaul,
    Availability,
    Pilots,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Dither,
        ExperimentKind::Fronthaul,
        ExperimentKind::Availability,
        ExperimentKind::Pilots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Dither => "dither",
            ExperimentKind::Fronthaul => "fronthaul",
            ExperimentKind::Availability => "availability",
            ExperimentKind::Pilots => "pilots",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown experiment {s:?}")))
    }
}

/// What to sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Dither(DitherConfig),
    Fronthaul(FronthaulConfig),
    Availability(AvailabilityConfig),
    Pilots(PilotConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,
    pub reference_trials: usize,
    pub plan: Plan,
}

impl SweepSpec {
    pub fn from_config(cfg: &Config, kind: ExperimentKind) -> SimResult<Self> {
        cfg.validate()?;
        let plan = match kind {
            ExperimentKind::Dither => Plan::Dither(cfg.dither.clone()),
            ExperimentKind::Fronthaul => Plan::Fronthaul(cfg.fronthaul.clone()),
            ExperimentKind::Availability => Plan::Availability(cfg.availability.clone()),
            ExperimentKind::Pilots => Plan::Pilots(cfg.pilots.clone()),
        };
        Ok(Self {
            scenario: Scenario::from_config(&cfg.scenario),
            seed: cfg.run.seed,
            trials: cfg.run.trials,
            reference_trials: cfg.run.reference_trials,
            plan,
        })
    }

    pub fn kind(&self) -> ExperimentKind {
        match self.plan {
            Plan::Dither(_) => ExperimentKind::Dither,
            Plan::Fronthaul(_) => ExperimentKind::Fronthaul,
            Plan::Availability(_) => ExperimentKind::Availability,
            Plan::Pilots(_) => ExperimentKind::Pilots,
        }
    }
}

/// Per-draw value and control features, one slot per (point, combiner).
type DrawValues = Vec<Option<(f64, Features)>>;

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub experiment: &'static str,
    /// `distributed` or `colocated`.
    pub deployment: &'static str,
    pub combiner: &'static str,
    pub aps: usize,
    pub ues: usize,
    pub fronthaul_bps: Option<f64>,
    pub osr: Option<usize>,
    pub sampling_valid: Option<bool>,
    /// Data-phase E_d / N_0.
    pub ed_over_n0_db: Option<f64>,
    pub pilots: Option<usize>,
    pub pilot_ed_over_n0_db: Option<f64>,
    pub evm_percent: f64,
    pub std_err_percent: f64,
    /// Infinite-fronthaul EVM for the same point (perfect CSI for pilot rows).
    pub asymptote_percent: Option<f64>,
    pub availability: Option<f64>,
    /// Fading draws, or UE drops for availability rows.
    pub trials: usize,
    pub discarded: usize,
}

impl SweepRecord {
    fn sort_key(&self) -> (&'static str, &'static str, usize, f64, &'static str, usize, f64, f64) {
        (
            self.experiment,
            self.deployment,
            self.aps,
            self.fronthaul_bps.unwrap_or(f64::INFINITY),
            self.combiner,
            self.pilots.unwrap_or(0),
            self.ed_over_n0_db.unwrap_or(f64::NEG_INFINITY),
            self.pilot_ed_over_n0_db.unwrap_or(f64::NEG_INFINITY),
        )
    }
}

/// Sorts rows by (experiment, deployment, B, R_fh, combiner, pilots, E_d).
pub fn sort_records(rows: &mut [SweepRecord]) {
    rows.sort_by(|a, b| {
        let (x, y) = (a.sort_key(), b.sort_key());
        x.0.cmp(y.0)
            .then(x.1.cmp(y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.total_cmp(&y.3))
            .then(x.4.cmp(y.4))
            .then(x.5.cmp(&y.5))
            .then(x.6.total_cmp(&y.6))
            .then(x.7.total_cmp(&y.7))
    });
}

/// Receives the rows of one sweep cell at a time, in sorted order.
pub type Sink<'a> = dyn FnMut(&[SweepRecord]) -> SimResult<()> + 'a;

fn gbps(x: f64) -> f64 {
    x * 1e9
}

fn kinds_of(list: &[crate::config::Combiner]) -> Vec<CombinerKind> {
    let mut v: Vec<crate::config::Combiner> = list.to_vec();
    v.sort();
    v.dedup();
    v.into_iter().map(CombinerKind::from).collect()
}

fn lift<T>(r: rofmimo_core::Result<T>) -> SimResult<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_degenerate(&e) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Perfect-CSI squared EVM of one draw, normalized by `E_s U S`.
fn perfect_value(
    kind: CombinerKind,
    ch: &ChannelRealization,
    lin: &BussgangLinearization,
    link: &LinkBudget,
) -> rofmimo_core::Result<f64> {
    match kind {
        CombinerKind::Lmmse => draw_lmmse_trace(ch, lin, link),
        _ => Ok(draw_terms(kind, ch, lin, link)?.total()),
    }
}

/// A deployment at one fronthaul rate.
struct Cell {
    aps: usize,
    ues: usize,
    fronthaul_bps: f64,
    grid: DerivedGrid,
    kernel: FlatKernel,
    path_loss: PathLoss,
    valid: bool,
}

impl Cell {
    fn new(sc: &Scenario, aps: usize, ues: usize, fronthaul_bps: f64, path_loss: PathLoss) -> SimResult<Self> {
        let grid = sc.grid(aps, ues, fronthaul_bps)?;
        Ok(Self {
            aps,
            ues,
            fronthaul_bps,
            kernel: FlatKernel::new(&grid),
            valid: sc.sampling_valid(grid.osr),
            grid,
            path_loss,
        })
    }

    fn record(&self, experiment: ExperimentKind, combiner: &'static str) -> SweepRecord {
        SweepRecord {
            experiment: experiment.name(),
            deployment: "distributed",
            combiner,
            aps: self.aps,
            ues: self.ues,
            fronthaul_bps: Some(self.fronthaul_bps),
            osr: Some(self.grid.osr),
            sampling_valid: Some(self.valid),
            ed_over_n0_db: None,
            pilots: None,
            pilot_ed_over_n0_db: None,
            evm_percent: f64::NAN,
            std_err_percent: f64::NAN,
            asymptote_percent: None,
            availability: None,
            trials: 0,
            discarded: 0,
        }
    }

    /// Per-trial values for every (link, kind), indexed `[trial][link * K + kind]`.
    fn perfect_values(
        &self,
        runner: &Runner,
        seed: u64,
        links: &[LinkBudget],
        kinds: &[CombinerKind],
        trials: std::ops::Range<u64>,
    ) -> SimResult<Vec<DrawValues>> {
        let source = RayleighSource::new(self.path_loss.clone(), seed);
        runner.try_map(trials, |i| {
            let ch = source.draw(i);
            let h = ch
                .flat()
                .ok_or_else(|| SimError::Config("sweeps need flat channels".into()))?;
            let summaries: Vec<Option<LimitSummary>> = kinds.iter().map(|&k| LimitSummary::new(k, h)).collect();
            let mut out = Vec::with_capacity(links.len() * kinds.len());
            for link in links {
                let lin = lift(linearize_with(&self.kernel, &ch, link))?;
                for (&kind, summary) in kinds.iter().zip(&summaries) {
                    let x = match &lin {
                        Some(lin) => lift(perfect_value(kind, &ch, lin, link))?,
                        None => None,
                    };
                    out.push(x.zip(summary.as_ref().map(|s| s.features(link, &self.grid))));
                }
            }
            Ok(out)
        })
    }

    fn references(
        &self,
        runner: &Runner,
        seed: u64,
        n: usize,
        links: &[LinkBudget],
        kinds: &[CombinerKind],
    ) -> Vec<Reference> {
        kinds
            .iter()
            .map(|&k| reference_moments(runner, k, &self.path_loss, &self.grid, links, seed, n))
            .collect()
    }
}

fn column(values: &[Vec<Option<(f64, Features)>>], idx: usize) -> Vec<Option<(f64, Features)>> {
    values.iter().map(|t| t[idx]).collect()
}

fn estimate_point(
    values: &[Vec<Option<(f64, Features)>>],
    idx: usize,
    reference: &Reference,
    point: usize,
) -> Estimate {
    controlled(
        &column(values, idx),
        &reference.mean[point],
        &reference.cov[point],
        reference.n,
    )
}

fn fill(rec: &mut SweepRecord, est: &Estimate) {
    rec.evm_percent = est.eta_percent();
    rec.std_err_percent = est.eta_std_err_percent();
    rec.trials = est.n;
    rec.discarded = est.discarded;
}

fn emit(sink: &mut Sink<'_>, mut rows: Vec<SweepRecord>, all: &mut Vec<SweepRecord>) -> SimResult<()> {
    sort_records(&mut rows);
    sink(&rows)?;
    all.extend(rows);
    Ok(())
}

/// EVM on a grid of E_d for every (B, R_fh, combiner), with the
/// infinite-fronthaul EVM at the same E_d attached.
pub fn run_dither_sweep(spec: &SweepSpec, runner: &Runner, sink: &mut Sink<'_>) -> SimResult<Vec<SweepRecord>> {
    let Plan::Dither(plan) = &spec.plan else {
        return Err(SimError::Config("not a dither sweep".into()));
    };
    let sc = &spec.scenario;
    let eds = plan.ed_db.values();
    let kinds = kinds_of(&plan.combiners);
    let mut all = Vec::new();
    for &aps in &plan.aps {
        let (_, pl) = sc.deployment(aps, plan.ues, plan.placement.into(), spec.seed)?;
        let links: Vec<LinkBudget> = eds.iter().map(|&e| sc.link(aps, e)).collect();
        for &rate in &plan.fronthaul_gbps {
            let cell = Cell::new(sc, aps, plan.ues, gbps(rate), pl.clone())?;
            let refs = cell.references(runner, spec.seed, spec.reference_trials, &links, &kinds);
            let values = cell.perfect_values(runner, spec.seed, &links, &kinds, 0..spec.trials as u64)?;
            let mut rows = Vec::new();
            for (p, &ed) in eds.iter().enumerate() {
                for (k, &kind) in kinds.iter().enumerate() {
                    let est = estimate_point(&values, p * kinds.len() + k, &refs[k], p);
                    let mut rec = cell.record(ExperimentKind::Dither, kind.name());
                    rec.ed_over_n0_db = Some(ed);
                    fill(&mut rec, &est);
                    rec.asymptote_percent = Some(refs[k].substituted(p).eta_percent());
                    rows.push(rec);
                }
            }
            emit(sink, rows, &mut all)?;
        }
    }
    Ok(all)
}

/// Index of the smallest finite mean.
fn argmin(est: &[Estimate]) -> Option<usize> {
    est.iter()
        .enumerate()
        .filter(|(_, e)| e.mean.is_finite())
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .map(|(i, _)| i)
}

/// EVM against R_fh with E_d optimized per point, and the E_d = 0
/// infinite-fronthaul EVM attached.
pub fn run_fronthaul_sweep(spec: &SweepSpec, runner: &Runner, sink: &mut Sink<'_>) -> SimResult<Vec<SweepRecord>> {
    let Plan::Fronthaul(plan) = &spec.plan else {
        return Err(SimError::Config("not a fronthaul sweep".into()));
    };
    let sc = &spec.scenario;
    let eds = plan.ed_db.values();
    let kinds = kinds_of(&plan.combiners);
    let nk = kinds.len();
    let coarse = plan.coarse_trials.min(spec.trials) as u64;
    let full = spec.trials as u64;
    let mut all = Vec::new();
    for &aps in &plan.aps {
        let (_, pl) = sc.deployment(aps, plan.ues, plan.placement.into(), spec.seed)?;
        // The last link is the E_d = 0 limit.
        let mut links: Vec<LinkBudget> = eds.iter().map(|&e| sc.link(aps, e)).collect();
        links.push(sc.link(aps, f64::NEG_INFINITY));
        let limit = eds.len();
        for &rate in &plan.fronthaul_gbps {
            let cell = Cell::new(sc, aps, plan.ues, gbps(rate), pl.clone())?;
            let refs = cell.references(runner, spec.seed, spec.reference_trials, &links, &kinds);
            let scan = cell.perfect_values(runner, spec.seed, &links[..limit], &kinds, 0..coarse)?;
            let mut windows = Vec::with_capacity(nk);
            let mut wanted = vec![false; eds.len()];
            for (k, r) in refs.iter().enumerate() {
                let est: Vec<Estimate> = (0..eds.len())
                    .map(|p| estimate_point(&scan, p * nk + k, r, p))
                    .collect();
                let best = argmin(&est).unwrap_or(0);
                let lo = best.saturating_sub(plan.refine);
                let hi = (best + plan.refine).min(eds.len() - 1);
                wanted[lo..=hi].iter_mut().for_each(|w| *w = true);
                windows.push(lo..=hi);
            }
            let picked: Vec<usize> = (0..eds.len()).filter(|&p| wanted[p]).collect();
            let picked_links: Vec<LinkBudget> = picked.iter().map(|&p| links[p]).collect();
            let rest = cell.perfect_values(runner, spec.seed, &picked_links, &kinds, coarse..full)?;
            let mut rows = Vec::new();
            for (k, &kind) in kinds.iter().enumerate() {
                let mut best: Option<(usize, Estimate)> = None;
                for p in windows[k].clone() {
                    let slot = picked.iter().position(|&q| q == p).expect("picked covers every window");
                    let mut values = column(&scan, p * nk + k);
                    values.extend(column(&rest, slot * nk + k));
                    let est = controlled(&values, &refs[k].mean[p], &refs[k].cov[p], refs[k].n);
                    if best.as_ref().is_none_or(|(_, b)| est.mean < b.mean) {
                        best = Some((p, est));
                    }
                }
                let (p, est) = best.expect("windows are nonempty");
                let mut rec = cell.record(ExperimentKind::Fronthaul, kind.name());
                rec.ed_over_n0_db = Some(eds[p]);
                fill(&mut rec, &est);
                rec.asymptote_percent = Some(refs[k].substituted(limit).eta_percent());
                rows.push(rec);
            }
            emit(sink, rows, &mut all)?;
        }
    }
    Ok(all)
}

/// Fading draws of one UE drop; drop `d`, draw `i` uses stream `d * 2^32 + i`
/// so every deployment sees the same fading sequence for a given drop.
struct DropSource {
    path_loss: PathLoss,
    seed: u64,
    drop: u64,
}

impl ChannelSource for DropSource {
    fn draw(&self, index: u64) -> ChannelRealization {
        draw_channel(
            &self.path_loss,
            &mut trial_rng(self.seed, Domain::Fading, (self.drop << 32) | index),
        )
    }
}

/// Mean squared EVM of one drop, adding draws until the estimate is clear of
/// `threshold_sq` by two standard errors or `max` draws are used.
fn sequential_drop<F>(min: usize, max: usize, threshold_sq: f64, value: F) -> SimResult<Estimate>
where
    F: Fn(u64) -> SimResult<Option<f64>>,
{
    let mut values: Vec<Option<f64>> = Vec::with_capacity(max);
    let mut target = min;
    loop {
        for i in values.len()..target {
            values.push(value(i as u64)?);
        }
        let est = Estimate::from_values(&values);
        let unclear = !(est.std_err.is_finite()) || (est.mean - threshold_sq).abs() < 2.0 * est.std_err;
        if !unclear || target >= max {
            return Ok(est);
        }
        target = (2 * target).min(max);
    }
}

struct DropStats {
    availability: f64,
    mean_eta: Estimate,
    discarded: usize,
}

fn summarize_drops(per_drop: &[Estimate], threshold: f64) -> DropStats {
    let ok: Vec<&Estimate> = per_drop.iter().filter(|e| e.n > 0 && e.mean.is_finite()).collect();
    let passed = ok.iter().filter(|e| e.mean < threshold * threshold).count();
    let etas: Vec<Option<f64>> = ok.iter().map(|e| Some(e.mean.max(0.0).sqrt())).collect();
    let mean_eta = Estimate::from_values(&etas);
    DropStats {
        availability: if ok.is_empty() {
            f64::NAN
        } else {
            passed as f64 / ok.len() as f64
        },
        mean_eta,
        discarded: per_drop.len() - ok.len(),
    }
}

fn drop_topology(sc: &Scenario, base: &Topology, ues: usize, seed: u64, drop: u64) -> SimResult<PathLoss> {
    let t = base
        .clone()
        .with_ues(sc.ues(ues, UePlacement::UniformRandom, seed, drop)?);
    Ok(path_loss(&t))
}

/// Availability of the co-located baseline: all antennas at the area center,
/// no quantization, infinite fronthaul.
fn colocated_row(spec: &SweepSpec, plan: &AvailabilityConfig, runner: &Runner) -> SimResult<SweepRecord> {
    let sc = &spec.scenario;
    let antennas = plan.colocated_antennas;
    let base = colocated_array(antennas, sc.center(), sc.length_m, sc.width_m);
    let link = sc.link(antennas, f64::NEG_INFINITY);
    let kind = CombinerKind::from(plan.combiner);
    let threshold = plan.threshold_percent / 100.0;
    let per_drop = runner.try_map(0..plan.drops as u64, |d| {
        let source = DropSource {
            path_loss: drop_topology(sc, &base, plan.ues, spec.seed, d)?,
            seed: spec.seed,
            drop: d,
        };
        let values: Vec<Option<f64>> = (0..plan.colocated_fading as u64)
            .map(|i| {
                let ch = source.draw(i);
                ch.flat()
                    .and_then(|h| LimitSummary::new(kind, h))
                    .map(|s| s.substituted(&link))
            })
            .collect();
        Ok::<_, SimError>(Estimate::from_values(&values))
    })?;
    let stats = summarize_drops(&per_drop, threshold);
    Ok(SweepRecord {
        experiment: ExperimentKind::Availability.name(),
        deployment: "colocated",
        combiner: kind.name(),
        aps: antennas,
        ues: plan.ues,
        fronthaul_bps: None,
        osr: None,
        sampling_valid: None,
        ed_over_n0_db: None,
        pilots: None,
        pilot_ed_over_n0_db: None,
        evm_percent: 100.0 * stats.mean_eta.mean,
        std_err_percent: 100.0 * stats.mean_eta.std_err,
        asymptote_percent: None,
        availability: Some(stats.availability),
        trials: plan.drops,
        discarded: stats.discarded,
    })
}

/// Fraction of random UE drops meeting the EVM threshold for every
/// (B, R_fh), plus the co-located baseline. Drops and their fading are
/// shared by all cells.
pub fn run_availability(spec: &SweepSpec, runner: &Runner, sink: &mut Sink<'_>) -> SimResult<Vec<SweepRecord>> {
    let Plan::Availability(plan) = &spec.plan else {
        return Err(SimError::Config("not an availability sweep".into()));
    };
    let sc = &spec.scenario;
    let kind = CombinerKind::from(plan.combiner);
    let threshold = plan.threshold_percent / 100.0;
    let threshold_sq = threshold * threshold;
    let eds = plan.ed_db.values();
    let mut all = Vec::new();
    if plan.colocated_antennas > 0 {
        let row = colocated_row(spec, plan, runner)?;
        emit(sink, vec![row], &mut all)?;
    }
    for &aps in &plan.aps {
        let base = sc.ap_grid(aps)?;
        for &rate in &plan.fronthaul_gbps {
            let cell = Cell::new(
                sc,
                aps,
                plan.ues,
                gbps(rate),
                PathLoss::from_gains(RMat::zeros(aps, plan.ues)),
            )?;
            let drop_source = |d: u64| -> SimResult<DropSource> {
                Ok(DropSource {
                    path_loss: drop_topology(sc, &base, plan.ues, spec.seed, d)?,
                    seed: spec.seed,
                    drop: d,
                })
            };
            let drop_value = |source: &DropSource, link: &LinkBudget, i: u64| -> SimResult<Option<f64>> {
                let ch = source.draw(i);
                let Some(lin) = lift(linearize_with(&cell.kernel, &ch, link))? else {
                    return Ok(None);
                };
                lift(perfect_value(kind, &ch, &lin, link))
            };
            // E_d from the first drops.
            let tune = plan.tune_drops.clamp(1, plan.drops) as u64;
            let tuned = runner.try_map(0..tune, |d| {
                let source = drop_source(d)?;
                eds.iter()
                    .map(|&e| {
                        let link = sc.link(aps, e);
                        let v = (0..plan.fading_min as u64)
                            .map(|i| drop_value(&source, &link, i))
                            .collect::<SimResult<Vec<_>>>()?;
                        Ok(Estimate::from_values(&v).mean)
                    })
                    .collect::<SimResult<Vec<f64>>>()
            })?;
            let score: Vec<Estimate> = (0..eds.len())
                .map(|p| Estimate::from_values(&tuned.iter().map(|t| Some(t[p])).collect::<Vec<_>>()))
                .collect();
            let p = argmin(&score).unwrap_or(0);
            let link = sc.link(aps, eds[p]);
            let per_drop = runner.try_map(0..plan.drops as u64, |d| {
                let source = drop_source(d)?;
                sequential_drop(plan.fading_min, plan.fading_max, threshold_sq, |i| {
                    drop_value(&source, &link, i)
                })
            })?;
            let stats = summarize_drops(&per_drop, threshold);
            let mut rec = cell.record(ExperimentKind::Availability, kind.name());
            rec.ed_over_n0_db = Some(eds[p]);
            rec.evm_percent = 100.0 * stats.mean_eta.mean;
            rec.std_err_percent = 100.0 * stats.mean_eta.std_err;
            rec.availability = Some(stats.availability);
            rec.trials = plan.drops;
            rec.discarded = stats.discarded;
            emit(sink, vec![rec], &mut all)?;
        }
    }
    Ok(all)
}

/// EVM with estimated CSI against the number of pilots, with both the pilot
/// and the data dither optimized; the perfect-CSI EVM (data dither
/// optimized) is attached as the asymptote.
pub fn run_pilot_sweep(spec: &SweepSpec, runner: &Runner, sink: &mut Sink<'_>) -> SimResult<Vec<SweepRecord>> {
    let Plan::Pilots(plan) = &spec.plan else {
        return Err(SimError::Config("not a pilot sweep".into()));
    };
    let sc = &spec.scenario;
    let kind = CombinerKind::from(plan.combiner);
    if kind == CombinerKind::Lmmse {
        return Err(SimError::Config(
            "the pilot sweep supports the mr and zf combiners".into(),
        ));
    }
    let (_, pl) = sc.deployment(plan.aps, plan.ues, plan.placement.into(), spec.seed)?;
    let cell = Cell::new(sc, plan.aps, plan.ues, gbps(plan.fronthaul_gbps), pl)?;
    let pilot_eds = plan.pilot_ed_db.values();
    let data_eds = plan.data_ed_db.values();
    let data_links: Vec<LinkBudget> = data_eds.iter().map(|&e| sc.link(plan.aps, e)).collect();
    let pilot_links: Vec<LinkBudget> = pilot_eds.iter().map(|&e| sc.link(plan.aps, e)).collect();
    let prior = cell.path_loss.gains.clone();
    let (np, nd) = (pilot_eds.len(), data_eds.len());
    let source = RayleighSource::new(cell.path_loss.clone(), spec.seed);

    // Per trial: perfect-CSI values per data E_d, then estimated-CSI values
    // per (count, pilot E_d, data E_d).
    let per_trial = runner.try_map(0..spec.trials as u64, |i| {
        let ch = source.draw(i);
        let h = ch
            .flat()
            .ok_or_else(|| SimError::Config("sweeps need flat channels".into()))?;
        let data_lins = data_links
            .iter()
            .map(|l| lift(linearize_with(&cell.kernel, &ch, l)))
            .collect::<SimResult<Vec<_>>>()?;
        let mut perfect = Vec::with_capacity(nd);
        for (lin, link) in data_lins.iter().zip(&data_links) {
            perfect.push(match lin {
                Some(lin) => lift(perfect_value(kind, &ch, lin, link))?,
                None => None,
            });
        }
        let mut estimated = vec![None; plan.counts.len() * np * nd];
        for (p, plink) in pilot_links.iter().enumerate() {
            let Some(plin) = lift(linearize_with(&cell.kernel, &ch, plink))? else {
                continue;
            };
            for (c, &count) in plan.counts.iter().enumerate() {
                let est = BussgangPilotEstimator::new(&cell.kernel, *plink, prior.clone(), count)?;
                let mut rng = trial_rng(spec.seed, Domain::Pilot, i);
                let Some(h_est) = lift(est.estimate_with(h, &plin, &mut rng))? else {
                    continue;
                };
                for (d, (lin, link)) in data_lins.iter().zip(&data_links).enumerate() {
                    if let Some(lin) = lin {
                        estimated[(c * np + p) * nd + d] =
                            lift(imperfect_csi_terms(kind, h, &h_est, lin, link, &cell.kernel))?.map(|t| t.total());
                    }
                }
            }
        }
        Ok::<_, SimError>((perfect, estimated))
    })?;

    let perfect: Vec<Estimate> = (0..nd)
        .map(|d| Estimate::from_values(&per_trial.iter().map(|t| t.0[d]).collect::<Vec<_>>()))
        .collect();
    let perfect_best = argmin(&perfect).map(|d| perfect[d]);
    let mut rows = Vec::new();
    for (c, &count) in plan.counts.iter().enumerate() {
        let est: Vec<Estimate> = (0..np * nd)
            .map(|j| Estimate::from_values(&per_trial.iter().map(|t| t.1[c * np * nd + j]).collect::<Vec<_>>()))
            .collect();
        let Some(j) = argmin(&est) else { continue };
        let mut rec = cell.record(ExperimentKind::Pilots, kind.name());
        rec.pilots = Some(count);
        rec.pilot_ed_over_n0_db = Some(pilot_eds[j / nd]);
        rec.ed_over_n0_db = Some(data_eds[j % nd]);
        fill(&mut rec, &est[j]);
        rec.asymptote_percent = perfect_best.map(|e| e.eta_percent());
        rows.push(rec);
    }
    let mut all = Vec::new();
    emit(sink, rows, &mut all)?;
    Ok(all)
}

/// Runs whichever experiment `spec` describes.
pub fn run(spec: &SweepSpec, runner: &Runner, sink: &mut Sink<'_>) -> SimResult<Vec<SweepRecord>> {
    match spec.kind() {
        ExperimentKind::Dither => run_dither_sweep(spec, runner, sink),
        ExperimentKind::Fronthaul => run_fronthaul_sweep(spec, runner, sink),
        ExperimentKind::Availability => run_availability(spec, runner, sink),
        ExperimentKind::Pilots => run_pilot_sweep(spec, runner, sink),
    }
}

/// Runs `spec` and returns every row, without streaming.
pub fn collect(spec: &SweepSpec, runner: &Runner) -> SimResult<Vec<SweepRecord>> {
    run(spec, runner, &mut |_| Ok(()))
}

/// The first (B, U, placement, R_fh in bit/s, E_d/N_0 dB) point of a sweep.
pub fn first_point(spec: &SweepSpec) -> (usize, usize, UePlacement, f64, f64) {
    let first = |v: &[f64]| v.first().copied().unwrap_or(0.0);
    match &spec.plan {
        Plan::Dither(p) => (
            p.aps[0],
            p.ues,
            p.placement.into(),
            gbps(p.fronthaul_gbps[0]),
            first(&p.ed_db.values()),
        ),
        Plan::Fronthaul(p) => (
            p.aps[0],
            p.ues,
            p.placement.into(),
            gbps(p.fronthaul_gbps[0]),
            first(&p.ed_db.values()),
        ),
        Plan::Availability(p) => (
            p.aps[0],
            p.ues,
            UePlacement::UniformRandom,
            gbps(p.fronthaul_gbps[0]),
            first(&p.ed_db.values()),
        ),
        Plan::Pilots(p) => (
            p.aps,
            p.ues,
            p.placement.into(),
            gbps(p.fronthaul_gbps),
            first(&p.data_ed_db.values()),
        ),
    }
}
