//! Deployment geometry, path loss and Rayleigh channel draws.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMat, RMat};
use crate::{Error, Result};

/// Reference distance d_0 of the path-loss law, in meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        libm::sqrt(dx * dx + dy * dy + dz * dz)
    }
}

/// A rectangular coverage area with its APs and UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub length: f64,
    pub width: f64,
    pub ap_height: f64,
    pub ue_height: f64,
    pub aps: Vec<Point3>,
    pub ues: Vec<Point3>,
}

impl Topology {
    pub fn with_ues(mut self, ues: Vec<Point3>) -> Self {
        self.ues = ues;
        self
    }

    /// Whether every AP and UE lies inside the rectangle.
    pub fn contains_all(&self) -> bool {
        let inside = |p: &Point3| (0.0..=self.length).contains(&p.x) && (0.0..=self.width).contains(&p.y);
        self.aps.iter().all(inside) && self.ues.iter().all(inside)
    }
}

fn even_square_root(n: usize) -> Option<usize> {
    let a = libm::round(libm::sqrt(n as f64)) as usize;
    (a * a == n && a.is_multiple_of(2) && a > 0).then_some(a)
}

/// `B = A^2` APs on a uniform grid, AP `(i, j)` at the center of its cell
/// `((i + 1/2) L/A, (j + 1/2) W/A)`. `A` must be even.
pub fn place_aps_grid(aps: usize, length: f64, width: f64, ap_height: f64) -> Result<Topology> {
    let a = even_square_root(aps)
        .ok_or_else(|| Error::InvalidTopology(format!("B = {aps} is not the square of an even integer")))?;
    let mut pos = Vec::with_capacity(aps);
    for i in 0..a {
        for j in 0..a {
            pos.push(Point3::new(
                (i as f64 + 0.5) * length / a as f64,
                (j as f64 + 0.5) * width / a as f64,
                ap_height,
            ));
        }
    }
    Ok(Topology {
        length,
        width,
        ap_height,
        ue_height: 0.0,
        aps: pos,
        ues: Vec::new(),
    })
}

/// A single-site deployment: `antennas` co-located at one point.
pub fn colocated_array(antennas: usize, site: Point3, length: f64, width: f64) -> Topology {
    Topology {
        length,
        width,
        ap_height: site.z,
        ue_height: 0.0,
        aps: (0..antennas).map(|_| site).collect(),
        ues: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UePlacement {
    /// One UE at the middle of the area.
    Center,
    /// `U = a^2` UEs on a square centered in the area with pitch `L/(2a)`;
    /// for `U = 4` the points are `(1/2 ± 1/8)` of each side.
    Grid,
    /// I.i.d. uniform over the rectangle.
    UniformRandom,
}

pub fn place_ues<R: Rng + ?Sized>(
    ues: usize,
    mode: UePlacement,
    length: f64,
    width: f64,
    ue_height: f64,
    rng: &mut R,
) -> Result<Vec<Point3>> {
    match mode {
        UePlacement::Center => {
            if ues != 1 {
                return Err(Error::InvalidTopology(format!(
                    "center placement needs U = 1, got {ues}"
                )));
            }
            Ok(alloc::vec![Point3::new(length / 2.0, width / 2.0, ue_height)])
        }
        UePlacement::Grid => {
            let a = libm::round(libm::sqrt(ues as f64)) as usize;
            if a == 0 || a * a != ues {
                return Err(Error::InvalidTopology(format!(
                    "grid placement needs a square U, got {ues}"
                )));
            }
            let coord = |i: usize, side: f64| side * (0.5 + (i as f64 - (a as f64 - 1.0) / 2.0) / (2.0 * a as f64));
            let mut out = Vec::with_capacity(ues);
            for i in 0..a {
                for j in 0..a {
                    out.push(Point3::new(coord(i, length), coord(j, width), ue_height));
                }
            }
            Ok(out)
        }
        UePlacement::UniformRandom => Ok((0..ues)
            .map(|_| Point3::new(rng.random::<f64>() * length, rng.random::<f64>() * width, ue_height))
            .collect()),
    }
}

/// Path loss in dB at distance `d` meters: `-37.6 log10(d/d_0) - 35.3`,
/// with `d` clamped to at least `d_0`.
pub fn path_loss_db(distance_m: f64) -> f64 {
    let d = distance_m.max(REFERENCE_DISTANCE_M);
    -37.6 * libm::log10(d / REFERENCE_DISTANCE_M) - 35.3
}

/// Linear large-scale gains, one entry per (AP, UE) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLoss {
    /// B x U linear power gains.
    pub gains: RMat,
}

impl PathLoss {
    pub fn aps(&self) -> usize {
        self.gains.nrows()
    }

    pub fn ues(&self) -> usize {
        self.gains.ncols()
    }

    /// Gains from explicit values, e.g. identity-variance channels in tests.
    pub fn from_gains(gains: RMat) -> Self {
        Self { gains }
    }
}

/// 3-D AP–UE distances through the path-loss law.
pub fn path_loss(topology: &Topology) -> PathLoss {
    let gains = RMat::from_fn(topology.aps.len(), topology.ues.len(), |b, u| {
        libm::pow(10.0, path_loss_db(topology.aps[b].distance(&topology.ues[u])) / 10.0)
    });
    PathLoss { gains }
}

/// A channel draw: one B x U matrix shared by all bins, or one per bin.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelRealization {
    Flat(CMat),
    Selective(Vec<CMat>),
}

impl ChannelRealization {
    /// Channel seen by the `idx`-th occupied bin (position in the bin list).
    pub fn at(&self, idx: usize) -> &CMat {
        match self {
            ChannelRealization::Flat(h) => h,
            ChannelRealization::Selective(hs) => &hs[idx],
        }
    }

    pub fn flat(&self) -> Option<&CMat> {
        match self {
            ChannelRealization::Flat(h) => Some(h),
            ChannelRealization::Selective(_) => None,
        }
    }

    pub fn aps(&self) -> usize {
        self.at(0).nrows()
    }

    pub fn ues(&self) -> usize {
        self.at(0).ncols()
    }
}

/// One draw of `CN(0, var)`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = libm::sqrt(var / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Independent `h_{b,u} ~ CN(0, gain(b, u))`, frequency flat.
pub fn draw_channel<R: Rng + ?Sized>(path_loss: &PathLoss, rng: &mut R) -> ChannelRealization {
    let g = &path_loss.gains;
    // column-major fill keeps the draw order tied to (u, b)
    let h = CMat::from_fn(g.nrows(), g.ncols(), |b, u| complex_normal(rng, g[(b, u)]));
    ChannelRealization::Flat(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ap_grid_examples() {
        let t = place_aps_grid(4, 100.0, 100.0, 10.0).unwrap();
        let mut xy: Vec<(f64, f64)> = t.aps.iter().map(|p| (p.x, p.y)).collect();
        xy.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xy, [(25.0, 25.0), (25.0, 75.0), (75.0, 25.0), (75.0, 75.0)]);
        assert!(t.aps.iter().all(|p| p.z == 10.0));

        let t = place_aps_grid(16, 100.0, 100.0, 10.0).unwrap();
        let mut xs: Vec<f64> = t.aps.iter().map(|p| p.x).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        assert_eq!(xs, [12.5, 37.5, 62.5, 87.5]);

        assert!(place_aps_grid(9, 100.0, 100.0, 10.0).is_err());
        assert!(place_aps_grid(8, 100.0, 100.0, 10.0).is_err());
    }

    #[test]
    fn grid_is_mirror_symmetric() {
        let t = place_aps_grid(64, 100.0, 60.0, 10.0).unwrap();
        for p in &t.aps {
            assert!(t.aps.iter().any(|q| (q.x - (100.0 - p.x)).abs() < 1e-12 && q.y == p.y));
            assert!(t.aps.iter().any(|q| (q.y - (60.0 - p.y)).abs() < 1e-12 && q.x == p.x));
        }
    }

    #[test]
    fn ue_placements() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = place_ues(1, UePlacement::Center, 100.0, 100.0, 0.0, &mut rng).unwrap();
        assert_eq!(c, [Point3::new(50.0, 50.0, 0.0)]);
        assert!(place_ues(2, UePlacement::Center, 100.0, 100.0, 0.0, &mut rng).is_err());

        let g = place_ues(4, UePlacement::Grid, 100.0, 100.0, 0.0, &mut rng).unwrap();
        let mut xy: Vec<(f64, f64)> = g.iter().map(|p| (p.x, p.y)).collect();
        xy.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xy, [(37.5, 37.5), (37.5, 62.5), (62.5, 37.5), (62.5, 62.5)]);
        assert!(place_ues(3, UePlacement::Grid, 100.0, 100.0, 0.0, &mut rng).is_err());

        let r1 = place_ues(
            4,
            UePlacement::UniformRandom,
            100.0,
            80.0,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let r2 = place_ues(
            4,
            UePlacement::UniformRandom,
            100.0,
            80.0,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        assert_eq!(r1, r2);
        assert!(r1
            .iter()
            .all(|p| (0.0..=100.0).contains(&p.x) && (0.0..=80.0).contains(&p.y)));
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(1.0) + 35.3).abs() < 1e-12);
        assert!((path_loss_db(10.0) + 72.9).abs() < 1e-12);
        assert_eq!(path_loss_db(0.5), path_loss_db(1.0));
        let doubling = path_loss_db(40.0) - path_loss_db(20.0);
        assert!((doubling + 37.6 * libm::log10(2.0)).abs() < 1e-12);

        let t = place_aps_grid(4, 100.0, 100.0, 10.0)
            .unwrap()
            .with_ues(alloc::vec![Point3::new(50.0, 50.0, 0.0)]);
        let d = t.aps[0].distance(&t.ues[0]);
        // sqrt(25^2 + 25^2 + 10^2)
        assert!((d - 36.742346141747674).abs() < 1e-12);
        let pl = path_loss(&t);
        let expect = libm::pow(10.0, (-37.6 * libm::log10(d) - 35.3) / 10.0);
        for b in 0..4 {
            assert!((pl.gains[(b, 0)] - expect).abs() < 1e-24);
        }
    }

    #[test]
    fn gains_decrease_with_distance() {
        let mut prev = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 10.0, 36.7, 100.0, 141.0] {
            let g = libm::pow(10.0, path_loss_db(d) / 10.0);
            assert!(g <= 1.0 && g > 0.0);
            assert!(g < prev || d == 1.0);
            prev = g;
        }
    }

    #[test]
    fn channel_draws_are_proper_unit_variance() {
        let pl = PathLoss::from_gains(RMat::from_element(1, 1, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let (mut p, mut m, mut pseudo) = (0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for _ in 0..n {
            let h = draw_channel(&pl, &mut rng);
            let x = h.at(0)[(0, 0)];
            p += x.norm_sqr();
            m += x;
            pseudo += x * x;
        }
        let nf = n as f64;
        assert!((p / nf - 1.0).abs() < 0.01);
        // mean has std 1/sqrt(n) per component; pseudo-covariance likewise
        let sigma = 1.0 / libm::sqrt(nf);
        assert!((m / nf).norm() < 3.0 * sigma * 1.5);
        assert!((pseudo / nf).norm() < 3.0 * sigma * 1.5);
    }
}
