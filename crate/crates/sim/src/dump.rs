//! Topology files and binary dumps of linearizations and waveform frames.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic     4 bytes   "RFLN" (linearization) or "RFWF" (frame)
//! version   u32       1
//! dims      u32 x k   linearization: B, S        frame: B, U, N, S
//! payload   f64 ...   matrices in the order below, row-major,
//!                     complex entries as (re, im) pairs
//! ```
//!
//! Linearization payload: the B gains, then one B x B distortion covariance
//! per bin in grid order. Frame payload: s_hat (U x S), w_hat (B x S),
//! y_bb (B x N), y_rf, d, q, z_rf (B x N real), z_hat (B x S).

use std::io::{Read, Write};
use std::path::Path;

use rofmimo_core::bussgang::{BussgangGain, BussgangLinearization, QuantErrorSpectrum};
use rofmimo_core::channel::{Point3, Topology};
use rofmimo_core::linalg::{CMat, RMat};
use rofmimo_core::oracle::WaveformFrame;
use rofmimo_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, SimError, SimResult};

const VERSION: u32 = 1;
const LIN_MAGIC: &[u8; 4] = b"RFLN";
const FRAME_MAGIC: &[u8; 4] = b"RFWF";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TopologyFile {
    length_m: f64,
    width_m: f64,
    ap_height_m: f64,
    ue_height_m: f64,
    aps: Vec<[f64; 3]>,
    ues: Vec<[f64; 3]>,
}

pub fn topology_to_toml(t: &Topology) -> SimResult<String> {
    let pts = |v: &[Point3]| v.iter().map(|p| [p.x, p.y, p.z]).collect();
    Ok(toml::to_string(&TopologyFile {
        length_m: t.length,
        width_m: t.width,
        ap_height_m: t.ap_height,
        ue_height_m: t.ue_height,
        aps: pts(&t.aps),
        ues: pts(&t.ues),
    })?)
}

pub fn topology_from_toml(text: &str) -> SimResult<Topology> {
    let f: TopologyFile = toml::from_str(text).map_err(|e| SimError::Dump(e.to_string()))?;
    let pts = |v: &[[f64; 3]]| v.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
    Ok(Topology {
        length: f.length_m,
        width: f.width_m,
        ap_height: f.ap_height_m,
        ue_height: f.ue_height_m,
        aps: pts(&f.aps),
        ues: pts(&f.ues),
    })
}

pub fn save_topology(path: &Path, t: &Topology) -> SimResult<()> {
    std::fs::write(path, topology_to_toml(t)?).map_err(io_err(path))
}

pub fn load_topology(path: &Path) -> SimResult<Topology> {
    topology_from_toml(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

struct Out(Vec<u8>);

impl Out {
    fn header(magic: &[u8; 4], dims: &[usize]) -> Self {
        let mut v = magic.to_vec();
        v.extend(VERSION.to_le_bytes());
        for &d in dims {
            v.extend((d as u32).to_le_bytes());
        }
        Out(v)
    }

    fn f64s(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.0.extend(x.to_le_bytes());
        }
    }

    fn real(&mut self, m: &RMat) {
        for i in 0..m.nrows() {
            self.f64s(m.row(i).iter().copied());
        }
    }

    fn complex(&mut self, m: &CMat) {
        for i in 0..m.nrows() {
            self.f64s(m.row(i).iter().flat_map(|z| [z.re, z.im]));
        }
    }
}

struct In<'a>(&'a [u8]);

impl In<'_> {
    fn take(&mut self, n: usize) -> SimResult<&[u8]> {
        if self.0.len() < n {
            return Err(SimError::Dump("truncated".into()));
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }

    fn header(&mut self, magic: &[u8; 4], k: usize) -> SimResult<Vec<usize>> {
        if self.take(4)? != magic {
            return Err(SimError::Dump("wrong magic".into()));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(SimError::Dump(format!("unsupported version {version}")));
        }
        (0..k).map(|_| self.u32().map(|x| x as usize)).collect()
    }

    fn u32(&mut self) -> SimResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> SimResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn real(&mut self, r: usize, c: usize) -> SimResult<RMat> {
        let v = (0..r * c).map(|_| self.f64()).collect::<SimResult<Vec<_>>>()?;
        Ok(RMat::from_row_slice(r, c, &v))
    }

    fn complex(&mut self, r: usize, c: usize) -> SimResult<CMat> {
        let v = (0..r * c)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect::<SimResult<Vec<_>>>()?;
        Ok(CMat::from_row_slice(r, c, &v))
    }

    fn done(&self) -> SimResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(SimError::Dump("trailing bytes".into()))
        }
    }
}

pub fn encode_linearization(lin: &BussgangLinearization) -> Vec<u8> {
    let b = lin.gain.dim();
    let mut out = Out::header(LIN_MAGIC, &[b, lin.spectrum.per_bin.len()]);
    out.f64s(lin.gain.diag.iter().copied());
    for c in &lin.spectrum.per_bin {
        out.complex(c);
    }
    out.0
}

/// Decodes a linearization dump. Bin indices are not stored; they are
/// restored as `0..S`.
pub fn decode_linearization(bytes: &[u8]) -> SimResult<BussgangLinearization> {
    let mut r = In(bytes);
    let dims = r.header(LIN_MAGIC, 2)?;
    let (b, s) = (dims[0], dims[1]);
    let diag = (0..b).map(|_| r.f64()).collect::<SimResult<Vec<_>>>()?;
    let per_bin = (0..s).map(|_| r.complex(b, b)).collect::<SimResult<Vec<_>>>()?;
    r.done()?;
    Ok(BussgangLinearization {
        gain: BussgangGain { diag },
        spectrum: QuantErrorSpectrum {
            bins: (0..s).collect(),
            per_bin,
        },
    })
}

pub fn encode_frame(f: &WaveformFrame) -> Vec<u8> {
    let (b, n) = (f.y_rf.nrows(), f.y_rf.ncols());
    let (u, s) = (f.s_hat.nrows(), f.s_hat.ncols());
    let mut out = Out::header(FRAME_MAGIC, &[b, u, n, s]);
    out.complex(&f.s_hat);
    out.complex(&f.w_hat);
    out.complex(&f.y_bb);
    for m in [&f.y_rf, &f.d, &f.q, &f.z_rf] {
        out.real(m);
    }
    out.complex(&f.z_hat);
    out.0
}

pub fn decode_frame(bytes: &[u8]) -> SimResult<WaveformFrame> {
    let mut r = In(bytes);
    let dims = r.header(FRAME_MAGIC, 4)?;
    let (b, u, n, s) = (dims[0], dims[1], dims[2], dims[3]);
    let s_hat = r.complex(u, s)?;
    let w_hat = r.complex(b, s)?;
    let y_bb = r.complex(b, n)?;
    let y_rf = r.real(b, n)?;
    let d = r.real(b, n)?;
    let q = r.real(b, n)?;
    let z_rf = r.real(b, n)?;
    let z_hat = r.complex(b, s)?;
    r.done()?;
    Ok(WaveformFrame {
        s_hat,
        w_hat,
        y_bb,
        y_rf,
        d,
        q,
        z_rf,
        z_hat,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> SimResult<()> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub fn read_bytes(path: &Path) -> SimResult<Vec<u8>> {
    let mut v = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut v))
        .map_err(io_err(path))?;
    Ok(v)
}
