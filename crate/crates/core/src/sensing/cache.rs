//! Binary cache for built kernels.
//!
//! Layout: a text line `GMMVOP/1`, a one-line JSON header, then every
//! kernel in frequency order as row-major complex entries (two little-endian
//! `f64` each). The header records the key the kernels were built for and a
//! SHA-256 digest of the payload.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{BackgroundModel, FrequencySet, Grid2D, Point};

pub const CACHE_MAGIC: &str = "GMMVOP/1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    key: String,
    n_freqs: usize,
    n_receivers: usize,
    n_cells: usize,
    sha256: String,
}

/// Hash of everything the kernels depend on. `route` names the builder and
/// any of its settings.
pub fn cache_key(
    grid: &Grid2D,
    receivers: &[Point],
    freqs: &FrequencySet,
    background: &BackgroundModel,
    route: &str,
) -> String {
    let mut h = Sha256::new();
    h.update(route.as_bytes());
    let mut put = |v: f64| h.update(v.to_le_bytes());
    for v in [grid.x0, grid.y0, grid.delta, grid.nx as f64, grid.ny as f64] {
        put(v);
    }
    put(background.eps_r);
    put(background.sigma);
    for f in freqs.hz() {
        put(*f);
    }
    for r in receivers {
        put(r.x);
        put(r.y);
    }
    hex::encode(h.finalize())
}

fn payload(kernels: &[Mat<c64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(kernels.iter().map(|k| k.nrows() * k.ncols() * 16).sum());
    for k in kernels {
        for q in 0..k.nrows() {
            for n in 0..k.ncols() {
                out.extend_from_slice(&k[(q, n)].re.to_le_bytes());
                out.extend_from_slice(&k[(q, n)].im.to_le_bytes());
            }
        }
    }
    out
}

pub fn save_kernels(path: impl AsRef<Path>, key: &str, kernels: &[Mat<c64>]) -> Result<()> {
    let (nq, nc) = kernels.first().map_or((0, 0), |k| (k.nrows(), k.ncols()));
    if kernels.iter().any(|k| k.nrows() != nq || k.ncols() != nc) {
        return Err(Error::DimMismatch("kernels differ in shape".into()));
    }
    let body = payload(kernels);
    let header = Header {
        key: key.to_string(),
        n_freqs: kernels.len(),
        n_receivers: nq,
        n_cells: nc,
        sha256: hex::encode(Sha256::digest(&body)),
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CACHE_MAGIC}")?;
    writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    f.write_all(&body)?;
    f.flush()?;
    Ok(())
}

/// Loads cached kernels. Returns `None` when the file was built for a
/// different key.
pub fn load_kernels(path: impl AsRef<Path>, key: &str) -> Result<Option<Vec<Mat<c64>>>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != CACHE_MAGIC {
        return Err(Error::VersionMismatch(line.trim_end().chars().take(32).collect()));
    }
    line.clear();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end()).map_err(|e| Error::CorruptRecord {
        line: 2,
        reason: e.to_string(),
    })?;
    if header.key != key {
        return Ok(None);
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let expect = header
        .n_freqs
        .checked_mul(header.n_receivers)
        .and_then(|v| v.checked_mul(header.n_cells))
        .and_then(|v| v.checked_mul(16));
    if expect != Some(body.len()) {
        return Err(Error::CorruptRecord {
            line: 3,
            reason: format!("payload has {} bytes", body.len()),
        });
    }
    if hex::encode(Sha256::digest(&body)) != header.sha256 {
        return Err(Error::CorruptRecord {
            line: 3,
            reason: "payload digest mismatch".into(),
        });
    }
    let read = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    let per = header.n_receivers * header.n_cells;
    Ok(Some(
        (0..header.n_freqs)
            .map(|i| {
                Mat::from_fn(header.n_receivers, header.n_cells, |q, n| {
                    let e = i * per + q * header.n_cells + n;
                    c64::new(read(2 * e), read(2 * e + 1))
                })
            })
            .collect(),
    ))
}
