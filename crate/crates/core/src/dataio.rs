//! The `GMMVDS/1` dataset file and synthetic noise injection.
//!
//! The file is line-oriented ASCII. Lines starting with `#` are comments.
//!
//! ```text
//! GMMVDS/1
//! frequencies 2 2e9 4e9
//! sources 1
//! s 0 7.2e-1 0e0
//! receivers 3
//! r 0 7.6e-1 0e0
//! ...
//! active 0 3 0 1 2          source, count, catalog indices
//! cv 0 1 2                  source, count, indices holding the CV role
//! noise 2.6e1 7 1.25e-3     snr_db (or inf), seed (or none), ||U||_F
//! records 6
//! 0 0 0 1.5e-2 -3e-3        freq, source, receiver, Re, Im
//! ```

use std::collections::HashSet;
use std::path::Path;

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{NoiseInfo, ScatterDataset};
use crate::error::{Error, Result};
use crate::model::{FrequencySet, MeasurementConfig, Point, RowRole, RowSelection};

pub const DATASET_MAGIC: &str = "GMMVDS/1";

pub fn dataset_to_string(ds: &ScatterDataset) -> String {
    let m = ds.measurement();
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(DATASET_MAGIC.to_string());
    line("# scattered fields, SI units".to_string());
    let f: Vec<String> = ds.freqs().hz().iter().map(|v| format!("{v:e}")).collect();
    line(format!("frequencies {} {}", f.len(), f.join(" ")));
    line(format!("sources {}", m.n_sources()));
    for (p, x) in m.sources().iter().enumerate() {
        line(format!("s {p} {:e} {:e}", x.x, x.y));
    }
    line(format!("receivers {}", m.n_receivers()));
    for (q, x) in m.receivers().iter().enumerate() {
        line(format!("r {q} {:e} {:e}", x.x, x.y));
    }
    for p in 0..m.n_sources() {
        let a: Vec<String> = m.active(p).iter().map(ToString::to_string).collect();
        line(format!("active {p} {} {}", a.len(), a.join(" ")).trim_end().to_string());
        let cv: Vec<String> = m.rows(p, RowSelection::Cv).iter().map(ToString::to_string).collect();
        line(format!("cv {p} {} {}", cv.len(), cv.join(" ")).trim_end().to_string());
    }
    let n = ds.noise;
    line(format!(
        "noise {} {} {:e}",
        n.snr_db.map_or("inf".to_string(), |v| format!("{v:e}")),
        n.seed.map_or("none".to_string(), |v| v.to_string()),
        n.noise_norm
    ));
    line(format!("records {}", ds.n_records()));
    for i in 0..ds.freqs().len() {
        for p in 0..m.n_sources() {
            for &q in m.active(p) {
                let v = ds.value(i, p, q);
                line(format!("{i} {p} {q} {:e} {:e}", v.re, v.im));
            }
        }
    }
    s
}

pub fn write_dataset(ds: &ScatterDataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset_to_string(ds))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<ScatterDataset> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-comment line as `(line number, tokens)`.
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (k, l) in self.inner.by_ref() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.last = k + 1;
            return Ok((k + 1, t.split_whitespace().collect()));
        }
        Err(corrupt(self.last + 1, "unexpected end of file"))
    }

    fn keyword(&mut self, key: &str, min_len: usize) -> Result<(usize, Vec<&'a str>)> {
        let (n, t) = self.next()?;
        if t[0] != key || t.len() < min_len {
            return Err(corrupt(n, &format!("expected `{key}`")));
        }
        Ok((n, t))
    }
}

fn corrupt(line: usize, reason: &str) -> Error {
    Error::CorruptRecord {
        line,
        reason: reason.to_string(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| corrupt(line, &format!("cannot parse `{tok}`")))
}

fn points(lines: &mut Lines<'_>, key: &str, tag: &str) -> Result<Vec<Point>> {
    let (n, t) = lines.keyword(key, 2)?;
    let count: usize = num(n, t[1])?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let (n, t) = lines.keyword(tag, 4)?;
        if num::<usize>(n, t[1])? != k {
            return Err(corrupt(n, "positions out of order"));
        }
        out.push(Point::new(num(n, t[2])?, num(n, t[3])?));
    }
    Ok(out)
}

fn index_list(n: usize, t: &[&str]) -> Result<Vec<usize>> {
    let count: usize = num(n, t[2])?;
    if t.len() != 3 + count {
        return Err(corrupt(n, "index count does not match"));
    }
    t[3..].iter().map(|v| num(n, v)).collect()
}

pub fn parse_dataset(text: &str) -> Result<ScatterDataset> {
    let first = text.lines().next().unwrap_or("").trim();
    if first != DATASET_MAGIC {
        return Err(Error::VersionMismatch(first.to_string()));
    }
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    lines.next()?;

    let (n, t) = lines.keyword("frequencies", 2)?;
    let nf: usize = num(n, t[1])?;
    if t.len() != 2 + nf {
        return Err(corrupt(n, "frequency count does not match"));
    }
    let hz = t[2..].iter().map(|v| num(n, v)).collect::<Result<Vec<f64>>>()?;
    let freqs = FrequencySet::new(hz).map_err(|e| corrupt(n, &e.to_string()))?;

    let sources = points(&mut lines, "sources", "s")?;
    let receivers = points(&mut lines, "receivers", "r")?;
    let mut active = Vec::with_capacity(sources.len());
    let mut roles = Vec::with_capacity(sources.len());
    for p in 0..sources.len() {
        let (n, t) = lines.keyword("active", 3)?;
        if num::<usize>(n, t[1])? != p {
            return Err(corrupt(n, "receiver masks out of order"));
        }
        let a = index_list(n, &t)?;
        let (n, t) = lines.keyword("cv", 3)?;
        if num::<usize>(n, t[1])? != p {
            return Err(corrupt(n, "CV lists out of order"));
        }
        let cv: HashSet<usize> = index_list(n, &t)?.into_iter().collect();
        if cv.iter().any(|q| !a.contains(q)) {
            return Err(corrupt(n, "CV receiver is not active"));
        }
        roles.push(
            a.iter()
                .map(|q| if cv.contains(q) { RowRole::Cv } else { RowRole::Recon })
                .collect(),
        );
        active.push(a);
    }
    let measurement = MeasurementConfig::with_roles(sources, receivers, active, roles)
        .map_err(|e| corrupt(lines.last, &e.to_string()))?;

    let (n, t) = lines.keyword("noise", 4)?;
    let noise = NoiseInfo {
        snr_db: if t[1] == "inf" { None } else { Some(num(n, t[1])?) },
        seed: if t[2] == "none" { None } else { Some(num(n, t[2])?) },
        noise_norm: num(n, t[3])?,
    };

    let (n, t) = lines.keyword("records", 2)?;
    let count: usize = num(n, t[1])?;
    let expected = freqs.len() * measurement.pairs_per_frequency();
    if count != expected {
        return Err(corrupt(n, &format!("{count} records declared, geometry implies {expected}")));
    }
    let (nq, np) = (measurement.n_receivers(), measurement.n_sources());
    let mut blocks = vec![Mat::<c64>::zeros(nq, np); freqs.len()];
    let mut seen = HashSet::with_capacity(count);
    for _ in 0..count {
        let (n, t) = lines.next()?;
        if t.len() != 5 {
            return Err(corrupt(n, "record needs 5 fields"));
        }
        let (i, p, q): (usize, usize, usize) = (num(n, t[0])?, num(n, t[1])?, num(n, t[2])?);
        if i >= freqs.len() || p >= np || measurement.role(p, q).is_none() {
            return Err(corrupt(n, "record for an unmeasured triple"));
        }
        if !seen.insert((i, p, q)) {
            return Err(Error::DuplicateTriple {
                freq: i,
                source_index: p,
                receiver: q,
            });
        }
        blocks[i][(q, p)] = c64::new(num(n, t[3])?, num(n, t[4])?);
    }
    if let Ok((n, _)) = lines.next() {
        return Err(corrupt(n, "trailing data after the last record"));
    }
    ScatterDataset::new(freqs, measurement, blocks, noise)
}

/// Adds circularly-symmetric complex Gaussian noise to every measured entry
/// with variance chosen so that `E ||U||_F / ||Y||_F = 10^(-snr_db / 20)`.
/// An infinite SNR returns the data unchanged.
pub fn add_noise(ds: &ScatterDataset, snr_db: f64, seed: u64) -> Result<ScatterDataset> {
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR is NaN".into()));
    }
    if snr_db == f64::INFINITY {
        let mut out = ds.clone();
        out.noise = NoiseInfo {
            snr_db: None,
            seed: None,
            noise_norm: 0.0,
        };
        return Ok(out);
    }
    let m = ds.measurement();
    let count = ds.n_records();
    let target = 10f64.powf(-snr_db / 20.0) * ds.norm(RowSelection::All);
    let sd = target / (2.0 * count as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks: Vec<Mat<c64>> = ds.blocks().to_vec();
    let mut energy = 0.0;
    for b in &mut blocks {
        for p in 0..m.n_sources() {
            for &q in m.active(p) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let u = c64::new(re * sd, im * sd);
                energy += u.norm_sqr();
                b[(q, p)] += u;
            }
        }
    }
    ScatterDataset::new(
        ds.freqs().clone(),
        m.clone(),
        blocks,
        NoiseInfo {
            snr_db: Some(snr_db),
            seed: Some(seed),
            noise_norm: energy.sqrt(),
        },
    )
}
