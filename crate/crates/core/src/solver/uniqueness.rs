use faer::{c64, Mat, MatRef};
use serde::Serialize;

use super::norms::row_norms;
use crate::error::{Error, Result};

/// Largest column count for the exhaustive spark search.
pub const SPARK_MAX_COLUMNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub support: usize,
    pub spark: usize,
    pub rank: usize,
    /// `(spark - 1 + rank) / 2`.
    pub bound: f64,
    pub satisfied: bool,
    /// More measurement columns than rows of `A`.
    pub columns_exceed_rows: bool,
}

fn rank(a: MatRef<'_, c64>) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::NoConvergence(format!("singular values: {e:?}")))?;
    let top = s.iter().copied().fold(0.0, f64::max);
    Ok(s.iter().filter(|&&v| top > 0.0 && v > 1e-10 * top).count())
}

fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest number of linearly dependent columns of `a`, by exhaustive search.
pub fn spark(a: MatRef<'_, c64>) -> Result<usize> {
    let n = a.ncols();
    if n > SPARK_MAX_COLUMNS {
        return Err(Error::TooLargeForSpark(n));
    }
    for k in 1..=n.min(a.nrows() + 1) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let sub = Mat::from_fn(a.nrows(), k, |r, c| a[(r, idx[c])]);
            let dependent = if k == 1 {
                sub.norm_l2() == 0.0
            } else {
                rank(sub.as_ref())? < k
            };
            if dependent {
                return Ok(k);
            }
            if !next_subset(&mut idx, n) {
                break;
            }
        }
    }
    Ok(n + 1)
}

/// Checks the joint-sparse uniqueness condition `|supp X| < (spark A - 1 + rank X) / 2`.
pub fn uniqueness_check(x: MatRef<'_, c64>, a: MatRef<'_, c64>) -> Result<UniquenessReport> {
    if a.ncols() != x.nrows() {
        return Err(Error::DimMismatch(format!(
            "A has {} columns, X has {} rows",
            a.ncols(),
            x.nrows()
        )));
    }
    let spark = spark(a)?;
    let rank = rank(x)?;
    let support = row_norms(x).iter().filter(|&&v| v > 1e-12).count();
    let bound = (spark as f64 - 1.0 + rank as f64) / 2.0;
    Ok(UniquenessReport {
        support,
        spark,
        rank,
        bound,
        satisfied: (support as f64) < bound,
        columns_exceed_rows: x.ncols() > a.nrows(),
    })
}
