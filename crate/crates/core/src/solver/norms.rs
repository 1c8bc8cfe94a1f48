use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixed `(alpha, beta)` norm: the `beta` norm of every row, then the
/// `alpha` norm of the row norms. Only `beta = 2` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl MixedNormSpec {
    pub const L12: Self = Self { alpha: 1.0, beta: 2.0 };
    pub const FROBENIUS: Self = Self { alpha: 2.0, beta: 2.0 };
    pub const LINF2: Self = Self {
        alpha: f64::INFINITY,
        beta: 2.0,
    };
}

/// Euclidean norm of every row, summed in column order.
pub fn row_norms(j: MatRef<'_, c64>) -> Vec<f64> {
    let mut s = vec![0.0; j.nrows()];
    for c in 0..j.ncols() {
        for (n, acc) in s.iter_mut().enumerate() {
            *acc += j[(n, c)].norm_sqr();
        }
    }
    s.into_iter().map(f64::sqrt).collect()
}

pub fn mixed_norm(j: MatRef<'_, c64>, spec: MixedNormSpec) -> Result<f64> {
    if spec.beta != 2.0 || !(spec.alpha >= 1.0) {
        return Err(Error::UnsupportedNorm {
            alpha: spec.alpha,
            beta: spec.beta,
        });
    }
    let rows = row_norms(j);
    Ok(if spec.alpha == f64::INFINITY {
        rows.into_iter().fold(0.0, f64::max)
    } else if spec.alpha == 1.0 {
        rows.into_iter().sum()
    } else if spec.alpha == 2.0 {
        rows.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        rows.iter().map(|v| v.powf(spec.alpha)).sum::<f64>().powf(1.0 / spec.alpha)
    })
}

/// Projection of non-negative `v` onto `{w >= 0, sum w <= tau}`.
fn project_simplex(v: &[f64], tau: f64) -> Vec<f64> {
    if v.iter().sum::<f64>() <= tau {
        return v.to_vec();
    }
    if tau == 0.0 {
        return vec![0.0; v.len()];
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - tau) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&u| (u - theta).max(0.0)).collect()
}

/// Frobenius-nearest matrix with `||J||_{1,2} <= tau`.
pub fn project_l12_ball(j: MatRef<'_, c64>, tau: f64) -> Result<Mat<c64>> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeRadius(tau));
    }
    let v = row_norms(j);
    if v.iter().sum::<f64>() <= tau {
        return Ok(j.to_owned());
    }
    let w = project_simplex(&v, tau);
    let scale: Vec<f64> = v
        .iter()
        .zip(&w)
        .map(|(&a, &b)| if a > 0.0 { b / a } else { 0.0 })
        .collect();
    Ok(Mat::from_fn(j.nrows(), j.ncols(), |n, c| j[(n, c)] * scale[n]))
}
