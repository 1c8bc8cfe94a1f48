//! Bessel and Hankel functions of integer order and real argument.
//!
//! Moderate arguments use Miller's backward recurrence for `J_n`, normalized
//! by `J_0 + 2 sum J_2k = 1`, with `Y_0`, `Y_1` from their Neumann series.
//! Large arguments use the Hankel asymptotic expansion. Higher orders of `Y_n`
//! come from the (stable) upward recurrence.

use faer::c64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Beyond this argument the asymptotic expansion is accurate to full precision.
const ASYMPTOTIC_MIN: f64 = 25.0;

/// `(J_nu, Y_nu)` for `nu` in {0, 1} from the Hankel expansion, `x >= 25`.
fn asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60u32 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= prev || term.abs() < 1e-18 {
            break;
        }
        prev = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let (s, c) = x.sin_cos();
    let (cos_chi, sin_chi) = if nu == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    let amp = (2.0 / (PI * x)).sqrt();
    (
        amp * (p * cos_chi - q * sin_chi),
        amp * (p * sin_chi + q * cos_chi),
    )
}

/// Miller backward recurrence. Returns `J_0..=J_m` for some `m >= nmax`
/// large enough that the tail is negligible.
fn miller(nmax: usize, x: f64) -> Vec<f64> {
    let top = nmax.max(x.ceil() as usize);
    let mut m = top + 20 + (40.0 * top as f64).sqrt() as usize;
    m += m % 2;
    let mut j = vec![0.0; m + 2];
    j[m] = 1e-30;
    for k in (1..=m).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = j[0];
    for k in (2..=m).step_by(2) {
        norm += 2.0 * j[k];
    }
    j.truncate(m + 1);
    for v in &mut j {
        *v /= norm;
    }
    j
}

/// `Y_0` and `Y_1` from the Neumann series over a Miller sequence.
fn neumann_y01(j: &[f64], x: f64) -> (f64, f64) {
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut sign = -1.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let kf = k as f64;
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (2.0 * kf + 1.0) * j[2 * k + 1] / (kf * (kf + 1.0));
        sign = -sign;
        k += 1;
    }
    let y0 = 2.0 / PI * (log_term * j[0] - 2.0 * s0);
    // psi(2) = 1 - gamma
    let y1 = 2.0 / PI * (-j[0] / x + (log_term - 1.0) * j[1] - s1);
    (y0, y1)
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_jn_seq(0, x)[0]
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_jn_seq(1, x)[1]
}

pub fn bessel_y0(x: f64) -> f64 {
    y01(x).0
}

pub fn bessel_y1(x: f64) -> f64 {
    y01(x).1
}

fn y01(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "Y_n is singular at x = {x}");
    if x >= ASYMPTOTIC_MIN {
        (asymptotic(0, x).1, asymptotic(1, x).1)
    } else {
        neumann_y01(&miller(1, x), x)
    }
}

/// `J_0(x) ..= J_nmax(x)` for `x >= 0`.
pub fn bessel_jn_seq(nmax: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    if x == 0.0 {
        let mut out = vec![0.0; nmax + 1];
        out[0] = 1.0;
        return out;
    }
    if x >= ASYMPTOTIC_MIN && (nmax as f64) < x {
        let mut out = Vec::with_capacity(nmax + 1);
        out.push(asymptotic(0, x).0);
        if nmax >= 1 {
            out.push(asymptotic(1, x).0);
        }
        for n in 1..nmax {
            let next = 2.0 * n as f64 / x * out[n] - out[n - 1];
            out.push(next);
        }
        return out;
    }
    let mut j = miller(nmax, x);
    j.truncate(nmax + 1);
    j
}

/// `Y_0(x) ..= Y_nmax(x)` for `x > 0`.
pub fn bessel_yn_seq(nmax: usize, x: f64) -> Vec<f64> {
    let (y0, y1) = y01(x);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(y0);
    if nmax >= 1 {
        out.push(y1);
    }
    for n in 1..nmax {
        let next = 2.0 * n as f64 / x * out[n] - out[n - 1];
        out.push(next);
    }
    out
}

/// `H^(2)_n(x) = J_n(x) - i Y_n(x)` for `n = 0..=nmax`, `x > 0`.
pub fn hankel2_seq(nmax: usize, x: f64) -> Vec<c64> {
    let j = bessel_jn_seq(nmax, x);
    let y = bessel_yn_seq(nmax, x);
    j.iter().zip(&y).map(|(a, b)| c64::new(*a, -*b)).collect()
}

/// `H^(2)_0(x)`, the outgoing cylindrical wave for `exp(+i omega t)`.
pub fn hankel2_0(x: f64) -> c64 {
    assert!(x > 0.0, "H_0 is singular at x = {x}");
    if x >= ASYMPTOTIC_MIN {
        let (j, y) = asymptotic(0, x);
        c64::new(j, -y)
    } else {
        let j = miller(1, x);
        let (y0, _) = neumann_y01(&j, x);
        c64::new(j[0], -y0)
    }
}

pub fn hankel2_1(x: f64) -> c64 {
    assert!(x > 0.0, "H_1 is singular at x = {x}");
    if x >= ASYMPTOTIC_MIN {
        let (j, y) = asymptotic(1, x);
        c64::new(j, -y)
    } else {
        let j = miller(1, x);
        let (_, y1) = neumann_y01(&j, x);
        c64::new(j[1], -y1)
    }
}

/// Derivatives `f'_n` from a sequence `f_0..=f_m` of cylinder functions
/// (`f_n' = f_{n-1} - n/x f_n`, `f_0' = -f_1`). Needs `m >= 1`.
pub fn derivative_seq<T>(f: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    (0..f.len())
        .map(|n| {
            if n == 0 {
                -f[1]
            } else {
                f[n - 1] - f[n] * (n as f64 / x)
            }
        })
        .collect()
}
