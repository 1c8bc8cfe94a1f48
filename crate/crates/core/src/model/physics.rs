//! Physical constants, frequency sets and the background medium.
//!
//! The time dependence `exp(+i omega t)` is used throughout: outgoing waves
//! behave as `exp(-i k r)` and lossy permittivities have negative imaginary part.

use faer::c64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MU_0: f64 = 4.0e-7 * PI;
pub const EPS_0: f64 = 1.0 / (MU_0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// Strictly increasing list of positive frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencySet {
    hz: Vec<f64>,
}

impl FrequencySet {
    pub fn new(hz: Vec<f64>) -> Result<Self> {
        if hz.is_empty() {
            return Err(Error::InvalidArgument("frequency set is empty".into()));
        }
        if let Some(f) = hz.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "frequencies must be positive, got {f}"
            )));
        }
        if hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { hz })
    }

    pub fn len(&self) -> usize {
        self.hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hz.is_empty()
    }

    pub fn hz(&self) -> &[f64] {
        &self.hz
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.hz[i]
    }

    pub fn omega(&self, i: usize) -> f64 {
        2.0 * PI * self.hz[i]
    }

    /// Free-space wavelength `c / f`.
    pub fn wavelength(&self, i: usize) -> f64 {
        SPEED_OF_LIGHT / self.hz[i]
    }

    pub fn min_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.hz[self.hz.len() - 1]
    }

    pub fn max_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.hz[0]
    }

    /// Index of the frequency equal to `f` within a relative tolerance of 1e-6.
    pub fn index_of(&self, f: f64) -> Option<usize> {
        self.hz.iter().position(|&h| (h - f).abs() <= 1e-6 * h)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut picked = Vec::with_capacity(indices.len());
        for &i in indices {
            let f = *self.hz.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("frequency index {i} out of range"))
            })?;
            picked.push(f);
        }
        Self::new(picked)
    }
}

impl TryFrom<Vec<f64>> for FrequencySet {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencySet> for Vec<f64> {
    fn from(f: FrequencySet) -> Self {
        f.hz
    }
}

/// Homogeneous background medium: relative permittivity and conductivity (S/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    pub eps_r: f64,
    pub sigma: f64,
}

impl Default for BackgroundModel {
    fn default() -> Self {
        Self::free_space()
    }
}

impl BackgroundModel {
    pub const fn free_space() -> Self {
        Self {
            eps_r: 1.0,
            sigma: 0.0,
        }
    }

    pub fn new(eps_r: f64, sigma: f64) -> Result<Self> {
        if !(eps_r.is_finite() && eps_r >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "background relative permittivity must be >= 1, got {eps_r}"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "background conductivity must be >= 0, got {sigma}"
            )));
        }
        Ok(Self { eps_r, sigma })
    }

    pub fn is_lossless(&self) -> bool {
        self.sigma == 0.0
    }

    /// Absolute complex permittivity `eps0 eps_r - i sigma / omega` (F/m).
    pub fn permittivity(&self, omega: f64) -> c64 {
        c64::new(EPS_0 * self.eps_r, -self.sigma / omega)
    }

    /// Complex wavenumber `omega sqrt(eps mu0)` with non-positive imaginary part.
    pub fn wavenumber(&self, omega: f64) -> c64 {
        let k = (self.permittivity(omega) * MU_0).sqrt() * omega;
        if k.re < 0.0 {
            -k
        } else {
            k
        }
    }

    /// Real wavenumber; only meaningful for a lossless background.
    pub fn real_wavenumber(&self, omega: f64) -> f64 {
        omega * (EPS_0 * self.eps_r * MU_0).sqrt()
    }

    pub fn require_lossless(&self) -> Result<()> {
        if self.is_lossless() {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "analytic Green's functions require a lossless background".into(),
            ))
        }
    }
}
