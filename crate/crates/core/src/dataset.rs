//! Measured (or simulated) scattered-field data.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencySet, MeasurementConfig, RowRole, RowSelection};

/// What is known about the additive noise in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseInfo {
    /// Signal-to-noise ratio in dB, `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    /// Frobenius norm of the injected noise over all measured entries.
    pub noise_norm: f64,
}

/// Scattered fields for every frequency, stored as one
/// `receiver catalog x source` block per frequency. Unmeasured
/// `(source, receiver)` pairs hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterDataset {
    freqs: FrequencySet,
    measurement: MeasurementConfig,
    blocks: Vec<Mat<c64>>,
    pub noise: NoiseInfo,
}

impl ScatterDataset {
    pub fn new(
        freqs: FrequencySet,
        measurement: MeasurementConfig,
        mut blocks: Vec<Mat<c64>>,
        noise: NoiseInfo,
    ) -> Result<Self> {
        let (q, p) = (measurement.n_receivers(), measurement.n_sources());
        if blocks.len() != freqs.len() {
            return Err(Error::DimMismatch(format!(
                "{} data blocks for {} frequencies",
                blocks.len(),
                freqs.len()
            )));
        }
        for b in &mut blocks {
            if b.nrows() != q || b.ncols() != p {
                return Err(Error::DimMismatch(format!(
                    "data block is {}x{}, expected {q}x{p}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            for s in 0..p {
                let mut k = 0;
                let active = measurement.active(s);
                for r in 0..q {
                    if k < active.len() && active[k] == r {
                        k += 1;
                    } else {
                        b[(r, s)] = c64::new(0.0, 0.0);
                    }
                }
            }
        }
        Ok(Self {
            freqs,
            measurement,
            blocks,
            noise,
        })
    }

    pub fn zeros(freqs: FrequencySet, measurement: MeasurementConfig) -> Self {
        let blocks = (0..freqs.len())
            .map(|_| Mat::zeros(measurement.n_receivers(), measurement.n_sources()))
            .collect();
        Self {
            freqs,
            measurement,
            blocks,
            noise: NoiseInfo::default(),
        }
    }

    pub fn freqs(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn measurement(&self) -> &MeasurementConfig {
        &self.measurement
    }

    pub fn blocks(&self) -> &[Mat<c64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Mat<c64> {
        &self.blocks[i]
    }

    pub fn value(&self, i: usize, p: usize, q: usize) -> c64 {
        self.blocks[i][(q, p)]
    }

    /// Number of data columns `P * I`.
    pub fn n_columns(&self) -> usize {
        self.freqs.len() * self.measurement.n_sources()
    }

    /// Number of measured entries over all frequencies.
    pub fn n_records(&self) -> usize {
        self.freqs.len() * self.measurement.pairs_per_frequency()
    }

    /// Data column `(p, i)` in active-receiver order.
    pub fn column(&self, p: usize, i: usize) -> Vec<c64> {
        self.measurement
            .active(p)
            .iter()
            .map(|&q| self.blocks[i][(q, p)])
            .collect()
    }

    /// Frobenius norm over the selected rows.
    pub fn norm(&self, rows: RowSelection) -> f64 {
        let mut s = 0.0;
        for b in &self.blocks {
            for p in 0..self.measurement.n_sources() {
                for (&q, &role) in self.measurement.active(p).iter().zip(self.measurement.roles(p)) {
                    if rows.accepts(role) {
                        s += b[(q, p)].norm_sqr();
                    }
                }
            }
        }
        s.sqrt()
    }

    /// Same data under a different role assignment (identical receiver masks).
    pub fn with_measurement(&self, measurement: MeasurementConfig) -> Result<Self> {
        if measurement.all_active() != self.measurement.all_active()
            || measurement.sources() != self.measurement.sources()
            || measurement.receivers() != self.measurement.receivers()
        {
            return Err(Error::DimMismatch(
                "measurement geometry differs from the dataset's".into(),
            ));
        }
        Ok(Self {
            measurement,
            ..self.clone()
        })
    }

    pub fn subset_frequencies(&self, indices: &[usize]) -> Result<Self> {
        let freqs = self.freqs.subset(indices)?;
        Ok(Self {
            freqs,
            measurement: self.measurement.clone(),
            blocks: indices.iter().map(|&i| self.blocks[i].clone()).collect(),
            noise: self.noise,
        })
    }

    /// Copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            *b = &*b * faer::Scale(c64::new(c, 0.0));
        }
        out.noise.noise_norm *= c.abs();
        out
    }

    /// Replaces the entries of the given role using `f(i, p, q, old)`.
    pub fn map_role(&self, role: RowRole, mut f: impl FnMut(usize, usize, usize, c64) -> c64) -> Self {
        let mut out = self.clone();
        for (i, b) in out.blocks.iter_mut().enumerate() {
            for p in 0..self.measurement.n_sources() {
                for (&q, &r) in self.measurement.active(p).iter().zip(self.measurement.roles(p)) {
                    if r == role {
                        b[(q, p)] = f(i, p, q, b[(q, p)]);
                    }
                }
            }
        }
        out
    }
}
