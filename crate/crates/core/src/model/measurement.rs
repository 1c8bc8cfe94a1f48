//! Source/receiver geometry, per-source receiver masks and the
//! cross-validation split.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Grid2D, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRole {
    Recon,
    Cv,
}

/// Which measurement rows an operator application should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSelection {
    Recon,
    Cv,
    All,
}

impl RowSelection {
    pub fn accepts(self, role: RowRole) -> bool {
        match self {
            RowSelection::All => true,
            RowSelection::Recon => role == RowRole::Recon,
            RowSelection::Cv => role == RowRole::Cv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum CvStrategy {
    EveryKth,
    Random { seed: u64 },
}

/// Sources, the receiver catalog, and for each source the ordered list of
/// catalog receivers that were measured together with their role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    sources: Vec<Point>,
    receivers: Vec<Point>,
    active: Vec<Vec<usize>>,
    roles: Vec<Vec<RowRole>>,
}

impl MeasurementConfig {
    /// Every receiver is measured for every source, all in the RECON role.
    pub fn full(sources: Vec<Point>, receivers: Vec<Point>) -> Result<Self> {
        let q = receivers.len();
        let active = vec![(0..q).collect(); sources.len()];
        Self::new(sources, receivers, active)
    }

    pub fn new(sources: Vec<Point>, receivers: Vec<Point>, active: Vec<Vec<usize>>) -> Result<Self> {
        let roles = active.iter().map(|a| vec![RowRole::Recon; a.len()]).collect();
        Self::with_roles(sources, receivers, active, roles)
    }

    pub fn with_roles(
        sources: Vec<Point>,
        receivers: Vec<Point>,
        active: Vec<Vec<usize>>,
        roles: Vec<Vec<RowRole>>,
    ) -> Result<Self> {
        if sources.is_empty() || receivers.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one source and one receiver are required".into(),
            ));
        }
        if active.len() != sources.len() || roles.len() != sources.len() {
            return Err(Error::DimMismatch(format!(
                "{} sources but {} receiver masks and {} role lists",
                sources.len(),
                active.len(),
                roles.len()
            )));
        }
        for (p, (a, r)) in active.iter().zip(&roles).enumerate() {
            if a.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "source {p} has no active receivers"
                )));
            }
            if a.len() != r.len() {
                return Err(Error::DimMismatch(format!(
                    "source {p}: {} active receivers but {} roles",
                    a.len(),
                    r.len()
                )));
            }
            if a.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "source {p}: receiver indices must be strictly increasing"
                )));
            }
            if a.iter().any(|&q| q >= receivers.len()) {
                return Err(Error::InvalidArgument(format!(
                    "source {p}: receiver index out of range"
                )));
            }
            if !r.contains(&RowRole::Recon) {
                return Err(Error::InvalidArgument(format!(
                    "source {p} has no reconstruction receivers"
                )));
            }
        }
        Ok(Self {
            sources,
            receivers,
            active,
            roles,
        })
    }

    /// Ring geometry: receivers measured for source `p` are those whose angle
    /// relative to the source lies within `arc_deg` (inclusive).
    pub fn ring_with_arc(
        sources: Vec<Point>,
        receivers: Vec<Point>,
        arc_deg: Option<(f64, f64)>,
    ) -> Result<Self> {
        let active = sources
            .iter()
            .map(|s| {
                let theta_s = s.angle_deg();
                (0..receivers.len())
                    .filter(|&q| match arc_deg {
                        None => true,
                        Some((lo, hi)) => {
                            let rel = (receivers[q].angle_deg() - theta_s).rem_euclid(360.0);
                            rel >= lo - 1e-6 && rel <= hi + 1e-6
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(sources, receivers, active)
    }

    pub fn sources(&self) -> &[Point] {
        &self.sources
    }

    pub fn receivers(&self) -> &[Point] {
        &self.receivers
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Size of the receiver catalog.
    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    /// Catalog indices of the receivers measured for source `p`, ascending.
    pub fn active(&self, p: usize) -> &[usize] {
        &self.active[p]
    }

    pub fn roles(&self, p: usize) -> &[RowRole] {
        &self.roles[p]
    }

    pub fn all_active(&self) -> &[Vec<usize>] {
        &self.active
    }

    pub fn all_roles(&self) -> &[Vec<RowRole>] {
        &self.roles
    }

    /// Catalog receivers of source `p` selected by `rows`.
    pub fn rows(&self, p: usize, rows: RowSelection) -> Vec<usize> {
        self.active[p]
            .iter()
            .zip(&self.roles[p])
            .filter(|(_, r)| rows.accepts(**r))
            .map(|(q, _)| *q)
            .collect()
    }

    /// Role of catalog receiver `q` for source `p`, or `None` if unmeasured.
    pub fn role(&self, p: usize, q: usize) -> Option<RowRole> {
        self.active[p]
            .binary_search(&q)
            .ok()
            .map(|k| self.roles[p][k])
    }

    pub fn n_cv(&self, p: usize) -> usize {
        self.roles[p].iter().filter(|r| **r == RowRole::Cv).count()
    }

    pub fn has_cv(&self) -> bool {
        (0..self.n_sources()).any(|p| self.n_cv(p) > 0)
    }

    /// Number of measured (source, receiver) pairs per frequency.
    pub fn pairs_per_frequency(&self) -> usize {
        self.active.iter().map(Vec::len).sum()
    }

    pub fn max_active(&self) -> usize {
        self.active.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Returns a copy with exactly `count` receivers of every source labelled CV.
    ///
    /// `EveryKth` labels active positions `floor(j * Q / count)`; `Random`
    /// draws a uniform subset per source from a seeded stream.
    pub fn split_cv(&self, count: usize, strategy: CvStrategy) -> Result<Self> {
        let mut rng = match strategy {
            CvStrategy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            CvStrategy::EveryKth => None,
        };
        let mut roles = Vec::with_capacity(self.n_sources());
        for p in 0..self.n_sources() {
            let q = self.active[p].len();
            if count == 0 || count >= q {
                return Err(Error::CvTooLarge {
                    requested: count,
                    available: q,
                });
            }
            let mut r = vec![RowRole::Recon; q];
            match rng.as_mut() {
                None => {
                    for j in 0..count {
                        r[j * q / count] = RowRole::Cv;
                    }
                }
                Some(rng) => {
                    for k in sample(rng, q, count).into_vec() {
                        r[k] = RowRole::Cv;
                    }
                }
            }
            roles.push(r);
        }
        Self::with_roles(
            self.sources.clone(),
            self.receivers.clone(),
            self.active.clone(),
            roles,
        )
    }

    /// Copy with every receiver in the RECON role.
    pub fn without_cv(&self) -> Self {
        Self {
            roles: self
                .active
                .iter()
                .map(|a| vec![RowRole::Recon; a.len()])
                .collect(),
            ..self.clone()
        }
    }

    /// Indices of sources and receivers that fall inside the grid's bounding box.
    pub fn geometry_violations(&self, grid: &Grid2D) -> (Vec<usize>, Vec<usize>) {
        let s = (0..self.sources.len())
            .filter(|&p| grid.contains(&self.sources[p]))
            .collect();
        let r = (0..self.receivers.len())
            .filter(|&q| grid.contains(&self.receivers[q]))
            .collect();
        (s, r)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            sources: self.sources.iter().map(|p| p.translated(dx, dy)).collect(),
            receivers: self.receivers.iter().map(|p| p.translated(dx, dy)).collect(),
            ..self.clone()
        }
    }
}

/// `count` points evenly spaced on a circle, starting at `start_deg`.
pub fn ring(radius: f64, count: usize, start_deg: f64, step_deg: f64) -> Vec<Point> {
    (0..count)
        .map(|k| Point::polar(radius, start_deg + k as f64 * step_deg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresnel_2001() -> MeasurementConfig {
        MeasurementConfig::ring_with_arc(
            ring(0.72, 36, 0.0, 10.0),
            ring(0.76, 72, 0.0, 5.0),
            Some((60.0, 300.0)),
        )
        .unwrap()
    }

    #[test]
    fn arc_mask_gives_49_receivers() {
        let m = fresnel_2001();
        for p in 0..36 {
            assert_eq!(m.active(p).len(), 49);
        }
        assert_eq!(m.pairs_per_frequency(), 49 * 36);
    }

    #[test]
    fn every_kth_split() {
        let m = fresnel_2001().split_cv(9, CvStrategy::EveryKth).unwrap();
        for p in 0..36 {
            assert_eq!(m.n_cv(p), 9);
            assert_eq!(m.rows(p, RowSelection::Recon).len(), 40);
            let cv = m.rows(p, RowSelection::Cv);
            let recon = m.rows(p, RowSelection::Recon);
            let mut all: Vec<usize> = cv.iter().chain(&recon).copied().collect();
            all.sort_unstable();
            assert_eq!(all, m.active(p));
        }
        let picked: Vec<usize> = (0..49)
            .filter(|&k| m.roles(0)[k] == RowRole::Cv)
            .collect();
        assert_eq!(picked, vec![0, 5, 10, 16, 21, 27, 32, 38, 43]);
    }

    #[test]
    fn split_rejects_zero_and_full() {
        let m = fresnel_2001();
        assert_eq!(
            m.split_cv(0, CvStrategy::EveryKth).unwrap_err().code(),
            "CV_TOO_LARGE"
        );
        assert_eq!(
            m.split_cv(49, CvStrategy::EveryKth).unwrap_err().code(),
            "CV_TOO_LARGE"
        );
    }

    #[test]
    fn random_split_is_deterministic() {
        let m = fresnel_2001();
        let a = m.split_cv(9, CvStrategy::Random { seed: 7 }).unwrap();
        let b = m.split_cv(9, CvStrategy::Random { seed: 7 }).unwrap();
        let c = m.split_cv(9, CvStrategy::Random { seed: 8 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((0..36).all(|p| a.n_cv(p) == 9));
    }

    #[test]
    fn role_lookup() {
        let m = fresnel_2001().split_cv(9, CvStrategy::EveryKth).unwrap();
        let q0 = m.active(0)[0];
        assert_eq!(m.role(0, q0), Some(RowRole::Cv));
        assert_eq!(m.role(0, 0), None);
    }

    #[test]
    fn geometry_violations_found() {
        let grid = Grid2D::from_bounds(-0.075, 0.075, -0.075, 0.075, 0.0025).unwrap();
        let m = MeasurementConfig::full(vec![Point::new(0.0, 0.0)], ring(0.76, 4, 0.0, 90.0))
            .unwrap();
        assert_eq!(m.geometry_violations(&grid), (vec![0], vec![]));
    }

    use proptest::prelude::*;
    proptest! {
        #[test]
        fn split_is_a_partition(q in 3usize..80, frac in 0.05f64..0.95, seed in any::<u64>(), random in any::<bool>()) {
            let count = ((q as f64 * frac) as usize).clamp(1, q - 1);
            let m = MeasurementConfig::full(vec![Point::new(1.0, 0.0)], ring(2.0, q, 0.0, 360.0 / q as f64)).unwrap();
            let strategy = if random { CvStrategy::Random { seed } } else { CvStrategy::EveryKth };
            let s = m.split_cv(count, strategy).unwrap();
            let cv = s.rows(0, RowSelection::Cv);
            let rec = s.rows(0, RowSelection::Recon);
            prop_assert_eq!(cv.len(), count);
            prop_assert_eq!(cv.len() + rec.len(), q);
            prop_assert!(cv.iter().all(|c| !rec.contains(c)));
        }
    }
}
