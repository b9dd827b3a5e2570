//! Fixed-size vectorizations of persistence diagrams: persistence images and
//! bottleneck amplitudes.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::persistence::PersistenceDiagram;
use crate::{Error, Result};

/// Grid layout and kernel of a persistence image.
///
/// The image has `grid_side` rows along the persistence axis and
/// `grid_side` columns along the birth axis. Pixel `(row, col)` is stored at
/// flat index `row * grid_side + col` and evaluated at its cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceImageConfig {
    pub grid_side: usize,
    /// Standard deviation of the Gaussian kernel, in filtration units.
    pub spread: f64,
    pub birth_range: (f64, f64),
    pub persistence_range: (f64, f64),
    /// Linear weighting `w(p) = p / max_persistence`.
    pub max_persistence: f64,
}

impl PersistenceImageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 {
            return Err(Error::Config("persistence image grid side must be >= 1".into()));
        }
        if !(self.spread > 0.0) {
            return Err(Error::Config(format!("spread must be > 0, got {}", self.spread)));
        }
        for (axis, (lo, hi)) in [("birth", self.birth_range), ("persistence", self.persistence_range)] {
            if !(hi > lo) {
                return Err(Error::DegenerateRange { axis, lo, hi });
            }
        }
        if !(self.max_persistence > 0.0) {
            return Err(Error::DegenerateRange {
                axis: "weight",
                lo: 0.0,
                hi: self.max_persistence,
            });
        }
        Ok(())
    }

    /// Fits the ranges from a set of diagrams: births over `[0, max h_infinity]`,
    /// persistence over `[0, max persistence]`, and the weight normalizer to
    /// the largest persistence.
    pub fn fit<'a>(
        diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>,
        grid_side: usize,
        spread: f64,
    ) -> Result<Self> {
        let (mut h_max, mut p_max) = (0.0f64, 0.0f64);
        for pd in diagrams {
            h_max = h_max.max(pd.h_infinity);
            for p in &pd.pairs {
                p_max = p_max.max(p.persistence());
            }
        }
        let cfg = Self {
            grid_side,
            spread,
            birth_range: (0.0, h_max),
            persistence_range: (0.0, p_max),
            max_persistence: p_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pixel_count(&self) -> usize {
        self.grid_side * self.grid_side
    }

    fn centers(&self, (lo, hi): (f64, f64)) -> Vec<f64> {
        let step = (hi - lo) / self.grid_side as f64;
        (0..self.grid_side)
            .map(|i| lo + (i as f64 + 0.5) * step)
            .collect()
    }

    pub fn birth_centers(&self) -> Vec<f64> {
        self.centers(self.birth_range)
    }

    pub fn persistence_centers(&self) -> Vec<f64> {
        self.centers(self.persistence_range)
    }

    /// Area of one grid cell.
    pub fn cell_area(&self) -> f64 {
        let g = self.grid_side as f64;
        (self.birth_range.1 - self.birth_range.0) / g
            * (self.persistence_range.1 - self.persistence_range.0)
            / g
    }

    pub fn weight(&self, persistence: f64) -> f64 {
        persistence / self.max_persistence
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceImage {
    pub grid_side: usize,
    /// `grid_side²` nonnegative values, persistence-major.
    pub values: Vec<f64>,
    pub direction_index: usize,
}

impl PersistenceImage {
    /// Sum of values times cell area: the kernel mass captured by the grid.
    pub fn mass(&self, cfg: &PersistenceImageConfig) -> f64 {
        self.values.iter().sum::<f64>() * cfg.cell_area()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// `(birth, death) -> (birth, death - birth)`.
pub fn birth_persistence(pd: &PersistenceDiagram) -> Vec<(f64, f64)> {
    pd.pairs.iter().map(|p| (p.birth, p.persistence())).collect()
}

/// Persistence image of `pd`: for each birth-persistence point, a weighted
/// isotropic Gaussian with standard deviation `spread` and unit total mass,
/// evaluated at every grid-cell center.
pub fn persistence_image(
    pd: &PersistenceDiagram,
    cfg: &PersistenceImageConfig,
) -> Result<PersistenceImage> {
    cfg.validate()?;
    let n = cfg.grid_side;
    let bc = cfg.birth_centers();
    let pc = cfg.persistence_centers();
    let inv_two_var = 1.0 / (2.0 * cfg.spread * cfg.spread);
    let norm = 1.0 / (2.0 * PI * cfg.spread * cfg.spread);

    let mut values = vec![0.0; n * n];
    let mut along_birth = vec![0.0; n];
    for (b, p) in birth_persistence(pd) {
        let w = cfg.weight(p);
        if w == 0.0 {
            continue;
        }
        for (eb, &g) in along_birth.iter_mut().zip(&bc) {
            *eb = (-(g - b) * (g - b) * inv_two_var).exp();
        }
        for (row, &g) in pc.iter().enumerate() {
            let ep = w * norm * (-(g - p) * (g - p) * inv_two_var).exp();
            for (v, eb) in values[row * n..(row + 1) * n].iter_mut().zip(&along_birth) {
                *v += ep * eb;
            }
        }
    }
    Ok(PersistenceImage {
        grid_side: n,
        values,
        direction_index: pd.direction_index,
    })
}

/// `(√2/2) · max (death − birth)`; 0 for an empty diagram.
pub fn bottleneck_amplitude(pd: &PersistenceDiagram) -> f64 {
    let longest = pd
        .pairs
        .iter()
        .map(|p| p.persistence())
        .fold(0.0, f64::max);
    FRAC_1_SQRT_2 * longest
}

/// One bottleneck amplitude per direction, in direction order.
pub fn amplitude_vector(pds: &[PersistenceDiagram], directions: usize) -> Result<Vec<f64>> {
    if pds.len() != directions {
        return Err(Error::WrongDirectionCount {
            expected: directions,
            actual: pds.len(),
        });
    }
    if let Some((k, pd)) = pds.iter().enumerate().find(|(k, pd)| pd.direction_index != *k) {
        return Err(Error::ShapeMismatch(format!(
            "diagram at position {k} has direction index {}",
            pd.direction_index
        )));
    }
    Ok(pds.iter().map(bottleneck_amplitude).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pd(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(pairs, 4.0, 0)
    }

    fn cfg(grid_side: usize, spread: f64, b: (f64, f64), p: (f64, f64), pmax: f64) -> PersistenceImageConfig {
        PersistenceImageConfig {
            grid_side,
            spread,
            birth_range: b,
            persistence_range: p,
            max_persistence: pmax,
        }
    }

    /// Direct evaluation, one exponential per (point, cell).
    fn dense_oracle(pd: &PersistenceDiagram, c: &PersistenceImageConfig, refine: usize) -> (Vec<f64>, f64) {
        let n = c.grid_side * refine;
        let db = (c.birth_range.1 - c.birth_range.0) / n as f64;
        let dp = (c.persistence_range.1 - c.persistence_range.0) / n as f64;
        let mut out = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                let gb = c.birth_range.0 + (col as f64 + 0.5) * db;
                let gp = c.persistence_range.0 + (row as f64 + 0.5) * dp;
                let mut acc = 0.0;
                for pair in &pd.pairs {
                    let (b, p) = (pair.birth, pair.death - pair.birth);
                    let w = p / c.max_persistence;
                    let d2 = (gb - b).powi(2) + (gp - p).powi(2);
                    acc += w * (-d2 / (2.0 * c.spread * c.spread)).exp()
                        / (2.0 * std::f64::consts::PI * c.spread * c.spread);
                }
                out[row * n + col] = acc;
            }
        }
        let mass = out.iter().sum::<f64>() * db * dp;
        (out, mass)
    }

    #[test]
    fn birth_persistence_examples() {
        assert_eq!(birth_persistence(&pd(&[(0.0, 4.0), (2.0, 4.0)])), vec![(0.0, 4.0), (2.0, 2.0)]);
        assert_eq!(birth_persistence(&pd(&[(3.0, 3.0)])), vec![(3.0, 0.0)]);
        assert!(birth_persistence(&pd(&[])).is_empty());
    }

    #[test]
    fn empty_diagram_gives_zero_image() {
        let c = cfg(50, 10.0, (0.0, 10.0), (0.0, 10.0), 4.0);
        let pi = persistence_image(&pd(&[]), &c).unwrap();
        assert_eq!(pi.values.len(), 2500);
        assert!(pi.values.iter().all(|&v| v == 0.0));
        // only zero-persistence points: also all zero
        let pi = persistence_image(&pd(&[(1.0, 1.0), (3.0, 3.0)]), &c).unwrap();
        assert!(pi.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_mass_and_peak() {
        let spread = 1.0;
        // birth-persistence point (0, 4); range reaches 4 spreads past it
        let c = cfg(50, spread, (-4.0, 4.0), (0.0, 8.0), 4.0);
        let d = pd(&[(0.0, 4.0)]);
        let pi = persistence_image(&d, &c).unwrap();
        let w = c.weight(4.0);
        let mass = pi.mass(&c);
        let (_, dense_mass) = dense_oracle(&d, &c, 10);
        assert!(mass <= w * (1.0 + 1e-12));
        assert!(mass >= 0.98 * w, "mass {mass}");
        assert!((mass - dense_mass).abs() < 0.02 * w);

        let (bc, pc) = (c.birth_centers(), c.persistence_centers());
        let peak = pi.argmax();
        let (row, col) = (peak / 50, peak % 50);
        let d_col = (bc[col] - 0.0).abs();
        let d_row = (pc[row] - 4.0).abs();
        assert!(bc.iter().all(|g| (g - 0.0).abs() >= d_col - 1e-12));
        assert!(pc.iter().all(|g| (g - 4.0).abs() >= d_row - 1e-12));
    }

    #[test]
    fn degenerate_ranges_rejected() {
        let c = cfg(10, 1.0, (1.0, 1.0), (0.0, 1.0), 1.0);
        assert!(matches!(
            persistence_image(&pd(&[]), &c),
            Err(Error::DegenerateRange { axis: "birth", .. })
        ));
        let c = cfg(10, 1.0, (0.0, 1.0), (2.0, 1.0), 1.0);
        assert!(matches!(
            persistence_image(&pd(&[]), &c),
            Err(Error::DegenerateRange { axis: "persistence", .. })
        ));
    }

    #[test]
    fn fit_ranges() {
        let a = PersistenceDiagram::from_pairs(&[(0.0, 4.0), (2.0, 3.0)], 4.0, 0);
        let b = PersistenceDiagram::from_pairs(&[(1.0, 7.0)], 9.0, 1);
        let c = PersistenceImageConfig::fit([&a, &b], 50, 10.0).unwrap();
        assert_eq!(c.birth_range, (0.0, 9.0));
        assert_eq!(c.persistence_range, (0.0, 6.0));
        assert_eq!(c.max_persistence, 6.0);
        let z = PersistenceDiagram::from_pairs(&[(1.0, 1.0)], 4.0, 0);
        assert!(PersistenceImageConfig::fit([&z], 50, 10.0).is_err());
    }

    #[test]
    fn amplitude_examples() {
        let a = bottleneck_amplitude(&pd(&[(0.0, 4.0), (2.0, 4.0)]));
        assert!((a - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(bottleneck_amplitude(&pd(&[(3.0, 3.0)])), 0.0);
        assert_eq!(bottleneck_amplitude(&pd(&[])), 0.0);

        let empties: Vec<_> = (0..8).map(|k| PersistenceDiagram::empty(1.0, k)).collect();
        assert_eq!(amplitude_vector(&empties, 8).unwrap(), vec![0.0; 8]);

        let two = [
            PersistenceDiagram::from_pairs(&[(0.0, 4.0)], 4.0, 0),
            PersistenceDiagram::from_pairs(&[(1.0, 2.0)], 4.0, 1),
        ];
        let v = amplitude_vector(&two, 2).unwrap();
        assert!((v[0] - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((v[1] - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(matches!(
            amplitude_vector(&two, 8),
            Err(Error::WrongDirectionCount { expected: 8, actual: 2 })
        ));
    }

    fn arb_pairs(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0..50.0f64, 0.0..30.0f64), 0..max)
            .prop_map(|v| v.into_iter().map(|(b, p)| (b, b + p)).collect())
    }

    proptest! {
        #[test]
        fn matches_dense_oracle(pairs in arb_pairs(12), spread in 0.5..12.0f64) {
            let c = cfg(20, spread, (0.0, 60.0), (0.0, 35.0), 30.0);
            let d = pd(&pairs);
            let pi = persistence_image(&d, &c).unwrap();
            let (dense, _) = dense_oracle(&d, &c, 1);
            let err = pi.values.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9, "max abs error {}", err);
            prop_assert!(pi.values.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn image_is_linear_and_order_free(a in arb_pairs(8), b in arb_pairs(8)) {
            let c = cfg(16, 4.0, (0.0, 60.0), (0.0, 35.0), 30.0);
            let union: Vec<_> = a.iter().chain(&b).cloned().collect();
            let reversed: Vec<_> = union.iter().rev().cloned().collect();
            let pa = persistence_image(&pd(&a), &c).unwrap();
            let pb = persistence_image(&pd(&b), &c).unwrap();
            let pu = persistence_image(&pd(&union), &c).unwrap();
            let pr = persistence_image(&pd(&reversed), &c).unwrap();
            for i in 0..pu.values.len() {
                prop_assert!((pu.values[i] - pa.values[i] - pb.values[i]).abs() <= 1e-12);
                prop_assert!((pu.values[i] - pr.values[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn amplitude_properties(pairs in arb_pairs(10), extra in (0.0..50.0f64, 0.0..30.0f64), s in 0.1..10.0f64) {
            let base = bottleneck_amplitude(&pd(&pairs));
            prop_assert!(base >= 0.0);
            let mut more = pairs.clone();
            more.push((extra.0, extra.0 + extra.1));
            prop_assert!(bottleneck_amplitude(&pd(&more)) >= base);

            let scaled: Vec<_> = pairs.iter().map(|&(b, d)| (b * s, d * s)).collect();
            let sa = bottleneck_amplitude(&pd(&scaled));
            prop_assert!((sa - s * base).abs() <= 1e-12 * (1.0 + sa));

            let mut shuffled = pairs.clone();
            shuffled.reverse();
            prop_assert_eq!(bottleneck_amplitude(&pd(&shuffled)), base);

            if let Some(imax) = (0..pairs.len()).max_by(|&i, &j| {
                (pairs[i].1 - pairs[i].0).total_cmp(&(pairs[j].1 - pairs[j].0))
            }) {
                let mut fewer = pairs.clone();
                fewer.remove(imax);
                prop_assert!(bottleneck_amplitude(&pd(&fewer)) <= base);
            }
        }
    }
}
