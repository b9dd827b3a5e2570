//! 0-dimensional sublevel persistence of height fields.
//!
//! In the top-cube construction every pixel is a 2-cube and each lower
//! dimensional face takes the minimum value of its incident pixels. Two
//! diagonal pixels therefore share a vertex that enters the filtration no
//! later than either of them, so connected components of a sublevel set are
//! exactly the 8-connected components of the pixels below the threshold. The
//! diagram is computed with a union-find sweep over pixels instead of an
//! explicit cell complex.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::filtration::HeightField;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
}

impl PersistencePair {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Multiset of (birth, death) pairs of one height field.
///
/// The component that never dies is reported with `death = h_infinity`.
/// Pairs with zero persistence are not stored, except for the capped
/// essential pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub pairs: Vec<PersistencePair>,
    pub h_infinity: f64,
    pub direction_index: usize,
}

impl PersistenceDiagram {
    pub fn empty(h_infinity: f64, direction_index: usize) -> Self {
        Self {
            pairs: Vec::new(),
            h_infinity,
            direction_index,
        }
    }

    pub fn from_pairs(pairs: &[(f64, f64)], h_infinity: f64, direction_index: usize) -> Self {
        Self {
            pairs: pairs
                .iter()
                .map(|&(birth, death)| PersistencePair { birth, death })
                .collect(),
            h_infinity,
            direction_index,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of components alive at threshold `t`: pairs with
    /// `birth <= t < death`, plus the essential class once `t >= h_infinity`.
    pub fn alive_count(&self, t: f64) -> usize {
        let finite = self
            .pairs
            .iter()
            .filter(|p| p.birth <= t && t < p.death)
            .count();
        finite + usize::from(t >= self.h_infinity && !self.pairs.is_empty())
    }

    pub fn total_persistence(&self) -> f64 {
        self.pairs.iter().map(PersistencePair::persistence).sum()
    }

    /// Pairs sorted by (birth, death), for multiset comparison.
    pub fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<_> = self.pairs.iter().map(|p| (p.birth, p.death)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Links two distinct roots and returns the new root.
    fn link(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.rank[a as usize], self.rank[b as usize]);
        if ra < rb {
            self.parent[a as usize] = b;
            b
        } else {
            self.parent[b as usize] = a;
            if ra == rb {
                self.rank[a as usize] += 1;
            }
            a
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// 0-dimensional persistence diagram of the sublevel filtration of `hf`.
///
/// Pixels are inserted in `(value, row-major index)` order and merged with
/// already inserted 8-neighbors. At a merge the younger component, the one
/// with the later `(birth value, birth pixel index)`, dies.
pub fn compute_pd0(hf: &HeightField) -> PersistenceDiagram {
    let (w, h) = (hf.width, hf.height);
    let n = w * h;
    let values = &hf.values;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a as usize]
            .total_cmp(&values[b as usize])
            .then(a.cmp(&b))
    });

    let mut set = DisjointSet::new(n);
    let mut inserted = vec![false; n];
    // birth pixel of the component rooted at each index
    let mut birth_pixel: Vec<u32> = (0..n as u32).collect();
    let elder = |a: u32, b: u32| -> bool {
        let (va, vb) = (values[a as usize], values[b as usize]);
        va < vb || (va == vb && a < b)
    };

    let mut pairs = Vec::new();
    for &idx in &order {
        let t = values[idx as usize];
        inserted[idx as usize] = true;
        let (row, col) = ((idx as usize) / w, (idx as usize) % w);
        for (dr, dc) in NEIGHBORS {
            let (r, c) = (row as isize + dr, col as isize + dc);
            if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                continue;
            }
            let nb = (r as usize * w + c as usize) as u32;
            if !inserted[nb as usize] {
                continue;
            }
            let (ra, rb) = (set.find(idx), set.find(nb));
            if ra == rb {
                continue;
            }
            let (ba, bb) = (birth_pixel[ra as usize], birth_pixel[rb as usize]);
            let (old, young) = if elder(ba, bb) { (ba, bb) } else { (bb, ba) };
            let birth = values[young as usize];
            if birth < t {
                pairs.push(PersistencePair { birth, death: t });
            }
            let root = set.link(ra, rb);
            birth_pixel[root as usize] = old;
        }
    }

    if n > 0 {
        let root = set.find(order[0]);
        pairs.push(PersistencePair {
            birth: values[birth_pixel[root as usize] as usize],
            death: hf.h_infinity,
        });
    }
    PersistenceDiagram {
        pairs,
        h_infinity: hf.h_infinity,
        direction_index: hf.direction.index,
    }
}

/// Number of 8-connected components of `{pixels with value <= t}`, by flood
/// fill. Independent of [`compute_pd0`] and used to verify it.
pub fn component_count_oracle(hf: &HeightField, t: f64) -> usize {
    let (w, h) = (hf.width, hf.height);
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for start in 0..w * h {
        if seen[start] || hf.values[start] > t {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (row, col) = (p / w, p % w);
            for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    let q = r * w + c;
                    if !seen[q] && hf.values[q] <= t {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    count
}

/// Every distinct filtration value of `hf` plus the midpoints between
/// consecutive ones, sorted ascending.
pub fn probe_thresholds(hf: &HeightField) -> Vec<f64> {
    let mut levels = hf.values.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut probes = Vec::with_capacity(2 * levels.len());
    for (i, &v) in levels.iter().enumerate() {
        if i > 0 {
            probes.push(0.5 * (levels[i - 1] + v));
        }
        probes.push(v);
    }
    probes
}

/// Renders diagrams as text: `direction_index birth death` per line with 17
/// significant digits; `#` lines carry provenance and each `h_infinity`.
pub fn write_pd_text(diagrams: &[PersistenceDiagram], source: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# source {source}");
    for pd in diagrams {
        let _ = writeln!(out, "# h_infinity {} {:.16e}", pd.direction_index, pd.h_infinity);
        for p in &pd.pairs {
            let _ = writeln!(out, "{} {:.16e} {:.16e}", pd.direction_index, p.birth, p.death);
        }
    }
    out
}

/// Parses the format produced by [`write_pd_text`].
pub fn parse_pd_text(text: &str) -> Result<Vec<PersistenceDiagram>> {
    let bad = |line: usize, why: &str| Error::Format {
        what: "persistence diagram",
        reason: format!("line {line}: {why}"),
    };
    let mut diagrams: Vec<PersistenceDiagram> = Vec::new();
    let find = |ds: &mut Vec<PersistenceDiagram>, k: usize| -> usize {
        match ds.iter().position(|d| d.direction_index == k) {
            Some(i) => i,
            None => {
                ds.push(PersistenceDiagram::empty(f64::NAN, k));
                ds.len() - 1
            }
        }
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            if it.next() == Some("h_infinity") {
                let k: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(n + 1, "bad direction"))?;
                let v: f64 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(n + 1, "bad h_infinity"))?;
                let i = find(&mut diagrams, k);
                diagrams[i].h_infinity = v;
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(n + 1, "expected `direction birth death`"));
        }
        let k: usize = fields[0].parse().map_err(|_| bad(n + 1, "bad direction"))?;
        let birth: f64 = fields[1].parse().map_err(|_| bad(n + 1, "bad birth"))?;
        let death: f64 = fields[2].parse().map_err(|_| bad(n + 1, "bad death"))?;
        let i = find(&mut diagrams, k);
        diagrams[i].pairs.push(PersistencePair { birth, death });
    }
    Ok(diagrams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{height_field, make_directions, Direction};
    use crate::mask::BinaryMask;
    use proptest::prelude::*;

    fn east() -> Direction {
        Direction { index: 0, ux: 1.0, uy: 0.0 }
    }

    #[test]
    fn row_mask_two_components() {
        let m = BinaryMask::from_rows(&[&[1, 0, 1, 1, 0]]).unwrap();
        let hf = height_field(&m, east());
        let pd = compute_pd0(&hf);
        assert_eq!(pd.sorted_pairs(), vec![(0.0, 4.0), (2.0, 4.0)]);
        assert_eq!(component_count_oracle(&hf, 1.0), 1);
        assert_eq!(component_count_oracle(&hf, 3.5), 2);
        assert_eq!(component_count_oracle(&hf, hf.h_infinity), 1);
    }

    #[test]
    fn full_square_single_pair() {
        let m = BinaryMask::new(3, 3, vec![1; 9]).unwrap();
        let pd = compute_pd0(&height_field(&m, east()));
        assert_eq!(pd.sorted_pairs(), vec![(0.0, 2.0)]);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let m = BinaryMask::from_rows(&[&[1, 0], &[0, 1]]).unwrap();
        let hf = height_field(&m, east());
        assert_eq!(hf.values, vec![0.0, 1.0, 1.0, 1.0]);
        let pd = compute_pd0(&hf);
        assert_eq!(pd.sorted_pairs(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn text_format_round_trip() {
        let m = BinaryMask::from_rows(&[&[1, 0, 1, 1, 0], &[0, 0, 0, 1, 1]]).unwrap();
        let pds: Vec<_> = make_directions(8)
            .into_iter()
            .map(|d| compute_pd0(&height_field(&m, d)))
            .collect();
        let text = write_pd_text(&pds, "test mask");
        assert!(text.starts_with("# source test mask\n"));
        assert!(text.contains("\n0 0.0000000000000000e0 4.0000000000000000e0\n"));
        assert_eq!(parse_pd_text(&text).unwrap(), pds);
        assert!(parse_pd_text("0 1.0\n").is_err());
    }

    fn arb_grid(max: usize) -> impl Strategy<Value = BinaryMask> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            prop::collection::vec(prop::bool::weighted(0.45), w * h).prop_map(move |bits| {
                let mut px: Vec<u8> = bits.into_iter().map(u8::from).collect();
                px[0] = 1;
                BinaryMask::new(w, h, px).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn alive_count_matches_flood_fill(m in arb_grid(9), k in 0usize..8) {
            let hf = height_field(&m, make_directions(8)[k]);
            let pd = compute_pd0(&hf);
            for t in probe_thresholds(&hf) {
                prop_assert_eq!(pd.alive_count(t), component_count_oracle(&hf, t), "t = {}", t);
            }
        }

        #[test]
        fn diagram_invariants(m in arb_grid(9), k in 0usize..8) {
            let hf = height_field(&m, make_directions(8)[k]);
            let pd = compute_pd0(&hf);
            let fg_min = hf.values.iter().zip(m.pixels())
                .filter(|(_, &p)| p == 1).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
            for p in &pd.pairs {
                prop_assert!(0.0 <= p.birth && p.birth <= p.death && p.death <= pd.h_infinity);
            }
            prop_assert!(pd.pairs.iter().any(|p| p.birth == fg_min && p.death == pd.h_infinity));
            prop_assert!(pd.len() <= m.foreground_count());
        }

        #[test]
        fn net_births_match_count_jumps(m in arb_grid(8), k in 0usize..8) {
            let hf = height_field(&m, make_directions(8)[k]);
            let pd = compute_pd0(&hf);
            let mut levels = hf.values.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let mut prev = 0i64;
            for &t in &levels {
                let now = component_count_oracle(&hf, t) as i64;
                let born = pd.pairs.iter().filter(|p| p.birth == t).count() as i64;
                let died = pd.pairs.iter().filter(|p| p.death == t && p.death < pd.h_infinity).count() as i64;
                let essential_end = i64::from(t == pd.h_infinity) * (pd.pairs.iter().filter(|p| p.death == t).count() as i64 - 1);
                prop_assert_eq!(now - prev, born - died - essential_end);
                prev = now;
            }
        }

        #[test]
        fn total_persistence_shift_invariant(m in arb_grid(8), shift in -50i32..50) {
            let hf = height_field(&m, make_directions(8)[1]);
            let c = f64::from(shift) * 0.25;
            let mut shifted = hf.clone();
            shifted.values.iter_mut().for_each(|v| *v += c);
            shifted.h_infinity += c;
            let a = compute_pd0(&hf).total_persistence();
            let b = compute_pd0(&shifted).total_persistence();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
