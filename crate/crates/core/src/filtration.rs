//! Height-function filtrations of binary masks.
//!
//! Pixel coordinates are `v = (column, row)` with the origin at the top-left
//! corner. Foreground pixels take their height `<v, p>` along a unit
//! direction `p`; background pixels take the largest height attainable
//! anywhere on the grid. All values are then shifted so that the smallest
//! attainable height is 0.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use crate::mask::BinaryMask;
use crate::Result;

/// A unit direction on the circle, `(cos 2πk/d, sin 2πk/d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub index: usize,
    pub ux: f64,
    pub uy: f64,
}

/// `d` evenly spaced unit directions starting at angle 0.
///
/// When `d` is a multiple of 4 the directions outside the first quadrant are
/// produced by exact quarter turns `(x, y) -> (-y, x)` of the first-quadrant
/// ones, so rotating a mask by 90° maps direction `k` onto `k + d/4` without
/// rounding differences.
pub fn make_directions(d: usize) -> Vec<Direction> {
    assert!(d >= 1, "need at least one direction");
    (0..d)
        .map(|k| {
            let (ux, uy) = if d % 4 == 0 {
                let quarter = d / 4;
                let theta = TAU * (k % quarter) as f64 / d as f64;
                let (mut x, mut y) = if k % quarter == 0 {
                    (1.0, 0.0)
                } else {
                    (theta.cos(), theta.sin())
                };
                for _ in 0..k / quarter {
                    (x, y) = (-y, x);
                }
                (x, y)
            } else {
                let theta = TAU * k as f64 / d as f64;
                (theta.cos(), theta.sin())
            };
            Direction { index: k, ux, uy }
        })
        .collect()
}

/// Grayscale filtration image of one mask under one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub width: usize,
    pub height: usize,
    /// Row-major filtration values.
    pub values: Vec<f64>,
    /// Value carried by every background pixel.
    pub h_infinity: f64,
    pub direction: Direction,
}

impl HeightField {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Writes an ASCII PGM with values mapped linearly from `[0, h_infinity]`
    /// onto `[0, 255]`.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        let scale = if self.h_infinity > 0.0 {
            255.0 / self.h_infinity
        } else {
            0.0
        };
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|v| ((v * scale).round().clamp(0.0, 255.0) as u8).to_string())
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Height image of `mask` along `dir`.
///
/// Each value is computed as `dx·|ux| + dy·|uy|`, where `dx`/`dy` are the
/// integer distances from the grid edge at which `<v, p>` is smallest. This
/// equals `<v, p> - min_grid <w, p>` and is exactly symmetric under quarter
/// turns of the grid.
pub fn height_field(mask: &BinaryMask, dir: Direction) -> HeightField {
    let (w, h) = (mask.width(), mask.height());
    let (ax, ay) = (dir.ux.abs(), dir.uy.abs());
    let h_infinity = (w - 1) as f64 * ax + (h - 1) as f64 * ay;
    let mut values = Vec::with_capacity(w * h);
    for row in 0..h {
        let dy = if dir.uy >= 0.0 { row } else { h - 1 - row };
        for col in 0..w {
            let v = if mask.get(row, col) == 1 {
                let dx = if dir.ux >= 0.0 { col } else { w - 1 - col };
                dx as f64 * ax + dy as f64 * ay
            } else {
                h_infinity
            };
            values.push(v);
        }
    }
    HeightField {
        width: w,
        height: h,
        values,
        h_infinity,
        direction: dir,
    }
}

/// Height fields of `mask` for every direction in `dirs`.
pub fn height_fields(mask: &BinaryMask, dirs: &[Direction]) -> Vec<HeightField> {
    dirs.iter().map(|&d| height_field(mask, d)).collect()
}

/// Quarter turn of a height field, matching [`BinaryMask::rot90`].
pub fn rot90_field(hf: &HeightField) -> HeightField {
    let (w, h) = (hf.width, hf.height);
    let mut values = vec![0.0; w * h];
    for r in 0..w {
        for c in 0..h {
            values[r * h + c] = hf.get(c, w - 1 - r);
        }
    }
    HeightField {
        width: h,
        height: w,
        values,
        h_infinity: hf.h_infinity,
        direction: hf.direction,
    }
}
