//! Synthetic silhouettes for examples and tests.
//!
//! Each shape class is an implicit region in the unit square, drawn with a
//! random rotation, anisotropic scale and offset, then rasterized at pixel
//! centers.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mask::{write_pgm, BinaryMask};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeClass {
    Ellipse,
    Rectangle,
    Ring,
    Cross,
    Triangle,
    Star,
    TwinDisks,
    Comb,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 8] = [
        ShapeClass::Ellipse,
        ShapeClass::Rectangle,
        ShapeClass::Ring,
        ShapeClass::Cross,
        ShapeClass::Triangle,
        ShapeClass::Star,
        ShapeClass::TwinDisks,
        ShapeClass::Comb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Ellipse => "ellipse",
            ShapeClass::Rectangle => "rectangle",
            ShapeClass::Ring => "ring",
            ShapeClass::Cross => "cross",
            ShapeClass::Triangle => "triangle",
            ShapeClass::Star => "star",
            ShapeClass::TwinDisks => "twin-disks",
            ShapeClass::Comb => "comb",
        }
    }

    /// Membership in canonical coordinates `(x, y) ∈ [-1, 1]²`.
    fn contains(self, x: f64, y: f64, detail: f64) -> bool {
        match self {
            ShapeClass::Ellipse => x * x + (y / 0.6).powi(2) <= 1.0,
            ShapeClass::Rectangle => x.abs() <= 0.9 && y.abs() <= 0.5,
            ShapeClass::Ring => {
                let r = (x * x + y * y).sqrt();
                (0.55..=0.95).contains(&r)
            }
            ShapeClass::Cross => {
                (x.abs() <= 0.25 && y.abs() <= 0.9) || (y.abs() <= 0.25 && x.abs() <= 0.9)
            }
            ShapeClass::Triangle => y >= -0.7 && y <= 0.9 - 1.7 * x.abs(),
            ShapeClass::Star => {
                let r = (x * x + y * y).sqrt();
                let arms = 5.0 + detail.floor();
                let edge = 0.5 + 0.4 * (0.5 + 0.5 * (arms * y.atan2(x)).cos()).powi(2);
                r <= edge
            }
            ShapeClass::TwinDisks => {
                let d1 = (x + 0.5).powi(2) + y * y;
                let d2 = (x - 0.5).powi(2) + y * y;
                d1 <= 0.16 || d2 <= 0.16
            }
            ShapeClass::Comb => {
                let teeth = 3.0 + detail.floor();
                let pitch = 1.8 / teeth;
                let u = (x + 0.9) / pitch;
                let in_tooth = u >= 0.0 && u < teeth && u.fract() < 0.5;
                (in_tooth && y.abs() <= 0.8) || (y >= 0.6 && y <= 0.8 && x.abs() <= 0.9)
            }
        }
    }
}

/// Draws one random instance of `class` on a `side × side` grid.
pub fn render(class: ShapeClass, side: usize, rng: &mut impl Rng) -> BinaryMask {
    let theta = rng.random_range(0.0..2.0 * PI);
    let scale = rng.random_range(0.55..0.9);
    let aspect = rng.random_range(0.8..1.25);
    let half = side as f64 / 2.0;
    let shift = 0.08 * half;
    let (cx, cy) = (
        half + rng.random_range(-shift..shift),
        half + rng.random_range(-shift..shift),
    );
    let detail = rng.random_range(0.0..2.0);
    let (s, c) = theta.sin_cos();
    let radius = scale * half;

    let mut pixels = vec![0u8; side * side];
    for row in 0..side {
        for col in 0..side {
            let px = (col as f64 + 0.5 - cx) / radius;
            let py = (cy - row as f64 - 0.5) / radius;
            // inverse rotation, then undo the aspect stretch
            let x = (c * px + s * py) / aspect;
            let y = (-s * px + c * py) * aspect;
            if class.contains(x, y, detail) {
                pixels[row * side + col] = 1;
            }
        }
    }
    if pixels.iter().all(|&p| p == 0) {
        pixels[(side / 2) * side + side / 2] = 1;
    }
    BinaryMask::new(side, side, pixels)
        .expect("binary pixels")
        .with_label(class.name())
}

/// `per_class` instances of each of the first `classes` shape classes, in
/// class-major order, deterministic in `seed`.
pub fn shape_dataset(classes: usize, per_class: usize, side: usize, seed: u64) -> Vec<BinaryMask> {
    assert!(classes <= ShapeClass::ALL.len(), "at most {} classes", ShapeClass::ALL.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes * per_class);
    for &class in &ShapeClass::ALL[..classes] {
        for i in 0..per_class {
            let m = render(class, side, &mut rng).with_source_id(format!("{}/{i:03}", class.name()));
            out.push(m);
        }
    }
    out
}

/// Writes [`shape_dataset`] as `root/<class>/<index>.pgm`.
pub fn write_shape_dataset(
    root: impl AsRef<Path>,
    classes: usize,
    per_class: usize,
    side: usize,
    seed: u64,
) -> Result<()> {
    let root = root.as_ref();
    for m in shape_dataset(classes, per_class, side, seed) {
        let path = root.join(format!("{}.pgm", m.source_id));
        std::fs::create_dir_all(path.parent().expect("class directory"))?;
        write_pgm(&m, &path)?;
    }
    Ok(())
}

/// Uniform random mask with foreground probability `density` and at least
/// one foreground pixel.
pub fn random_mask(width: usize, height: usize, density: f64, rng: &mut impl Rng) -> BinaryMask {
    let mut pixels: Vec<u8> = (0..width * height)
        .map(|_| u8::from(rng.random_bool(density)))
        .collect();
    if pixels.iter().all(|&p| p == 0) {
        let i = rng.random_range(0..pixels.len());
        pixels[i] = 1;
    }
    BinaryMask::new(width, height, pixels).expect("binary pixels")
}
