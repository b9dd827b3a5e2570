//! Binary segmentation masks: loading, normalization and rotation augmentation.

use std::path::Path;

use crate::{Error, Result};

/// Grayscale level at or above which a pixel counts as foreground.
pub const DEFAULT_THRESHOLD: u8 = 128;

/// A 2D grid of {0,1} pixels stored row-major (1 = foreground).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub label: Option<String>,
    pub source_id: String,
}

/// Inclusive pixel bounds of the foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.col_max - self.col_min + 1
    }

    pub fn height(&self) -> usize {
        self.row_max - self.row_min + 1
    }
}

impl BinaryMask {
    /// Builds a mask from row-major pixels; every pixel must be 0 or 1.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("zero-sized grid {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "{} pixels for a {width}x{height} grid",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|&&p| p > 1) {
            return Err(Error::InvalidMask(format!("pixel value {bad} is not binary")));
        }
        Ok(Self {
            width,
            height,
            pixels,
            label: None,
            source_id: String::new(),
        })
    }

    /// Convenience constructor from nested rows, mostly for tests and examples.
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidMask("ragged rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    /// Thresholds an 8-bit grayscale buffer: `p >= threshold` becomes foreground.
    pub fn from_gray(width: usize, height: usize, gray: &[u8], threshold: u8) -> Result<Self> {
        let pixels = gray.iter().map(|&g| u8::from(g >= threshold)).collect();
        Self::new(width, height, pixels)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bb: Option<BoundingBox> = None;
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) == 0 {
                    continue;
                }
                let b = bb.get_or_insert(BoundingBox {
                    row_min: row,
                    row_max: row,
                    col_min: col,
                    col_max: col,
                });
                b.row_min = b.row_min.min(row);
                b.row_max = b.row_max.max(row);
                b.col_min = b.col_min.min(col);
                b.col_max = b.col_max.max(col);
            }
        }
        bb
    }

    /// Counterclockwise quarter turn as a pure index permutation.
    pub fn rot90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut pixels = vec![0u8; w * h];
        // new[r][c] = old[c][w - 1 - r]; the result is w rows by h columns
        for r in 0..w {
            for c in 0..h {
                pixels[r * h + c] = self.get(c, w - 1 - r);
            }
        }
        Self {
            width: h,
            height: w,
            pixels,
            label: self.label.clone(),
            source_id: self.source_id.clone(),
        }
    }

    fn crop(&self, bb: BoundingBox) -> Self {
        let mut pixels = Vec::with_capacity(bb.width() * bb.height());
        for row in bb.row_min..=bb.row_max {
            let start = row * self.width;
            pixels.extend_from_slice(&self.pixels[start + bb.col_min..=start + bb.col_max]);
        }
        Self {
            width: bb.width(),
            height: bb.height(),
            pixels,
            label: self.label.clone(),
            source_id: self.source_id.clone(),
        }
    }
}

/// Loads a PNG/PGM/GIF image, converts it to 8-bit gray and thresholds it.
pub fn load_mask(path: impl AsRef<Path>, threshold: u8) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::UnreadableImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let mask = BinaryMask::from_gray(w as usize, h as usize, gray.as_raw(), threshold)?
        .with_source_id(path.display().to_string());
    if mask.foreground_count() == 0 {
        return Err(Error::EmptyMask(path.display().to_string()));
    }
    Ok(mask)
}

/// Maps `dst` in `0..dst_len` onto `0..src_len` with the end points pinned.
fn nearest_source(dst: usize, dst_len: usize, src_len: usize) -> usize {
    if dst_len == 1 {
        return 0;
    }
    // round(dst * (src_len - 1) / (dst_len - 1)), halves rounded up
    let num = 2 * dst * (src_len - 1) + (dst_len - 1);
    num / (2 * (dst_len - 1))
}

fn resize_nearest(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        let sr = nearest_source(r, height, mask.height);
        for c in 0..width {
            pixels.push(mask.get(sr, nearest_source(c, width, mask.width)));
        }
    }
    BinaryMask {
        width,
        height,
        pixels,
        label: mask.label.clone(),
        source_id: mask.source_id.clone(),
    }
}

/// Crops to the foreground bounding box, scales the longer axis to `side`
/// with nearest-neighbor sampling and zero-pads the shorter axis
/// symmetrically (odd remainders go to the bottom/right).
///
/// Resampling happens before padding, so the margins are exact in the output
/// grid. Downsampling can drop a boundary row of the shape; a second pass,
/// which only ever upsamples, restores a full-extent bounding box, and after
/// it the procedure is the identity, making `normalize_mask` idempotent.
pub fn normalize_mask(mask: &BinaryMask, side: usize) -> Result<BinaryMask> {
    if side < 2 {
        return Err(Error::InvalidMask(format!("target side {side} < 2")));
    }
    let once = normalize_pass(mask, side)?;
    normalize_pass(&once, side)
}

fn normalize_pass(mask: &BinaryMask, side: usize) -> Result<BinaryMask> {
    let bb = mask
        .bounding_box()
        .ok_or_else(|| Error::EmptyMask(mask.source_id.clone()))?;
    let cropped = mask.crop(bb);
    let long = cropped.width.max(cropped.height);
    let scaled = |n: usize| -> usize {
        // round(n * side / long), at least one pixel
        ((2 * n * side + long) / (2 * long)).clamp(1, side)
    };
    let (w, h) = (scaled(cropped.width), scaled(cropped.height));
    let mut resized = resize_nearest(&cropped, w, h);
    if resized.foreground_count() == 0 {
        // thin shapes can slip between the sample points; keep the first
        // foreground pixel at its scaled position
        let first = cropped.pixels.iter().position(|&p| p == 1).expect("cropped to foreground");
        let (r, c) = (first / cropped.width, first % cropped.width);
        resized.pixels[(r * h / cropped.height) * w + c * w / cropped.width] = 1;
    }

    let (left, top) = ((side - w) / 2, (side - h) / 2);
    let mut pixels = vec![0u8; side * side];
    for r in 0..h {
        let dst = (top + r) * side + left;
        pixels[dst..dst + w].copy_from_slice(&resized.pixels[r * w..(r + 1) * w]);
    }
    Ok(BinaryMask {
        width: side,
        height: side,
        pixels,
        label: mask.label.clone(),
        source_id: mask.source_id.clone(),
    })
}

/// Returns `[original, rot90, rot180, rot270]` (counterclockwise).
pub fn augment_rotations(mask: &BinaryMask) -> Result<[BinaryMask; 4]> {
    if !mask.is_square() {
        return Err(Error::NonSquareInput {
            width: mask.width,
            height: mask.height,
        });
    }
    let r1 = mask.rot90();
    let r2 = r1.rot90();
    let r3 = r2.rot90();
    Ok([mask.clone(), r1, r2, r3])
}

/// Writes a mask as binary PGM (P5) with foreground at 255.
pub fn write_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.pixels.iter().map(|&p| p * 255));
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray_png(dir: &Path, name: &str, w: u32, h: u32, data: Vec<u8>) -> std::path::PathBuf {
        let path = dir.join(name);
        image::GrayImage::from_raw(w, h, data).unwrap().save(&path).unwrap();
        path
    }

    #[test]
    fn load_thresholds_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = gray_png(dir.path(), "a.png", 2, 2, vec![255, 0, 255, 255]);
        let m = load_mask(&p, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(m.pixels(), &[1, 0, 1, 1]);
        assert_eq!((m.width(), m.height()), (2, 2));
    }

    #[test]
    fn load_threshold_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let p = gray_png(dir.path(), "b.png", 2, 1, vec![127, 128]);
        let m = load_mask(&p, 128).unwrap();
        assert_eq!(m.pixels(), &[0, 1]);
    }

    #[test]
    fn load_empty_mask_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = gray_png(dir.path(), "c.png", 1, 1, vec![0]);
        assert!(matches!(load_mask(&p, 128), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn load_ascii_and_binary_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let ascii = dir.path().join("a.pgm");
        std::fs::write(&ascii, "P2\n3 1\n255\n0 200 255\n").unwrap();
        assert_eq!(load_mask(&ascii, 128).unwrap().pixels(), &[0, 1, 1]);

        let m = BinaryMask::from_rows(&[&[1, 0], &[0, 1]]).unwrap();
        let bin = dir.path().join("b.pgm");
        write_pgm(&m, &bin).unwrap();
        assert_eq!(load_mask(&bin, 128).unwrap().pixels(), m.pixels());
    }

    #[test]
    fn unreadable_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.png");
        std::fs::write(&p, b"not an image").unwrap();
        assert!(matches!(load_mask(&p, 128), Err(Error::UnreadableImage { .. })));
        assert!(matches!(
            load_mask(dir.path().join("missing.png"), 128),
            Err(Error::UnreadableImage { .. })
        ));
    }

    #[test]
    fn rejects_non_binary_pixels() {
        assert!(BinaryMask::new(2, 1, vec![0, 2]).is_err());
        assert!(BinaryMask::new(2, 2, vec![0, 1]).is_err());
    }

    fn full_frame_noise(side: usize, seed: u64) -> BinaryMask {
        let mut state = seed;
        let mut px = vec![0u8; side * side];
        for p in px.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *p = ((state >> 33) & 1) as u8;
        }
        // pin the corners so the bounding box is the whole frame
        for i in [0, side - 1, side * (side - 1), side * side - 1] {
            px[i] = 1;
        }
        BinaryMask::new(side, side, px).unwrap()
    }

    #[test]
    fn normalize_full_frame_is_identity() {
        let m = full_frame_noise(125, 12345);
        assert_eq!(normalize_mask(&m, 125).unwrap(), m);
    }

    #[test]
    fn normalize_downsamples_two_to_one() {
        let small = full_frame_noise(125, 7);
        let mut big = vec![0u8; 250 * 250];
        for r in 0..250 {
            for c in 0..250 {
                big[r * 250 + c] = small.get(r / 2, c / 2);
            }
        }
        let big = BinaryMask::new(250, 250, big).unwrap();
        let small_n = normalize_mask(&small, 125).unwrap();
        let big_n = normalize_mask(&big, 125).unwrap();
        assert_eq!(big_n.pixels(), small_n.pixels());
    }

    #[test]
    fn normalize_pads_shorter_axis_symmetrically() {
        // 100 rows by 60 columns of foreground inside a larger frame
        let (w, h) = (90, 130);
        let mut px = vec![0u8; w * h];
        for r in 10..110 {
            for c in 20..80 {
                px[r * w + c] = 1;
            }
        }
        let m = BinaryMask::new(w, h, px).unwrap();
        let n = normalize_mask(&m, 125).unwrap();
        assert_eq!((n.width(), n.height()), (125, 125));
        let bb = n.bounding_box().unwrap();
        // 20 padding columns of 100 scale to 25 of 125 on each side
        assert_eq!((bb.col_min, bb.col_max), (25, 99));
        assert_eq!((bb.row_min, bb.row_max), (0, 124));
        assert_eq!(n.foreground_count(), 75 * 125);
    }

    #[test]
    fn rotation_examples() {
        let m = BinaryMask::from_rows(&[&[1, 0], &[0, 0]]).unwrap();
        let [_, r1, _, _] = augment_rotations(&m).unwrap();
        assert_eq!(r1, BinaryMask::from_rows(&[&[0, 0], &[1, 0]]).unwrap());

        let ones = BinaryMask::new(3, 3, vec![1; 9]).unwrap();
        for r in augment_rotations(&ones).unwrap() {
            assert_eq!(r, ones);
        }

        let rect = BinaryMask::new(3, 2, vec![1; 6]).unwrap();
        assert!(matches!(
            augment_rotations(&rect),
            Err(Error::NonSquareInput { width: 3, height: 2 })
        ));
    }

    fn arb_mask(max: usize) -> impl Strategy<Value = BinaryMask> {
        (1..=max, 1..=max)
            .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=1, w * h)))
            .prop_filter_map("non-empty", |(w, h, mut px)| {
                if px.iter().all(|&p| p == 0) {
                    px[0] = 1;
                }
                BinaryMask::new(w, h, px).ok()
            })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_binary(m in arb_mask(40), side in 2usize..64) {
            let once = normalize_mask(&m, side).unwrap();
            prop_assert_eq!((once.width(), once.height()), (side, side));
            prop_assert!(once.pixels().iter().all(|&p| p <= 1));
            prop_assert!(once.foreground_count() > 0);
            let twice = normalize_mask(&once, side).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn normalize_is_translation_invariant(m in arb_mask(20), dx in 0usize..6, dy in 0usize..6) {
            let (w, h) = (m.width() + 6, m.height() + 6);
            let mut px = vec![0u8; w * h];
            for r in 0..m.height() {
                for c in 0..m.width() {
                    px[(r + dy) * w + c + dx] = m.get(r, c);
                }
            }
            let shifted = BinaryMask::new(w, h, px).unwrap();
            prop_assert_eq!(normalize_mask(&m, 32).unwrap(), normalize_mask(&shifted, 32).unwrap());
        }

        #[test]
        fn rotations_form_cyclic_group(m in arb_mask(12)) {
            let side = m.width().max(m.height());
            let sq = normalize_mask(&m, side.max(2)).unwrap();
            let orbit = augment_rotations(&sq).unwrap();
            prop_assert_eq!(&orbit[3].rot90(), &sq);
            for r in &orbit {
                for rr in augment_rotations(r).unwrap() {
                    prop_assert!(orbit.contains(&rr));
                }
            }
        }
    }
}
