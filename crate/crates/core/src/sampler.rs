//! Sparse sampling of persistence images.
//!
//! For every direction the training images are stacked as columns of a
//! `grid_side² × N` matrix. Its rank is truncated at the optimal hard
//! threshold for singular values (unknown-noise variant), and column-pivoted
//! QR on the transposed dominant left singular vectors picks one image pixel
//! per retained mode. Features are the image values at those pixels,
//! concatenated over directions.

use std::io::{Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};

use crate::binio::{Reader, Writer};
use crate::qr::ColumnPivotedQr;
use crate::vectorize::PersistenceImage;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"STSP";
const VERSION: u32 = 1;

/// `ω(β) ≈ 0.56β³ − 0.95β² + 1.82β + 1.43`, the multiplier of the median
/// singular value in the optimal hard threshold when the noise level is
/// unknown. `β` is the aspect ratio `min(m, n) / max(m, n)`.
pub fn hard_threshold_coefficient(beta: f64) -> f64 {
    0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43
}

fn median(sorted_desc: &[f64]) -> f64 {
    let n = sorted_desc.len();
    if n % 2 == 1 {
        sorted_desc[n / 2]
    } else {
        0.5 * (sorted_desc[n / 2 - 1] + sorted_desc[n / 2])
    }
}

/// Singular values above `ω(β)·median` for an `rows × cols` matrix, limited to
/// the numerical rank and clamped to at least 1.
pub fn threshold_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    if singular_values.is_empty() {
        return 1;
    }
    let beta = rows.min(cols) as f64 / rows.max(cols) as f64;
    let tau = hard_threshold_coefficient(beta) * median(singular_values);
    let above = singular_values.iter().filter(|&&s| s > tau).count();
    above.min(numerical_rank(singular_values, rows, cols)).max(1)
}

/// Count of singular values above `σ_max · max(m, n) · ε`.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let tol = smax * rows.max(cols) as f64 * f64::EPSILON;
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Thin SVD `X = U Σ Vᵀ` with singular values in descending order.
pub struct ThinSvd {
    pub u: Mat<f64>,
    pub singular_values: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn thin_svd(x: MatRef<'_, f64>) -> Result<ThinSvd> {
    let svd = x
        .thin_svd()
        .map_err(|e| Error::ShapeMismatch(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    Ok(ThinSvd {
        u: svd.U().to_owned(),
        singular_values: (0..s.nrows()).map(|i| s[i]).collect(),
        v: svd.V().to_owned(),
    })
}

/// Pixels chosen for one direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionSamples {
    /// Truncation rank `l_k`; equals `pivots.len()`.
    pub rank: usize,
    pub pivots: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseSampler {
    pub grid_side: usize,
    pub directions: Vec<DirectionSamples>,
}

/// Fits the samples of a single direction from its `grid_side² × N` stack.
pub fn fit_direction(direction: usize, stack: MatRef<'_, f64>) -> Result<DirectionSamples> {
    let (m, n) = (stack.nrows(), stack.ncols());
    if n < 2 {
        return Err(Error::ShapeMismatch(format!(
            "direction {direction}: need at least 2 training images, got {n}"
        )));
    }
    let all_zero = (0..n).all(|j| (0..m).all(|i| stack[(i, j)] == 0.0));
    if all_zero {
        return Err(Error::AllZeroStack(direction));
    }
    let svd = thin_svd(stack)?;
    let rank = threshold_rank(&svd.singular_values, m, n);

    // columns of U_lᵀ are the rows of U_l: one length-l vector per pixel
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..rank).map(|j| svd.u[(i, j)]).collect())
        .collect();
    let qr = ColumnPivotedQr::new(columns);
    let pivots = qr
        .leading_pivots(rank)
        .iter()
        .map(|&p| p as u32)
        .collect();
    Ok(DirectionSamples { rank, pivots })
}

/// Fits one [`DirectionSamples`] per stack. Directions are independent and
/// fitted in parallel.
pub fn fit_sampler(stacks: &[Mat<f64>], grid_side: usize) -> Result<SparseSampler> {
    use rayon::prelude::*;
    if let Some((k, s)) = stacks
        .iter()
        .enumerate()
        .find(|(_, s)| s.nrows() != grid_side * grid_side)
    {
        return Err(Error::ShapeMismatch(format!(
            "direction {k}: stack has {} rows, expected {}",
            s.nrows(),
            grid_side * grid_side
        )));
    }
    if stacks.windows(2).any(|w| w[0].ncols() != w[1].ncols()) {
        return Err(Error::ShapeMismatch("stacks differ in sample count".into()));
    }
    let directions = stacks
        .par_iter()
        .enumerate()
        .map(|(k, s)| fit_direction(k, s.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseSampler {
        grid_side,
        directions,
    })
}

/// Stacks images as columns: `images[j].values` becomes column `j`.
pub fn image_stack<'a>(images: impl ExactSizeIterator<Item = &'a PersistenceImage>) -> Mat<f64> {
    let images: Vec<_> = images.collect();
    let m = images.first().map_or(0, |pi| pi.values.len());
    Mat::from_fn(m, images.len(), |i, j| images[j].values[i])
}

impl SparseSampler {
    pub fn direction_count(&self) -> usize {
        self.directions.len()
    }

    /// Length of the concatenated feature vector, `Σ l_k`.
    pub fn feature_len(&self) -> usize {
        self.directions.iter().map(|d| d.pivots.len()).sum()
    }

    /// Gathers each direction's image at its pivot pixels, in direction order.
    pub fn apply(&self, images: &[PersistenceImage]) -> Result<Vec<f64>> {
        if images.len() != self.directions.len() {
            return Err(Error::WrongDirectionCount {
                expected: self.directions.len(),
                actual: images.len(),
            });
        }
        let mut out = Vec::with_capacity(self.feature_len());
        for (samples, pi) in self.directions.iter().zip(images) {
            if pi.grid_side != self.grid_side || pi.values.len() != self.grid_side * self.grid_side {
                return Err(Error::ShapeMismatch(format!(
                    "image grid {} does not match sampler grid {}",
                    pi.grid_side, self.grid_side
                )));
            }
            out.extend(samples.pivots.iter().map(|&p| pi.values[p as usize]));
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = Writer::new(w);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.usize(self.directions.len())?;
        w.usize(self.grid_side)?;
        for d in &self.directions {
            w.usize(d.pivots.len())?;
            for &p in &d.pivots {
                w.u32(p)?;
            }
        }
        w.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader::new(r, "sampler");
        Self::read_body(&mut r).and_then(|s| r.end().map(|_| s))
    }

    pub(crate) fn read_body<R: Read>(r: &mut Reader<R>) -> Result<Self> {
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let d = r.count(1 << 16)?;
        let grid_side = r.count(1 << 15)?;
        let pixels = grid_side * grid_side;
        let mut directions = Vec::with_capacity(d);
        for _ in 0..d {
            let l = r.count(pixels)?;
            let pivots = (0..l).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            if pivots.iter().any(|&p| p as usize >= pixels) {
                return Err(r.err("pivot index outside the image grid"));
            }
            directions.push(DirectionSamples { rank: l, pivots });
        }
        Ok(Self {
            grid_side,
            directions,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
