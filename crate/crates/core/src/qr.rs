//! Column-pivoted Householder QR.
//!
//! At step `j` the remaining column with the largest residual norm (rows
//! `j..`) is swapped into position `j`; ties go to the lowest original
//! column index. Residual norms are recomputed from scratch at every step
//! rather than downdated, so the pivot sequence is a deterministic function
//! of the input bits.

/// Factorization `A P = Q R` of a `rows × cols` matrix.
#[derive(Debug, Clone)]
pub struct ColumnPivotedQr {
    rows: usize,
    /// Column permutation: position `j` of `A P` holds column `pivots[j]` of `A`.
    pub pivots: Vec<usize>,
    /// Columns of `R` in pivoted order, each of length `rows`.
    r_cols: Vec<Vec<f64>>,
    /// Householder vectors `v_j` (unit norm, zero above row `j`) and whether
    /// each reflection was applied.
    reflectors: Vec<Option<Vec<f64>>>,
}

impl ColumnPivotedQr {
    /// Factorizes `columns`, a column-major matrix given as a slice of
    /// equal-length columns.
    pub fn new(mut columns: Vec<Vec<f64>>) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        let cols = columns.len();
        let mut pivots: Vec<usize> = (0..cols).collect();
        let steps = rows.min(cols);
        let mut reflectors = Vec::with_capacity(steps);

        for j in 0..steps {
            let mut best = j;
            let mut best_norm = -1.0;
            for (k, col) in columns.iter().enumerate().skip(j) {
                let norm: f64 = col[j..].iter().map(|x| x * x).sum();
                if norm > best_norm || (norm == best_norm && pivots[k] < pivots[best]) {
                    best = k;
                    best_norm = norm;
                }
            }
            columns.swap(j, best);
            pivots.swap(j, best);

            let x = &columns[j][j..];
            let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if alpha == 0.0 {
                reflectors.push(None);
                continue;
            }
            // v = x + sign(x0)·|x|·e0, normalized
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut v = vec![0.0; rows];
            v[j..].copy_from_slice(x);
            v[j] += sign * alpha;
            let vnorm = v[j..].iter().map(|t| t * t).sum::<f64>().sqrt();
            v[j..].iter_mut().for_each(|t| *t /= vnorm);

            for col in columns.iter_mut().skip(j) {
                let dot: f64 = v[j..].iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
                for (c, a) in col[j..].iter_mut().zip(&v[j..]) {
                    *c -= 2.0 * dot * a;
                }
            }
            // exact zeros below the diagonal of the pivot column
            columns[j][j + 1..].iter_mut().for_each(|t| *t = 0.0);
            reflectors.push(Some(v));
        }

        Self {
            rows,
            pivots,
            r_cols: columns,
            reflectors,
        }
    }

    /// Builds from a row-major `rows × cols` matrix.
    pub fn from_row_major(data: &[f64], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        let columns = (0..cols)
            .map(|c| (0..rows).map(|r| data[r * cols + c]).collect())
            .collect();
        Self::new(columns)
    }

    /// The first `k` pivot columns.
    pub fn leading_pivots(&self, k: usize) -> &[usize] {
        &self.pivots[..k.min(self.pivots.len())]
    }

    /// Diagonal of `R`.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.r_cols.len()))
            .map(|j| self.r_cols[j][j])
            .collect()
    }

    /// `R` column `j` (pivoted order).
    pub fn r_column(&self, j: usize) -> &[f64] {
        &self.r_cols[j]
    }

    /// Applies `Q` to a vector of length `rows`.
    pub fn apply_q(&self, x: &mut [f64]) {
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            if let Some(v) = v {
                let dot: f64 = v[j..].iter().zip(&x[j..]).map(|(a, b)| a * b).sum();
                for (t, a) in x[j..].iter_mut().zip(&v[j..]) {
                    *t -= 2.0 * dot * a;
                }
            }
        }
    }
}
