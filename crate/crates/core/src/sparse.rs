//! Compressed-row sparse operators with SMVP accounting.

use crate::diagnostics::{Category, CostLedger};
use crate::{Error, Result};

/// Structural tag carried by an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Skew,
    Diagonal,
}

/// A sparse matrix in compressed row layout.
///
/// Every call to [`SparseOperator::apply`] records exactly one SMVP.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetry: Symmetry,
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets. Duplicate
    /// positions are summed and explicit zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::InvalidParameter(format!(
                "triplet ({r}, {c}) outside {rows}x{cols} operator"
            )));
        }
        if symmetry == Symmetry::Diagonal && triplets.iter().any(|&(r, c, _)| r != c) {
            return Err(Error::InvalidParameter(
                "diagonal operator with off-diagonal entry".into(),
            ));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            symmetry,
        })
    }

    /// A square diagonal operator.
    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: entries.to_vec(),
            symmetry: Symmetry::Diagonal,
        }
    }

    /// Builds an operator from a dense row-major matrix, dropping zeros.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64], symmetry: Symmetry) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
                context: "dense matrix data",
            });
        }
        let triplets = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = data[r * cols + c];
                (v != 0.0).then_some((r, c, v))
            })
            .collect();
        Self::from_triplets(rows, cols, triplets, symmetry)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Iterates `(row, col, value)` over stored entries in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// Stored value at `(r, c)`, zero if absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Diagonal entries (zero where absent).
    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = self · x`, counted as one SMVP under `category`.
    pub fn apply(&self, x: &[f64], y: &mut [f64], ledger: &mut CostLedger, category: Category) {
        ledger.record(category, 1);
        self.apply_uncounted(x, y);
    }

    pub(crate) fn apply_uncounted(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "operand length");
        assert_eq!(y.len(), self.rows, "result length");
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.entries().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, triplets, self.symmetry)
            .expect("transpose of a valid operator is valid")
    }

    /// Sparse product `self · rhs`.
    pub fn compose(&self, rhs: &SparseOperator) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: rhs.rows,
                context: "operator product",
            });
        }
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, rhs.cols, triplets, Symmetry::None)
    }

    /// Keeps only entries for which `keep(row, col)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let triplets = self.entries().filter(|&(r, c, _)| keep(r, c)).collect();
        Self::from_triplets(self.rows, self.cols, triplets, self.symmetry).expect("subset of a valid operator is valid")
    }

    /// Largest absolute row sum (the induced infinity norm).
    pub fn max_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dense row-major copy; intended for small test systems.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for (r, c, v) in self.entries() {
            out[r * self.cols + c] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let op = SparseOperator::from_triplets(
            2,
            2,
            vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)],
            Symmetry::None,
        )
        .unwrap();
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(0, 1), 3.0);
        assert_eq!(op.get(1, 0), 0.0);
    }

    #[test]
    fn diagonal_tag_rejects_off_diagonal() {
        let err = SparseOperator::from_triplets(2, 2, vec![(0, 1, 1.0)], Symmetry::Diagonal);
        assert!(err.is_err());
    }

    #[test]
    fn apply_counts_one_smvp() {
        let op = SparseOperator::from_dense(2, 2, &[0.0, -1.0, 1.0, 0.0], Symmetry::Skew).unwrap();
        let mut ledger = CostLedger::new();
        let mut y = vec![0.0; 2];
        op.apply(&[1.0, 2.0], &mut y, &mut ledger, Category::ExpmPoly);
        assert_eq!(y, vec![-2.0, 1.0]);
        assert_eq!(ledger.get(Category::ExpmPoly), 1);
        assert_eq!(ledger.total(), 1);
    }

    #[test]
    fn compose_and_transpose() {
        let a = SparseOperator::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0], Symmetry::None).unwrap();
        let at = a.transpose();
        assert_eq!(at.rows(), 3);
        assert_eq!(at.get(2, 0), 2.0);
        let aat = a.compose(&at).unwrap();
        assert_eq!(aat.to_dense(), vec![5.0, 0.0, 0.0, 9.0]);
    }
}
