//! Small dense matrices of truncated series.

use crate::coeff::{Ctx, Rat};
use crate::error::{Error, Result};
use crate::frobenius::FrobeniusLift;
use crate::series::{Bound, Coeff, Series};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<C: Coeff> {
    rows: usize,
    cols: usize,
    entries: Vec<Series<C>>,
}

impl<C: Coeff> Matrix<C> {
    pub fn new(rows: usize, cols: usize, entries: Vec<Series<C>>) -> Result<Matrix<C>> {
        if entries.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix shape {rows}x{cols} does not match {} entries",
                entries.len()
            )));
        }
        Ok(Matrix { rows, cols, entries })
    }

    pub fn zero(ctx: Ctx, rows: usize, cols: usize) -> Matrix<C> {
        Matrix {
            rows,
            cols,
            entries: vec![Series::zero(ctx); rows * cols],
        }
    }

    pub fn identity(ctx: Ctx, n: usize) -> Matrix<C> {
        let mut m = Self::zero(ctx, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Series::one(ctx);
        }
        m
    }

    pub fn diagonal(ctx: Ctx, diag: Vec<Series<C>>) -> Matrix<C> {
        let n = diag.len();
        let mut m = Self::zero(ctx, n, n);
        for (i, d) in diag.into_iter().enumerate() {
            *m.at_mut(i, i) = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ctx(&self) -> Ctx {
        self.entries[0].ctx()
    }

    pub fn at(&self, i: usize, j: usize) -> &Series<C> {
        &self.entries[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Series<C> {
        &mut self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Series<C>] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&Series<C>) -> Series<C>) -> Matrix<C> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(&Series<C>) -> Result<Series<C>>) -> Result<Matrix<C>> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            entries.push(f(e)?);
        }
        Ok(Matrix { rows: self.rows, cols: self.cols, entries })
    }

    pub fn transpose(&self) -> Matrix<C> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.at(i, j).clone());
            }
        }
        Matrix { rows: self.cols, cols: self.rows, entries }
    }

    pub fn add(&self, other: &Matrix<C>) -> Result<Matrix<C>> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidInput("matrix shape mismatch in add".into()));
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        for (a, b) in self.entries.iter().zip(&other.entries) {
            entries.push(a.add(b)?);
        }
        Ok(Matrix { rows: self.rows, cols: self.cols, entries })
    }

    pub fn sub(&self, other: &Matrix<C>) -> Result<Matrix<C>> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Matrix<C> {
        self.map(|e| e.neg())
    }

    pub fn mul(&self, other: &Matrix<C>) -> Result<Matrix<C>> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput("matrix shape mismatch in mul".into()));
        }
        let ctx = self.ctx();
        let mut out = Matrix::zero(ctx, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Series::zero(ctx);
                for k in 0..self.cols {
                    acc = acc.add(&self.at(i, k).mul(other.at(k, j)))?;
                }
                *out.at_mut(i, j) = acc;
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Series<C>]) -> Result<Vec<Series<C>>> {
        if self.cols != v.len() {
            return Err(Error::InvalidInput("vector length mismatch".into()));
        }
        let ctx = self.ctx();
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = Series::zero(ctx);
            for k in 0..self.cols {
                acc = acc.add(&self.at(i, k).mul(&v[k]))?;
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Series<C>) -> Matrix<C> {
        self.map(|e| e.mul(c))
    }

    /// Apply a Frobenius lift entrywise.
    pub fn apply_lift(&self, lift: &FrobeniusLift) -> Matrix<C> {
        self.map(|e| lift.apply(e))
    }

    /// Determinant by cofactor expansion with memoisation over column
    /// subsets (ranks here are tiny).
    pub fn det(&self) -> Result<Series<C>> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput("determinant of non-square matrix".into()));
        }
        let n = self.rows;
        let ctx = self.ctx();
        if n > 16 {
            return Err(Error::InvalidInput("determinant rank cap exceeded".into()));
        }
        // minors[mask] = det of rows [n - popcount(mask) .. n] on columns in mask
        let mut memo: alloc::collections::BTreeMap<u32, Series<C>> = alloc::collections::BTreeMap::new();
        self.det_minor((1u32 << n) - 1, &mut memo, ctx)
    }

    fn det_minor(
        &self,
        mask: u32,
        memo: &mut alloc::collections::BTreeMap<u32, Series<C>>,
        ctx: Ctx,
    ) -> Result<Series<C>> {
        if mask == 0 {
            return Ok(Series::one(ctx));
        }
        if let Some(hit) = memo.get(&mask) {
            return Ok(hit.clone());
        }
        let n = self.rows;
        let k = mask.count_ones() as usize;
        let row = n - k;
        let mut acc = Series::zero(ctx);
        let mut sign_positive = true;
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let sub = self.det_minor(mask & !(1 << j), memo, ctx)?;
            let term = self.at(row, j).mul(&sub);
            acc = if sign_positive { acc.add(&term)? } else { acc.sub(&term)? };
            sign_positive = !sign_positive;
        }
        memo.insert(mask, acc.clone());
        Ok(acc)
    }

    /// Adjugate matrix (transpose of cofactors); `self * adjugate = det * I`.
    pub fn adjugate(&self) -> Result<Matrix<C>> {
        let n = self.rows;
        if n != self.cols {
            return Err(Error::InvalidInput("adjugate of non-square matrix".into()));
        }
        let ctx = self.ctx();
        if n == 1 {
            return Ok(Matrix::identity(ctx, 1));
        }
        let mut out = Matrix::zero(ctx, n, n);
        for i in 0..n {
            for j in 0..n {
                let minor = self.delete_row_col(i, j);
                let d = minor.det()?;
                let d = if (i + j) % 2 == 0 { d } else { d.neg() };
                *out.at_mut(j, i) = d;
            }
        }
        Ok(out)
    }

    fn delete_row_col(&self, row: usize, col: usize) -> Matrix<C> {
        let mut entries = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            for j in 0..self.cols {
                if j == col {
                    continue;
                }
                entries.push(self.at(i, j).clone());
            }
        }
        Matrix { rows: self.rows - 1, cols: self.cols - 1, entries }
    }

    /// Inverse given a routine for inverting the determinant.
    pub fn inverse_with(
        &self,
        invert_det: impl Fn(&Series<C>) -> Result<Series<C>>,
    ) -> Result<Matrix<C>> {
        let det = self.det()?;
        let det_inv = invert_det(&det)?;
        let adj = self.adjugate()?;
        Ok(adj.map(|e| e.mul(&det_inv)))
    }

    /// Lower bound on valuations across all entries (the matrix `w`).
    pub fn val_floor(&self) -> Bound {
        self.entries
            .iter()
            .fold(Bound::Exact, |acc, e| acc.meet(e.val_floor()))
    }

    /// Exact Gauss valuation of the matrix: min over entries, every entry
    /// certified.
    pub fn gauss_w_exact(&self) -> Result<crate::coeff::Val> {
        let mut out = crate::coeff::Val::Infinite;
        for e in &self.entries {
            out = out.min(e.gauss_w_exact()?);
        }
        Ok(out)
    }

    /// Are all entries certified negligible at the target valuation?
    pub fn negligible(&self, target: i64) -> bool {
        self.entries.iter().all(|e| e.negligible(target))
    }

    /// Compress every entry (drop stored noise at the fuzz level).
    pub fn compress(&self) -> Matrix<C> {
        self.map(|e| e.compress())
    }

    /// Kronecker product (column convention compatible).
    pub fn kronecker(&self, other: &Matrix<C>) -> Matrix<C> {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let ctx = self.ctx();
        let mut out = Matrix::zero(ctx, rows, cols);
        for i1 in 0..self.rows {
            for j1 in 0..self.cols {
                for i2 in 0..other.rows {
                    for j2 in 0..other.cols {
                        let i = i1 * other.rows + i2;
                        let j = j1 * other.cols + j2;
                        *out.at_mut(i, j) = self.at(i1, j1).mul(other.at(i2, j2));
                    }
                }
            }
        }
        out
    }
}

impl Matrix<Rat> {
    /// Exact radius valuation of the matrix: min over entries.
    pub fn wr_exact(&self, r: &Rat) -> Result<Rat> {
        let mut out: Option<Rat> = None;
        for e in &self.entries {
            match e.wr(r) {
                crate::series::WrQuery::Exact(crate::series::QVal::Finite(v)) => {
                    out = Some(match out {
                        None => v,
                        Some(o) => {
                            if v < o {
                                v
                            } else {
                                o
                            }
                        }
                    });
                }
                crate::series::WrQuery::Exact(crate::series::QVal::Infinite) => {}
                _ => {
                    return Err(Error::PrecisionInsufficient(
                        "matrix radius valuation indeterminate".into(),
                    ))
                }
            }
        }
        out.ok_or_else(|| Error::ZeroInput)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::int;

    fn ctx2() -> Ctx {
        Ctx::standard(2).unwrap()
    }

    fn m2(entries: [[(i64, i64); 2]; 2]) -> Matrix<Rat> {
        let ctx = ctx2();
        let series: Vec<Series<Rat>> = entries
            .iter()
            .flatten()
            .map(|(k, n)| Series::from_i64_terms(ctx, &[(*k, *n, 1)]).unwrap())
            .collect();
        Matrix::new(2, 2, series).unwrap()
    }

    #[test]
    fn det_2x2() {
        // [[2, T],[1, T]] -> det = 2T - T = T
        let m = m2([[(0, 2), (1, 1)], [(0, 1), (1, 1)]]);
        let d = m.det().unwrap();
        assert_eq!(d.coeff(1), int(1));
        assert_eq!(d.support(), alloc::vec![1]);
    }

    #[test]
    fn adjugate_identity() {
        let m = m2([[(0, 2), (1, 1)], [(0, 1), (1, 1)]]);
        let adj = m.adjugate().unwrap();
        let prod = m.mul(&adj).unwrap();
        let det = m.det().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { det.clone() } else { Series::zero(ctx2()) };
                assert!(prod.at(i, j).sub(&expect).unwrap().is_certified_zero());
            }
        }
    }

    #[test]
    fn det_3x3_oracle() {
        // integer matrix with known determinant -18... use
        // [[1,2,3],[4,5,6],[7,8,10]] -> det = -3
        let ctx = ctx2();
        let vals = [1i64, 2, 3, 4, 5, 6, 7, 8, 10];
        let entries: Vec<Series<Rat>> = vals
            .iter()
            .map(|n| Series::from_i64_terms(ctx, &[(0, *n, 1)]).unwrap())
            .collect();
        let m = Matrix::new(3, 3, entries).unwrap();
        assert_eq!(m.det().unwrap().coeff(0), int(-3));
    }

    #[test]
    fn kronecker_shape() {
        let a = m2([[(0, 1), (0, 0)], [(0, 0), (0, 1)]]);
        let b = m2([[(0, 2), (0, 0)], [(0, 0), (0, 3)]]);
        let k = a.kronecker(&b);
        assert_eq!(k.rows(), 4);
        assert_eq!(k.at(0, 0).coeff(0), int(2));
        assert_eq!(k.at(3, 3).coeff(0), int(3));
    }
}
