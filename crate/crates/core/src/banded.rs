//! Banded complex storage and a partially pivoted banded LU factorization.

use std::io::{self, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square matrix whose entries vanish for `|i − j| > half_bandwidth`.
///
/// Row `i` keeps columns `i − b ..= i + b` contiguously, so slot `j − i + b`
/// holds entry `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedComplexMatrix {
    size: usize,
    half_bandwidth: usize,
    data: Vec<Complex64>,
}

impl BandedComplexMatrix {
    pub fn zeros(size: usize, half_bandwidth: usize) -> Self {
        Self {
            size,
            half_bandwidth,
            data: vec![ZERO; size * (2 * half_bandwidth + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    fn width(&self) -> usize {
        2 * self.half_bandwidth + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let b = self.half_bandwidth;
        if i >= self.size || j >= self.size || j + b < i || j > i + b {
            None
        } else {
            Some(i * self.width() + (j + b - i))
        }
    }

    /// Entry `(i, j)`; exactly zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.slot(i, j).map_or(ZERO, |s| self.data[s])
    }

    /// Sets an in-band entry. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) lies outside the band"));
        self.data[s] = v;
    }

    /// Column range `[lo, hi)` that row `i` may populate.
    pub fn row_columns(&self, i: usize) -> (usize, usize) {
        let b = self.half_bandwidth;
        (i.saturating_sub(b), (i + b + 1).min(self.size))
    }

    pub(crate) fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, Complex64> {
        let w = self.width();
        self.data.chunks_mut(w)
    }

    pub fn row_sum(&self, i: usize) -> Complex64 {
        let (lo, hi) = self.row_columns(i);
        (lo..hi).map(|j| self.get(i, j)).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mat_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.size, "vector length must match matrix size");
        (0..self.size)
            .map(|i| {
                let (lo, hi) = self.row_columns(i);
                (lo..hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Writes `n,m,re,im` for every in-band entry. `index_shift` is
    /// subtracted from storage indices so rows can be labelled by node index.
    pub fn write_csv<W: Write>(&self, mut out: W, index_shift: i64) -> io::Result<()> {
        writeln!(out, "n,m,re,im")?;
        for i in 0..self.size {
            let (lo, hi) = self.row_columns(i);
            for j in lo..hi {
                let v = self.get(i, j);
                writeln!(
                    out,
                    "{},{},{:.16e},{:.16e}",
                    i as i64 - index_shift,
                    j as i64 - index_shift,
                    v.re,
                    v.im
                )?;
            }
        }
        Ok(())
    }
}

/// Relative pivot threshold below which a system is reported singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// LU factors of a banded matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row interchanges widen the upper factor to `kl + ku` super-diagonals, so
/// row `i` stores columns `i − kl ..= i + kl + ku`. Multipliers stay in the
/// row where they were computed, and the forward solve replays the
/// interchanges one column at a time.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn width(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    /// Factors the principal submatrix of `a` with rows and columns
    /// `offset .. offset + n`, adding `shift[i]` to its diagonal.
    pub fn factor_submatrix(
        a: &BandedComplexMatrix,
        offset: usize,
        n: usize,
        shift: &[Complex64],
    ) -> Result<Self> {
        assert!(offset + n <= a.size());
        assert_eq!(shift.len(), n);
        let b = a.half_bandwidth();
        let mut lu = Self::empty(n, b, b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let hi = (i + b + 1).min(n);
            for j in lo..hi {
                let mut v = a.get(offset + i, offset + j);
                if i == j {
                    v += shift[i];
                }
                lu.set(i, j, v);
            }
        }
        lu.factorize(a.max_abs())?;
        Ok(lu)
    }

    /// Factors a tridiagonal matrix given by its three diagonals.
    pub fn factor_tridiagonal(
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
    ) -> Result<Self> {
        let n = diag.len();
        assert!(lower.len() + 1 == n.max(1) && upper.len() + 1 == n.max(1));
        let mut lu = Self::empty(n, 1, 1);
        let mut scale: f64 = 0.0;
        for i in 0..n {
            lu.set(i, i, diag[i]);
            scale = scale.max(diag[i].norm());
            if i + 1 < n {
                lu.set(i + 1, i, lower[i]);
                lu.set(i, i + 1, upper[i]);
                scale = scale.max(lower[i].norm()).max(upper[i].norm());
            }
        }
        lu.factorize(scale)?;
        Ok(lu)
    }

    fn empty(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![ZERO; n * Self::width(kl, ku)],
            pivots: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * Self::width(self.kl, self.ku) + (j + self.kl - i)
    }

    fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn factorize(&mut self, scale: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = Self::width(kl, ku);
        let threshold = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].norm();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best >= threshold) {
                return Err(Error::SingularSystem { row: k, pivot: best });
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            let inv = pivot.inv();
            let count = last_col - k;
            // pivot-row tail, columns k+1 ..= last_col
            let src_start = self.idx(k, k) + 1;
            for r in k + 1..=last_row {
                let lk = self.idx(r, k);
                let l = self.data[lk] * inv;
                self.data[lk] = l;
                if l == ZERO {
                    continue;
                }
                let dst_start = lk + 1;
                // rows are laid out consecutively, so the pivot row (k < r)
                // precedes row r in memory
                let (head, tail) = self.data.split_at_mut(r * w);
                let src = &head[src_start..src_start + count];
                let dst = &mut tail[dst_start - r * w..dst_start - r * w + count];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(x.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == ZERO {
                continue;
            }
            for r in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[r] -= self.data[self.idx(r, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let last = (k + kl + ku).min(n - 1);
            let row = self.idx(k, k);
            let mut acc = x[k];
            for (off, c) in (k + 1..=last).enumerate() {
                acc -= self.data[row + 1 + off] * x[c];
            }
            x[k] = acc / self.data[row];
        }
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
