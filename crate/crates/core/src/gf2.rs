//! Dense linear algebra over GF(2).
//!
//! Vectors and matrix rows are packed into 64-bit words so that row
//! additions cost `O(N / 64)`. Bit `i` of a row lives in word `i / 64`
//! at bit position `i % 64`.

use std::fmt;

use crate::error::Error;

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
fn xor_words(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

#[inline]
fn weight_words(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

#[inline]
fn rightmost_in(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * WORD_BITS + (WORD_BITS - 1 - w.leading_zeros() as usize))
}

#[inline]
fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
}

/// A binary row vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Builds a vector from `0`/`1` bytes; any non-zero byte counts as one.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        get_bit(&self.words, i)
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.get(i);
        self.set(i, !b);
    }

    pub fn weight(&self) -> usize {
        weight_words(&self.words)
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        xor_words(&mut self.words, &other.words);
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot product");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum::<u32>()
            & 1
            == 1
    }

    /// Number of positions where `self` and `other` differ.
    pub fn distance(&self, other: &BitVector) -> usize {
        assert_eq!(self.len, other.len, "length mismatch in distance");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

/// A dense binary matrix with bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from rows of `0`/`1` bytes. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, Error> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &b) in row.iter().enumerate() {
                if b != 0 {
                    m.set(i, j, true);
                }
            }
        }
        Ok(m)
    }

    pub fn from_row_vectors(cols: usize, rows: &[BitVector]) -> Result<Self, Error> {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            m.row_mut(i).copy_from_slice(r.words());
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        get_bit(self.row(r), c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        let mask = 1u64 << (c % WORD_BITS);
        let w = &mut self.row_mut(r)[c / WORD_BITS];
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub(crate) fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_vector(&self, r: usize) -> BitVector {
        BitVector {
            len: self.cols,
            words: self.row(r).to_vec(),
        }
    }

    pub fn row_weight(&self, r: usize) -> usize {
        weight_words(self.row(r))
    }

    /// Column index of the last one in row `r`, if the row is non-zero.
    pub fn rightmost_one(&self, r: usize) -> Option<usize> {
        rightmost_in(self.row(r))
    }

    pub fn row_ones(&self, r: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(r, c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|w| *w == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == Self::identity(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Matrix product `self · other` over GF(2).
    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix, Error> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (wi, &word) in self.row(i).iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let k = wi * WORD_BITS + w.trailing_zeros() as usize;
                    w &= w - 1;
                    let (dst, src) = (i * out.stride, k * other.stride);
                    for t in 0..out.stride {
                        out.data[dst + t] ^= other.data[src + t];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Column product `self · xᵀ`, returned as a vector of length `rows`.
    pub fn mul_vec(&self, x: &BitVector) -> Result<BitVector, Error> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            let parity = self
                .row(r)
                .iter()
                .zip(x.words())
                .map(|(a, b)| (a & b).count_ones())
                .sum::<u32>();
            if parity & 1 == 1 {
                out.set(r, true);
            }
        }
        Ok(out)
    }

    /// Row-vector product `x · self`, returned as a vector of length `cols`.
    pub fn left_mul(&self, x: &BitVector) -> Result<BitVector, Error> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against matrix with {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = BitVector::zeros(self.cols);
        for r in x.iter_ones() {
            xor_words(&mut out.words, self.row(r));
        }
        Ok(out)
    }

    /// Kronecker product.
    pub fn kron(&self, other: &BitMatrix) -> BitMatrix {
        let (br, bc) = (other.rows, other.cols);
        let mut out = Self::zeros(self.rows * br, self.cols * bc);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                for k in 0..br {
                    for l in 0..bc {
                        if other.get(k, l) {
                            out.set(i * br + k, j * bc + l, true);
                        }
                    }
                }
            }
        }
        out
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &BitMatrix) -> Result<BitMatrix, Error> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} columns on {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            stride: self.stride,
            data,
        })
    }

    /// Inverse by Gauss–Jordan elimination.
    pub fn inverse(&self) -> Result<BitMatrix, Error> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot invert a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| a.get(r, col)).ok_or(Error::Singular)?;
            a.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            for r in 0..n {
                if r != col && a.get(r, col) {
                    a.xor_row_into(col, r);
                    inv.xor_row_into(col, r);
                }
            }
        }
        Ok(inv)
    }

    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(pivot) = (rank..self.rows).find(|&r| a.get(r, col)) else {
                continue;
            };
            a.swap_rows(rank, pivot);
            for r in rank + 1..self.rows {
                if a.get(r, col) {
                    a.xor_row_into(rank, r);
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Reduced echelon form pivoting on the rightmost column first.
    ///
    /// Returns the non-zero reduced rows sorted by ascending pivot, and the
    /// pivot columns. Every pivot column is the rightmost one of its row and
    /// is zero in all other rows.
    fn rref_rightmost(&self) -> (BitMatrix, Vec<usize>) {
        let mut a = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for col in (0..self.cols).rev() {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| a.get(i, col)) else {
                continue;
            };
            a.swap_rows(r, p);
            for i in 0..self.rows {
                if i != r && a.get(i, col) {
                    a.xor_row_into(r, i);
                }
            }
            pivots.push(col);
            r += 1;
        }
        let mut out = Self::zeros(r, self.cols);
        for (dst, src) in (0..r).rev().enumerate() {
            out.row_mut(dst).copy_from_slice(a.row(src));
        }
        pivots.reverse();
        (out, pivots)
    }

    /// Row-reduces a full-rank constraint matrix into rightmost-one canonical form.
    ///
    /// Every output row has a distinct rightmost one, rows are sorted by that
    /// column, and no row's weight can be lowered by adding a single other row
    /// with a smaller rightmost one.
    pub fn canonicalize_rightmost(&self) -> Result<BitMatrix, Error> {
        let (mut m, _) = self.rref_rightmost();
        if m.rows != self.rows {
            return Err(Error::RankDeficient {
                rank: m.rows,
                rows: self.rows,
            });
        }
        // Greedy sweeps until no single row addition lowers a weight. Rows are
        // sorted by rightmost one, so only j < i keeps the rightmost ones distinct.
        let mut scratch = vec![0u64; m.stride];
        loop {
            let mut changed = false;
            for i in 0..m.rows {
                for j in 0..i {
                    scratch.copy_from_slice(m.row(i));
                    xor_words(&mut scratch, m.row(j));
                    if weight_words(&scratch) < m.row_weight(i) {
                        m.row_mut(i).copy_from_slice(&scratch);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok(m)
    }

    /// Basis `W` of the null space, one vector per row, so that `self · Wᵀ = 0`.
    pub fn nullspace_basis(&self) -> Result<BitMatrix, Error> {
        let (reduced, pivots) = self.rref_rightmost();
        if reduced.rows != self.rows {
            return Err(Error::RankDeficient {
                rank: reduced.rows,
                rows: self.rows,
            });
        }
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let mut w = Self::zeros(free.len(), self.cols);
        for (i, &f) in free.iter().enumerate() {
            w.set(i, f, true);
            for (r, &p) in pivots.iter().enumerate() {
                if reduced.get(r, f) {
                    w.set(i, p, true);
                }
            }
        }
        Ok(w)
    }

    /// Parses the text format: one row per line, `0`/`1` characters, no separators.
    pub fn parse_text(text: &str) -> Result<BitMatrix, Error> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Parse(format!(
                        "line {}: unexpected character {other:?}",
                        lineno + 1
                    ))),
                })
                .collect::<Result<Vec<u8>, Error>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.get(r, c) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for t in 0..self.stride {
            self.data.swap(a * self.stride + t, b * self.stride + t);
        }
    }

    /// `row[dst] ^= row[src]`
    fn xor_row_into(&mut self, src: usize, dst: usize) {
        for t in 0..self.stride {
            let s = self.data[src * self.stride + t];
            self.data[dst * self.stride + t] ^= s;
        }
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        f.write_str(&self.to_text())
    }
}
