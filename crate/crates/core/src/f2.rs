//! Dense bit-packed matrices over the two-element field.

use std::fmt;

use thiserror::Error;

const WORD: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum F2Error {
    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("row {row} has length {found}, expected {expected}")]
    RaggedRows { row: usize, found: usize, expected: usize },
    #[error("invalid entry {found:?} at row {row}, column {col}; only 0 and 1 are allowed")]
    InvalidEntry { row: usize, col: usize, found: String },
}

/// A `rows x cols` matrix over GF(2), stored row-major with 64 entries per word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct F2Matrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl F2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(WORD);
        F2Matrix {
            rows,
            cols,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, true);
        }
        m
    }

    /// The matrix with every entry equal to 1.
    pub fn all_ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, true);
            }
        }
        m
    }

    /// `I + sum_j e_{(j+1)j} + e_{1m}`: column `j` has ones in rows `j` and `j+1 (mod m)`.
    ///
    /// For `m = 1` the two contributions land on the same entry and cancel, giving the
    /// zero `1x1` matrix.
    pub fn cyclic_ladder(m: usize) -> Self {
        let mut a = Self::zeros(m, m);
        for j in 0..m {
            a.flip(j, j);
            a.flip((j + 1) % m, j);
        }
        a
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R], cols: usize) -> Result<Self, F2Error> {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(F2Error::RaggedRows { row: r, found: row.len(), expected: cols });
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(r, c, true),
                    other => {
                        return Err(F2Error::InvalidEntry { row: r, col: c, found: other.to_string() })
                    }
                }
            }
        }
        Ok(m)
    }

    /// Parses a text grid of `0`/`1` characters, one row per line. Blank lines are skipped.
    pub fn parse_grid(text: &str) -> Result<Self, F2Error> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        let mut m = Self::zeros(lines.len(), cols);
        for (r, line) in lines.iter().enumerate() {
            let n = line.chars().count();
            if n != cols {
                return Err(F2Error::RaggedRows { row: r, found: n, expected: cols });
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(r, c, true),
                    other => {
                        return Err(F2Error::InvalidEntry { row: r, col: c, found: other.to_string() })
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn to_grid(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.get(r, c) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        let w = self.data[r * self.words_per_row + c / WORD];
        (w >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        let w = &mut self.data[r * self.words_per_row + c / WORD];
        let bit = 1u64 << (c % WORD);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, r: usize, c: usize) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        self.data[r * self.words_per_row + c / WORD] ^= 1u64 << (c % WORD);
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    /// Position of the first nonzero entry in row-major order.
    pub fn first_nonzero(&self) -> Option<(usize, usize)> {
        (0..self.rows).find_map(|r| {
            self.row_words(r)
                .iter()
                .enumerate()
                .find(|(_, &w)| w != 0)
                .map(|(i, w)| (r, i * WORD + w.trailing_zeros() as usize))
        })
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

    pub fn matmul(&self, rhs: &F2Matrix) -> Result<F2Matrix, F2Error> {
        if self.cols != rhs.rows {
            return Err(F2Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        // Row r of the product is the XOR of rows k of rhs where self[r][k] = 1.
        let mut out = F2Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    let src = r * out.words_per_row;
                    for (i, w) in rhs.row_words(k).iter().enumerate() {
                        out.data[src + i] ^= w;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[bool]) -> Result<Vec<bool>, F2Error> {
        if v.len() != self.cols {
            return Err(F2Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: v.len(),
                right_cols: 1,
            });
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).filter(|&c| v[c] && self.get(r, c)).count() % 2 == 1)
            .collect())
    }

    /// Rank by Gaussian elimination, pivoting on the first nonzero entry of each column.
    pub fn rank(&self) -> usize {
        let mut work: Vec<Vec<u64>> = (0..self.rows).map(|r| self.row_words(r).to_vec()).collect();
        let mut rank = 0;
        for c in 0..self.cols {
            let (wi, bit) = (c / WORD, 1u64 << (c % WORD));
            let Some(p) = (rank..work.len()).find(|&r| work[r][wi] & bit != 0) else {
                continue;
            };
            work.swap(rank, p);
            let pivot = work[rank].clone();
            for (r, row) in work.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
            if rank == work.len() {
                break;
            }
        }
        rank
    }

    pub fn nullspace_dim(&self) -> usize {
        self.cols - self.rank()
    }

    /// Permutes rows and columns: entry `(r, c)` moves to `(row_perm[r], col_perm[c])`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> F2Matrix {
        let mut out = F2Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.set(row_perm[r], col_perm[c], true);
                }
            }
        }
        out
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "F2Matrix {}x{}", self.rows, self.cols)?;
        f.write_str(&self.to_grid())
    }
}

/// Rank of `m` from the size of its row span, enumerated over all `2^rows` row combinations.
///
/// Exponential; only meant as a test oracle for small matrices.
pub fn brute_force_rank(m: &F2Matrix) -> usize {
    assert!(m.rows() <= 20, "brute-force rank limited to 20 rows");
    let rows: Vec<Vec<bool>> = (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect()).collect();
    let mut span = std::collections::HashSet::new();
    for mask in 0u32..(1u32 << m.rows()) {
        let mut v = vec![false; m.cols()];
        for (r, row) in rows.iter().enumerate() {
            if mask >> r & 1 == 1 {
                for (a, &b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
        span.insert(v);
    }
    span.len().trailing_zeros() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = F2Matrix> {
        (0..=max_rows, 0..=max_cols).prop_flat_map(|(r, c)| {
            proptest::collection::vec(any::<bool>(), r * c).prop_map(move |bits| {
                let mut m = F2Matrix::zeros(r, c);
                for (i, b) in bits.into_iter().enumerate() {
                    m.set(i / c.max(1), i % c.max(1), b);
                }
                m
            })
        })
    }

    #[test]
    fn rank_examples() {
        assert_eq!(F2Matrix::identity(3).rank(), 3);
        assert_eq!(F2Matrix::all_ones(3, 3).rank(), 1);
        assert_eq!(F2Matrix::cyclic_ladder(3).rank(), 2);
        assert_eq!(brute_force_rank(&F2Matrix::all_ones(3, 3)), 1);
        assert_eq!(brute_force_rank(&F2Matrix::cyclic_ladder(3)), 2);
    }

    #[test]
    fn nullspace_examples() {
        assert_eq!(F2Matrix::identity(4).nullspace_dim(), 0);
        assert_eq!(F2Matrix::all_ones(4, 4).nullspace_dim(), 3);
        assert_eq!(F2Matrix::zeros(2, 5).nullspace_dim(), 5);
    }

    #[test]
    fn matmul_examples() {
        let m = F2Matrix::parse_grid("101\n011\n").unwrap();
        assert_eq!(F2Matrix::identity(2).matmul(&m).unwrap(), m);
        let ones = F2Matrix::all_ones(2, 2);
        assert!(ones.matmul(&ones).unwrap().is_zero());
        let a3 = F2Matrix::cyclic_ladder(3);
        assert_eq!(a3.mul_vec(&[true, true, true]).unwrap(), vec![false; 3]);
        assert!(matches!(
            m.matmul(&m),
            Err(F2Error::DimensionMismatch { left_cols: 3, right_rows: 2, .. })
        ));
    }

    #[test]
    fn ladder_shape() {
        // column j has ones in rows j and j+1 (cyclically)
        let a = F2Matrix::cyclic_ladder(4);
        assert_eq!(a.to_grid(), "1001\n1100\n0110\n0011\n");
        assert!(F2Matrix::cyclic_ladder(1).is_zero());
        // A and the all-ones matrix annihilate each other for every m
        for m in 1..10 {
            let a = F2Matrix::cyclic_ladder(m);
            let one = F2Matrix::all_ones(m, m);
            assert!(a.matmul(&one).unwrap().is_zero());
            assert!(one.matmul(&a).unwrap().is_zero());
        }
    }

    #[test]
    fn empty_matrices() {
        assert_eq!(F2Matrix::zeros(0, 0).rank(), 0);
        assert_eq!(F2Matrix::zeros(0, 3).nullspace_dim(), 3);
        assert_eq!(F2Matrix::zeros(3, 0).rank(), 0);
        let p = F2Matrix::zeros(0, 4).matmul(&F2Matrix::zeros(4, 2)).unwrap();
        assert_eq!((p.rows(), p.cols()), (0, 2));
    }

    #[test]
    fn wide_matrices_cross_word_boundary() {
        let mut m = F2Matrix::zeros(3, 130);
        m.set(0, 0, true);
        m.set(1, 64, true);
        m.set(2, 129, true);
        m.set(2, 0, true);
        assert_eq!(m.rank(), 3);
        assert_eq!(m.first_nonzero(), Some((0, 0)));
        assert_eq!(m.transpose().rank(), 3);
    }

    #[test]
    fn grid_parse_errors() {
        assert!(matches!(F2Matrix::parse_grid("01\n1"), Err(F2Error::RaggedRows { row: 1, .. })));
        assert!(matches!(F2Matrix::parse_grid("02"), Err(F2Error::InvalidEntry { col: 1, .. })));
        let m = F2Matrix::parse_grid("110\n\n011\n").unwrap();
        assert_eq!(F2Matrix::parse_grid(&m.to_grid()).unwrap(), m);
    }

    #[test]
    fn rank_matches_brute_force_exhaustively_up_to_3x3() {
        for rows in 0..=3usize {
            for cols in 0..=3usize {
                for bits in 0u32..(1 << (rows * cols)) {
                    let mut m = F2Matrix::zeros(rows, cols);
                    for i in 0..rows * cols {
                        m.set(i / cols, i % cols, bits >> i & 1 == 1);
                    }
                    assert_eq!(m.rank(), brute_force_rank(&m), "{m:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn rank_equals_transpose_rank(m in matrix_strategy(8, 8)) {
            prop_assert_eq!(m.rank(), m.transpose().rank());
        }

        #[test]
        fn rank_nullity(m in matrix_strategy(8, 8)) {
            prop_assert_eq!(m.rank() + m.nullspace_dim(), m.cols());
            prop_assert!(m.rank() <= m.rows().min(m.cols()));
        }

        #[test]
        fn rank_matches_brute_force(m in matrix_strategy(4, 4)) {
            prop_assert_eq!(m.rank(), brute_force_rank(&m));
        }

        #[test]
        fn matmul_is_associative(a in matrix_strategy(5, 5)) {
            let b = F2Matrix::all_ones(a.cols(), 3);
            let c = F2Matrix::cyclic_ladder(3);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
