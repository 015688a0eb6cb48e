//! Prime-field arithmetic and dense matrix algebra over GF(q).
//!
//! Everything in the scheme — records, queries, generators, mixing state —
//! is carried by [`FieldMatrix`]. Elements are residues stored as `u64`;
//! products go through `u128` so any prime q < 2^63 is safe.

use rand::Rng;

use crate::error::{Error, Result};

/// A prime field GF(q). Cheap to copy; primality is checked at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::InvalidConfig(format!("{q} is not prime")));
        }
        Ok(PrimeField { q })
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    /// Multiplicative inverse via Fermat: a^(q-2) mod q.
    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::DivisionByZero { q: self.q });
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Uniform element from a caller-owned source.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        rng.random_range(0..self.q)
    }
}

/// Deterministic Miller-Rabin, valid for all u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime >= n (n >= 0; answers at least 2).
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % m as u128) as u64;
        }
        base = ((base as u128 * base as u128) % m as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// Dense row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
    field: PrimeField,
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            rows,
            cols,
            entries: vec![0; rows * cols],
            field,
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(field: PrimeField, rows: &[Vec<u64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape("ragged rows".into()));
            }
            for &v in row {
                if v >= field.order() {
                    return Err(Error::Shape(format!(
                        "entry {v} outside GF({})",
                        field.order()
                    )));
                }
                entries.push(v);
            }
        }
        Ok(FieldMatrix {
            rows: r,
            cols: c,
            entries,
            field,
        })
    }

    pub fn from_entries(
        field: PrimeField,
        rows: usize,
        cols: usize,
        entries: Vec<u64>,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|&v| v >= field.order()) {
            return Err(Error::Shape(format!("entry outside GF({})", field.order())));
        }
        Ok(FieldMatrix {
            rows,
            cols,
            entries,
            field,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0)
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<u64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> FieldMatrix {
        let mut t = FieldMatrix::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Columns `sel` of self, in the given order.
    pub fn select_cols(&self, sel: &[usize]) -> Result<FieldMatrix> {
        if sel.iter().any(|&j| j >= self.cols) {
            return Err(Error::Index("column selection out of range".into()));
        }
        let mut m = FieldMatrix::zeros(self.field, self.rows, sel.len());
        for i in 0..self.rows {
            for (jj, &j) in sel.iter().enumerate() {
                m[(i, jj)] = self[(i, j)];
            }
        }
        Ok(m)
    }

    /// [self | other] side by side.
    pub fn hconcat(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.rows != other.rows || self.field != other.field {
            return Err(Error::Shape("hconcat row/field mismatch".into()));
        }
        let mut m = FieldMatrix::zeros(self.field, self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self[(i, j)];
            }
            for j in 0..other.cols {
                m[(i, self.cols + j)] = other[(i, j)];
            }
        }
        Ok(m)
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.field != other.field {
            return Err(Error::Shape("field mismatch".into()));
        }
        let q = self.field.order() as u128;
        let mut out = FieldMatrix::zeros(self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                let a = a as u128;
                for j in 0..other.cols {
                    let cur = out[(i, j)] as u128;
                    out[(i, j)] = ((cur + a * other[(k, j)] as u128) % q) as u64;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.rows != other.rows || self.cols != other.cols || self.field != other.field {
            return Err(Error::Shape("add shape/field mismatch".into()));
        }
        let mut out = self.clone();
        for (o, &v) in out.entries.iter_mut().zip(&other.entries) {
            *o = self.field.add(*o, v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.rows != other.rows || self.cols != other.cols || self.field != other.field {
            return Err(Error::Shape("sub shape/field mismatch".into()));
        }
        let mut out = self.clone();
        for (o, &v) in out.entries.iter_mut().zip(&other.entries) {
            *o = self.field.sub(*o, v);
        }
        Ok(out)
    }

    pub fn scale(&self, a: u64) -> FieldMatrix {
        let mut out = self.clone();
        for v in &mut out.entries {
            *v = self.field.mul(*v, a);
        }
        out
    }

    /// Rank via Gaussian elimination with first-nonzero pivoting.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let f = m.field;
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let pivot = (rank..m.rows).find(|&r| m[(r, col)] != 0);
            let Some(p) = pivot else { continue };
            m.swap_rows(rank, p);
            let inv = f.inv(m[(rank, col)]).expect("pivot is nonzero");
            for j in col..m.cols {
                m[(rank, j)] = f.mul(m[(rank, j)], inv);
            }
            for r in 0..m.rows {
                if r != rank && m[(r, col)] != 0 {
                    let factor = m[(r, col)];
                    for j in col..m.cols {
                        let s = f.mul(factor, m[(rank, j)]);
                        m[(r, j)] = f.sub(m[(r, j)], s);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Inverse of a square full-rank matrix by Gauss-Jordan on [A | I].
    pub fn invert(&self) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::Shape("invert requires a square matrix".into()));
        }
        let n = self.rows;
        let f = self.field;
        let mut aug = self.hconcat(&FieldMatrix::identity(f, n))?;
        for col in 0..n {
            let pivot = (col..n).find(|&r| aug[(r, col)] != 0);
            let Some(p) = pivot else {
                return Err(Error::SingularMatrix);
            };
            aug.swap_rows(col, p);
            let inv = f.inv(aug[(col, col)])?;
            for j in 0..2 * n {
                aug[(col, j)] = f.mul(aug[(col, j)], inv);
            }
            for r in 0..n {
                if r != col && aug[(r, col)] != 0 {
                    let factor = aug[(r, col)];
                    for j in 0..2 * n {
                        let s = f.mul(factor, aug[(col, j)]);
                        aug[(r, j)] = f.sub(aug[(r, j)], s);
                    }
                }
            }
        }
        aug.select_cols(&(n..2 * n).collect::<Vec<_>>())
    }

    /// Uniform matrix with independent uniform entries.
    pub fn sample_uniform<R: Rng>(
        field: PrimeField,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> FieldMatrix {
        let entries = (0..rows * cols).map(|_| field.sample(rng)).collect();
        FieldMatrix {
            rows,
            cols,
            entries,
            field,
        }
    }

    /// Uniform full-column-rank rows x cols matrix (cols <= rows) by
    /// rejection sampling. Acceptance probability exceeds prod(1 - q^-i) > 0.28
    /// for every q >= 2, so the loop terminates quickly.
    pub fn sample_full_rank<R: Rng>(
        field: PrimeField,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<FieldMatrix> {
        if cols > rows {
            return Err(Error::Shape(format!(
                "sample_full_rank needs cols <= rows, got {rows}x{cols}"
            )));
        }
        loop {
            let m = Self::sample_uniform(field, rows, cols, rng);
            if m.rank() == cols {
                return Ok(m);
            }
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for FieldMatrix {
    type Output = u64;
    fn index(&self, (i, j): (usize, usize)) -> &u64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for FieldMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut u64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.entries[i * self.cols + j]
    }
}
