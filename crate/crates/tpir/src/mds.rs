//! Systematic Reed-Solomon codes used for the expanding step.
//!
//! The generator is built from a Vandermonde matrix on evaluation points
//! 0, 1, ..., n-1 and converted to systematic form [I | P], so every
//! dimension-sized column subset is invertible and the parity block P is
//! directly usable for predict-and-cancel decoding.

use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};

#[derive(Debug, Clone)]
pub struct SystematicMdsCode {
    length: usize,
    dimension: usize,
    field: PrimeField,
    generator: FieldMatrix,
}

impl SystematicMdsCode {
    /// Build the [n_len, k_dim] code. Deterministic for fixed arguments;
    /// client and servers need no negotiation.
    pub fn new(n_len: usize, k_dim: usize, field: PrimeField) -> Result<Self> {
        if k_dim == 0 || k_dim > n_len {
            return Err(Error::Shape(format!(
                "invalid code parameters [{n_len},{k_dim}]"
            )));
        }
        if (n_len as u64) > field.order() {
            return Err(Error::FieldTooSmall {
                q: field.order(),
                needed: n_len as u64,
            });
        }
        // Vandermonde on points 0..n_len: V[i][j] = j^i.
        let mut vand = FieldMatrix::zeros(field, k_dim, n_len);
        for i in 0..k_dim {
            for j in 0..n_len {
                vand[(i, j)] = field.pow(j as u64, i as u64);
            }
        }
        let head = vand.select_cols(&(0..k_dim).collect::<Vec<_>>())?;
        let generator = head.invert()?.mul(&vand)?;
        Ok(SystematicMdsCode {
            length: n_len,
            dimension: k_dim,
            field,
            generator,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn generator(&self) -> &FieldMatrix {
        &self.generator
    }

    /// The parity block P of the systematic generator [I | P],
    /// shape k_dim x (n_len - k_dim).
    pub fn parity(&self) -> Result<FieldMatrix> {
        self.generator
            .select_cols(&(self.dimension..self.length).collect::<Vec<_>>())
    }

    pub fn encode(&self, info: &[u64]) -> Result<Vec<u64>> {
        if info.len() != self.dimension {
            return Err(Error::Shape(format!(
                "info length {} != dimension {}",
                info.len(),
                self.dimension
            )));
        }
        let row = FieldMatrix::from_entries(self.field, 1, self.dimension, info.to_vec())?;
        Ok(row.mul(&self.generator)?.entries().to_vec())
    }

    /// Recover the full codeword from values at any `dimension` distinct
    /// positions. Singularity cannot happen for an MDS generator; it is
    /// reported as an internal error.
    pub fn erasure_decode(&self, positions: &[usize], values: &[u64]) -> Result<Vec<u64>> {
        if positions.len() != self.dimension || values.len() != self.dimension {
            return Err(Error::Shape(format!(
                "need exactly {} positions and values",
                self.dimension
            )));
        }
        let mut seen = vec![false; self.length];
        for &p in positions {
            if p >= self.length {
                return Err(Error::Index(format!("position {p} out of range")));
            }
            if seen[p] {
                return Err(Error::Shape(format!("duplicate position {p}")));
            }
            seen[p] = true;
        }
        let sub = self.generator.select_cols(positions)?;
        let sub_inv = sub
            .invert()
            .map_err(|_| Error::Internal("MDS submatrix was singular".into()))?;
        let vals = FieldMatrix::from_entries(self.field, 1, self.dimension, values.to_vec())?;
        let info = vals.mul(&sub_inv)?;
        Ok(info.mul(&self.generator)?.entries().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![];
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut vec![], &mut out);
        out
    }

    #[test]
    fn rate_one_code_is_identity() {
        let f = PrimeField::new(7).unwrap();
        let c = SystematicMdsCode::new(3, 3, f).unwrap();
        assert_eq!(*c.generator(), FieldMatrix::identity(f, 3));
    }

    #[test]
    fn systematic_form_and_parity() {
        let f = PrimeField::new(7).unwrap();
        let c = SystematicMdsCode::new(3, 2, f).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(c.generator()[(i, j)], u64::from(i == j));
            }
        }
        // systematic: encode (1,0) -> (1,0,parity of row 0)
        let w = c.encode(&[1, 0]).unwrap();
        assert_eq!(&w[..2], &[1, 0]);
        assert_eq!(w[2], c.generator()[(0, 2)]);
        // all-zero info
        assert_eq!(c.encode(&[0, 0]).unwrap(), vec![0, 0, 0]);
    }

    /// Exhaustive MDS check: every k x k column submatrix invertible.
    #[test]
    fn mds_property_exhaustive() {
        let f = PrimeField::new(7).unwrap();
        for (n, k) in [(3, 2), (6, 4), (7, 3)] {
            let c = SystematicMdsCode::new(n, k, f).unwrap();
            for sel in subsets(n, k) {
                let sub = c.generator().select_cols(&sel).unwrap();
                assert_eq!(sub.rank(), k, "[{n},{k}] columns {sel:?}");
            }
        }
    }

    #[test]
    fn erasure_roundtrip_all_subsets() {
        let f = PrimeField::new(11).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for (n, k) in [(3usize, 2usize), (6, 4), (8, 5)] {
            let c = SystematicMdsCode::new(n, k, f).unwrap();
            let info: Vec<u64> = (0..k).map(|_| f.sample(&mut rng)).collect();
            let word = c.encode(&info).unwrap();
            for sel in subsets(n, k) {
                let vals: Vec<u64> = sel.iter().map(|&p| word[p]).collect();
                assert_eq!(c.erasure_decode(&sel, &vals).unwrap(), word);
            }
        }
        // fixed example from a [3,2] code over GF(7)
        let f7 = PrimeField::new(7).unwrap();
        let c = SystematicMdsCode::new(3, 2, f7).unwrap();
        let word = c.encode(&[4, 5]).unwrap();
        let rec = c
            .erasure_decode(&[0, 2], &[word[0], word[2]])
            .unwrap();
        assert_eq!(rec, word);
    }

    #[test]
    fn encode_is_linear() {
        let f = PrimeField::new(13).unwrap();
        let c = SystematicMdsCode::new(6, 4, f).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..20 {
            let u: Vec<u64> = (0..4).map(|_| f.sample(&mut rng)).collect();
            let v: Vec<u64> = (0..4).map(|_| f.sample(&mut rng)).collect();
            let a = f.sample(&mut rng);
            let lhs_in: Vec<u64> = u
                .iter()
                .zip(&v)
                .map(|(&x, &y)| f.add(f.mul(a, x), y))
                .collect();
            let lhs = c.encode(&lhs_in).unwrap();
            let eu = c.encode(&u).unwrap();
            let ev = c.encode(&v).unwrap();
            let rhs: Vec<u64> = eu
                .iter()
                .zip(&ev)
                .map(|(&x, &y)| f.add(f.mul(a, x), y))
                .collect();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn errors() {
        let f = PrimeField::new(5).unwrap();
        assert!(matches!(
            SystematicMdsCode::new(6, 4, f),
            Err(Error::FieldTooSmall { .. })
        ));
        assert!(SystematicMdsCode::new(3, 4, f).is_err());
        let c = SystematicMdsCode::new(4, 2, f).unwrap();
        assert!(c.encode(&[1, 2, 3]).is_err());
        assert!(c.erasure_decode(&[0, 0], &[1, 2]).is_err());
    }

    #[test]
    fn deterministic_construction() {
        let f = PrimeField::new(7).unwrap();
        let a = SystematicMdsCode::new(6, 4, f).unwrap();
        let b = SystematicMdsCode::new(6, 4, f).unwrap();
        assert_eq!(a.generator(), b.generator());
    }
}
