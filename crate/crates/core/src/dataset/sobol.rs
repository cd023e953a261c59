//! Unscrambled Sobol sequence in Gray-code order with Joe–Kuo direction
//! numbers (the `new-joe-kuo-6.21201` set).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const BITS: usize = 32;

/// `(primitive polynomial, initial direction numbers m_1..m_s)` per dimension.
/// The polynomial is encoded with both its leading and constant terms set.
const DIRECTIONS: &[(u32, &[u32])] = &[
    (1, &[1]),
    (3, &[1]),
    (7, &[1, 3]),
    (11, &[1, 3, 1]),
    (13, &[1, 1, 1]),
    (19, &[1, 1, 3, 3]),
    (25, &[1, 3, 5, 13]),
    (37, &[1, 1, 5, 5, 17]),
    (41, &[1, 1, 5, 5, 5]),
    (47, &[1, 1, 7, 11, 19]),
    (55, &[1, 1, 5, 1, 1]),
    (59, &[1, 1, 1, 3, 11]),
    (61, &[1, 3, 5, 5, 31]),
    (67, &[1, 3, 3, 9, 7, 49]),
    (91, &[1, 1, 1, 15, 21, 21]),
    (97, &[1, 3, 1, 13, 27, 49]),
    (103, &[1, 1, 1, 15, 7, 5]),
    (109, &[1, 3, 1, 15, 13, 25]),
    (115, &[1, 1, 5, 5, 19, 61]),
    (131, &[1, 3, 7, 11, 23, 15, 103]),
    (137, &[1, 3, 7, 13, 13, 15, 69]),
    (143, &[1, 1, 3, 13, 7, 35, 63]),
    (145, &[1, 3, 5, 9, 1, 25, 53]),
    (157, &[1, 3, 1, 13, 9, 35, 107]),
    (167, &[1, 3, 1, 5, 27, 61, 31]),
    (171, &[1, 1, 5, 11, 19, 41, 61]),
    (185, &[1, 3, 5, 3, 3, 13, 69]),
    (191, &[1, 1, 7, 13, 1, 19, 1]),
    (193, &[1, 3, 7, 5, 13, 19, 59]),
    (203, &[1, 1, 3, 9, 25, 29, 41]),
    (211, &[1, 3, 5, 13, 23, 1, 55]),
    (213, &[1, 3, 7, 3, 13, 59, 17]),
];

/// Largest supported dimension.
pub const MAX_DIM: usize = DIRECTIONS.len();

fn direction_vectors(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = 1 << (BITS - 1 - i);
        }
        return v;
    }
    let (poly, init) = DIRECTIONS[dim];
    let s = (32 - poly.leading_zeros() - 1) as usize;
    let mut m = [0u32; BITS];
    m[..s].copy_from_slice(&init[..s]);
    for i in s..BITS {
        let mut mi = m[i - s] ^ (m[i - s] << s);
        for k in 1..s {
            if (poly >> (s - k)) & 1 == 1 {
                mi ^= m[i - k] << k;
            }
        }
        m[i] = mi;
    }
    for (i, vi) in v.iter_mut().enumerate() {
        *vi = m[i] << (BITS - 1 - i);
    }
    v
}

/// Stateful generator over `[0, 1)^dim`.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "Sobol dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        Ok(Sobol {
            directions: (0..dim).map(direction_vectors).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    /// Returns the current point and advances.
    pub fn next_point(&mut self) -> Vec<f64> {
        let out = self
            .state
            .iter()
            .map(|&s| s as f64 / (1u64 << BITS) as f64)
            .collect();
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        for (s, v) in self.state.iter_mut().zip(&self.directions) {
            *s ^= v[c];
        }
        self.index += 1;
        out
    }

    pub fn skip(&mut self, n: u64) {
        for _ in 0..n {
            self.next_point();
        }
    }
}

/// `n` Sobol points in `[0,1)^dim` after discarding the first `skip`.
pub fn sobol_unit(dim: usize, n: usize, skip: usize) -> Result<DMatrix<f64>> {
    let mut gen = Sobol::new(dim)?;
    gen.skip(skip as u64);
    let mut out = DMatrix::zeros(n, dim);
    for i in 0..n {
        let p = gen.next_point();
        for (j, v) in p.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let pts = sobol_unit(6, 4, 0).unwrap();
        assert!(pts.row(0).iter().all(|v| *v == 0.0));
        assert!(pts.row(1).iter().all(|v| *v == 0.5));
        let third: Vec<f64> = pts.row(2).iter().copied().collect();
        assert_eq!(third, vec![0.75, 0.25, 0.25, 0.25, 0.75, 0.75]);
    }

    // Reference rows from an independent Joe–Kuo implementation (SciPy's
    // unscrambled `qmc.Sobol`).
    #[test]
    fn matches_reference_rows() {
        let pts = sobol_unit(8, 1024, 0).unwrap();
        let cases: [(usize, [f64; 8]); 4] = [
            (7, [0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625]),
            (
                100,
                [0.4140625, 0.2578125, 0.7734375, 0.7265625, 0.8828125, 0.7421875, 0.0234375, 0.4765625],
            ),
            (
                513,
                [
                    0.5029296875, 0.7509765625, 0.4541015625, 0.4912109375, 0.9580078125,
                    0.0654296875, 0.1142578125, 0.4091796875,
                ],
            ),
            (
                1023,
                [
                    0.0009765625, 0.7529296875, 0.6123046875, 0.1455078125, 0.1865234375,
                    0.4384765625, 0.1396484375, 0.6181640625,
                ],
            ),
        ];
        for (row, expected) in cases {
            let got: Vec<f64> = pts.row(row).iter().copied().collect();
            assert_eq!(got, expected.to_vec(), "row {row}");
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(MAX_DIM + 1).is_err());
        assert!(Sobol::new(MAX_DIM).is_ok());
    }

    #[test]
    fn each_dimension_is_balanced_on_dyadic_blocks() {
        let pts = sobol_unit(MAX_DIM, 256, 0).unwrap();
        for j in 0..MAX_DIM {
            let below = pts.column(j).iter().filter(|v| **v < 0.5).count();
            assert_eq!(below, 128, "dimension {j}");
        }
    }
}
