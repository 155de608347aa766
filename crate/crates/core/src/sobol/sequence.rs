//! Sobol' low-discrepancy sequence in base 2, Gray-code order, with the
//! Joe–Kuo direction numbers.

use crate::error::{Error, Result};

const BITS: usize = 32;

/// `(s, a, m_1..m_s)` for dimensions 2 onward.
const DIRECTIONS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

pub const MAX_DIM: usize = DIRECTIONS.len() + 1;

fn direction_vector(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m_init) = DIRECTIONS[dim - 1];
    let s = s as usize;
    let mut m = vec![0u32; BITS];
    m[..s].copy_from_slice(m_init);
    for k in s..BITS {
        let mut mk = m[k - s] ^ (m[k - s] << s);
        for i in 1..s {
            if (a >> (s - 1 - i)) & 1 == 1 {
                mk ^= m[k - i] << i;
            }
        }
        m[k] = mk;
    }
    for k in 0..BITS {
        v[k] = m[k] << (BITS - 1 - k);
    }
    v
}

/// Gray-code Sobol' generator over integer coordinates.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::DimensionUnsupported { requested: dim, max: MAX_DIM });
        }
        Ok(Self { directions: (0..dim).map(direction_vector).collect(), state: vec![0; dim], index: 0 })
    }

    /// Advances to the next point, skipping the origin, and returns its integer coordinates.
    pub fn next_raw(&mut self) -> &[u32] {
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol' sequence exhausted");
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c];
        }
        self.index += 1;
        &self.state
    }
}

pub fn to_unit(x: u32) -> f64 {
    f64::from(x) / 4_294_967_296.0
}

/// The first `n` points of the `p`-dimensional sequence, origin excluded.
pub fn sobol_points(n: usize, p: usize) -> Result<Vec<Vec<f64>>> {
    let mut seq = SobolSequence::new(p)?;
    Ok((0..n).map(|_| seq.next_raw().iter().map(|&x| to_unit(x)).collect()).collect())
}
