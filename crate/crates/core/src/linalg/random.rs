use rand_distr::{Distribution, StandardNormal, StandardUniform};
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use super::{thin_qr, Matrix};
use crate::error::{Error, Result};

/// Seeded xoshiro256** generator.
///
/// The same seed yields the same stream within one build; streams are not
/// meant to be reproduced across languages.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: Xoshiro256StarStar,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Independent substream `stream` of `seed`: the base generator advanced
    /// by `stream` jumps of 2^128 draws.
    pub fn with_stream(seed: u64, stream: u32) -> Self {
        let mut rng = Self::new(seed);
        for _ in 0..stream {
            rng.inner.jump();
        }
        rng
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        StandardUniform.sample(&mut self.inner)
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }
}

/// Haar-distributed orthogonal `n×n` matrix: QR of a Gaussian matrix with
/// the `R` diagonal made positive.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("orthogonal matrix of size 0".into()));
    }
    random_stiefel(n, n, rng)
}

/// Uniformly distributed `n×m` matrix with orthonormal columns.
pub fn random_stiefel(n: usize, m: usize, rng: &mut Rng) -> Result<Matrix> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "Stiefel sample needs 1 <= m <= n, got n={n}, m={m}"
        )));
    }
    let g = rng.gaussian_matrix(n, m);
    let (q, _) = thin_qr(&g)?;
    Ok(q)
}
