use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{c, ComplexMatrix};
use crate::error::{Error, Result};

/// Haar-random element of SU(d), reproducible from `seed`.
///
/// Draws a complex Ginibre matrix, orthonormalizes it with QR, fixes the phases
/// of `R`'s diagonal so the distribution is Haar on U(d), then divides by a
/// `d`-th root of the determinant.
pub fn haar_unitary(d: usize, seed: u64) -> Result<ComplexMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) / std::f64::consts::SQRT_2
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    let det = q.determinant();
    let root = num_complex::Complex64::from_polar(1.0, -det.arg() / d as f64);
    Ok(q * root)
}
