//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are [`nalgebra::DMatrix`] over [`Complex64`]. Two validated wrappers
//! carry the invariants the rest of the crate relies on:
//!
//! * [`HermitianOperator`]: a square Hermitian matrix of dimension at least 2.
//! * [`BipartiteOperator`]: an operator on `C^d ⊗ C^d` whose first tensor slot is
//!   the (conjugated) input leg and whose second slot is the output leg.
//!
//! # Vectorization convention
//!
//! `|A⟩⟩ = Σ_jk A_jk |j⟩ ⊗ |k⟩`, i.e. the row-major flattening of `A`. Under this
//! convention `|I⟩⟩⟨⟨I| = Σ_jk |jj⟩⟨kk|`, `⟨⟨A|B⟩⟩ = Tr(A†B)` and
//! `(X ⊗ Y)|A⟩⟩ = |X A Yᵀ⟩⟩`. Every module builds Choi operators with the
//! complex-conjugated basis element in slot 1, consistent with this choice.

mod haar;
mod io;

pub use haar::haar_unitary;
pub use io::{load_matrix, load_unitary, save_matrix, MatrixFile};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix, row/column indexed from zero.
pub type ComplexMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type ComplexVector = DVector<Complex64>;

/// Hermiticity tolerance for operators produced by internal arithmetic.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Hermiticity and unitarity tolerance for operators read from outside.
pub const EXTERNAL_TOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Largest entrywise deviation `max |H - H†|`.
pub fn hermitian_asymmetry(m: &ComplexMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M†) / 2`.
pub fn symmetrize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Frobenius norm of `U†U - I`.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - identity(n)).norm()
}

pub fn ensure_unitary(u: &ComplexMatrix, tolerance: f64) -> Result<usize> {
    let n = ensure_square(u)?;
    ensure_finite(u)?;
    let deviation = unitarity_error(u);
    if deviation > tolerance {
        return Err(Error::NotUnitary { deviation, tolerance });
    }
    Ok(n)
}

/// Validates membership of SU(d): unitary and unit determinant.
pub fn ensure_special_unitary(u: &ComplexMatrix, tolerance: f64) -> Result<usize> {
    let n = ensure_unitary(u, tolerance)?;
    let deviation = (u.determinant() - real(1.0)).norm();
    if deviation > tolerance {
        return Err(Error::NotSpecialUnitary { deviation });
    }
    Ok(n)
}

/// Hilbert–Schmidt inner product `Tr(A† B)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `Re Tr(A B)` for equally sized square matrices, without forming the product.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    m.trace().re
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Validated Hermitian matrix of dimension at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Accepts `m` when it is Hermitian within [`HERMITIAN_TOL`]; stores the
    /// exactly symmetrized matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    /// Like [`HermitianOperator::new`] with the looser [`EXTERNAL_TOL`].
    pub fn from_external(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, EXTERNAL_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, tolerance: f64) -> Result<Self> {
        let n = ensure_square(&m)?;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("Hermitian operator dimension must be >= 2, got {n}")));
        }
        ensure_finite(&m)?;
        let asymmetry = hermitian_asymmetry(&m);
        if asymmetry > tolerance {
            return Err(Error::NotHermitian { asymmetry, tolerance });
        }
        Ok(Self { matrix: symmetrize(&m) })
    }

    /// Symmetrizes without checking. Use only for matrices Hermitian by construction.
    pub(crate) fn symmetrized(m: &ComplexMatrix) -> Self {
        Self { matrix: symmetrize(m) }
    }

    pub fn zeros(d: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(d, d) }
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        Self { matrix: identity(d) * real(s) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }
}

impl std::ops::Deref for HermitianOperator {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Eigen-decomposition `H = V diag(λ) V†` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let l = real(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= l;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Applies `φ` to the spectrum: `V diag(φ(λ)) V†`.
    pub fn map(&self, phi: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let l = phi(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= l;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
pub fn eig_hermitian(h: &HermitianOperator) -> Eigh {
    eigh_unchecked(h.matrix())
}

/// Eigen-decomposition of a raw matrix after a Hermiticity check at `tolerance`.
pub fn eigh(m: &ComplexMatrix, tolerance: f64) -> Result<Eigh> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > tolerance {
        return Err(Error::NotHermitian { asymmetry, tolerance });
    }
    Ok(eigh_unchecked(m))
}

pub(crate) fn eigh_unchecked(m: &ComplexMatrix) -> Eigh {
    let n = m.nrows();
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    symmetrize(m).symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the Hermitian part of `m`.
pub fn max_eigenvalue(m: &ComplexMatrix) -> f64 {
    symmetrize(m).symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// `e^{iH}` for Hermitian `H`.
pub fn exp_i_hermitian(h: &ComplexMatrix) -> ComplexMatrix {
    eigh_unchecked(h).map(|l| Complex64::from_polar(1.0, l))
}

/// Safety margin kept between eigenphases and the branch cut at ±π.
pub const BRANCH_MARGIN: f64 = 0.1;

/// Principal logarithm of a unitary: returns Hermitian `K` with `U = e^{iK}`.
///
/// Goes through the Cayley transform `C = i(I - U)(I + U)^{-1}`, which is
/// Hermitian with eigenvalues `tan(θ/2)` for each eigenphase `θ` of `U`.
pub fn mat_log_unitary(u: &ComplexMatrix) -> Result<HermitianOperator> {
    let n = ensure_unitary(u, EXTERNAL_TOL)?;
    let id = identity(n);
    let plus = &id + u;
    let inv = plus.try_inverse().ok_or(Error::BranchAmbiguity { phase: std::f64::consts::PI })?;
    let cayley = (&id - u) * inv * c(0.0, 1.0);
    let eig = eigh_unchecked(&cayley);
    let limit = std::f64::consts::PI - BRANCH_MARGIN;
    let mut phases = Vec::with_capacity(n);
    for &t in &eig.values {
        let phase = 2.0 * t.atan();
        if phase.abs() >= limit {
            return Err(Error::BranchAmbiguity { phase });
        }
        phases.push(phase);
    }
    let log = Eigh { values: phases, vectors: eig.vectors };
    Ok(HermitianOperator::symmetrized(&log.reconstruct()))
}

/// Which Schatten norm [`norm`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Largest singular value.
    Operator,
    Frobenius,
    /// Sum of singular values.
    Trace,
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().cloned().collect()
}

pub fn norm(m: &ComplexMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => m.norm(),
        NormKind::Operator => singular_values(m).into_iter().fold(0.0, f64::max),
        NormKind::Trace => singular_values(m).into_iter().sum(),
    }
}

/// Row-major vectorization `|A⟩⟩ = Σ A_jk |j⟩|k⟩`.
pub fn vectorize(a: &ComplexMatrix) -> Result<ComplexVector> {
    let d = ensure_square(a)?;
    Ok(ComplexVector::from_iterator(d * d, (0..d * d).map(|idx| a[(idx / d, idx % d)])))
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &ComplexVector) -> Result<ComplexMatrix> {
    let len = v.len();
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len {
        return Err(Error::InvalidArgument(format!("vector length {len} is not a perfect square")));
    }
    Ok(ComplexMatrix::from_fn(d, d, |j, k| v[j * d + k]))
}

/// Tensor slot of a bipartite operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Conjugated input leg.
    First,
    /// Output leg.
    Second,
}

impl TryFrom<u8> for Slot {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Slot::First),
            2 => Ok(Slot::Second),
            other => Err(Error::InvalidArgument(format!("slot must be 1 or 2, got {other}"))),
        }
    }
}

/// Operator on `C^d ⊗ C^d`, basis index `i1 * d + i2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteOperator {
    local_dim: usize,
    matrix: ComplexMatrix,
    hermitian: bool,
}

impl BipartiteOperator {
    pub fn new(local_dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        check_bipartite_shape(local_dim, &matrix)?;
        Ok(Self { local_dim, matrix, hermitian: false })
    }

    /// Hermitian bipartite operator, checked at [`HERMITIAN_TOL`] scaled by the
    /// operator's magnitude.
    pub fn hermitian(local_dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        check_bipartite_shape(local_dim, &matrix)?;
        let tolerance = HERMITIAN_TOL * matrix.norm().max(1.0);
        let asymmetry = hermitian_asymmetry(&matrix);
        if asymmetry > tolerance {
            return Err(Error::NotHermitian { asymmetry, tolerance });
        }
        Ok(Self { local_dim, matrix: symmetrize(&matrix), hermitian: true })
    }

    pub(crate) fn hermitian_unchecked(local_dim: usize, matrix: &ComplexMatrix) -> Self {
        Self { local_dim, matrix: symmetrize(matrix), hermitian: true }
    }

    pub fn zeros(local_dim: usize) -> Self {
        let n = local_dim * local_dim;
        Self { local_dim, matrix: ComplexMatrix::zeros(n, n), hermitian: true }
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn partial_trace(&self, slot: Slot) -> ComplexMatrix {
        partial_trace(&self.matrix, self.local_dim, slot)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { local_dim: self.local_dim, matrix: &self.matrix * real(s), hermitian: self.hermitian }
    }
}

impl std::ops::Deref for BipartiteOperator {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

fn check_bipartite_shape(local_dim: usize, m: &ComplexMatrix) -> Result<()> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if n != local_dim * local_dim {
        return Err(Error::DimensionMismatch { expected: local_dim * local_dim, found: n });
    }
    Ok(())
}

/// Partial trace over `slot` of an operator on `C^d ⊗ C^d`.
pub fn partial_trace(x: &ComplexMatrix, d: usize, slot: Slot) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                acc += match slot {
                    Slot::Second => x[(i * d + k, j * d + k)],
                    Slot::First => x[(k * d + i, k * d + j)],
                };
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// The exchange operator on `C^d ⊗ C^d`.
pub fn swap(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut s = ComplexMatrix::zeros(n, n);
    for a in 0..d {
        for b in 0..d {
            s[(a * d + b, b * d + a)] = real(1.0);
        }
    }
    s
}

/// `|I⟩⟩⟨⟨I| = Σ_jk |jj⟩⟨kk|`.
pub fn max_entangled(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n);
    for j in 0..d {
        for k in 0..d {
            m[(j * d + j, k * d + k)] = real(1.0);
        }
    }
    m
}

/// Projector onto the symmetric subspace, `(I + SWAP) / 2`.
pub fn sym_projector(d: usize) -> ComplexMatrix {
    (identity(d * d) + swap(d)) * real(0.5)
}

/// Projector onto the antisymmetric subspace, `(I - SWAP) / 2`.
pub fn antisym_projector(d: usize) -> ComplexMatrix {
    (identity(d * d) - swap(d)) * real(0.5)
}
