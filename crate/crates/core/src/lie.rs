//! Orthonormal Hilbert–Schmidt bases of `su(d)` and of the subalgebras used by
//! the subgroup-restricted bound.
//!
//! Every basis is a list of traceless Hermitian matrices `G_j` with
//! `Tr(G_j G_k) = δ_jk`. Ordering is fixed so downstream assembly is
//! reproducible: symmetric off-diagonal elements by `(j, k)`, then
//! antisymmetric ones by `(j, k)`, then diagonal ones by level.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hs_inner, identity, kron, real, ComplexMatrix, HermitianOperator};

/// Which (sub)algebra an [`OperatorBasis`] spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisTag {
    SuGellmann,
    SuPauli,
    So,
    SoComplement,
    Diag,
    DiagComplement,
    TensorSub,
    TensorComplement,
}

impl BasisTag {
    /// Whether the tag denotes a basis of the full `su(d)`.
    pub fn is_full(self) -> bool {
        matches!(self, BasisTag::SuGellmann | BasisTag::SuPauli)
    }
}

/// Ordered orthonormal set of traceless Hermitian operators.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    local_dim: usize,
    tag: BasisTag,
    elements: Vec<HermitianOperator>,
    labels: Vec<String>,
}

impl OperatorBasis {
    /// Assembles a basis from raw parts, checking tracelessness and orthonormality.
    pub fn new(local_dim: usize, tag: BasisTag, elements: Vec<HermitianOperator>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != elements.len() {
            return Err(Error::DimensionMismatch { expected: elements.len(), found: labels.len() });
        }
        if let Some(bad) = elements.iter().find(|g| g.dim() != local_dim) {
            return Err(Error::DimensionMismatch { expected: local_dim, found: bad.dim() });
        }
        let basis = Self { local_dim, tag, elements, labels };
        let worst = basis.orthonormality_error();
        if worst > 1e-10 {
            return Err(Error::IncompleteBasis {
                dim: local_dim,
                reason: format!("elements are not orthonormal (Gram error {worst:.3e})"),
            });
        }
        if let Some(g) = basis.elements.iter().find(|g| g.trace().abs() > 1e-12) {
            return Err(Error::IncompleteBasis { dim: local_dim, reason: format!("element with trace {:.3e}", g.trace()) });
        }
        Ok(basis)
    }

    /// An empty basis (the complement of the full algebra).
    pub fn empty(local_dim: usize, tag: BasisTag) -> Self {
        Self { local_dim, tag, elements: Vec::new(), labels: Vec::new() }
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HermitianOperator> {
        self.elements.iter()
    }

    /// `Tr(G_j G_k)` as a real matrix.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.elements
            .iter()
            .map(|a| self.elements.iter().map(|b| hs_inner(a, b).re).collect())
            .collect()
    }

    /// `max_jk |Tr(G_j G_k) - δ_jk|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, a) in self.elements.iter().enumerate() {
            for (k, b) in self.elements.iter().enumerate().skip(j) {
                let want = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((hs_inner(a, b) - real(want)).norm());
            }
        }
        worst
    }

    /// Real coordinates `Tr(G_j H)`.
    pub fn coordinates(&self, h: &ComplexMatrix) -> Vec<f64> {
        self.elements.iter().map(|g| hs_inner(g, h).re).collect()
    }

    /// `Σ_j x_j G_j`.
    pub fn combine(&self, coords: &[f64]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.local_dim, self.local_dim);
        for (g, &x) in self.elements.iter().zip(coords) {
            out += g.matrix() * real(x);
        }
        out
    }

    /// Orthogonal projection of `h` onto the span.
    pub fn project(&self, h: &ComplexMatrix) -> ComplexMatrix {
        self.combine(&self.coordinates(h))
    }

    /// Concatenates two bases after checking joint orthonormality.
    pub fn union(&self, other: &OperatorBasis, tag: BasisTag) -> Result<OperatorBasis> {
        let elements = self.elements.iter().chain(&other.elements).cloned().collect();
        let labels = self.labels.iter().chain(&other.labels).cloned().collect();
        OperatorBasis::new(self.local_dim, tag, elements, labels)
    }
}

fn unit(d: usize, j: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    m[(j, k)] = real(1.0);
    m
}

fn symmetric_element(d: usize, j: usize, k: usize) -> HermitianOperator {
    HermitianOperator::symmetrized(&((unit(d, j, k) + unit(d, k, j)) * real(std::f64::consts::FRAC_1_SQRT_2)))
}

fn antisymmetric_element(d: usize, j: usize, k: usize) -> HermitianOperator {
    let m = unit(d, j, k) * c(0.0, -1.0) + unit(d, k, j) * c(0.0, 1.0);
    HermitianOperator::symmetrized(&(m * real(std::f64::consts::FRAC_1_SQRT_2)))
}

/// Level `l ≥ 1`: `(Σ_{m<l} E_mm - l E_ll) / sqrt(l(l+1))`.
fn diagonal_element(d: usize, l: usize) -> HermitianOperator {
    let mut m = ComplexMatrix::zeros(d, d);
    let norm = ((l * (l + 1)) as f64).sqrt();
    for i in 0..l {
        m[(i, i)] = real(1.0 / norm);
    }
    m[(l, l)] = real(-(l as f64) / norm);
    HermitianOperator::symmetrized(&m)
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
    }
    Ok(())
}

struct Families {
    symmetric: Vec<(HermitianOperator, String)>,
    antisymmetric: Vec<(HermitianOperator, String)>,
    diagonal: Vec<(HermitianOperator, String)>,
}

fn families(d: usize) -> Families {
    let mut symmetric = Vec::new();
    let mut antisymmetric = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            symmetric.push((symmetric_element(d, j, k), format!("S{j}{k}")));
            antisymmetric.push((antisymmetric_element(d, j, k), format!("A{j}{k}")));
        }
    }
    let diagonal = (1..d).map(|l| (diagonal_element(d, l), format!("D{l}"))).collect();
    Families { symmetric, antisymmetric, diagonal }
}

fn assemble(d: usize, tag: BasisTag, parts: Vec<Vec<(HermitianOperator, String)>>) -> OperatorBasis {
    let (elements, labels) = parts.into_iter().flatten().unzip();
    OperatorBasis { local_dim: d, tag, elements, labels }
}

/// Generalized Gell-Mann basis of `su(d)`, `d² - 1` elements.
pub fn gellmann_basis(d: usize) -> Result<OperatorBasis> {
    check_dim(d)?;
    let f = families(d);
    Ok(assemble(d, BasisTag::SuGellmann, vec![f.symmetric, f.antisymmetric, f.diagonal]))
}

fn pauli(index: usize) -> ComplexMatrix {
    let z = real(0.0);
    let o = real(1.0);
    match index {
        0 => identity(2),
        1 => ComplexMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        2 => ComplexMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        _ => ComplexMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Normalized Pauli strings `P / sqrt(2^n)` on `n` qubits, excluding the identity.
pub fn pauli_basis(n_qubits: usize) -> Result<OperatorBasis> {
    if !(1..=4).contains(&n_qubits) {
        return Err(Error::InvalidArgument(format!("number of qubits must be in 1..=4, got {n_qubits}")));
    }
    let dim = 1usize << n_qubits;
    let scale = real(1.0 / (dim as f64).sqrt());
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for code in 1..4usize.pow(n_qubits as u32) {
        let mut m = ComplexMatrix::identity(1, 1);
        let mut label = String::with_capacity(n_qubits);
        for leg in (0..n_qubits).rev() {
            let p = (code / 4usize.pow(leg as u32)) % 4;
            m = kron(&m, &pauli(p));
            label.push(['I', 'X', 'Y', 'Z'][p]);
        }
        elements.push(HermitianOperator::symmetrized(&(m * scale)));
        labels.push(label);
    }
    Ok(OperatorBasis { local_dim: dim, tag: BasisTag::SuPauli, elements, labels })
}

/// Subalgebra families for which [`subalgebra_bases`] splits `su(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubalgebraKind {
    /// `so(d)`: real antisymmetric generators.
    So,
    /// Traceless diagonal matrices.
    Diag,
}

/// Splits `su(d)` into a subalgebra basis and its orthogonal complement.
pub fn subalgebra_bases(d: usize, kind: SubalgebraKind) -> Result<(OperatorBasis, OperatorBasis)> {
    check_dim(d)?;
    let f = families(d);
    Ok(match kind {
        SubalgebraKind::So => (
            assemble(d, BasisTag::So, vec![f.antisymmetric]),
            assemble(d, BasisTag::SoComplement, vec![f.symmetric, f.diagonal]),
        ),
        SubalgebraKind::Diag => (
            assemble(d, BasisTag::Diag, vec![f.diagonal]),
            assemble(d, BasisTag::DiagComplement, vec![f.symmetric, f.antisymmetric]),
        ),
    })
}

/// Largest total dimension accepted for tensor-product embeddings.
pub const MAX_TENSOR_DIM: usize = 16;

/// Basis of `su(d^n)` split into single-leg generators of `SU(d)^{⊗n}` and the rest.
#[derive(Debug, Clone)]
pub struct TensorEmbedding {
    pub local_dim: usize,
    pub legs: usize,
    pub sub: OperatorBasis,
    pub complement: OperatorBasis,
    /// Per complement element, the Gell-Mann index on each leg (0 = identity,
    /// `j + 1` = `j`-th Gell-Mann element).
    pub complement_indices: Vec<Vec<usize>>,
}

/// Builds the `SU(d)^{⊗n}` embedding in `su(d^n)`.
pub fn tensor_embedding(d: usize, n: usize) -> Result<TensorEmbedding> {
    check_dim(d)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("tensor power must be >= 2, got {n}")));
    }
    let total = d.checked_pow(n as u32).filter(|&t| t <= MAX_TENSOR_DIM).ok_or_else(|| {
        Error::InvalidArgument(format!("tensor dimension {d}^{n} exceeds the cap {MAX_TENSOR_DIM}"))
    })?;
    let local = gellmann_basis(d)?;
    let mut factors: Vec<(ComplexMatrix, String)> = vec![(identity(d) * real(1.0 / (d as f64).sqrt()), "I".into())];
    factors.extend(local.elements.iter().zip(&local.labels).map(|(g, l)| (g.matrix().clone(), l.clone())));
    let radix = factors.len();

    let mut sub = (Vec::new(), Vec::new());
    let mut comp = (Vec::new(), Vec::new());
    let mut complement_indices = Vec::new();
    for code in 1..radix.pow(n as u32) {
        let digits: Vec<usize> = (0..n).rev().map(|leg| (code / radix.pow(leg as u32)) % radix).collect();
        let mut m = ComplexMatrix::identity(1, 1);
        let mut label = String::new();
        for (leg, &digit) in digits.iter().enumerate() {
            m = kron(&m, &factors[digit].0);
            if leg > 0 {
                label.push('|');
            }
            label.push_str(&factors[digit].1);
        }
        let op = HermitianOperator::symmetrized(&m);
        if digits.iter().filter(|&&x| x != 0).count() == 1 {
            sub.0.push(op);
            sub.1.push(label);
        } else {
            comp.0.push(op);
            comp.1.push(label);
            complement_indices.push(digits);
        }
    }
    Ok(TensorEmbedding {
        local_dim: d,
        legs: n,
        sub: OperatorBasis { local_dim: total, tag: BasisTag::TensorSub, elements: sub.0, labels: sub.1 },
        complement: OperatorBasis { local_dim: total, tag: BasisTag::TensorComplement, elements: comp.0, labels: comp.1 },
        complement_indices,
    })
}

/// Promise on the unknown unitary: the full group or one of the supported subgroups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "legs")]
pub enum Subgroup {
    Full,
    So,
    Diag,
    /// `SU(d)^{⊗n}` inside `SU(d^n)`.
    Tensor(usize),
}

impl Subgroup {
    /// Dimension of the unitaries acted on, given the local dimension `d`.
    pub fn total_dim(self, d: usize) -> usize {
        match self {
            Subgroup::Tensor(n) => d.saturating_pow(n as u32),
            _ => d,
        }
    }

    /// Subalgebra basis and complement on the total space.
    pub fn bases(self, d: usize) -> Result<(OperatorBasis, OperatorBasis)> {
        match self {
            Subgroup::Full => {
                let b = gellmann_basis(d)?;
                Ok((b, OperatorBasis::empty(d, BasisTag::SuGellmann)))
            }
            Subgroup::So => subalgebra_bases(d, SubalgebraKind::So),
            Subgroup::Diag => subalgebra_bases(d, SubalgebraKind::Diag),
            Subgroup::Tensor(n) => {
                let e = tensor_embedding(d, n)?;
                Ok((e.sub, e.complement))
            }
        }
    }

    /// Checks that `u` lies in the subgroup, within `tolerance`.
    pub fn contains(self, u: &ComplexMatrix, d: usize, tolerance: f64) -> bool {
        match self {
            Subgroup::Full => true,
            Subgroup::So => u.iter().all(|z| z.im.abs() <= tolerance),
            Subgroup::Diag => {
                (0..u.nrows()).all(|i| (0..u.ncols()).all(|j| i == j || u[(i, j)].norm() <= tolerance))
            }
            Subgroup::Tensor(n) => is_product_unitary(u, d, n, tolerance),
        }
    }
}

/// A unitary is a tensor product across legs iff its generator projects to zero
/// on every multi-leg direction; near identity it suffices to test the log.
fn is_product_unitary(u: &ComplexMatrix, d: usize, n: usize, tolerance: f64) -> bool {
    let Ok(embedding) = tensor_embedding(d, n) else { return false };
    let Ok(k) = crate::linalg::mat_log_unitary(u) else { return false };
    embedding.complement.coordinates(k.matrix()).iter().all(|x| x.abs() <= tolerance)
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subgroup::Full => f.write_str("full"),
            Subgroup::So => f.write_str("so"),
            Subgroup::Diag => f.write_str("diag"),
            Subgroup::Tensor(n) => write!(f, "tensor:{n}"),
        }
    }
}

impl std::str::FromStr for Subgroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Subgroup::Full),
            "so" => Ok(Subgroup::So),
            "diag" => Ok(Subgroup::Diag),
            other => match other.strip_prefix("tensor:") {
                Some(n) => n
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 2)
                    .map(Subgroup::Tensor)
                    .ok_or_else(|| Error::InvalidArgument(format!("tensor power must be an integer >= 2, got `{n}`"))),
                None => Err(Error::InvalidArgument(format!("unknown subgroup `{other}` (expected full, so, diag, tensor:<n>)"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetrize;

    #[test]
    fn gellmann_two_is_normalized_paulis() {
        let b = gellmann_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(b.len(), 3);
        assert!((b.elements()[0].matrix() - pauli(1) * real(s)).norm() < 1e-15);
        assert!((b.elements()[1].matrix() - pauli(2) * real(s)).norm() < 1e-15);
        assert!((b.elements()[2].matrix() - pauli(3) * real(s)).norm() < 1e-15);
    }

    #[test]
    fn gellmann_counts_and_gram() {
        for d in 2..=6 {
            let b = gellmann_basis(d).unwrap();
            assert_eq!(b.len(), d * d - 1);
            assert!(b.orthonormality_error() < 1e-12);
            assert!(b.iter().all(|g| g.trace().abs() < 1e-12));
        }
        assert!(gellmann_basis(1).is_err());
    }

    #[test]
    fn pauli_counts_and_orthogonality() {
        let b = pauli_basis(2).unwrap();
        assert_eq!(b.len(), 15);
        assert!(b.orthonormality_error() < 1e-12);
        let xy = b.labels().iter().position(|l| l == "XY").unwrap();
        let zz = b.labels().iter().position(|l| l == "ZZ").unwrap();
        assert!(hs_inner(&b.elements()[xy], &b.elements()[zz]).norm() < 1e-15);
        assert!(pauli_basis(0).is_err());
        assert!(pauli_basis(5).is_err());
    }

    #[test]
    fn subalgebra_counts() {
        let (sub, comp) = subalgebra_bases(2, SubalgebraKind::So).unwrap();
        assert_eq!(sub.labels(), ["A01"]);
        assert_eq!(comp.len(), 2);
        let (sub, comp) = subalgebra_bases(3, SubalgebraKind::So).unwrap();
        assert_eq!((sub.len(), comp.len()), (3, 5));
        let (sub, comp) = subalgebra_bases(4, SubalgebraKind::Diag).unwrap();
        assert_eq!((sub.len(), comp.len()), (3, 12));
        assert!(sub.union(&comp, BasisTag::SuGellmann).unwrap().orthonormality_error() < 1e-12);
    }

    #[test]
    fn so_generators_are_imaginary_antisymmetric() {
        let (sub, _) = subalgebra_bases(4, SubalgebraKind::So).unwrap();
        for g in sub.iter() {
            assert!(g.iter().all(|z| z.re == 0.0));
            assert!((g.matrix() + g.matrix().transpose()).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_embedding_counts() {
        let e = tensor_embedding(2, 2).unwrap();
        assert_eq!((e.sub.len(), e.complement.len()), (6, 9));
        let all = e.sub.union(&e.complement, BasisTag::SuGellmann).unwrap();
        assert!(all.orthonormality_error() < 1e-12);
        let e = tensor_embedding(2, 4).unwrap();
        assert_eq!(e.sub.len() + e.complement.len(), 255);
        assert!(tensor_embedding(3, 3).is_err());
        assert!(tensor_embedding(2, 1).is_err());
    }

    #[test]
    fn subgroup_parsing_and_membership() {
        assert_eq!("tensor:3".parse::<Subgroup>().unwrap(), Subgroup::Tensor(3));
        assert_eq!("so".parse::<Subgroup>().unwrap(), Subgroup::So);
        assert!("tensor:1".parse::<Subgroup>().is_err());
        assert!("sp".parse::<Subgroup>().is_err());
        assert_eq!(Subgroup::Tensor(2).to_string(), "tensor:2");
        let id = identity(4);
        for s in [Subgroup::Full, Subgroup::So, Subgroup::Diag, Subgroup::Tensor(2)] {
            assert!(s.contains(&id, 2, 1e-8));
        }
        let h = crate::linalg::haar_unitary(2, 3).unwrap();
        let product = kron(&h, &crate::linalg::haar_unitary(2, 4).unwrap());
        let k = crate::linalg::mat_log_unitary(&product);
        if k.is_ok() {
            assert!(Subgroup::Tensor(2).contains(&product, 2, 1e-8));
        }
        assert!(!Subgroup::Diag.contains(&h, 2, 1e-8));
    }

    #[test]
    fn span_of_gellmann_and_pauli_agree() {
        let g = gellmann_basis(2).unwrap();
        let p = pauli_basis(1).unwrap();
        for x in p.iter() {
            assert!((g.project(x) - x.matrix()).norm() < 1e-12);
        }
        let h = symmetrize(&ComplexMatrix::from_fn(4, 4, |i, j| c((i * 3 + j) as f64, (j as f64) - (i as f64) * 0.5)));
        let traceless = &h - identity(4) * (h.trace() / real(4.0));
        let g4 = gellmann_basis(4).unwrap();
        let p2 = pauli_basis(2).unwrap();
        assert!((g4.project(&traceless) - p2.project(&traceless)).norm() < 1e-10);
    }
}
