//! Randomized property suites shared by the standalone property targets and
//! the acceptance harness. Each suite returns the number of cases it ran.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uqc::derivative::{choi_gellmann, dsl_derivative, finite_difference_default, ChoiOperator};
use uqc::dsl::{parse_with, FixedMatrix, FuncExpr};
use uqc::lie::{gellmann_basis, pauli_basis, subalgebra_bases, tensor_embedding, BasisTag, SubalgebraKind};
use uqc::linalg::{
    c, devectorize, eigh, haar_unitary, hs_inner, identity, kron, min_eigenvalue, partial_trace, real, symmetrize,
    trace_product_re, vectorize, ComplexMatrix, Slot,
};
use uqc::sdp::{solve_primal, SdpStatus};
use uqc::Error;

pub const CASES: u32 = 256;

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())?;
    Ok(cases)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
    symmetrize(&random_matrix(n, n, seed))
}

fn traceless(m: ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows();
    let t = m.trace() / real(n as f64);
    m - identity(n) * t
}

// ---------------------------------------------------------------- lie bases

/// Gell-Mann, Pauli, subalgebra and tensor bases are orthonormal, and their
/// unions span su(d): random traceless Hermitian matrices are reproduced from
/// their coordinates.
pub fn lie_bases(cases: u32) -> Result<u32, String> {
    run(cases, (2usize..=6, any::<u64>(), 0usize..4), |(d, seed, family)| {
        let h = traceless(random_hermitian(d, seed));
        let basis = gellmann_basis(d).unwrap();
        prop_assert_eq!(basis.len(), d * d - 1);
        prop_assert!(basis.orthonormality_error() <= 1e-12);
        for g in basis.iter() {
            prop_assert!(g.trace().abs() <= 1e-14);
        }
        prop_assert!((basis.combine(&basis.coordinates(&h)) - &h).norm() <= 1e-12);
        prop_assert!((basis.project(&h) - &h).norm() <= 1e-12);

        let check_split = |sub: &uqc::lie::OperatorBasis, comp: &uqc::lie::OperatorBasis, dim: usize, h: &ComplexMatrix| {
            let union = sub.union(comp, BasisTag::SuGellmann).unwrap();
            prop_assert_eq!(union.len(), dim * dim - 1);
            prop_assert!(union.orthonormality_error() <= 1e-12);
            for a in sub.iter() {
                for b in comp.iter() {
                    prop_assert!(hs_inner(a, b).norm() <= 1e-12);
                }
            }
            prop_assert!((sub.project(h) + comp.project(h) - h).norm() <= 1e-12);
            Ok(())
        };
        match family {
            0 => {
                let (sub, comp) = subalgebra_bases(d, SubalgebraKind::So).unwrap();
                prop_assert_eq!(sub.len(), d * (d - 1) / 2);
                for a in sub.iter() {
                    // so(d) generators are purely imaginary Hermitian.
                    prop_assert!(a.iter().all(|z| z.re.abs() <= 1e-15));
                }
                check_split(&sub, &comp, d, &h)?;
            }
            1 => {
                let (sub, comp) = subalgebra_bases(d, SubalgebraKind::Diag).unwrap();
                prop_assert_eq!(sub.len(), d - 1);
                check_split(&sub, &comp, d, &h)?;
            }
            2 => {
                let qubits = 1 + (seed % 3) as usize;
                let p = pauli_basis(qubits).unwrap();
                let n = 1 << qubits;
                prop_assert_eq!(p.len(), n * n - 1);
                prop_assert!(p.orthonormality_error() <= 1e-12);
                let h = traceless(random_hermitian(n, seed ^ 1));
                prop_assert!((p.combine(&p.coordinates(&h)) - &h).norm() <= 1e-12);
            }
            _ => {
                if d * d <= 16 {
                    let t = tensor_embedding(d, 2).unwrap();
                    prop_assert_eq!(t.sub.len(), 2 * (d * d - 1));
                    let h = traceless(random_hermitian(d * d, seed ^ 2));
                    check_split(&t.sub, &t.complement, d * d, &h)?;
                }
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- sdp engine

fn random_choi(d: usize, seed: u64) -> ChoiOperator {
    ChoiOperator::from_matrix(d, random_hermitian(d * d, seed), "random").unwrap()
}

/// A random dual-feasible Γ: random PSD matrix congruence-normalized so that
/// `Tr₂Γ = I`.
fn random_dual_point(d: usize, seed: u64) -> ComplexMatrix {
    let a = random_matrix(d * d, d * d, seed);
    let g = &a * a.adjoint() + identity(d * d) * real(1e-3);
    let m = symmetrize(&partial_trace(&g, d, Slot::Second));
    let inv_sqrt = eigh(&m, 1e-9).unwrap().map(|v| real(1.0 / v.sqrt()));
    let w = kron(&inv_sqrt, &identity(d));
    symmetrize(&(&w * g * &w))
}

/// Weak duality against random feasible points, solver optimality against
/// them, and positive homogeneity `SDP(cJ) = c SDP(J)`.
pub fn sdp_engine(cases: u32) -> Result<u32, String> {
    run(cases, (2usize..=3, any::<u64>(), 0.25f64..4.0), |(d, seed, scale)| {
        let j = random_choi(d, seed);
        // Any β with J + β⊗I ⪰ 0 bounds any feasible Γ: Tr β ≥ -Tr(JΓ).
        let shift = (-min_eigenvalue(j.matrix())).max(0.0) + 0.1;
        let beta = identity(d) * real(shift);
        let gamma = random_dual_point(d, seed ^ 0x5eed);
        prop_assert!(min_eigenvalue(&gamma) >= -1e-10);
        prop_assert!((partial_trace(&gamma, d, Slot::Second) - identity(d)).norm() <= 1e-9);
        let dual_value = -trace_product_re(j.matrix(), &gamma);
        prop_assert!(beta.trace().re >= dual_value - 1e-9);

        let sol = solve_primal(&j).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Optimal);
        prop_assert!(sol.gap >= -1e-8 && sol.gap <= 1e-6, "gap {}", sol.gap);
        prop_assert!(sol.primal_value <= beta.trace().re + 1e-7);
        prop_assert!(sol.primal_value >= dual_value - 1e-7);
        prop_assert!(sol.dual_value >= dual_value - 1e-6);

        let scaled = solve_primal(&j.scaled(scale)).unwrap();
        let tol = 1e-5 * (1.0 + sol.primal_value.abs() * scale);
        prop_assert!((scaled.primal_value - scale * sol.primal_value).abs() <= tol);
        Ok(())
    })
}

// ---------------------------------------------------------------- linalg core

/// `devectorize ∘ vectorize = id`, `⟨⟨A|B⟩⟩ = Tr(A†B)`,
/// `(A ⊗ B)|C⟩⟩ = |A C B^T⟩⟩`, and partial traces of products.
pub fn linalg_core(cases: u32) -> Result<u32, String> {
    run(cases, (1usize..=6, 1usize..=4, any::<u64>()), |(n, m, seed)| {
        let a = random_matrix(n, n, seed);
        let b = random_matrix(n, n, seed ^ 7);
        let va = vectorize(&a).unwrap();
        prop_assert_eq!(va.len(), n * n);
        prop_assert_eq!(devectorize(&va).unwrap(), a.clone());
        let vb = vectorize(&b).unwrap();
        prop_assert!((va.dotc(&vb) - (a.adjoint() * &b).trace()).norm() <= 1e-12);
        let cm = random_matrix(n, n, seed ^ 9);
        let lhs = kron(&a, &b) * vectorize(&cm).unwrap();
        let rhs = vectorize(&(&a * &cm * b.transpose())).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10);

        let x = random_matrix(m, m, seed ^ 11);
        let y = random_matrix(m, m, seed ^ 13);
        let xy = kron(&x, &y);
        prop_assert!((partial_trace(&xy, m, Slot::Second) - &x * y.trace()).norm() <= 1e-12);
        prop_assert!((partial_trace(&xy, m, Slot::First) - &y * x.trace()).norm() <= 1e-12);
        Ok(())
    })
}

// ---------------------------------------------------------------- func dsl

fn fixed(i: usize) -> Arc<FixedMatrix> {
    FixedMatrix::new(format!("v{i}.json"), haar_unitary(3, 900 + i as u64).unwrap()).unwrap()
}

fn primitive() -> impl Strategy<Value = FuncExpr> {
    prop_oneof![
        Just(FuncExpr::Id),
        Just(FuncExpr::Inverse),
        Just(FuncExpr::Transpose),
        Just(FuncExpr::Conjugate),
        (-5i32..=5).prop_filter("nonzero", |k| *k != 0).prop_map(FuncExpr::Power),
        (0usize..3).prop_map(|i| FuncExpr::LeftMul(fixed(i))),
        (0usize..3).prop_map(|i| FuncExpr::RightMul(fixed(i))),
        (0usize..3).prop_map(|i| FuncExpr::Sandwich(fixed(i))),
    ]
}

pub fn arb_expr() -> impl Strategy<Value = FuncExpr> {
    primitive().prop_recursive(6, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| FuncExpr::compose(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| FuncExpr::product(a, b)),
        ]
    })
}

/// print → parse gives back the same tree, printing is a fixed point, and
/// the reparsed tree evaluates identically.
pub fn func_dsl(cases: u32) -> Result<u32, String> {
    let files: BTreeMap<String, ComplexMatrix> = (0..3).map(|i| (format!("v{i}.json"), fixed(i).matrix.clone())).collect();
    run(cases, (arb_expr(), any::<u64>()), |(e, seed)| {
        let mut resolve = |name: &str| files.get(name).cloned().ok_or_else(|| Error::InvalidArgument(name.into()));
        let printed = e.to_string();
        let back = parse_with(&printed, 3, &mut resolve).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), printed);
        let u = haar_unitary(3, seed).unwrap();
        prop_assert_eq!(back.evaluate(&u).unwrap(), e.evaluate(&u).unwrap());
        Ok(())
    })
}

// ---------------------------------------------------------------- derivatives

/// Chain/product-rule derivatives of random expression trees agree with
/// finite differences at random base points.
pub fn dsl_derivatives(cases: u32) -> Result<u32, String> {
    run(cases, (arb_expr(), any::<u64>()), |(e, seed)| {
        let u0 = haar_unitary(3, seed).unwrap();
        let exact = choi_gellmann(&dsl_derivative(&e, &u0).unwrap()).unwrap();
        let fd = choi_gellmann(&finite_difference_default(&e, &u0).unwrap()).unwrap();
        let err = (exact.matrix() - fd.matrix()).norm();
        prop_assert!(err <= 1e-6, "{e}: {err:.3e}");
        Ok(())
    })
}
