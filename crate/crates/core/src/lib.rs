//! Lower bounds on the number of queries to a black-box unitary `U` needed to
//! implement `f(U)`, from a semidefinite program on the derivative of `f`.
//!
//! The guide in `book/` walks through the pipeline; its code listings run as
//! doctests of this crate.

pub mod catalysis;
pub mod derivative;
pub mod dsl;
pub mod error;
pub mod lie;
pub mod sdp;
pub mod linalg;
pub mod prob;
pub mod registry;
pub mod task;

pub use error::{Error, Result};

/// Runs the code listings of the guide in `book/` as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/bases.md")]
    mod bases {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/derivatives.md")]
    mod derivatives {}
    #[doc = include_str!("../../../book/src/deterministic.md")]
    mod deterministic {}
    #[doc = include_str!("../../../book/src/subgroups.md")]
    mod subgroups {}
    #[doc = include_str!("../../../book/src/probability.md")]
    mod probability {}
    #[doc = include_str!("../../../book/src/catalysis.md")]
    mod catalysis {}
    #[doc = include_str!("../../../book/src/registry.md")]
    mod registry {}
}
