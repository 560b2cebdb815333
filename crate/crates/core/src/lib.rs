//! Non-Hermitian qubit dynamics, speed of evolution, Leggett–Garg
//! correlations and their three-level Lindblad embedding.
//!
//! The guide in `book/` walks through each module; its snippets are compiled
//! and run as doctests below.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod export;
pub mod lgi;
pub mod lindblad3;
pub mod nhq;
pub mod ode;
pub mod optimize;
pub mod qmat;
pub mod soe;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/speed.md")]
    pub mod speed {}
    #[doc = include_str!("../../../book/src/lgi.md")]
    pub mod lgi {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    pub mod optimization {}
    #[doc = include_str!("../../../book/src/three_level.md")]
    pub mod three_level {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
