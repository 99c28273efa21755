//! Exact computer algebra for the Lie algebras W(a,b): brackets, derivations,
//! biderivations and commutative post-Lie structures on finite windows of
//! the basis, solved by exact sparse elimination over ℚ(i).

pub mod bider;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod linmap;
pub mod postlie;
pub mod scalar;
pub mod wab;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};
pub use wab::{BasisVector, Element, Params, Tag};
