//! Exact computation of the distance from square pyramidal numbers to their
//! closest squares, its moments, and the equidistribution machinery around
//! the fractional parts of `√P_n`.

pub mod equidist;
pub mod error;
pub mod exactseq;
pub mod fixed;
pub mod isqrt;
pub mod minimax;
pub mod moments;
pub mod monomial;
pub mod parallel;

pub use error::{Error, Result};
pub use exactseq::{RangeSpec, Side, Term};
pub use fixed::Fixed;
pub use parallel::Parallelism;
