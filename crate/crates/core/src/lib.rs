//! Exterior algebra, stable forms and Hitchin-type flows for invariant
//! structures on homogeneous spaces.

pub mod exterior;
pub mod flow;
pub mod g2spin7;
pub mod homogeneous;
pub mod linalg;
pub mod scalar;
pub mod stable;

pub use exterior::{KForm, LinearMap, Signature, SymBilinear, Vector, VolumeForm};
pub use linalg::Matrix;
pub use scalar::{Rational, Scalar};
