//! Root systems, diagram automorphisms and twisted graded bases.

mod algebra;
mod roots;

pub use algebra::{build_twisted_algebra, CMat, Generator, GeneratorKind, SigmaRs, TwistedLieAlgebra, Variant};
pub use roots::{build_outer, build_root_system, fixed_root_is_odd, orbit_decompose, Family, Folding, OuterAutomorphism, RootSystem};
