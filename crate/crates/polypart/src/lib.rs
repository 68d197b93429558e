//! Polynomial-partition based range searching with semialgebraic ranges.
//!
//! The library builds r-partitioning polynomials for weighted point sets by
//! a randomized dissection algorithm, stacks them into a linear-size
//! partition tree, and answers counting/reporting queries against Boolean
//! combinations of polynomial inequalities. All geometric decisions are
//! exact over the rationals; floating point only accelerates, never decides.

pub mod datagen;
pub mod dissector;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod partition;
pub mod patches2d;
pub mod polycore;
pub mod ranges;
pub mod tree;

pub use partition::{build_partition, PolynomialPartition, WeightedPointSet};
pub use polycore::{MultiPoly, RationalPoint, SignValue};
pub use ranges::SemialgebraicRange;
pub use tree::{build_tree, PartitionTree, TreeParams};
