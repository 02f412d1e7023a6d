//! A desk-scale numerical laboratory for Brunn-Minkowski type inequalities.
//!
//! The crate provides exact low-dimensional polytope arithmetic (Minkowski,
//! L_p and linear-image combinations, difference bodies), weighted power
//! means with extended exponents, layered step functions with the splitting
//! and threshold-matching machinery used to lift set inequalities to
//! functional ones, sup-convolutions over several constraint families, a
//! multi-start optimizer for the reverse Brascamp-Lieb constant, and a
//! seeded verification harness that checks every inequality family at desk
//! scale with explicit error bars.

pub mod barthe;
pub mod error;
pub mod harness;
pub mod means;
pub mod measure;
pub mod polytope;
pub mod rng;
pub mod stepfn;
pub mod supconv;

pub use error::{Error, Result};
pub use means::{Exponent, GaussianMean, MeanSpec, WeightVector};
pub use measure::{Budget, IntegrationResult, MeasureSpec};
pub use polytope::{DirectionSet, Facet, Polytope, SymmetryClass};
pub use stepfn::{ClassTag, LayeredFunction, ProfileSpec};
pub use supconv::{ConstraintFamily, GridFunction, MaxLayerFunction, SupConvolutionSpec};
