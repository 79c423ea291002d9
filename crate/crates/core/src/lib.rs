//! Numerical estimators for measures of non-compactness on spaces of bounded
//! continuous functions sampled on a grid, a finite Wallman ultrafilter
//! laboratory, and a Darbo-type fixed-point solver for integral equations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod darbo;
pub mod domain;
pub mod error;
pub mod expr;
pub mod extended;
pub mod family;
pub mod measure;
pub mod wallman;

pub use domain::{make_grid, neighborhood, sup_distance, GridDomain, NeighborhoodSpec};
pub use error::{Error, Result};
pub use expr::{parse_expr, parse_family, Expr, FamilyExpr, ParseError};
pub use extended::ExtendedNonNegReal;
pub use family::{
    convex_sample, materialize, scale, union, FamilyPart, FunctionFamily, SampledFunction,
};
