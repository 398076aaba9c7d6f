//! Exact slope calculus for Frobenius modules over truncated Robba rings.
//!
//! Everything is computed in exact rational arithmetic. Analytic rings are
//! represented by Laurent series truncated to a working window together with
//! valuation certificates for the omitted coefficients, so every reported
//! valuation is either exact or an explicit interval.
//!
//! The crate is organised bottom-up:
//!
//! - [`coeff`]: the coefficient field `Q_p` (exact rationals with p-adic
//!   valuation queries) and the prime/window context.
//! - [`series`]: truncated Laurent series, Gauss and radius valuations,
//!   Newton polygons of series, unit detection and inversion.
//! - [`frobenius`]: Frobenius lifts `T -> S`, the Gamma substitution action
//!   and the period element `t = log(1+T)`.
//! - [`phimodule`]: Frobenius matrices with degree/slope calculus and the
//!   tensor formalism.
//! - [`slopes`]: generic slope polygons via cyclic vectors and twisted
//!   polynomials, the valuation-splitting iteration and the perturbation
//!   constant.
//! - [`families`]: one-parameter families over `Q_p<x>`, specialisation,
//!   the approximation algorithm and the scan harnesses.
//! - [`phigamma`]: commuting phi/Gamma pairs, the coboundary recurrence,
//!   cocycle search, and the rank-2 fiber classifier.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coeff;
pub mod series;
pub mod newton;
pub mod frobenius;
pub mod matrix;
pub mod phimodule;
pub mod slopes;
pub mod families;
pub mod phigamma;
pub mod selftest;

mod error;

pub use coeff::{Coefficient, Ctx, Norm, Rat, Val};
pub use error::{Error, Result};
pub use series::{Bound, Series, WQuery};

/// Convenience constructor for exact rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    use num_bigint::BigInt;
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Convenience constructor for exact integers as rationals.
pub fn int(n: i64) -> Rat {
    use num_bigint::BigInt;
    Rat::from_integer(BigInt::from(n))
}
