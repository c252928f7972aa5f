//! Exact combinatorics of Diestel-Leader graphs `DL(n,n)` and their n-adic
//! boundaries.
//!
//! The crate models:
//!
//! * [`boundary`] -- points, clones (ultrametric balls) and clopen sets of the
//!   n-adic boundary, with exact rational measure;
//! * [`dlgraph`] -- finite height-band truncations ("boxes") of `DL(n,n)`
//!   with exact adjacency, graph metric and Folner boundary ratios;
//! * [`qmaps`] -- piecewise clone-similarity self-maps of boundary windows:
//!   the representable class of bilipschitz maps, with measure-linear
//!   analysis, zoom renormalization and prime-support checks;
//! * [`lift`] -- the coordinatization of `DL(n,n)` inside
//!   `Q_n x Q_n x R`, lifted standard maps, the k-to-1 `up` retraction and
//!   preimage audits;
//! * [`ufh`] -- degree-zero uniformly finite homology at finite scale:
//!   bounded chains, pushforward classes, the Whyte statistic and a
//!   bounded-radius matching search.
//!
//! All arithmetic is exact (arbitrary-precision rationals); nothing here
//! does IO. The companion `lamplight-cli` crate carries file formats and the
//! experiment runner.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod boundary;
pub mod dlgraph;
pub mod lift;
pub mod qmaps;
pub mod ratio;
pub mod rng;
pub mod ufh;

pub use num_rational::BigRational as Rational;
