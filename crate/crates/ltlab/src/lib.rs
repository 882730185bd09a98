//! Exact computational calculus on Lubin-Tate formal groups over local
//! fields: truncated Laurent series with dual precision tracking, the
//! Frobenius/trace/norm operator calculus, residue pairings on differential
//! forms, ramified Witt vectors with their canonical splittings, the
//! Schmid-Witt residue pairing, and Coates-Wiles homomorphisms.
//!
//! Everything is exact modulo an explicit `(pi^n, Z^m)` precision window;
//! no floating point is involved anywhere.

pub mod base_ring;
pub mod coleman;
pub mod error;
pub mod lubin_tate;
pub mod rational;
pub mod series;

pub use base_ring::{BaseElem, BaseRingSpec, ResidueElem};
pub use error::{Error, Result};
pub use series::{IntSeries, ResSeries, Series};
