//! Exact martingale analysis on finite filtered probability spaces.
//!
//! The crate realizes discrete-time stochastic analysis on explicit finite
//! trees: filtered spaces with exact expectations, martingales with their
//! maximal and square functions, paraproducts of martingale pairs,
//! ρ-variation and jump-counting functionals computed by dynamic
//! programming, a Gundy-type decomposition, the Heisenberg-group lift of a
//! martingale pair, and a verification engine that measures both sides of
//! the classical inequalities relating all of these quantities.
//!
//! Everything is a finite sum in `f64`; there is no sampling or
//! discretization error, so identities hold to rounding accuracy and
//! inequality checks are exact measurements.

pub mod error;
pub mod generators;
pub mod gundy;
pub mod heisenberg;
pub mod martingale;
pub mod paraproduct;
pub mod report;
pub mod space;
pub mod tol;
pub mod variation;
pub mod verify;

pub use error::{Error, Result};
pub use gundy::{gundy_decompose, gundy_report, GundyParts};
pub use heisenberg::{HeisenbergElement, HeisenbergPath};
pub use martingale::{AdaptedProcess, DerivedMartingale, Martingale};
pub use paraproduct::{Paraproduct, RandomPartition};
pub use report::CheckReport;
pub use space::{
    ExponentTriple, FilteredSpace, RandomVariable, StoppingSequence, StoppingTime,
};
pub use variation::{IncrementKernel, JumpStoppingTimes, ParaproductKernel, ScalarKernel};
