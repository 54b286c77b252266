//! Sparse recovery with the transformed-lp (TLp) penalty.
//!
//! * [`penalty`]: the TLp function, the lp and l_a^p comparison penalties, and
//!   relaxation degrees.
//! * [`theory`]: RIP recovery bound, stability constants and normalization.
//! * [`sensing`]: Gaussian and over-sampled DCT matrices, sparse signals, coherence.
//! * [`solver`]: IRLSTLp (reweighting outer loop, DCA inner loop), the
//!   constrained modified IRLS, and an IRLS-lq baseline.
//! * [`bench`]: success-rate experiments and parameter sweeps.
//! * [`cli`]: the `tlp` command-line tool.

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod penalty;
pub mod sensing;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use penalty::PenaltyParams;
