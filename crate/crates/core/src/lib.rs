//! Gated single-photon detector simulation and characterization.
//!
//! The crate has two halves that close a loop. [`model`] and [`sim`] generate
//! click streams from a detector with trapped-carrier afterpulsing, dark
//! counts, hold-off and timing jitter. [`experiments`] and [`estimation`]
//! run the measurement procedures on those streams (gate-delay sweeps,
//! two-delay afterpulse probability, dark-count scans, TDC histograms) and
//! fit the power-law afterpulse decay and the jitter FWHM.
//!
//! [`config`], [`io`] and [`cli`] provide the file formats and the
//! `spdchar` command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod model;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/traps.md")]
    mod traps {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/afterpulsing.md")]
    mod afterpulsing {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/dark-counts.md")]
    mod dark_counts {}
    #[doc = include_str!("../../../book/src/jitter.md")]
    mod jitter {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
