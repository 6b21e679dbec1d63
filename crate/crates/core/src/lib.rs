//! Cell-level analysis of multi-cell IEEE 802.11 infrastructure WLANs in
//! which every pair of cells either fully senses each other or does not
//! interact at all.
//!
//! * [`topology`] builds the contention graph from AP geometry and enumerates
//!   its independent sets.
//! * [`dcf`] holds MAC timing and the single-cell saturation model.
//! * [`multicell`] couples a product-form CTMC over independent sets with a
//!   per-cell collision fixed point to get saturation and TCP throughputs.
//! * [`flows`] models short TCP downloads as processor-sharing queues with
//!   state-dependent rates and predicts mean transfer delays.
//! * [`simkit`] contains Monte-Carlo simulators used to cross-check the
//!   analytic results.

pub mod cellset;
pub mod dcf;
pub mod flows;
pub mod multicell;
pub mod rng;
pub mod simkit;
pub mod topology;

pub use cellset::{CellSet, MAX_CELLS};
