//! Joint antenna selection and transmit/active-RIS beamforming for
//! dual-function radar-communication.
//!
//! [`optimizer::optimize`] runs the alternating transmit/RIS loop on one
//! channel realization; [`experiments`] drives seeds, sweeps and output files.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod par;
pub mod ris_fp;
pub mod scenario;
pub mod sdp;
pub mod selection;
pub mod wmmse;
