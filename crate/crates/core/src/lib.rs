//! Incremental context modeling for scene understanding.
//!
//! Synthetic scene corpora are drawn from the LDA generative process with a
//! known number of contexts; LDA models fitted with fewer contexts yield
//! labelled "add a context?" examples; a recurrent classifier (CINet) learns
//! that decision and then drives an incremental modeling loop.

pub mod dataset;
pub mod error;
pub mod incremental;
pub mod io;
pub mod lda;
pub mod rng;
pub mod rnn;

pub use error::{Error, Result};
