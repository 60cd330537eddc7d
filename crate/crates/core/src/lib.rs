//! Threshold and Markov-channel analysis of spatially coupled LDPC codes with
//! sub-block locality (SC-LDPCL) over the binary erasure channel.

pub mod de;
pub mod error;
pub mod markov;
pub mod protograph;
pub mod reference;
pub mod sb_analysis;

pub use error::{Error, Result};
