pub mod channel;
pub mod cohort;
pub mod config;
pub mod ehr;
pub mod error;
pub mod eval;
pub mod features;
pub mod learners;
pub mod pipeline;
pub mod provenance;
pub mod pts;
pub mod ranking;
pub mod seed;

pub use channel::Channel;
pub use error::{Error, Result};
