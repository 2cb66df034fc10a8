pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod labeling;
pub mod lda;
pub mod neurostats;
pub mod pipeline;
pub mod preprocess;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
