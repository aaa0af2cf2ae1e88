pub mod dsp;
pub mod embed;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod songgen;
pub mod tensor;
pub mod types;
pub mod xai;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub use types::{Background, BackgroundSet, SongClass};
