//! Wilson-Cowan and local-histogram-equalisation neural fields on the retinal
//! plane and on the lifted space of positions and orientations.

pub mod error;
pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod grid;
pub mod lifting;
pub mod stimuli;

pub use error::{Error, Result};
