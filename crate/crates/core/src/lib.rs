pub mod checks;
pub mod conserved;
pub mod embedding;
pub mod error;
pub mod fit;
pub mod initial_data;
pub mod jet;
pub mod lorentz;
pub mod pipeline;
pub mod reference;
pub mod sphere;
pub mod surface;

pub use error::{Error, Result};
