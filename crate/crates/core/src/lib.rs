pub mod error;
pub mod fft;
pub mod field;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod io;
pub mod littlewood_paley;
pub mod noise;
pub mod paraproduct;
pub mod rng;
pub mod semigroup;
pub mod series;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Field, Spectrum};
pub use grid::{MultiIndex, TorusGrid};
