//! Bit-accurate fixed-point simulation and design tooling for CIC
//! decimation filters and the multirate chain around them.

pub mod analysis;
pub mod chain;
pub mod cic;
pub mod error;
pub mod fir;
pub mod fixed_point;
pub mod mcla;
pub mod netlist;
pub mod samplefile;
pub mod sources;

pub use error::{Error, Result};
pub use fixed_point::FixedWord;
