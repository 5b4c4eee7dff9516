//! Near-field beam focusing with lossy dynamic metasurface antennas.

pub mod array_model;
pub mod beamdepth;
pub mod cli;
pub mod gain;
pub mod specfun;
