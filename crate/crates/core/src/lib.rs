//! Simulation of four-slit spatial qudit states prepared with a programmable
//! liquid-crystal spatial light modulator.
//!
//! * [`jones`]: polarizers and the parameterized Jones matrix of one LCD pixel.
//! * [`calibration`]: fitting per-grey-level Jones parameters and searching for
//!   an amplitude-only polarizer configuration.
//! * [`qudit`]: multi-slit apertures, qudit states and rendered pixel masks.
//! * [`propagation`]: image-plane and focal-plane coincidence profiles.
//! * [`harness`]: experiment runners, presets and the CLI front end.

pub mod calibration;
pub mod error;
pub mod harness;
pub mod jones;
pub mod propagation;
pub mod quadrature;
pub mod qudit;

pub use error::{Error, Result};
