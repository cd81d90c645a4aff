//! Library side of the `macc` binary.

pub mod sweep;
