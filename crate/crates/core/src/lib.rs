//! Packet format specifications, test packet generation, and differential
//! comparison of two specifications of the same format.

pub mod bfd;
pub mod diff;
pub mod gen;
pub mod spec;

pub use spec::{parse_spec, serialize_canonical, validate_spec, FormatSpec};
