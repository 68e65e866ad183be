//! Numerical toolkit for real Kähler submanifolds of codimension four.
//!
//! Pointwise second-fundamental-form algebra ([`sff`]), the complex part of the normal
//! space ([`complex_part`]), seeded instance generators ([`instance_gen`]), sampled
//! immersions with finite-difference jets ([`immersion`]) and the developable-ruling
//! extension with its Kähler verification ([`extension`]).

pub mod cli;
pub mod complex_part;
pub mod extension;
pub mod immersion;
pub mod instance_gen;
pub mod linalg;
pub mod report;
pub mod sff;
