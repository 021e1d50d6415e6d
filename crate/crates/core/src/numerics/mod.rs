//! Numerical building blocks shared by the model modules.

pub mod conv;
pub mod quad;
pub mod special;
pub mod stats;
