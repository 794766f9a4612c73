//! Numerical tools for Fourier decay of surface-carried measures, averaged
//! Radon-type operators, and the rank conditions that govern them.

pub mod cli;
pub mod decay;
pub mod geometry;
pub mod nondegeneracy;
pub mod numerics;
pub mod oscillatory;
pub mod probes;
pub mod radon;
