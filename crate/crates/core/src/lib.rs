//! Solver and verifier for jointly convex generalized Nash equilibrium
//! problems through the normal-cone operator of the players' strict sublevel
//! sets.

pub mod cli;
pub mod error;
pub mod exprdsl;
pub mod fixtures;
pub mod geometry;
pub mod gnep;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod lp;
pub mod nnls;
pub mod normal;
pub mod vi;

pub use error::{Error, Result};
