//! Numerics for the fractional Brezis–Nirenberg problem: closed-form constants,
//! Sobolev bubbles, Green's and Robin functions of the restricted fractional
//! Laplacian, test-function energy expansions, quotient minimization and the
//! stereographic balancing used in the non-attainment argument.

pub mod bubble;
pub mod constants;
pub mod energy;
pub mod error;
pub mod fit;
pub mod greens_ball;
pub mod greens_potential;
pub mod linalg;
pub mod minimizer;
pub mod grid;
pub mod params;
pub mod quad;
pub mod special;
pub mod stereo;
pub mod stiffness;

pub use error::{Error, Result};
pub use params::Params;
