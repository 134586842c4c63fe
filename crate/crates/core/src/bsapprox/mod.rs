//! Majorant and minorant trigonometric polynomials for ball indicators.

pub mod kernel;
pub mod pair;
pub mod poly;

pub use pair::{ball_pair_2d, certify, default_grid, eval_poly, interval_pair, sandwich_pair, translate_poly, SandwichPair};
pub use poly::{Pairing, TrigPolynomial};
