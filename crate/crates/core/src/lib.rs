//! Acyclic unique sink orientations (AUSOs) of hypercubes, the product and
//! reorientation combinators, history-based pivot rules, and the recursive
//! lower-bound constructions for the Cunningham, Johnson and Zadeh rules.

pub mod combinators;
pub mod constructions;
pub mod cube;
pub mod frames;
pub mod pivot;
pub mod verify;

pub use cube::{Coordinate, Direction, Face, Oracle, Outmap, SharedOracle, Sign, Vertex};
pub use frames::Family;
