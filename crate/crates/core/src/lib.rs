//! Integrated Forward-Forward (IntFF) training.
//!
//! A network is a chain of *hidden units*. Each unit L2-normalizes its input,
//! runs a short dense/ReLU stack, and exposes its final layer as the
//! *selected group*. The mean square of the selected group is the unit's
//! goodness. Training runs a positive pass (true label overlaid on the image)
//! and a negative pass (wrong label overlaid), and each unit minimizes its own
//! local loss by backpropagating through its own layers only.
//!
//! Singleton units reduce exactly to the original Forward-Forward rule, and
//! the same model type carries an optional softmax head for a plain
//! backpropagation baseline.

pub mod checks;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod seeds;
pub mod training;

pub use error::{Error, Result};
