//! Residual feature augmentation for tabular datasets.
//!
//! For every class of a binary target (or once, for regression targets) a
//! bank of random forests learns each attribute from the remaining
//! attributes. The absolute prediction error of every bank on every row,
//! weighted by the square of the model's held-out R², becomes a new feature
//! column. [`eval`] then compares cross-validated performance of a final
//! model on the original and the augmented table.

pub mod augment;
pub mod config;
pub mod error;
pub mod eval;
pub mod frame;
pub mod ingest;
pub mod learner;
pub mod pipeline;

pub use error::{Error, Result};
pub use frame::{Cell, FrameTable, RawTable};
