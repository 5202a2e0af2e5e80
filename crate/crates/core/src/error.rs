//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

use crate::model::Label;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model and a feature vector or dataset disagree on dimension.
    DimMismatch { expected: usize, got: usize },
    /// A box index does not exist in the frame.
    BoxIndex { index: usize, len: usize },
    /// A value that must be finite came out NaN or infinite.
    NonFinite { context: &'static str },
    /// Construction-time validation of a domain type failed.
    InvalidData(String),
    /// A configuration value is out of range.
    InvalidConfig(String),
    /// An operation that needs at least one frame got none.
    EmptyDataset,
    /// Training requires samples (or frames) of this class and found none.
    MissingClass { class: Label },
    /// Ground truth contains a single class, so ranking metrics are undefined.
    SingleClassGroundTruth,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::BoxIndex { index, len } => {
                write!(f, "box index {index} out of range for frame with {len} boxes")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::EmptyDataset => write!(f, "dataset contains no frames"),
            Error::MissingClass { class } => {
                write!(f, "no {} samples present", class.name())
            }
            Error::SingleClassGroundTruth => {
                write!(f, "ground truth has a single class; ROC metrics undefined")
            }
        }
    }
}

impl core::error::Error for Error {}
