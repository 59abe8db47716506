//! Conditional tabular GAN with mixed-type encoding, differentially
//! private training and synthetic-data auditing.

pub mod attacks;
pub mod autodiff;
pub mod conditioning;
pub mod data;
pub mod encoder;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod ml;
pub mod privacy;

pub use data::{Cell, ColumnKind, ColumnSpec, Table, TableSchema};
pub use encoder::{EncoderConfig, EncodingLayout, TableEncoder};
pub use error::{Error, Result};
