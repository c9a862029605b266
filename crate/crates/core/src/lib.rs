//! Compiles trained machine-learning models into match/action pipeline
//! programs and verifies them against reference inference.

pub mod codegen;
pub mod error;
pub mod ir;
pub mod mapping;
pub mod metrics;
pub mod model;
pub mod preset;
pub mod report;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
pub use mapping::{convert, ConvertConfig, Variant};
pub use ir::{PipelineProgram, Simulator};
pub use model::{Family, FeatureSchema, FeatureVector, Label, ModelSpec};
