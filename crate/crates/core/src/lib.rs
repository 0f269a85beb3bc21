//! Toolchain for turning image + title news corpora into text-only datasets
//! and measuring how much of the image survives the conversion.

pub mod featurize;
pub mod gateway;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod translate;

mod net;
pub mod util;
