//! Code-review analytics: mining review histories, classifying review-comment
//! usefulness, and scoring reviewer and project effectiveness.

pub mod features;
pub mod ingest;
pub mod labels;
pub mod learn;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod synth;
pub mod textfeat;
