//! Care-coordination pattern mining from EMR access-event logs.
//!
//! The pipeline goes: ingest event logs and patient records, co-cluster the
//! area × patient utilization matrix to find patient groups and the care
//! areas that serve them, summarize each group's coordination network,
//! regress length of stay on group membership, and check confounder balance
//! between groups. A synthetic cohort generator with planted structure
//! provides ground truth for end-to-end verification.

pub mod cocluster;
pub mod datamodel;
pub mod error;
pub mod matrix;
pub mod network;
pub mod pipeline;
pub mod seeding;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
