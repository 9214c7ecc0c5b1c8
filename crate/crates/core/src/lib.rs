//! Knowledge-base question answering with unanswerability detection.

pub mod dataset;
pub mod executor;
pub mod gateway;
pub mod kb;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod query;
pub mod retrieval;
pub mod value;
pub mod verifiers;
