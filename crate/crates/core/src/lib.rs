//! Schema-on-read data lake for healthcare records.

pub mod analytics;
pub mod catalog;
pub mod clock;
pub mod experiment;
pub mod ingest;
pub mod kv;
pub mod lake;
pub mod scheduler;
pub mod security;
pub mod store;
pub mod warehouse;
