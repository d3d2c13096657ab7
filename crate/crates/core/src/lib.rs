pub mod features;
pub mod geo;
pub mod ingest;
pub mod llm;
pub mod profile;
pub mod prompt;
pub mod schedule;
pub mod service;
pub mod time;
pub mod sim;
