pub mod config;
pub mod dataset;
pub mod defense;
pub mod error;
pub mod experiment;
pub mod features;
pub mod oracle;
pub mod poisoning;
pub mod regressor;
pub mod report;
pub mod search;

pub use error::{Error, Result};
