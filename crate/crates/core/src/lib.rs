pub mod embedding;
pub mod error;
pub mod harness;
pub mod index;
pub mod intent;
pub mod metrics;
pub mod plan;
pub mod plancache;
pub mod planner;
pub mod request;
pub mod template;
pub mod text;

pub use error::{Error, Result};
pub use request::Request;
