//! Command line, configuration, corpus tooling and the HTTP gateway.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod server;
