//! Command-line front end and the annotation server.

pub mod commands;
pub mod server;
