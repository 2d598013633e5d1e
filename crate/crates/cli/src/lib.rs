//! Command-line front end and HTTP service for annotation sessions.

pub mod commands;
pub mod server;
