//! Configuration, verification suite and report plumbing for the `ymbubble` binary.

pub mod commands;
pub mod config;
pub mod suite;
