//! Configuration, manifest and subcommands of the `dkg` binary.

pub mod commands;
pub mod config;
pub mod manifest;
