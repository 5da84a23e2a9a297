//! Standard-library companion of `esig-core`: run configuration, JSON and
//! CSV output, parallel drivers, verification suites and the subcommands of
//! the `esig` tool.

pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;
pub mod verify;
