//! Config-driven experiment runner behind the `wmap-lab` binary.
//!
//! [`config`] defines the JSON experiment schema, [`runner`] executes a
//! parsed config and maps failures to exit codes (2 parse, 3 validation,
//! 4 task), and [`report`] renders result tables to CSV and JSON.

pub mod config;
pub mod report;
pub mod runner;
