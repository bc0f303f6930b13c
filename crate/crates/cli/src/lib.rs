//! Command-line front end: data ingestion, fitting and report files for
//! transformed phase-type models.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod params;
pub mod report;
