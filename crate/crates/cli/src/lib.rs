//! Command line and HTTP front end for `curvecast`.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod service;
