//! Batch experiments, tables and file I/O on top of `dro_opf`.

pub mod config;
pub mod experiment;
pub mod summary;
