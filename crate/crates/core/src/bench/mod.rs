//! Synthetic workbook generation and benchmark execution.

pub mod gen;
pub mod harness;
pub mod report;
pub mod zipwrite;
