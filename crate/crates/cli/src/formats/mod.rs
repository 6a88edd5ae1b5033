//! On-disk formats: raw tensors, grid dumps, PNG images and masks, and
//! evaluation reports.

pub mod grid;
pub mod png;
pub mod raw;
pub mod report;
