//! Territorial knowledge capital and research productivity indicators
//! computed from a bibliographic corpus.
//!
//! The pipeline: load and validate inputs ([`corpus`]), locate institutions
//! in the territorial hierarchy ([`territory`]), split each publication's
//! credit across authors and places ([`credit`]), field-normalize impact
//! ([`normalize`]), attribute bylines to roster professors ([`matching`]),
//! then compute FSS and KC ([`indicators`]).

pub mod config;
pub mod corpus;
pub mod credit;
pub mod fold;
pub mod format;
pub mod indicators;
pub mod matching;
pub mod normalize;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod territory;
