//! Live session server for the `frost-hollow` binary.

pub mod serve;
