//! Operator surface for the evochain simulator: the `evochain` command line
//! and the HTTP/JSON service behind the gallery.

pub mod api;
pub mod cli;
