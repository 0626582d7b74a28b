//! Command line, session store and HTTP API for the protocol games of
//! `protogame`.

pub mod api;
pub mod catalog;
pub mod cli;
pub mod session;
pub mod store;
