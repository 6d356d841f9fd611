//! Threads, sockets and tools around [`eqsim_core`].

pub use eqsim_core as core;

pub mod bench;
pub mod codec;
pub mod net;
pub mod objects;
