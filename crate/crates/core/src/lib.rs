//! Allocation-only core of the `eqsim` parallel rendering toolkit.
//!
//! Everything in this crate is pure computation over caller-provided buffers
//! and clocks: byte-stream framing and compression, the reliable multicast
//! state machine, versioned-object bookkeeping, compound trees and their
//! config syntax, load-balancing equalizers, and the synthetic workload
//! simulator. IO, threads and the command line live in the `eqsim` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod codec;
pub mod compound;
pub mod equalizer;
pub mod object;
pub mod rsp;
pub mod sim;
