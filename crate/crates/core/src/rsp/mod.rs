//! Reliable ordered streams over an unreliable multicast datagram service.
//!
//! Each member owns one outgoing stream, split into sequenced DATA datagrams
//! kept in a bounded sliding window. Receivers NACK gaps as soon as they see
//! them, send a cumulative ACK every `ack_freq` datagrams (staggered by their
//! own member id), and answer the writer's ACKREQ when it runs idle or out
//! of buffers. The send rate follows additive increase and decrease and is
//! enforced with a token bucket.

mod bucket;
mod config;
mod protocol;
pub mod seq;
pub mod sim;
pub mod wire;

pub use bucket::{congestion_update, RateEvent, TokenBucket};
pub use config::RspConfig;
pub use protocol::{Protocol, RspStats};
pub use wire::{Datagram, DatagramType, Header, NackRange};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RspError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("member id {0} appears twice in the group")]
    DuplicateMember(u16),
    #[error("member {0} uses a different protocol configuration")]
    ConfigMismatch(u16),
    #[error("{0} is not a member of the group")]
    NotAMember(u16),
    #[error("unknown member {0}")]
    UnknownMember(u16),
    #[error("member {0} stopped responding")]
    MemberLost(u16),
    #[error("writer {0} left before its stream was complete")]
    WriterLeft(u16),
    #[error("malformed datagram: {0}")]
    Malformed(&'static str),
    #[error("request exceeds the bucket capacity")]
    Unsatisfiable,
    #[error("endpoint closed")]
    Closed,
}
