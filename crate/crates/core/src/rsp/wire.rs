//! Datagram layout.
//!
//! Every datagram starts with an 8-byte little-endian header:
//!
//! ```text
//! u8   type      DATA=0 ACK=1 NACK=2 ACKREQ=3 BEACON=4
//! u8   flags
//! u16  writer    id of the sending member
//! u32  sequence
//! ```
//!
//! Control payloads:
//!
//! * ACK: `u16 target`; the header sequence is the next sequence the sender
//!   expects from `target` (everything below it was received).
//! * NACK: `u16 target, u8 count, count * (u32 first, u32 last)`; the header
//!   sequence is the next expected sequence, as for ACK.
//! * ACKREQ: no payload; the header sequence is the writer's next unsent
//!   sequence.
//! * BEACON: `u16 mtu, u32 num_buffers, u16 ack_freq, u32 nonce`; the header
//!   sequence is the sender's next sequence.

use alloc::vec::Vec;

use super::RspError;

pub const HEADER_LEN: usize = 8;
pub const MAX_NACK_RANGES: usize = 15;

/// Set on an ACKREQ that repeats an unanswered request.
pub const FLAG_RETRY: u8 = 0x01;
/// Set on a BEACON sent by a member leaving the group.
pub const FLAG_LEAVE: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DatagramType {
    Data = 0,
    Ack = 1,
    Nack = 2,
    AckReq = 3,
    Beacon = 4,
}

impl DatagramType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Self::Data,
            1 => Self::Ack,
            2 => Self::Nack,
            3 => Self::AckReq,
            4 => Self::Beacon,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub kind: DatagramType,
    pub flags: u8,
    pub writer: u16,
    pub sequence: u32,
}

impl Header {
    pub fn new(kind: DatagramType, writer: u16, sequence: u32) -> Self {
        Self { kind, flags: 0, writer, sequence }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.kind as u8);
        out.push(self.flags);
        out.extend_from_slice(&self.writer.to_le_bytes());
        out.extend_from_slice(&self.sequence.to_le_bytes());
    }

    pub fn decode(buf: &[u8]) -> Result<(Header, &[u8]), RspError> {
        if buf.len() < HEADER_LEN {
            return Err(RspError::Malformed("short header"));
        }
        let kind = DatagramType::from_u8(buf[0]).ok_or(RspError::Malformed("unknown type"))?;
        let h = Header {
            kind,
            flags: buf[1],
            writer: u16::from_le_bytes([buf[2], buf[3]]),
            sequence: u32::from_le_bytes([buf[4], buf[5], buf[6], buf[7]]),
        };
        Ok((h, &buf[HEADER_LEN..]))
    }
}

/// Inclusive range of missing sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NackRange {
    pub first: u32,
    pub last: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconInfo {
    pub mtu: u16,
    pub num_buffers: u32,
    pub ack_freq: u16,
    pub nonce: u32,
}

/// A decoded datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Datagram {
    Data { writer: u16, sequence: u32, payload: Vec<u8> },
    Ack { from: u16, target: u16, next: u32 },
    Nack { from: u16, target: u16, next: u32, ranges: Vec<NackRange> },
    AckReq { writer: u16, next: u32, retry: bool },
    Beacon { from: u16, next: u32, leave: bool, info: BeaconInfo },
}

impl Datagram {
    pub fn sender(&self) -> u16 {
        match *self {
            Datagram::Data { writer, .. } | Datagram::AckReq { writer, .. } => writer,
            Datagram::Ack { from, .. } | Datagram::Nack { from, .. } | Datagram::Beacon { from, .. } => from,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Datagram::Data { writer, sequence, payload } => {
                out.reserve(HEADER_LEN + payload.len());
                Header::new(DatagramType::Data, *writer, *sequence).encode(&mut out);
                out.extend_from_slice(payload);
            }
            Datagram::Ack { from, target, next } => {
                Header::new(DatagramType::Ack, *from, *next).encode(&mut out);
                out.extend_from_slice(&target.to_le_bytes());
            }
            Datagram::Nack { from, target, next, ranges } => {
                debug_assert!(ranges.len() <= MAX_NACK_RANGES);
                Header::new(DatagramType::Nack, *from, *next).encode(&mut out);
                out.extend_from_slice(&target.to_le_bytes());
                out.push(ranges.len() as u8);
                for r in ranges {
                    out.extend_from_slice(&r.first.to_le_bytes());
                    out.extend_from_slice(&r.last.to_le_bytes());
                }
            }
            Datagram::AckReq { writer, next, retry } => {
                let mut h = Header::new(DatagramType::AckReq, *writer, *next);
                if *retry {
                    h.flags |= FLAG_RETRY;
                }
                h.encode(&mut out);
            }
            Datagram::Beacon { from, next, leave, info } => {
                let mut h = Header::new(DatagramType::Beacon, *from, *next);
                if *leave {
                    h.flags |= FLAG_LEAVE;
                }
                h.encode(&mut out);
                out.extend_from_slice(&info.mtu.to_le_bytes());
                out.extend_from_slice(&info.num_buffers.to_le_bytes());
                out.extend_from_slice(&info.ack_freq.to_le_bytes());
                out.extend_from_slice(&info.nonce.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Datagram, RspError> {
        let (h, p) = Header::decode(buf)?;
        let short = RspError::Malformed("short payload");
        let u16_at = |i: usize| u16::from_le_bytes([p[i], p[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes([p[i], p[i + 1], p[i + 2], p[i + 3]]);
        Ok(match h.kind {
            DatagramType::Data => Datagram::Data {
                writer: h.writer,
                sequence: h.sequence,
                payload: p.to_vec(),
            },
            DatagramType::Ack => {
                if p.len() < 2 {
                    return Err(short);
                }
                Datagram::Ack { from: h.writer, target: u16_at(0), next: h.sequence }
            }
            DatagramType::Nack => {
                if p.len() < 3 {
                    return Err(short);
                }
                let n = p[2] as usize;
                if n == 0 || n > MAX_NACK_RANGES {
                    return Err(RspError::Malformed("bad nack range count"));
                }
                if p.len() < 3 + n * 8 {
                    return Err(short);
                }
                let mut ranges = Vec::with_capacity(n);
                for i in 0..n {
                    let first = u32_at(3 + i * 8);
                    let last = u32_at(7 + i * 8);
                    if super::seq::lt(last, first) {
                        return Err(RspError::Malformed("inverted nack range"));
                    }
                    ranges.push(NackRange { first, last });
                }
                Datagram::Nack { from: h.writer, target: u16_at(0), next: h.sequence, ranges }
            }
            DatagramType::AckReq => Datagram::AckReq {
                writer: h.writer,
                next: h.sequence,
                retry: h.flags & FLAG_RETRY != 0,
            },
            DatagramType::Beacon => {
                if p.len() < 12 {
                    return Err(short);
                }
                Datagram::Beacon {
                    from: h.writer,
                    next: h.sequence,
                    leave: h.flags & FLAG_LEAVE != 0,
                    info: BeaconInfo {
                        mtu: u16_at(0),
                        num_buffers: u32_at(2),
                        ack_freq: u16_at(6),
                        nonce: u32_at(8),
                    },
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn header_is_eight_bytes() {
        let mut out = Vec::new();
        Header::new(DatagramType::Ack, 0x0102, 0x0304_0506).encode(&mut out);
        assert_eq!(out, [1, 0, 0x02, 0x01, 0x06, 0x05, 0x04, 0x03]);
    }

    #[test]
    fn data_layout() {
        let d = Datagram::Data { writer: 7, sequence: 9, payload: vec![0xaa, 0xbb] };
        assert_eq!(d.encode(), [0, 0, 7, 0, 9, 0, 0, 0, 0xaa, 0xbb]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Datagram::decode(&[9, 0, 0, 0, 0, 0, 0, 0]).is_err());
        assert!(Datagram::decode(&[2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1]).is_err());
        assert!(Datagram::decode(&[1, 0, 0]).is_err());
    }

    fn datagram() -> impl Strategy<Value = Datagram> {
        let range = (any::<u32>(), 0u32..1000).prop_map(|(a, n)| NackRange { first: a, last: a.wrapping_add(n) });
        prop_oneof![
            (any::<u16>(), any::<u32>(), prop::collection::vec(any::<u8>(), 0..64))
                .prop_map(|(writer, sequence, payload)| Datagram::Data { writer, sequence, payload }),
            (any::<u16>(), any::<u16>(), any::<u32>()).prop_map(|(from, target, next)| Datagram::Ack { from, target, next }),
            (any::<u16>(), any::<u16>(), any::<u32>(), prop::collection::vec(range, 1..=MAX_NACK_RANGES))
                .prop_map(|(from, target, next, ranges)| Datagram::Nack { from, target, next, ranges }),
            (any::<u16>(), any::<u32>(), any::<bool>()).prop_map(|(writer, next, retry)| Datagram::AckReq { writer, next, retry }),
            (any::<u16>(), any::<u32>(), any::<bool>(), any::<(u16, u32, u16, u32)>()).prop_map(
                |(from, next, leave, (mtu, num_buffers, ack_freq, nonce))| Datagram::Beacon {
                    from, next, leave, info: BeaconInfo { mtu, num_buffers, ack_freq, nonce },
                }
            ),
        ]
    }

    proptest! {
        #[test]
        fn encode_decode_identity(d in datagram()) {
            prop_assert_eq!(Datagram::decode(&d.encode()).unwrap(), d);
        }
    }
}
