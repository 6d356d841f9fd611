//! Little-endian object payload encoding.

use alloc::vec::Vec;

use super::{ChangeType, DirtyMask, ObjectError, ObjectId, Version};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { buf: Vec::with_capacity(n) }
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u128(&mut self, v: u128) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    /// `u32` length prefix followed by the bytes.
    pub fn blob(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.bytes(b);
    }
}

#[derive(Debug, Clone)]
pub struct ByteReader<'a> {
    buf: &'a [u8],
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn remaining(&self) -> &'a [u8] {
        self.buf
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ObjectError> {
        if self.buf.len() < n {
            return Err(ObjectError::Truncated);
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ObjectError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub fn u8(&mut self) -> Result<u8, ObjectError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ObjectError> {
        self.array().map(u16::from_le_bytes)
    }

    pub fn u32(&mut self) -> Result<u32, ObjectError> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn u64(&mut self) -> Result<u64, ObjectError> {
        self.array().map(u64::from_le_bytes)
    }

    pub fn u128(&mut self) -> Result<u128, ObjectError> {
        self.array().map(u128::from_le_bytes)
    }

    pub fn f64(&mut self) -> Result<f64, ObjectError> {
        self.array().map(f64::from_le_bytes)
    }

    pub fn blob(&mut self) -> Result<&'a [u8], ObjectError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

/// Whether a payload holds a full instance or a delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Instance = 0,
    Delta = 1,
}

/// Self-describing envelope in front of every object payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadHeader {
    pub id: ObjectId,
    pub version: Version,
    pub change_type: ChangeType,
    pub kind: PayloadKind,
    pub mask: DirtyMask,
}

impl PayloadHeader {
    pub const LEN: usize = 16 + 8 + 1 + 1 + 8;

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u128(self.id.0);
        w.u64(self.version.0);
        w.u8(self.change_type as u8);
        w.u8(self.kind as u8);
        w.u64(self.mask.bits());
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self, ObjectError> {
        let id = ObjectId(r.u128()?);
        let version = Version(r.u64()?);
        let change_type = ChangeType::from_u8(r.u8()?).ok_or(ObjectError::Malformed("change type"))?;
        let kind = match r.u8()? {
            0 => PayloadKind::Instance,
            1 => PayloadKind::Delta,
            _ => return Err(ObjectError::Malformed("payload kind")),
        };
        let mask = DirtyMask::from_bits(r.u64()?);
        Ok(Self { id, version, change_type, kind, mask })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = PayloadHeader {
            id: ObjectId(0x1234_5678_9abc_def0_1122_3344_5566_7788),
            version: Version(42),
            change_type: ChangeType::Delta,
            kind: PayloadKind::Delta,
            mask: DirtyMask::from_bits(0b1010),
        };
        let mut w = ByteWriter::new();
        h.encode(&mut w);
        assert_eq!(w.len(), PayloadHeader::LEN);
        let bytes = w.into_inner();
        assert_eq!(PayloadHeader::decode(&mut ByteReader::new(&bytes)).unwrap(), h);
        assert_eq!(PayloadHeader::decode(&mut ByteReader::new(&bytes[..10])), Err(ObjectError::Truncated));
    }
}
