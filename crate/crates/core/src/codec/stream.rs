//! Buffered output and input streams with chunk framing.
//!
//! Written bytes accumulate in a buffer; every time `chunk_size` bytes are
//! pending, one chunk is (optionally) compressed and handed to the sink, so
//! serialization overlaps with transmission. Each chunk travels in a frame:
//!
//! ```text
//! u32 LE  payload length
//! u8      codec code (0 = uncompressed)
//! [u8]    payload
//! ```
//!
//! Multi-byte values are written in the writer's byte order and the reader
//! converts from the declared remote order.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{CodecError, Compressor, Registry};

pub const DEFAULT_CHUNK_SIZE: usize = 64 * 1024;
pub const FRAME_HEADER_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    pub const fn native() -> Self {
        if cfg!(target_endian = "big") {
            ByteOrder::Big
        } else {
            ByteOrder::Little
        }
    }

    pub const fn foreign() -> Self {
        match Self::native() {
            ByteOrder::Little => ByteOrder::Big,
            ByteOrder::Big => ByteOrder::Little,
        }
    }
}

/// Consumer of emitted chunks.
pub trait ChunkSink {
    fn put_chunk(&mut self, codec: u8, payload: &[u8]) -> Result<(), CodecError>;
}

/// A byte vector collects framed chunks back to back.
impl ChunkSink for Vec<u8> {
    fn put_chunk(&mut self, codec: u8, payload: &[u8]) -> Result<(), CodecError> {
        encode_frame(self, codec, payload);
        Ok(())
    }
}

impl<S: ChunkSink + ?Sized> ChunkSink for &mut S {
    fn put_chunk(&mut self, codec: u8, payload: &[u8]) -> Result<(), CodecError> {
        (**self).put_chunk(codec, payload)
    }
}

/// Producer of chunks for an [`InputStream`]. `Ok(None)` marks the end.
pub trait ChunkSource {
    fn next_chunk(&mut self) -> Result<Option<(u8, Vec<u8>)>, CodecError>;
}

impl<S: ChunkSource + ?Sized> ChunkSource for &mut S {
    fn next_chunk(&mut self) -> Result<Option<(u8, Vec<u8>)>, CodecError> {
        (**self).next_chunk()
    }
}

pub fn encode_frame(out: &mut Vec<u8>, codec: u8, payload: &[u8]) {
    out.reserve(FRAME_HEADER_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.push(codec);
    out.extend_from_slice(payload);
}

/// Splits one frame off the front of `buf`: `(codec, payload, consumed)`.
pub fn decode_frame(buf: &[u8]) -> Result<Option<(u8, &[u8], usize)>, CodecError> {
    if buf.is_empty() {
        return Ok(None);
    }
    if buf.len() < FRAME_HEADER_LEN {
        return Err(CodecError::Corrupt {
            offset: 0,
            reason: "truncated frame header",
        });
    }
    let len = u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    let end = FRAME_HEADER_LEN + len;
    if buf.len() < end {
        return Err(CodecError::Corrupt {
            offset: FRAME_HEADER_LEN,
            reason: "truncated frame payload",
        });
    }
    Ok(Some((buf[4], &buf[FRAME_HEADER_LEN..end], end)))
}

/// Reads frames out of a contiguous buffer.
#[derive(Debug, Clone)]
pub struct FrameReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> FrameReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
}

impl ChunkSource for FrameReader<'_> {
    fn next_chunk(&mut self) -> Result<Option<(u8, Vec<u8>)>, CodecError> {
        match decode_frame(&self.buf[self.pos..]) {
            Ok(Some((codec, payload, used))) => {
                self.pos += used;
                Ok(Some((codec, payload.to_vec())))
            }
            Ok(None) => Ok(None),
            Err(CodecError::Corrupt { offset, reason }) => Err(CodecError::Corrupt {
                offset: self.pos + offset,
                reason,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Buffered, chunking writer.
pub struct OutputStream<S: ChunkSink> {
    sink: S,
    buf: Vec<u8>,
    chunk_size: usize,
    codec: Option<Arc<dyn Compressor>>,
    order: ByteOrder,
    poisoned: bool,
    chunks: usize,
    written: u64,
}

macro_rules! write_num {
    ($($name:ident: $t:ty),*) => {$(
        pub fn $name(&mut self, v: $t) -> Result<(), CodecError> {
            let bytes = match self.order {
                ByteOrder::Little => v.to_le_bytes(),
                ByteOrder::Big => v.to_be_bytes(),
            };
            self.write(&bytes)
        }
    )*};
}

impl<S: ChunkSink> OutputStream<S> {
    pub fn new(sink: S) -> Self {
        Self {
            sink,
            buf: Vec::new(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            codec: None,
            order: ByteOrder::native(),
            poisoned: false,
            chunks: 0,
            written: 0,
        }
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size.max(1);
        self
    }

    pub fn with_codec(mut self, codec: Option<Arc<dyn Compressor>>) -> Self {
        self.codec = codec;
        self
    }

    /// Emulates a writer whose native byte order is `order`.
    pub fn with_byte_order(mut self, order: ByteOrder) -> Self {
        self.order = order;
        self
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    /// Chunks handed to the sink so far.
    pub fn chunks_emitted(&self) -> usize {
        self.chunks
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn write(&mut self, data: &[u8]) -> Result<(), CodecError> {
        if self.poisoned {
            return Err(CodecError::Poisoned);
        }
        self.written += data.len() as u64;
        let mut data = data;
        while !data.is_empty() {
            let room = self.chunk_size - self.buf.len();
            if self.buf.is_empty() && data.len() >= self.chunk_size {
                // full chunks straight from the caller's slice
                let (head, rest) = data.split_at(self.chunk_size);
                self.emit_slice(head)?;
                data = rest;
                continue;
            }
            let n = room.min(data.len());
            self.buf.extend_from_slice(&data[..n]);
            data = &data[n..];
            if self.buf.len() == self.chunk_size {
                let chunk = core::mem::take(&mut self.buf);
                self.emit_slice(&chunk)?;
                self.buf = chunk;
                self.buf.clear();
            }
        }
        Ok(())
    }

    write_num!(
        write_u16: u16, write_u32: u32, write_u64: u64, write_i32: i32,
        write_i64: i64, write_f32: f32, write_f64: f64
    );

    pub fn write_u8(&mut self, v: u8) -> Result<(), CodecError> {
        self.write(&[v])
    }

    pub fn write_bool(&mut self, v: bool) -> Result<(), CodecError> {
        self.write_u8(v as u8)
    }

    /// Writes a `u64` length followed by the bytes.
    pub fn write_blob(&mut self, data: &[u8]) -> Result<(), CodecError> {
        self.write_u64(data.len() as u64)?;
        self.write(data)
    }

    /// Emits whatever is buffered as a final (possibly short) chunk.
    pub fn flush(&mut self) -> Result<(), CodecError> {
        if self.poisoned {
            return Err(CodecError::Poisoned);
        }
        if !self.buf.is_empty() {
            let chunk = core::mem::take(&mut self.buf);
            self.emit_slice(&chunk)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<S, CodecError> {
        self.flush()?;
        Ok(self.sink)
    }

    fn emit_slice(&mut self, chunk: &[u8]) -> Result<(), CodecError> {
        let result = match &self.codec {
            Some(codec) => {
                let packed = codec.compress(chunk);
                if packed.len() < chunk.len() {
                    self.sink.put_chunk(codec.id().code, &packed)
                } else {
                    self.sink.put_chunk(0, chunk)
                }
            }
            None => self.sink.put_chunk(0, chunk),
        };
        match result {
            Ok(()) => {
                self.chunks += 1;
                Ok(())
            }
            Err(e) => {
                self.poisoned = true;
                Err(match e {
                    CodecError::Sink(_) => e,
                    other => CodecError::Sink(other.to_string()),
                })
            }
        }
    }
}

/// Reader over a chunk source, decompressing and converting byte order.
pub struct InputStream<Src: ChunkSource> {
    src: Src,
    registry: Registry,
    remote: ByteOrder,
    cur: Vec<u8>,
    at: usize,
    position: u64,
    exhausted: bool,
}

macro_rules! read_num {
    ($($name:ident: $t:ty),*) => {$(
        pub fn $name(&mut self) -> Result<$t, CodecError> {
            let mut b = [0u8; core::mem::size_of::<$t>()];
            self.read_into(&mut b)?;
            Ok(match self.remote {
                ByteOrder::Little => <$t>::from_le_bytes(b),
                ByteOrder::Big => <$t>::from_be_bytes(b),
            })
        }
    )*};
}

impl<Src: ChunkSource> InputStream<Src> {
    pub fn new(src: Src) -> Self {
        Self {
            src,
            registry: Registry::builtin(),
            remote: ByteOrder::native(),
            cur: Vec::new(),
            at: 0,
            position: 0,
            exhausted: false,
        }
    }

    pub fn with_registry(mut self, registry: Registry) -> Self {
        self.registry = registry;
        self
    }

    pub fn with_remote_order(mut self, order: ByteOrder) -> Self {
        self.remote = order;
        self
    }

    /// Logical bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    fn refill(&mut self) -> Result<bool, CodecError> {
        while self.at == self.cur.len() {
            if self.exhausted {
                return Ok(false);
            }
            match self.src.next_chunk()? {
                None => {
                    self.exhausted = true;
                    return Ok(false);
                }
                Some((0, raw)) => self.cur = raw,
                Some((code, packed)) => {
                    self.cur = self.registry.by_code(code)?.decompress(&packed)?;
                }
            }
            self.at = 0;
        }
        Ok(true)
    }

    /// Bytes immediately available without pulling another chunk.
    pub fn buffered(&self) -> usize {
        self.cur.len() - self.at
    }

    pub fn read_into(&mut self, out: &mut [u8]) -> Result<(), CodecError> {
        let mut filled = 0;
        while filled < out.len() {
            if !self.refill()? {
                return Err(CodecError::Underflow {
                    wanted: out.len(),
                    available: filled,
                });
            }
            let n = (self.cur.len() - self.at).min(out.len() - filled);
            out[filled..filled + n].copy_from_slice(&self.cur[self.at..self.at + n]);
            self.at += n;
            filled += n;
            self.position += n as u64;
        }
        Ok(())
    }

    pub fn read(&mut self, n: usize) -> Result<Vec<u8>, CodecError> {
        let mut v = alloc::vec![0u8; n];
        self.read_into(&mut v)?;
        Ok(v)
    }

    read_num!(
        read_u16: u16, read_u32: u32, read_u64: u64, read_i32: i32,
        read_i64: i64, read_f32: f32, read_f64: f64
    );

    pub fn read_u8(&mut self) -> Result<u8, CodecError> {
        let mut b = [0u8; 1];
        self.read_into(&mut b)?;
        Ok(b[0])
    }

    pub fn read_bool(&mut self) -> Result<bool, CodecError> {
        Ok(self.read_u8()? != 0)
    }

    pub fn read_blob(&mut self) -> Result<Vec<u8>, CodecError> {
        let len = self.read_u64()?;
        let len = usize::try_from(len).map_err(|_| CodecError::Corrupt {
            offset: self.position as usize,
            reason: "blob length overflow",
        })?;
        let mut v = Vec::new();
        let mut remaining = len;
        // grow with the data actually present instead of trusting the prefix
        while remaining > 0 {
            if !self.refill()? {
                return Err(CodecError::Underflow {
                    wanted: len,
                    available: len - remaining,
                });
            }
            let n = self.buffered().min(remaining);
            v.extend_from_slice(&self.cur[self.at..self.at + n]);
            self.at += n;
            self.position += n as u64;
            remaining -= n;
        }
        Ok(v)
    }

    /// True once every chunk has been consumed.
    pub fn at_end(&mut self) -> Result<bool, CodecError> {
        Ok(!self.refill()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Rle;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    struct Counting {
        chunks: Vec<(u8, Vec<u8>)>,
        fail_after: Option<usize>,
    }

    impl ChunkSink for Counting {
        fn put_chunk(&mut self, codec: u8, payload: &[u8]) -> Result<(), CodecError> {
            if self.fail_after == Some(self.chunks.len()) {
                return Err(CodecError::Sink(String::from("link down")));
            }
            self.chunks.push((codec, payload.to_vec()));
            Ok(())
        }
    }

    fn counting() -> Counting {
        Counting { chunks: Vec::new(), fail_after: None }
    }

    #[test]
    fn empty_write_emits_nothing() {
        let mut out = OutputStream::new(counting());
        out.write(&[]).unwrap();
        out.flush().unwrap();
        assert_eq!(out.chunks_emitted(), 0);
    }

    #[test]
    fn chunk_threshold_counts() {
        let mut out = OutputStream::new(counting()).with_chunk_size(4096);
        out.write(&vec![7u8; 10_000]).unwrap();
        assert_eq!(out.chunks_emitted(), 2);
        out.flush().unwrap();
        assert_eq!(out.chunks_emitted(), 3);
        let sizes: Vec<usize> = out.sink().chunks.iter().map(|c| c.1.len()).collect();
        assert_eq!(sizes, [4096, 4096, 1808]);
    }

    #[test]
    fn sink_failure_poisons() {
        let mut out = OutputStream::new(Counting { chunks: Vec::new(), fail_after: Some(1) })
            .with_chunk_size(8);
        assert!(out.write(&[0u8; 8]).is_ok());
        assert!(matches!(out.write(&[0u8; 8]), Err(CodecError::Sink(_))));
        assert_eq!(out.write(&[1]), Err(CodecError::Poisoned));
    }

    #[test]
    fn read_zero_and_underflow() {
        let mut bytes = Vec::new();
        let mut out = OutputStream::new(&mut bytes);
        out.write(&[1, 2, 3]).unwrap();
        out.flush().unwrap();
        let mut input = InputStream::new(FrameReader::new(&bytes));
        assert!(input.read(0).unwrap().is_empty());
        assert_eq!(
            input.read(4),
            Err(CodecError::Underflow { wanted: 4, available: 3 })
        );
    }

    #[test]
    fn foreign_order_u32() {
        let mut bytes = Vec::new();
        let mut out = OutputStream::new(&mut bytes).with_byte_order(ByteOrder::Big);
        out.write_u32(0x0102_0304).unwrap();
        out.flush().unwrap();
        assert_eq!(&bytes[FRAME_HEADER_LEN..], &[1, 2, 3, 4]);
        let mut input = InputStream::new(FrameReader::new(&bytes)).with_remote_order(ByteOrder::Big);
        assert_eq!(input.read_u32().unwrap(), 0x0102_0304);
    }

    #[test]
    fn compressed_chunks_fall_back_to_raw_when_larger() {
        let mut bytes = Vec::new();
        let mut out = OutputStream::new(&mut bytes)
            .with_chunk_size(64)
            .with_codec(Some(Arc::new(Rle)));
        out.write(&[0u8; 64]).unwrap();
        out.write(&[1, 2, 3]).unwrap();
        out.flush().unwrap();
        let mut r = FrameReader::new(&bytes);
        assert_eq!(r.next_chunk().unwrap().unwrap().0, 1);
        assert_eq!(r.next_chunk().unwrap().unwrap().0, 0);
    }

    #[derive(Debug, Clone)]
    enum Prim {
        U8(u8),
        U16(u16),
        U32(u32),
        U64(u64),
        I32(i32),
        F32(f32),
        F64(f64),
    }

    fn prim() -> impl Strategy<Value = Prim> {
        prop_oneof![
            any::<u8>().prop_map(Prim::U8),
            any::<u16>().prop_map(Prim::U16),
            any::<u32>().prop_map(Prim::U32),
            any::<u64>().prop_map(Prim::U64),
            any::<i32>().prop_map(Prim::I32),
            any::<f32>().prop_filter("nan", |f| !f.is_nan()).prop_map(Prim::F32),
            any::<f64>().prop_filter("nan", |f| !f.is_nan()).prop_map(Prim::F64),
        ]
    }

    // Independent reference encoder: spells out the big-endian byte layout.
    fn reference_be(p: &Prim, out: &mut Vec<u8>) {
        fn be(out: &mut Vec<u8>, v: u64, n: usize) {
            for i in (0..n).rev() {
                out.push((v >> (8 * i)) as u8);
            }
        }
        match *p {
            Prim::U8(v) => out.push(v),
            Prim::U16(v) => be(out, v as u64, 2),
            Prim::U32(v) => be(out, v as u64, 4),
            Prim::U64(v) => be(out, v, 8),
            Prim::I32(v) => be(out, v as u32 as u64, 4),
            Prim::F32(v) => be(out, v.to_bits() as u64, 4),
            Prim::F64(v) => be(out, v.to_bits(), 8),
        }
    }

    proptest! {
        #[test]
        fn foreign_endianness_round_trip(prims in prop::collection::vec(prim(), 0..1000)) {
            let mut bytes = Vec::new();
            let mut out = OutputStream::new(&mut bytes)
                .with_chunk_size(64)
                .with_byte_order(ByteOrder::Big);
            let mut reference = Vec::new();
            for p in &prims {
                reference_be(p, &mut reference);
                match *p {
                    Prim::U8(v) => out.write_u8(v),
                    Prim::U16(v) => out.write_u16(v),
                    Prim::U32(v) => out.write_u32(v),
                    Prim::U64(v) => out.write_u64(v),
                    Prim::I32(v) => out.write_i32(v),
                    Prim::F32(v) => out.write_f32(v),
                    Prim::F64(v) => out.write_f64(v),
                }.unwrap();
            }
            out.flush().unwrap();
            let mut logical = Vec::new();
            let mut r = FrameReader::new(&bytes);
            while let Some((_, c)) = r.next_chunk().unwrap() {
                logical.extend(c);
            }
            prop_assert_eq!(&logical, &reference);

            let mut input = InputStream::new(FrameReader::new(&bytes)).with_remote_order(ByteOrder::Big);
            for p in &prims {
                let ok = match *p {
                    Prim::U8(v) => input.read_u8().unwrap() == v,
                    Prim::U16(v) => input.read_u16().unwrap() == v,
                    Prim::U32(v) => input.read_u32().unwrap() == v,
                    Prim::U64(v) => input.read_u64().unwrap() == v,
                    Prim::I32(v) => input.read_i32().unwrap() == v,
                    Prim::F32(v) => input.read_f32().unwrap() == v,
                    Prim::F64(v) => input.read_f64().unwrap() == v,
                };
                prop_assert!(ok);
            }
            prop_assert!(input.at_end().unwrap());
        }

        #[test]
        fn chunk_stream_equivalence(
            data in prop::collection::vec(any::<u8>(), 0..20_000),
            chunk in prop::sample::select(vec![64usize, 4096, 65536]),
            splits in prop::collection::vec(0usize..5000, 0..8),
            compress in any::<bool>(),
        ) {
            let mut bytes = Vec::new();
            let codec: Option<Arc<dyn Compressor>> = if compress { Some(Arc::new(Rle)) } else { None };
            let mut out = OutputStream::new(&mut bytes).with_chunk_size(chunk).with_codec(codec);
            let mut rest = &data[..];
            for s in splits {
                let (a, b) = rest.split_at(s.min(rest.len()));
                out.write(a).unwrap();
                rest = b;
            }
            out.write(rest).unwrap();
            out.flush().unwrap();
            let mut r = FrameReader::new(&bytes);
            let mut n = 0;
            while let Some((code, c)) = r.next_chunk().unwrap() {
                let raw = if code == 0 { c } else { Rle.decompress(&c).unwrap() };
                prop_assert!(raw.len() <= chunk);
                n += raw.len();
            }
            prop_assert_eq!(n, data.len());
            let mut input = InputStream::new(FrameReader::new(&bytes));
            prop_assert_eq!(input.read(data.len()).unwrap(), data);
            prop_assert!(input.at_end().unwrap());
        }
    }
}
