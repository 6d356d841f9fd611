//! Word-oriented run-length encoding.
//!
//! Layout of an encoded buffer:
//!
//! ```text
//! varint  original length in bytes (LEB128)
//! token*  varint (count << 1 | kind)
//!           kind 1 -> run:     one 8-byte word repeated count times (count <= 65536)
//!           kind 0 -> literal: count 8-byte words follow
//! tail    original length % 8 raw bytes
//! crc32   u32 LE checksum of the original bytes
//! ```
//!
//! A run token is only used for two or more identical words, so every literal
//! header after the first is paid for by the preceding run. The encoded size is
//! therefore at most `n + 20` bytes for an `n`-byte input.

use alloc::vec::Vec;

use super::{CodecError, Compressor, CompressorId};

const MAX_LITERAL: usize = (1 << 31) - 1;
// Caps the expansion of a single run (at least 10 encoded bytes) at 512 KiB,
// which bounds what a corrupted stream can make the decoder allocate.
const MAX_RUN: usize = 1 << 16;

/// Upper bound of the encoded size for `len` input bytes.
pub const fn max_compressed_len(len: usize) -> usize {
    len + 20
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Rle;

impl Compressor for Rle {
    fn id(&self) -> CompressorId {
        CompressorId::RLE
    }

    fn compress(&self, input: &[u8]) -> Vec<u8> {
        compress(input)
    }

    fn decompress(&self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        decompress(input)
    }
}

impl Rle {
    /// Compresses `input` as independent pieces of at most `chunk_size` bytes.
    pub fn compress_chunks(&self, input: &[u8], chunk_size: usize) -> Vec<Vec<u8>> {
        input.chunks(chunk_size.max(8)).map(compress).collect()
    }

    pub fn decompress_chunks<C: AsRef<[u8]>>(&self, chunks: &[C]) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::new();
        for c in chunks {
            out.extend_from_slice(&decompress(c.as_ref())?);
        }
        Ok(out)
    }
}

fn word(bytes: &[u8], i: usize) -> u64 {
    let mut w = [0u8; 8];
    w.copy_from_slice(&bytes[i * 8..i * 8 + 8]);
    u64::from_le_bytes(w)
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn flush_literal(out: &mut Vec<u8>, input: &[u8], start: usize, end: usize) {
    let mut s = start;
    while s < end {
        let n = (end - s).min(MAX_LITERAL);
        put_varint(out, (n as u64) << 1);
        out.extend_from_slice(&input[s * 8..(s + n) * 8]);
        s += n;
    }
}

pub(crate) fn compress(input: &[u8]) -> Vec<u8> {
    if input.is_empty() {
        return Vec::new();
    }
    let words = input.len() / 8;
    let mut out = Vec::with_capacity(input.len() / 4 + 16);
    put_varint(&mut out, input.len() as u64);

    let mut lit_start = 0;
    let mut i = 0;
    while i < words {
        let w = word(input, i);
        let mut j = i + 1;
        while j < words && j - i < MAX_RUN && word(input, j) == w {
            j += 1;
        }
        if j - i >= 2 {
            flush_literal(&mut out, input, lit_start, i);
            put_varint(&mut out, (((j - i) as u64) << 1) | 1);
            out.extend_from_slice(&w.to_le_bytes());
            lit_start = j;
        }
        i = j;
    }
    flush_literal(&mut out, input, lit_start, words);
    out.extend_from_slice(&input[words * 8..]);
    out.extend_from_slice(&crc32fast::hash(input).to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError::Corrupt {
                offset: self.pos,
                reason: "truncated input",
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn varint(&mut self) -> Result<u64, CodecError> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(CodecError::Corrupt {
            offset: self.pos,
            reason: "varint too long",
        })
    }
}

pub(crate) fn decompress(input: &[u8]) -> Result<Vec<u8>, CodecError> {
    if input.is_empty() {
        return Ok(Vec::new());
    }
    let mut cur = Cursor { buf: input, pos: 0 };
    let len = cur.varint()?;
    let plausible = (input.len() as u64 / 10 + 1) * (MAX_RUN as u64 * 8) + input.len() as u64;
    if len == 0 || len > plausible || len > isize::MAX as u64 {
        return Err(CodecError::Corrupt {
            offset: 0,
            reason: "implausible length",
        });
    }
    let len = len as usize;
    let words = len / 8;
    let mut out = Vec::with_capacity(len.min(input.len().saturating_mul(64)));
    let mut produced = 0usize;
    while produced < words {
        let at = cur.pos;
        let token = cur.varint()?;
        let is_run = token & 1 == 1;
        let count = usize::try_from(token >> 1).unwrap_or(usize::MAX);
        if count == 0 || count > words - produced || (is_run && count > MAX_RUN) {
            return Err(CodecError::Corrupt {
                offset: at,
                reason: "bad token count",
            });
        }
        if is_run {
            let w = cur.take(8)?;
            for _ in 0..count {
                out.extend_from_slice(w);
            }
        } else {
            out.extend_from_slice(cur.take(count * 8)?);
        }
        produced += count;
    }
    out.extend_from_slice(cur.take(len - words * 8)?);
    let mut c = [0u8; 4];
    c.copy_from_slice(cur.take(4)?);
    if cur.pos != input.len() {
        return Err(CodecError::Corrupt {
            offset: cur.pos,
            reason: "trailing bytes",
        });
    }
    if crc32fast::hash(&out) != u32::from_le_bytes(c) {
        return Err(CodecError::Corrupt {
            offset: cur.pos - 4,
            reason: "checksum mismatch",
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_round_trip() {
        assert!(compress(&[]).is_empty());
        assert!(decompress(&[]).unwrap().is_empty());
    }

    #[test]
    fn zero_kib_is_tiny() {
        let c = compress(&[0u8; 1024]);
        // varint(1024) = 2, run token = 2 + 8, crc = 4
        assert_eq!(c.len(), 16);
        assert_eq!(decompress(&c).unwrap(), vec![0u8; 1024]);
    }

    #[test]
    fn sparse_blocks_ratio() {
        // three zero blocks out of every four 4 KiB blocks
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = vec![0u8; 256 * 1024];
        for (i, block) in data.chunks_mut(4096).enumerate() {
            if i % 4 == 3 {
                rng.fill_bytes(block);
            }
        }
        let c = compress(&data);
        let ratio = c.len() as f64 / data.len() as f64;
        assert!(ratio <= 0.35, "ratio {ratio}");
        assert_eq!(decompress(&c).unwrap(), data);
    }

    #[test]
    fn truncation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut data = vec![0u8; 300];
        rng.fill_bytes(&mut data[100..]);
        let c = compress(&data);
        for cut in 0..c.len() {
            assert!(decompress(&c[..cut]).is_err() || cut == 0, "cut {cut}");
        }
    }

    #[test]
    fn chunked_round_trip() {
        let data: Vec<u8> = (0..10_000u32).map(|i| (i / 64) as u8).collect();
        let chunks = Rle.compress_chunks(&data, 4096);
        assert_eq!(chunks.len(), 3);
        assert_eq!(Rle.decompress_chunks(&chunks).unwrap(), data);
    }

    fn runny() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec((any::<u8>(), 1usize..40), 0..64).prop_map(|runs| {
            runs.into_iter()
                .flat_map(|(b, n)| core::iter::repeat(b).take(n))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn round_trip_and_bound(data in prop_oneof![prop::collection::vec(any::<u8>(), 0..2048), runny()]) {
            let c = compress(&data);
            prop_assert!(c.len() <= max_compressed_len(data.len()));
            prop_assert_eq!(decompress(&c).unwrap(), data);
        }

        #[test]
        fn corruption_never_yields_wrong_data(data in runny(), flips in prop::collection::vec((any::<usize>(), 1u8..=255), 1..4)) {
            let mut c = compress(&data);
            prop_assume!(!c.is_empty());
            for (at, x) in flips {
                let i = at % c.len();
                c[i] ^= x;
            }
            if let Ok(d) = decompress(&c) {
                prop_assert_eq!(d, data);
            }
        }
    }
}
