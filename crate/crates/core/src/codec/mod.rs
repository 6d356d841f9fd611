//! Byte streams, chunk framing and the compression engine interface.

mod rle;
mod stream;

pub use rle::{max_compressed_len, Rle};
pub use stream::{
    decode_frame, encode_frame, ByteOrder, ChunkSink, ChunkSource, FrameReader, InputStream,
    OutputStream, DEFAULT_CHUNK_SIZE, FRAME_HEADER_LEN,
};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

/// Errors raised while encoding, decoding or streaming data.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("stream underflow: wanted {wanted} bytes, {available} available")]
    Underflow { wanted: usize, available: usize },
    #[error("corrupt data at offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: &'static str },
    #[error("unknown codec id {0}")]
    UnknownCodec(u8),
    #[error("unknown codec name {0:?}")]
    UnknownEngine(String),
    #[error("chunk sink failed: {0}")]
    Sink(String),
    #[error("stream is unusable after an earlier sink failure")]
    Poisoned,
}

/// Symbolic identity of a compression engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressorId {
    /// Wire id written into every chunk frame.
    pub code: u8,
    pub name: &'static str,
}

impl CompressorId {
    pub const NONE: CompressorId = CompressorId { code: 0, name: "none" };
    pub const RLE: CompressorId = CompressorId { code: 1, name: "rle" };
}

/// Measured characteristics of an engine over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorInfo {
    pub id: CompressorId,
    /// compressed / uncompressed
    pub ratio: f64,
    /// bytes per second
    pub compress_speed: f64,
    pub decompress_speed: f64,
}

/// A lossless compression engine.
///
/// Engines are stateless with respect to the buffers they process and may be
/// called from several threads at once.
pub trait Compressor: Send + Sync {
    fn id(&self) -> CompressorId;

    fn compress(&self, input: &[u8]) -> Vec<u8>;

    fn decompress(&self, input: &[u8]) -> Result<Vec<u8>, CodecError>;
}

/// Pass-through engine, useful as the baseline of a benchmark.
#[derive(Debug, Default, Clone, Copy)]
pub struct Identity;

impl Compressor for Identity {
    fn id(&self) -> CompressorId {
        CompressorId::NONE
    }

    fn compress(&self, input: &[u8]) -> Vec<u8> {
        input.to_vec()
    }

    fn decompress(&self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        Ok(input.to_vec())
    }
}

/// Engines keyed by symbolic name and by wire code.
#[derive(Clone)]
pub struct Registry {
    engines: Vec<Arc<dyn Compressor>>,
}

impl core::fmt::Debug for Registry {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_list()
            .entries(self.engines.iter().map(|e| e.id().name))
            .finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { engines: Vec::new() }
    }

    /// The engines that need no external library: `none` and `rle`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Identity));
        r.register(Arc::new(Rle));
        r
    }

    /// Adds an engine, replacing any engine with the same name or code.
    pub fn register(&mut self, engine: Arc<dyn Compressor>) {
        let id = engine.id();
        self.engines
            .retain(|e| e.id().name != id.name && e.id().code != id.code);
        self.engines.push(engine);
    }

    pub fn by_name(&self, name: &str) -> Result<Arc<dyn Compressor>, CodecError> {
        self.engines
            .iter()
            .find(|e| e.id().name == name)
            .cloned()
            .ok_or_else(|| CodecError::UnknownEngine(name.into()))
    }

    pub fn by_code(&self, code: u8) -> Result<Arc<dyn Compressor>, CodecError> {
        self.engines
            .iter()
            .find(|e| e.id().code == code)
            .cloned()
            .ok_or(CodecError::UnknownCodec(code))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Compressor>> {
        self.engines.iter()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.engines.iter().map(|e| e.id().name).collect()
    }
}
