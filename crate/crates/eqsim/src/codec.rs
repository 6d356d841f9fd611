//! Library-backed compression engines and the codec benchmark.

use std::io;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use eqsim_core::codec::{CodecError, Compressor, CompressorId, CompressorInfo, Registry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fast tier: Snappy raw format.
#[derive(Debug, Default, Clone, Copy)]
pub struct Snappy;

impl Snappy {
    pub const ID: CompressorId = CompressorId { code: 2, name: "snappy" };
}

impl Compressor for Snappy {
    fn id(&self) -> CompressorId {
        Self::ID
    }

    fn compress(&self, input: &[u8]) -> Vec<u8> {
        snap::raw::Encoder::new().compress_vec(input).expect("snappy accepts any input below 4 GiB")
    }

    fn decompress(&self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        snap::raw::Decoder::new()
            .decompress_vec(input)
            .map_err(|_| CodecError::Corrupt { offset: 0, reason: "invalid snappy data" })
    }
}

/// Ratio tier: Zstandard at a configurable level.
#[derive(Debug, Clone, Copy)]
pub struct Zstd {
    pub level: i32,
}

impl Default for Zstd {
    fn default() -> Self {
        Zstd { level: 3 }
    }
}

impl Zstd {
    pub const ID: CompressorId = CompressorId { code: 3, name: "zstd" };
}

impl Compressor for Zstd {
    fn id(&self) -> CompressorId {
        Self::ID
    }

    fn compress(&self, input: &[u8]) -> Vec<u8> {
        zstd::bulk::compress(input, self.level).expect("in-memory zstd compression")
    }

    fn decompress(&self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        zstd::stream::decode_all(input).map_err(|_| CodecError::Corrupt { offset: 0, reason: "invalid zstd data" })
    }
}

/// Built-in engines plus the fast and ratio tiers.
pub fn registry() -> Registry {
    let mut r = Registry::builtin();
    r.register(Arc::new(Snappy));
    r.register(Arc::new(Zstd::default()));
    r
}

/// One engine's result over a corpus.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub info: CompressorInfo,
    /// Set when the engine failed to round-trip some buffer.
    pub failure: Option<String>,
}

/// Measures every engine over `corpus`. Ratios are exact; speeds are the
/// median of `runs` timed passes.
pub fn codec_benchmark(corpus: &[Vec<u8>], registry: &Registry, runs: usize) -> Vec<BenchRow> {
    let runs = runs.max(3);
    let total: usize = corpus.iter().map(Vec::len).sum();
    registry
        .iter()
        .map(|engine| {
            let id = engine.id();
            let mut compressed = Vec::with_capacity(corpus.len());
            let mut failure = None;
            for buf in corpus {
                let c = engine.compress(buf);
                match engine.decompress(&c) {
                    Ok(d) if d == *buf => {}
                    Ok(_) => failure = Some("round trip mismatch".to_string()),
                    Err(e) => failure = Some(e.to_string()),
                }
                compressed.push(c);
            }
            let packed: usize = compressed.iter().map(Vec::len).sum();
            let ratio = if total == 0 { 1.0 } else { packed as f64 / total as f64 };
            let mut ct = Vec::with_capacity(runs);
            let mut dt = Vec::with_capacity(runs);
            if failure.is_none() {
                for _ in 0..runs {
                    let t = Instant::now();
                    for buf in corpus {
                        std::hint::black_box(engine.compress(buf));
                    }
                    ct.push(t.elapsed().as_secs_f64());
                    let t = Instant::now();
                    for c in &compressed {
                        std::hint::black_box(engine.decompress(c).ok());
                    }
                    dt.push(t.elapsed().as_secs_f64());
                }
            }
            let speed = |mut v: Vec<f64>| {
                if v.is_empty() {
                    return 0.0;
                }
                v.sort_by(f64::total_cmp);
                total as f64 / v[v.len() / 2].max(1e-9)
            };
            BenchRow {
                info: CompressorInfo { id, ratio, compress_speed: speed(ct), decompress_speed: speed(dt) },
                failure,
            }
        })
        .collect()
}

pub fn zero_buffer(len: usize) -> Vec<u8> {
    vec![0; len]
}

pub fn random_buffer(len: usize, seed: u64) -> Vec<u8> {
    let mut v = vec![0; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

/// A 16-bit scalar volume of `dim`³ voxels that is empty except for a few
/// smooth blobs with mild noise, like a segmented scan.
pub fn sparse_volume(dim: usize, seed: u64) -> Vec<u8> {
    use rand::RngExt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<([f64; 3], f64)> = (0..6)
        .map(|_| {
            let c = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
            (c, rng.random_range(0.06..0.14))
        })
        .collect();
    let mut out = Vec::with_capacity(dim * dim * dim * 2);
    let inv = 1.0 / dim as f64;
    for z in 0..dim {
        for y in 0..dim {
            for x in 0..dim {
                let p = [x as f64 * inv, y as f64 * inv, z as f64 * inv];
                let mut v = 0.0f64;
                for (c, r) in &blobs {
                    let d2: f64 = (0..3).map(|i| (p[i] - c[i]) * (p[i] - c[i])).sum();
                    if d2 < r * r {
                        v = v.max(1.0 - d2.sqrt() / r);
                    }
                }
                let s = if v > 0.0 { (v * 3000.0) as u16 + rng.random_range(0..16u16) } else { 0 };
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    out
}

/// Resolves `builtin:zero`, `builtin:random`, `builtin:sparse` or a
/// directory whose regular files form the corpus.
pub fn load_corpus(spec: &str, seed: u64) -> io::Result<Vec<Vec<u8>>> {
    const LEN: usize = 4 << 20;
    match spec {
        "builtin:zero" => Ok((0..4).map(|_| zero_buffer(LEN)).collect()),
        "builtin:random" => Ok((0..4).map(|i| random_buffer(LEN, seed + i)).collect()),
        "builtin:sparse" => Ok((0..2).map(|i| sparse_volume(128, seed + i)).collect()),
        dir => {
            let mut paths: Vec<_> = std::fs::read_dir(Path::new(dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            let corpus: Vec<Vec<u8>> = paths.iter().map(std::fs::read).collect::<io::Result<_>>()?;
            if corpus.is_empty() {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("no files in {dir}")));
            }
            Ok(corpus)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_engines_round_trip_edge_cases() {
        for e in [&Snappy as &dyn Compressor, &Zstd::default()] {
            for buf in [Vec::new(), vec![7], zero_buffer(100_000), random_buffer(3000, 1)] {
                assert_eq!(e.decompress(&e.compress(&buf)).unwrap(), buf, "{}", e.id().name);
            }
            assert!(e.decompress(&[0xff; 9]).is_err());
        }
    }

    #[test]
    fn registry_has_both_tiers() {
        let r = registry();
        assert_eq!(r.names(), ["none", "rle", "snappy", "zstd"]);
        assert_eq!(r.by_code(3).unwrap().id().name, "zstd");
    }

    #[test]
    fn sparse_volume_is_mostly_empty() {
        let v = sparse_volume(32, 1);
        assert_eq!(v.len(), 32 * 32 * 32 * 2);
        let zeros = v.iter().filter(|b| **b == 0).count();
        assert!(zeros > v.len() / 2 && zeros < v.len());
    }
}
