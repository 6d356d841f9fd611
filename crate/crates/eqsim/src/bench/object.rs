//! Mapping and commit-sync throughput of distributed objects.
//!
//! The master node sends through one paced link, so a payload goes out once
//! per client. Compression costs master time per request unless the encoded
//! instance is buffered and reused for every client.

use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use eqsim_core::codec::CodecError;
use eqsim_core::object::{ByteReader, ByteWriter, ChangeType, DirtyMask, ObjectError, Serializable, Version};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fmt_f64, Table};
use crate::codec::{random_buffer, registry, sparse_volume};
use crate::net::{connect_mesh, LocalNode};
use crate::objects::{self, ObjectConfig, ObjectNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    /// Time for every client to map every object.
    Map,
    /// Time for one commit of every object and the clients' sync.
    Commit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// 1023 objects of a k-d tree over a triangle mesh.
    Ply,
    /// One 64 MiB sparse 16-bit volume.
    Volume,
    /// One 64 MiB incompressible buffer.
    Random,
    File(PathBuf),
}

impl Payload {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ply" => Payload::Ply,
            "volume" => Payload::Volume,
            "random" => Payload::Random,
            _ => Payload::File(PathBuf::from(s.strip_prefix("file:")?)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Raw data, serialized for every request.
    None,
    /// Compressed for every request.
    Compression,
    /// Serialized once and reused.
    Buffered,
    /// Serialized and compressed once and reused.
    CompressionBuffered,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::None, Setting::Compression, Setting::Buffered, Setting::CompressionBuffered];

    pub fn name(self) -> &'static str {
        match self {
            Setting::None => "none",
            Setting::Compression => "compression",
            Setting::Buffered => "buffered",
            Setting::CompressionBuffered => "compression-buffered",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    fn compressed(self) -> bool {
        matches!(self, Setting::Compression | Setting::CompressionBuffered)
    }

    fn buffered(self) -> bool {
        matches!(self, Setting::Buffered | Setting::CompressionBuffered)
    }
}

#[derive(Debug, Clone)]
pub struct ObjectBench {
    pub mode: BenchMode,
    pub clients: usize,
    pub setting: Setting,
    pub engine: String,
    /// Master link rate in bytes per second.
    pub link_rate: f64,
    pub seed: u64,
}

/// Default link: 10 Gbit/s.
pub const DEFAULT_LINK_RATE: f64 = 1.25e9;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRow {
    pub clients: usize,
    pub setting: Setting,
    pub engine: String,
    pub seconds: f64,
    /// Payload bytes delivered to each client.
    pub bytes: u64,
}

impl ObjectRow {
    pub fn mbps(&self) -> f64 {
        (self.bytes * self.clients as u64) as f64 / self.seconds.max(1e-12) / 1e6
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ObjectBenchError {
    #[error("no clients to map the payload")]
    NoClients,
    #[error(transparent)]
    Engine(#[from] CodecError),
    #[error(transparent)]
    Object(#[from] objects::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A single opaque field.
#[derive(Debug, Clone, Default)]
struct Blob {
    data: Vec<u8>,
    dirty: DirtyMask,
}

impl Serializable for Blob {
    fn field_mask(&self) -> DirtyMask {
        DirtyMask::field(0)
    }
    fn dirty(&self) -> DirtyMask {
        self.dirty
    }
    fn set_dirty(&mut self, mask: DirtyMask) {
        self.dirty = mask;
    }
    fn serialize(&self, mask: DirtyMask, out: &mut ByteWriter) {
        if mask.contains(DirtyMask::field(0)) {
            out.blob(&self.data);
        }
    }
    fn deserialize(&mut self, mask: DirtyMask, input: &mut ByteReader<'_>) -> Result<(), ObjectError> {
        if mask.contains(DirtyMask::field(0)) {
            self.data = input.blob()?.to_vec();
        }
        Ok(())
    }
}

/// Builds the objects of a payload.
pub fn build_payload(p: &Payload, seed: u64) -> io::Result<Vec<Arc<[u8]>>> {
    Ok(match p {
        Payload::Ply => ply_tree(seed),
        Payload::Volume => {
            let mut v = sparse_volume(256, seed);
            v.extend(sparse_volume(256, seed + 1));
            vec![v.into()]
        }
        Payload::Random => vec![random_buffer(64 << 20, seed).into()],
        Payload::File(path) => vec![std::fs::read(path)?.into()],
    })
}

/// 511 inner nodes holding bounds and a split plane, 512 leaves holding a
/// quantized patch of a smooth surface.
fn ply_tree(seed: u64) -> Vec<Arc<[u8]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(1023);
    for i in 0..511u32 {
        let mut w = ByteWriter::new();
        w.u32(i);
        for _ in 0..6 {
            w.f64(rng.random_range(-1.0..1.0));
        }
        w.u8((i % 3) as u8);
        out.push(w.into_inner().into());
    }
    for leaf in 0..512u32 {
        let mut w = ByteWriter::new();
        let (ox, oy) = ((leaf % 32) as f64, (leaf / 32) as f64);
        for v in 0..1024u32 {
            let (x, y) = (ox + (v % 32) as f64 / 32.0, oy + (v / 32) as f64 / 32.0);
            let z = (x * 0.3).sin() * (y * 0.2).cos();
            for c in [x / 32.0, y / 16.0, z * 0.5 + 0.5] {
                w.u16((c * 65535.0) as u16 & 0xfff0 | rng.random_range(0..16u16));
            }
            w.u16(0x7fff);
        }
        for t in 0..1922u32 {
            let row = t / 62;
            let col = (t % 62) / 2;
            let a = row * 32 + col;
            let tri = if t % 2 == 0 { [a, a + 1, a + 32] } else { [a + 1, a + 33, a + 32] };
            for idx in tri {
                w.u16(idx as u16);
            }
        }
        out.push(w.into_inner().into());
    }
    out
}

/// Runs one measurement on fresh in-process nodes.
pub fn run(b: &ObjectBench, payload: &[Arc<[u8]>]) -> Result<ObjectRow, ObjectBenchError> {
    if b.clients == 0 {
        return Err(ObjectBenchError::NoClients);
    }
    let engine = registry().by_name(&b.engine)?;
    let master_cfg = ObjectConfig {
        compressor: b.setting.compressed().then_some(engine),
        buffered: b.setting.buffered(),
        cache_bytes: 0,
        multicast: false,
        ..Default::default()
    };
    let client_cfg = ObjectConfig { cache_bytes: 0, ..Default::default() };
    let master = ObjectNode::on(LocalNode::with_link_rate(b.link_rate), master_cfg);
    let clients: Vec<ObjectNode> = (0..b.clients).map(|_| ObjectNode::new(client_cfg.clone())).collect();
    let mut locals = vec![master.node().clone()];
    locals.extend(clients.iter().map(|c| c.node().clone()));
    connect_mesh(&locals)?;

    let masters = payload
        .iter()
        .map(|d| master.register(Blob { data: d.to_vec(), dirty: DirtyMask::NONE }, ChangeType::Instance))
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Arc<Vec<_>> = Arc::new(masters.iter().map(|m| m.id()).collect());
    let bytes: u64 = payload.iter().map(|d| d.len() as u64).sum();

    let map_all = |start: &Instant| {
        let threads: Vec<_> = clients
            .iter()
            .map(|c| {
                let (c, ids) = (c.clone(), ids.clone());
                std::thread::spawn(move || {
                    ids.iter().map(|id| c.map(*id, Version::OLDEST, Blob::default())).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let slaves = threads
            .into_iter()
            .map(|t| t.join().expect("client thread"))
            .collect::<Result<Vec<_>, _>>();
        (slaves, start.elapsed().as_secs_f64())
    };

    let start = Instant::now();
    let (slaves, map_seconds) = map_all(&start);
    let slaves = slaves?;
    let seconds = match b.mode {
        BenchMode::Map => map_seconds,
        BenchMode::Commit => {
            for m in &masters {
                m.with_mut(|blob| {
                    for x in blob.data.iter_mut().step_by(4096) {
                        *x = x.wrapping_add(1);
                    }
                    blob.dirty = DirtyMask::field(0);
                });
            }
            let start = Instant::now();
            for m in &masters {
                m.commit()?;
            }
            let threads: Vec<_> = slaves
                .into_iter()
                .map(|set| {
                    std::thread::spawn(move || set.iter().try_for_each(|s| s.sync(Version::FIRST).map(|_| ())))
                })
                .collect();
            for t in threads {
                t.join().expect("client thread")?;
            }
            start.elapsed().as_secs_f64()
        }
    };
    Ok(ObjectRow { clients: b.clients, setting: b.setting, engine: b.engine.clone(), seconds, bytes })
}

pub fn table(rows: &[ObjectRow]) -> Table {
    let mut t = Table::new(&["clients", "setting", "engine", "seconds", "MBps"]);
    for r in rows {
        t.push(vec![
            r.clients.to_string(),
            r.setting.name().to_string(),
            r.engine.clone(),
            fmt_f64(r.seconds),
            fmt_f64(r.mbps()),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench(mode: BenchMode, clients: usize, setting: Setting) -> ObjectBench {
        ObjectBench { mode, clients, setting, engine: "snappy".into(), link_rate: DEFAULT_LINK_RATE, seed: 1 }
    }

    #[test]
    fn every_setting_maps_and_commits() {
        let payload: Vec<Arc<[u8]>> = vec![sparse_volume(32, 1).into(), random_buffer(10_000, 2).into()];
        for s in Setting::ALL {
            for mode in [BenchMode::Map, BenchMode::Commit] {
                let r = run(&bench(mode, 2, s), &payload).unwrap();
                assert!(r.seconds > 0.0);
                assert_eq!(r.bytes, 32 * 32 * 32 * 2 + 10_000);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let payload: Vec<Arc<[u8]>> = vec![vec![1u8; 10].into()];
        assert!(matches!(run(&bench(BenchMode::Map, 0, Setting::None), &payload), Err(ObjectBenchError::NoClients)));
        let mut b = bench(BenchMode::Map, 1, Setting::Compression);
        b.engine = "lzma".into();
        assert!(matches!(run(&b, &payload), Err(ObjectBenchError::Engine(_))));
        assert_eq!(Payload::parse("file:/x"), Some(Payload::File("/x".into())));
        assert_eq!(Payload::parse("bogus"), None);
    }

    #[test]
    fn ply_payload_has_1023_objects() {
        let p = build_payload(&Payload::Ply, 3).unwrap();
        assert_eq!(p.len(), 1023);
        assert_eq!(p, build_payload(&Payload::Ply, 3).unwrap());
    }
}
