//! Versioned distributed objects over [`LocalNode`] commands.
//!
//! A master holds the authoritative instance and produces consecutive
//! versions on commit. Slaves map a version by pulling instance data from
//! the master (or their [`InstanceCache`]) and then follow commits by
//! applying queued payloads in [`Slave::sync`].
//!
//! All protocol state of a node lives in one store guarded by a mutex. The
//! node's command thread only ever takes that mutex and never waits on an
//! object, so application threads may hold an object while they wait on the
//! store.

mod barrier;
mod instance;
mod map;
mod queue;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use eqsim_core::codec::{
    decode_frame, encode_frame, ChunkSource, CodecError, Compressor, FrameReader, Registry, DEFAULT_CHUNK_SIZE,
    FRAME_HEADER_LEN,
};
use eqsim_core::object::{
    ByteReader, ByteWriter, CacheStats, ChangeType, DirtyMask, InstanceCache, ObjectError, ObjectId, PayloadHeader, PayloadKind,
    Version, VersionHistory,
};
use uuid::Uuid;

use crate::net::{Command, CommandKind, LocalNode};

pub use barrier::{Barrier, BarrierHandle};
pub use instance::{Master, Slave};
pub use map::{MapEntry, ObjectMap, ObjectMapSlave};
pub use queue::{QueueConsumer, QueueHandle, QueueProducer};

const FIND_MASTER: CommandKind = 0x0b01;
const FOUND: CommandKind = 0x0b02;
const MAP_REQ: CommandKind = 0x0b03;
const MAP_REPLY: CommandKind = 0x0b04;
const OBJ_DATA: CommandKind = 0x0b05;
const SYNCED: CommandKind = 0x0b06;
const UNMAP: CommandKind = 0x0b07;
const PRELOAD: CommandKind = 0x0b08;
const BARRIER_ENTER: CommandKind = 0x0b10;
const BARRIER_RELEASE: CommandKind = 0x0b11;
const QUEUE_POP: CommandKind = 0x0b20;
const QUEUE_ITEMS: CommandKind = 0x0b21;

const REPLY_DATA: u8 = 0;
const REPLY_CACHED: u8 = 1;
const REPLY_UNKNOWN: u8 = 2;
const REPLY_UNAVAILABLE: u8 = 3;

/// Per-node object settings.
#[derive(Clone)]
pub struct ObjectConfig {
    /// Engine applied to instance and delta payloads; `None` sends raw bytes.
    pub compressor: Option<Arc<dyn Compressor>>,
    /// Keep the encoded instance of each version and reuse it for every
    /// mapping slave instead of serializing and compressing per request.
    pub buffered: bool,
    pub history_depth: usize,
    /// Instance cache capacity; 0 disables caching.
    pub cache_bytes: usize,
    /// Push the initial instance of new masters to all connected nodes.
    pub preload: bool,
    /// Unsynced versions a slave may lag before `blocking_commit` waits.
    pub max_queued: usize,
    /// Send commits over the node's multicast group when it reaches every
    /// slave and there are at least two.
    pub multicast: bool,
    pub chunk_size: usize,
    pub timeout: Duration,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            compressor: None,
            buffered: true,
            history_depth: VersionHistory::DEFAULT_DEPTH,
            cache_bytes: 64 << 20,
            preload: false,
            max_queued: 4,
            multicast: true,
            chunk_size: DEFAULT_CHUNK_SIZE,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("object {0} is already registered")]
    AlreadyRegistered(ObjectId),
    #[error("object {0} is already mapped on this node")]
    AlreadyMapped(ObjectId),
    #[error("no master found for object {0}")]
    UnknownObject(ObjectId),
    #[error("version {version:?} of object {id} is not available")]
    VersionUnavailable { id: ObjectId, version: Version },
    #[error("static object {0} cannot commit")]
    StaticCommit(ObjectId),
    #[error("cannot sync object {id} back from {current:?} to {target:?}")]
    SyncBackwards { id: ObjectId, current: Version, target: Version },
    #[error("slaves lost while committing: {0:?}")]
    SlavesLost(Vec<Uuid>),
    #[error("master of object {0} disconnected")]
    MasterLost(ObjectId),
    #[error("barrier {0} failed: a participant disconnected")]
    BarrierBroken(ObjectId),
    #[error("object {id} cannot reach its mapped version: {reason}")]
    MapSync { id: ObjectId, reason: String },
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("network: {0}")]
    Net(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Payload(#[from] ObjectError),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Net(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Transfer and commit counters of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObjectStats {
    /// Commits that produced a new version.
    pub commits: u64,
    pub multicast_payloads: u64,
    pub unicast_payloads: u64,
    /// Mappings on this node that pulled instance data over the network.
    pub instance_requests: u64,
    /// Mappings on this node served from the local cache.
    pub cache_maps: u64,
    pub preloads_received: u64,
    /// Largest number of unsynced versions seen for any slave.
    pub max_queue_depth: u64,
}

/// Live master objects that may serialize themselves on demand.
trait MasterCell: Send + Sync {
    /// Instance data of the current state, if the object is idle, clean and
    /// at `version`.
    /// `size_hint` presizes the serialization buffer.
    fn instance_if_clean(&self, version: Version, size_hint: usize) -> Option<Vec<u8>>;
}

struct MasterEntry {
    change_type: ChangeType,
    head: Version,
    history: VersionHistory,
    cell: Arc<dyn MasterCell>,
    /// Last version each slave confirmed.
    slaves: HashMap<Uuid, Version>,
    lost: Vec<Uuid>,
    encoded: HashMap<Version, Arc<[u8]>>,
}

struct Inbox {
    master: Uuid,
    current: Version,
    queue: BTreeMap<Version, (PayloadKind, Body)>,
    master_lost: bool,
}

enum MapReply {
    Data { version: Version, change_type: ChangeType, body: Body },
    Cached { version: Version, change_type: ChangeType },
    Unknown,
    Unavailable(Version),
}

#[derive(Default)]
struct BarrierMaster {
    height: u32,
    broken: bool,
    members: HashSet<Uuid>,
    rounds: HashMap<u64, Vec<Uuid>>,
}

#[derive(Default)]
struct QueueMaster {
    items: VecDeque<Vec<u8>>,
    closed: bool,
    waiting: VecDeque<(Uuid, u32)>,
}

#[derive(Default)]
struct QueueInbox {
    items: VecDeque<Vec<u8>>,
    outstanding: u32,
    ended: bool,
    max_buffered: usize,
}

struct Store {
    masters: HashMap<ObjectId, MasterEntry>,
    slaves: HashMap<ObjectId, Inbox>,
    directory: HashMap<ObjectId, Uuid>,
    finds: HashMap<u64, (usize, Option<Uuid>)>,
    maps: HashMap<u64, Option<MapReply>>,
    cache: InstanceCache,
    stats: ObjectStats,
    next_req: u64,
    barriers: HashMap<ObjectId, BarrierMaster>,
    released: HashMap<(ObjectId, u64), bool>,
    queues: HashMap<ObjectId, QueueMaster>,
    consumers: HashMap<ObjectId, QueueInbox>,
    lost_peers: HashSet<Uuid>,
}

impl Store {
    fn request_id(&mut self) -> u64 {
        self.next_req += 1;
        self.next_req
    }
}

struct Shared {
    cfg: ObjectConfig,
    registry: Registry,
    store: Mutex<Store>,
    cond: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap()
    }

    /// Waits until `ready` yields a value or the configured timeout passes.
    fn wait_for<'a, T>(
        &'a self,
        mut store: MutexGuard<'a, Store>,
        what: &'static str,
        timeout: Option<Duration>,
        mut ready: impl FnMut(&mut Store) -> Option<T>,
    ) -> Result<(T, MutexGuard<'a, Store>)> {
        let deadline = Instant::now() + timeout.unwrap_or(self.cfg.timeout);
        loop {
            if let Some(v) = ready(&mut store) {
                return Ok((v, store));
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(Error::Timeout(what));
            }
            store = self.cond.wait_timeout(store, deadline - now).unwrap().0;
        }
    }

    /// Splits `raw` into chunks, compressing each one that shrinks.
    fn encode_body(&self, raw: &[u8]) -> Vec<u8> {
        self.encode_after(Vec::new(), raw)
    }

    /// Appends the framed chunks of `raw` to `out`.
    fn encode_after(&self, mut out: Vec<u8>, raw: &[u8]) -> Vec<u8> {
        let chunk = self.cfg.chunk_size.max(1);
        // Reserving the uncompressed bound is cheap: untouched pages are
        // never faulted in.
        out.reserve(raw.len() + (raw.len() / chunk + 1) * FRAME_HEADER_LEN);
        if raw.is_empty() {
            encode_frame(&mut out, 0, &[]);
        }
        for chunk in raw.chunks(chunk) {
            match &self.cfg.compressor {
                Some(e) => {
                    let c = e.compress(chunk);
                    if c.len() < chunk.len() {
                        encode_frame(&mut out, e.id().code, &c);
                    } else {
                        encode_frame(&mut out, 0, chunk);
                    }
                }
                None => encode_frame(&mut out, 0, chunk),
            }
        }
        out
    }

    fn decode_body(&self, body: &[u8]) -> Result<Vec<u8>> {
        let mut frames = FrameReader::new(body);
        let mut out = Vec::with_capacity(decoded_bound(body, self.cfg.chunk_size));
        while let Some((code, chunk)) = frames.next_chunk()? {
            if code == 0 {
                out.extend_from_slice(&chunk);
            } else {
                out.extend_from_slice(&self.registry.by_code(code)?.decompress(&chunk)?);
            }
        }
        Ok(out)
    }

    /// Payload of `version` as sent after a commit.
    fn commit_payload(entry: &MasterEntry, version: Version) -> Option<(PayloadKind, Arc<[u8]>)> {
        match entry.change_type {
            ChangeType::Instance => entry.history.instance(version).map(|d| (PayloadKind::Instance, d.clone())),
            _ => entry.history.delta(version).map(|d| (PayloadKind::Delta, d.clone())),
        }
    }
}

/// Capacity guess for a decoded body: the frame count times the chunk size,
/// or the body size when that is larger.
fn decoded_bound(body: &[u8], chunk_size: usize) -> usize {
    let (mut frames, mut at) = (0usize, 0usize);
    while let Ok(Some((_, _, used))) = decode_frame(&body[at..]) {
        frames += 1;
        at += used;
    }
    body.len().max(frames * chunk_size)
}

/// Encodes a payload header followed by the framed `raw` data.
fn data_message(s: &Shared, header: &PayloadHeader, raw: &[u8]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    header.encode(&mut w);
    s.encode_after(w.into_inner(), raw)
}

/// The tail of a received command, shared rather than copied.
#[derive(Clone)]
struct Body {
    buf: Arc<Vec<u8>>,
    start: usize,
}

impl Body {
    /// `rest` must be a suffix of the command's payload.
    fn tail(c: &Command, rest: &[u8]) -> Self {
        Body { buf: c.payload.clone(), start: c.payload.len() - rest.len() }
    }
}

impl std::ops::Deref for Body {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.buf[self.start..]
    }
}

/// Distributed object support of one node.
#[derive(Clone)]
pub struct ObjectNode {
    node: LocalNode,
    shared: Arc<Shared>,
}

impl ObjectNode {
    pub fn new(cfg: ObjectConfig) -> Self {
        Self::on(LocalNode::new(), cfg)
    }

    /// Installs object handling on an existing node.
    pub fn on(node: LocalNode, cfg: ObjectConfig) -> Self {
        let registry = crate::codec::registry();
        let store = Store {
            masters: HashMap::new(),
            slaves: HashMap::new(),
            directory: HashMap::new(),
            finds: HashMap::new(),
            maps: HashMap::new(),
            cache: InstanceCache::new(cfg.cache_bytes),
            stats: ObjectStats::default(),
            next_req: 0,
            barriers: HashMap::new(),
            released: HashMap::new(),
            queues: HashMap::new(),
            consumers: HashMap::new(),
            lost_peers: HashSet::new(),
        };
        let shared = Arc::new(Shared { cfg, registry, store: Mutex::new(store), cond: Condvar::new() });
        let handlers: [(CommandKind, fn(&Shared, &LocalNode, &Command) -> Result<()>); 12] = [
            (FIND_MASTER, on_find_master),
            (FOUND, on_found),
            (MAP_REQ, on_map_request),
            (MAP_REPLY, on_map_reply),
            (OBJ_DATA, on_data),
            (SYNCED, on_synced),
            (UNMAP, on_unmap),
            (PRELOAD, on_preload),
            (BARRIER_ENTER, barrier::on_enter),
            (BARRIER_RELEASE, barrier::on_release),
            (QUEUE_POP, queue::on_pop),
            (QUEUE_ITEMS, queue::on_items),
        ];
        for (kind, f) in handlers {
            let s = shared.clone();
            node.register_handler(
                kind,
                Arc::new(move |n, c| {
                    // Malformed commands are dropped; the sender times out.
                    let _ = f(&s, n, c);
                }),
            );
        }
        let s = shared.clone();
        node.on_disconnect(Arc::new(move |n, peer| on_peer_lost(&s, n, peer)));
        Self { node, shared }
    }

    pub fn node(&self) -> &LocalNode {
        &self.node
    }

    pub fn id(&self) -> Uuid {
        self.node.id()
    }

    pub fn config(&self) -> &ObjectConfig {
        &self.shared.cfg
    }

    pub fn stats(&self) -> ObjectStats {
        self.shared.lock().stats
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.shared.lock().cache.stats()
    }

    pub fn cache_len(&self) -> usize {
        self.shared.lock().cache.len()
    }

    pub fn cache_contains(&self, id: ObjectId, version: Version) -> bool {
        self.shared.lock().cache.contains(id, version)
    }

    /// Finds the node holding the master of `id`.
    fn locate(&self, id: ObjectId) -> Result<Uuid> {
        let mut store = self.shared.lock();
        if store.masters.contains_key(&id) {
            return Ok(self.id());
        }
        if let Some(m) = store.directory.get(&id) {
            return Ok(*m);
        }
        let peers = self.node.peers();
        if peers.is_empty() {
            return Err(Error::UnknownObject(id));
        }
        let req = store.request_id();
        store.finds.insert(req, (peers.len(), None));
        drop(store);
        let mut msg = ByteWriter::new();
        msg.u64(req);
        msg.u128(id.0);
        for p in &peers {
            // A peer that vanished meanwhile counts as a negative answer.
            if p.send_command(FIND_MASTER, msg.as_slice()).is_err() {
                let mut store = self.shared.lock();
                if let Some(f) = store.finds.get_mut(&req) {
                    f.0 = f.0.saturating_sub(1);
                }
            }
        }
        let store = self.shared.lock();
        let (found, mut store) = self.shared.wait_for(store, "master lookup", None, |s| {
            let (left, found) = s.finds[&req];
            (found.is_some() || left == 0).then_some(found)
        })?;
        store.finds.remove(&req);
        let m = found.ok_or(Error::UnknownObject(id))?;
        store.directory.insert(id, m);
        Ok(m)
    }
}

impl Default for ObjectNode {
    fn default() -> Self {
        Self::new(ObjectConfig::default())
    }
}

fn on_find_master(s: &Shared, node: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let req = r.u64()?;
    let id = r.u128()?;
    let found = s.lock().masters.contains_key(&ObjectId(id));
    let mut w = ByteWriter::new();
    w.u64(req);
    w.u8(found as u8);
    node.send(c.from, FOUND, w.as_slice())?;
    Ok(())
}

fn on_found(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let req = r.u64()?;
    let found = r.u8()? != 0;
    let mut store = s.lock();
    if let Some(f) = store.finds.get_mut(&req) {
        f.0 = f.0.saturating_sub(1);
        if found {
            f.1 = Some(c.from);
        }
        s.cond.notify_all();
    }
    Ok(())
}

fn on_map_request(s: &Shared, node: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let req = r.u64()?;
    let id = ObjectId(r.u128()?);
    let requested = Version(r.u64()?);
    let cached: Vec<Version> = (0..r.u32()?).map(|_| r.u64().map(Version)).collect::<Result<_, _>>()?;

    let mut reply = ByteWriter::new();
    reply.u64(req);
    let mut store = s.lock();
    let Some(entry) = store.masters.get_mut(&id) else {
        drop(store);
        reply.u8(REPLY_UNKNOWN);
        node.send(c.from, MAP_REPLY, reply.as_slice())?;
        return Ok(());
    };
    let oldest = entry.history.oldest().unwrap_or(Version::NONE);
    let version = match requested {
        Version::OLDEST => oldest,
        Version::HEAD => entry.head,
        v => v,
    };
    if version < oldest || version > entry.head {
        drop(store);
        reply.u8(REPLY_UNAVAILABLE);
        reply.u64(version.0);
        node.send(c.from, MAP_REPLY, reply.as_slice())?;
        return Ok(());
    }
    let change_type = entry.change_type;
    entry.slaves.insert(c.from, version);
    let head = entry.head;
    let catch_up: Vec<Vec<u8>> = (version.0 + 1..=head.0)
        .filter_map(|v| {
            let (kind, raw) = Shared::commit_payload(entry, Version(v))?;
            let header = PayloadHeader { id, version: Version(v), change_type, kind, mask: DirtyMask::ALL };
            Some(data_message(s, &header, &raw))
        })
        .collect();

    if cached.contains(&version) {
        drop(store);
        reply.u8(REPLY_CACHED);
        reply.u64(version.0);
        reply.u8(change_type as u8);
        node.send(c.from, MAP_REPLY, reply.as_slice())?;
    } else {
        reply.u8(REPLY_DATA);
        reply.u64(version.0);
        reply.u8(change_type as u8);
        if s.cfg.buffered {
            let body = match entry.encoded.get(&version) {
                Some(b) => b.clone(),
                None => {
                    let raw = entry.history.instance(version).expect("retained version").clone();
                    let b: Arc<[u8]> = s.encode_body(&raw).into();
                    entry.encoded.insert(version, b.clone());
                    b
                }
            };
            node.send_parts(c.from, MAP_REPLY, &[reply.as_slice(), &body])?;
        } else {
            // Unbuffered serving re-serializes the live object when it is
            // still at the requested version.
            let cell = entry.cell.clone();
            let retained = entry.history.instance(version).cloned();
            drop(store);
            let live = cell.instance_if_clean(version, retained.as_ref().map_or(0, |r| r.len()));
            let raw: &[u8] = match &live {
                Some(v) => v,
                None => retained.as_deref().expect("retained version"),
            };
            let msg = s.encode_after(reply.into_inner(), raw);
            node.send(c.from, MAP_REPLY, &msg)?;
        }
    }
    for m in catch_up {
        node.send(c.from, OBJ_DATA, &m)?;
    }
    Ok(())
}

fn on_map_reply(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let req = r.u64()?;
    let reply = match r.u8()? {
        REPLY_UNKNOWN => MapReply::Unknown,
        REPLY_UNAVAILABLE => MapReply::Unavailable(Version(r.u64()?)),
        status => {
            let version = Version(r.u64()?);
            let change_type = ChangeType::from_u8(r.u8()?).ok_or(ObjectError::Malformed("change type"))?;
            if status == REPLY_CACHED {
                MapReply::Cached { version, change_type }
            } else {
                MapReply::Data { version, change_type, body: Body::tail(c, r.remaining()) }
            }
        }
    };
    let mut store = s.lock();
    if let Some(slot) = store.maps.get_mut(&req) {
        *slot = Some(reply);
        s.cond.notify_all();
    }
    Ok(())
}

fn on_data(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let header = PayloadHeader::decode(&mut r)?;
    let body = r.remaining();
    let snoop = c.multicast && header.kind == PayloadKind::Instance && s.cfg.cache_bytes > 0;
    let raw = if snoop { Some(s.decode_body(body)?) } else { None };
    let mut store = s.lock();
    if let Some(raw) = raw {
        store.cache.insert(header.id, header.version, raw.into());
    }
    if let Some(inbox) = store.slaves.get_mut(&header.id) {
        if inbox.master == c.from && header.version > inbox.current {
            inbox.queue.insert(header.version, (header.kind, Body::tail(c, body)));
            s.cond.notify_all();
        }
    }
    Ok(())
}

fn on_synced(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let id = ObjectId(r.u128()?);
    let version = Version(r.u64()?);
    let mut store = s.lock();
    if let Some(e) = store.masters.get_mut(&id) {
        if let Some(v) = e.slaves.get_mut(&c.from) {
            *v = (*v).max(version);
            s.cond.notify_all();
        }
    }
    Ok(())
}

fn on_unmap(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let id = ObjectId(ByteReader::new(&c.payload).u128()?);
    let mut store = s.lock();
    if let Some(e) = store.masters.get_mut(&id) {
        e.slaves.remove(&c.from);
        s.cond.notify_all();
    }
    Ok(())
}

fn on_preload(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let header = PayloadHeader::decode(&mut r)?;
    let raw = s.decode_body(r.remaining())?;
    let mut store = s.lock();
    store.directory.insert(header.id, c.from);
    store.cache.insert(header.id, header.version, raw.into());
    store.stats.preloads_received += 1;
    s.cond.notify_all();
    Ok(())
}

fn on_peer_lost(s: &Shared, node: &LocalNode, peer: Uuid) {
    let mut store = s.lock();
    store.lost_peers.insert(peer);
    for e in store.masters.values_mut() {
        if e.slaves.remove(&peer).is_some() {
            e.lost.push(peer);
        }
    }
    for inbox in store.slaves.values_mut() {
        if inbox.master == peer {
            inbox.master_lost = true;
        }
    }
    store.directory.retain(|_, m| *m != peer);
    let failed = barrier::peer_lost(&mut store, peer);
    queue::peer_lost(&mut store, peer);
    s.cond.notify_all();
    drop(store);
    barrier::send_failures(node, failed);
}
