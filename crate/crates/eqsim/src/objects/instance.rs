//! Master and slave instances.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use eqsim_core::object::{
    apply_fields, pack_fields, ByteReader, ByteWriter, ChangeType, DirtyMask, ObjectId, PayloadHeader, PayloadKind,
    Serializable, Version, VersionHistory,
};
use uuid::Uuid;

use super::{
    data_message, Error, Inbox, MapReply, MasterCell, MasterEntry, ObjectNode, Result, MAP_REQ, OBJ_DATA,
    PRELOAD, SYNCED, UNMAP,
};

struct Cell<T> {
    obj: Mutex<T>,
    head: AtomicU64,
    /// Length of the last serialized instance.
    size: AtomicUsize,
}

impl<T: Serializable + Send> MasterCell for Cell<T> {
    fn instance_if_clean(&self, version: Version, size_hint: usize) -> Option<Vec<u8>> {
        let obj = self.obj.try_lock().ok()?;
        if self.head.load(Ordering::Acquire) != version.0 || !obj.dirty().fields().is_clean() {
            return None;
        }
        Some(instance_of(&*obj, size_hint))
    }
}

fn instance_of<T: Serializable + ?Sized>(obj: &T, size_hint: usize) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(size_hint);
    pack_fields(obj, DirtyMask::ALL, &mut w);
    w.into_inner()
}

/// The authoritative instance of a distributed object. Clones share it.
pub struct Master<T> {
    node: ObjectNode,
    id: ObjectId,
    change_type: ChangeType,
    cell: Arc<Cell<T>>,
}

impl<T> Clone for Master<T> {
    fn clone(&self) -> Self {
        Self { node: self.node.clone(), id: self.id, change_type: self.change_type, cell: self.cell.clone() }
    }
}

impl ObjectNode {
    /// Registers `obj` as a master under a fresh random id.
    pub fn register<T: Serializable + Send + 'static>(&self, obj: T, change_type: ChangeType) -> Result<Master<T>> {
        self.register_with_id(ObjectId(Uuid::new_v4().as_u128()), obj, change_type)
    }

    pub fn register_with_id<T: Serializable + Send + 'static>(
        &self,
        id: ObjectId,
        mut obj: T,
        change_type: ChangeType,
    ) -> Result<Master<T>> {
        let s = &self.shared;
        let instance: Arc<[u8]> = instance_of(&obj, 0).into();
        obj.set_dirty(DirtyMask::NONE);
        let cell = Arc::new(Cell { obj: Mutex::new(obj), head: AtomicU64::new(0), size: AtomicUsize::new(instance.len()) });
        let depth = if change_type.is_buffered() { s.cfg.history_depth } else { 0 };
        let mut history = VersionHistory::new(depth);
        history.push(Version::NONE, instance.clone(), None);
        {
            let mut store = s.lock();
            if store.masters.contains_key(&id) {
                return Err(Error::AlreadyRegistered(id));
            }
            store.masters.insert(
                id,
                MasterEntry {
                    change_type,
                    head: Version::NONE,
                    history,
                    cell: cell.clone(),
                    slaves: HashMap::new(),
                    lost: Vec::new(),
                    encoded: HashMap::new(),
                },
            );
        }
        if s.cfg.preload {
            let header =
                PayloadHeader { id, version: Version::NONE, change_type, kind: PayloadKind::Instance, mask: DirtyMask::ALL };
            let msg = data_message(s, &header, &instance);
            for p in self.node.peers() {
                p.send_command(PRELOAD, &msg)?;
            }
        }
        Ok(Master { node: self.clone(), id, change_type, cell })
    }

    /// Maps the object `id` at `requested` (an explicit version,
    /// [`Version::OLDEST`] or [`Version::HEAD`]) into `obj`.
    pub fn map<T: Serializable + Send + 'static>(&self, id: ObjectId, requested: Version, mut obj: T) -> Result<Slave<T>> {
        let master = self.locate(id)?;
        let s = &self.shared;
        {
            let mut store = s.lock();
            if store.slaves.contains_key(&id) {
                return Err(Error::AlreadyMapped(id));
            }
            store.slaves.insert(
                id,
                Inbox { master, current: Version::NONE, queue: BTreeMap::new(), master_lost: false },
            );
        }
        let unmap = |e: Error| {
            self.shared.lock().slaves.remove(&id);
            e
        };
        let mut use_cache = true;
        let (version, change_type) = loop {
            let mut store = s.lock();
            let req = store.request_id();
            store.maps.insert(req, None);
            let cached: Vec<Version> = match store.cache.versions(id) {
                Some((lo, hi)) if use_cache => {
                    (lo.0..=hi.0).map(Version).filter(|v| store.cache.contains(id, *v)).take(256).collect()
                }
                _ => Vec::new(),
            };
            drop(store);
            let mut w = ByteWriter::new();
            w.u64(req);
            w.u128(id.0);
            w.u64(requested.0);
            w.u32(cached.len() as u32);
            for v in &cached {
                w.u64(v.0);
            }
            self.node.send(master, MAP_REQ, w.as_slice()).map_err(|e| unmap(e.into()))?;
            let store = s.lock();
            let (reply, mut store) = s
                .wait_for(store, "map reply", None, |st| {
                    if st.slaves.get(&id).is_some_and(|i| i.master_lost) {
                        return Some(None);
                    }
                    st.maps.get_mut(&req).and_then(Option::take).map(Some)
                })
                .map_err(|e| {
                    self.shared.lock().maps.remove(&req);
                    unmap(e)
                })?;
            store.maps.remove(&req);
            let raw = match reply {
                None => {
                    drop(store);
                    return Err(unmap(Error::MasterLost(id)));
                }
                Some(MapReply::Unknown) => {
                    drop(store);
                    return Err(unmap(Error::UnknownObject(id)));
                }
                Some(MapReply::Unavailable(version)) => {
                    drop(store);
                    return Err(unmap(Error::VersionUnavailable { id, version }));
                }
                Some(MapReply::Cached { version, change_type }) => match store.cache.get(id, version) {
                    Some(raw) => {
                        store.stats.cache_maps += 1;
                        (version, change_type, raw.to_vec())
                    }
                    None => {
                        // Evicted since the request went out.
                        use_cache = false;
                        continue;
                    }
                },
                Some(MapReply::Data { version, change_type, body }) => {
                    store.stats.instance_requests += 1;
                    drop(store);
                    let raw = s.decode_body(&body).map_err(unmap)?;
                    let mut store = s.lock();
                    if s.cfg.cache_bytes > 0 {
                        store.cache.insert(id, version, raw.clone().into());
                    }
                    (version, change_type, raw)
                }
            };
            let (version, change_type, raw) = raw;
            apply_fields(&mut obj, &mut ByteReader::new(&raw)).map_err(|e| unmap(e.into()))?;
            break (version, change_type);
        };
        {
            let mut store = s.lock();
            let inbox = store.slaves.get_mut(&id).expect("inbox present while mapping");
            inbox.current = version;
            inbox.queue.retain(|v, _| *v > version);
        }
        obj.set_dirty(DirtyMask::NONE);
        let slave = SlaveInner { node: self.clone(), id, master, change_type, version, obj };
        slave.send_synced();
        Ok(Slave { inner: Arc::new(Mutex::new(slave)), id })
    }
}

impl<T: Serializable + Send + 'static> Master<T> {
    pub fn id(&self) -> ObjectId {
        self.id
    }

    pub fn change_type(&self) -> ChangeType {
        self.change_type
    }

    pub fn version(&self) -> Version {
        Version(self.cell.head.load(Ordering::Acquire))
    }

    pub fn with<R>(&self, f: impl FnOnce(&T) -> R) -> R {
        f(&self.cell.obj.lock().unwrap())
    }

    /// Modifies the object; the closure must mark what it changed dirty.
    pub fn with_mut<R>(&self, f: impl FnOnce(&mut T) -> R) -> R {
        f(&mut self.cell.obj.lock().unwrap())
    }

    /// Instance data retained for `version`.
    pub fn snapshot(&self, version: Version) -> Option<Vec<u8>> {
        let store = self.node.shared.lock();
        store.masters.get(&self.id)?.history.instance(version).map(|d| d.to_vec())
    }

    /// Slaves currently subscribed to this object.
    pub fn slave_count(&self) -> usize {
        self.node.shared.lock().masters.get(&self.id).map_or(0, |e| e.slaves.len())
    }

    /// Waits until `n` slaves are subscribed.
    pub fn wait_slaves(&self, n: usize, timeout: Duration) -> Result<()> {
        let s = &self.node.shared;
        let id = self.id;
        s.wait_for(s.lock(), "slaves", Some(timeout), |st| (st.masters[&id].slaves.len() >= n).then_some(()))
            .map(|_| ())
    }

    /// Publishes the dirty fields as the next version. Clean objects return
    /// the current version without sending anything.
    pub fn commit(&self) -> Result<Version> {
        self.commit_inner(None)
    }

    /// Like [`Master::commit`], but first waits while any slave lags more
    /// than `max_queued` versions behind.
    pub fn blocking_commit(&self, max_queued: usize, timeout: Option<Duration>) -> Result<Version> {
        self.commit_inner(Some((max_queued.max(1), timeout)))
    }

    fn commit_inner(&self, wait: Option<(usize, Option<Duration>)>) -> Result<Version> {
        if !self.change_type.is_versioned() {
            return Err(Error::StaticCommit(self.id));
        }
        let s = &self.node.shared;
        let id = self.id;
        let mut obj = self.cell.obj.lock().unwrap();
        let dirty = DirtyMask::from_bits(obj.dirty().fields().bits() & obj.field_mask().bits());
        let head = Version(self.cell.head.load(Ordering::Acquire));
        if dirty.is_clean() {
            return Ok(head);
        }
        let mut store = s.lock();
        if let Some((max_queued, timeout)) = wait {
            store = s
                .wait_for(store, "slave tokens", timeout, |st| {
                    let e = st.masters.get_mut(&id).expect("registered master");
                    if !e.lost.is_empty() {
                        return Some(Err(Error::SlavesLost(std::mem::take(&mut e.lost))));
                    }
                    let lag = e.slaves.values().map(|v| head.0 - v.0.min(head.0)).max().unwrap_or(0);
                    (lag < max_queued as u64).then_some(Ok(()))
                })
                .and_then(|(r, st)| r.map(|_| st))?;
        }
        drop(store);

        let instance: Arc<[u8]> = instance_of(&*obj, self.cell.size.load(Ordering::Relaxed)).into();
        self.cell.size.store(instance.len(), Ordering::Relaxed);
        let delta: Option<Arc<[u8]>> = (self.change_type != ChangeType::Instance).then(|| {
            let mut w = ByteWriter::new();
            pack_fields(&*obj, dirty, &mut w);
            w.into_inner().into()
        });
        obj.set_dirty(DirtyMask::NONE);
        let version = head.next();
        let (kind, raw) = match &delta {
            Some(d) => (PayloadKind::Delta, d.clone()),
            None => (PayloadKind::Instance, instance.clone()),
        };
        let body = s.encode_body(&raw);
        let header = PayloadHeader { id, version, change_type: self.change_type, kind, mask: dirty };
        let mut w = ByteWriter::with_capacity(body.len() + 64);
        header.encode(&mut w);
        w.bytes(&body);
        let msg = w.into_inner();

        let mut store = s.lock();
        let use_multicast;
        let slaves: Vec<Uuid>;
        {
            let e = store.masters.get_mut(&id).expect("registered master");
            e.head = version;
            e.history.push(version, instance, delta);
            self.cell.head.store(version.0, Ordering::Release);
            if s.cfg.buffered && kind == PayloadKind::Instance {
                e.encoded.insert(version, body.into());
            }
            let oldest = e.history.oldest().unwrap_or(version);
            e.encoded.retain(|v, _| *v >= oldest);
            slaves = e.slaves.keys().copied().collect();
            let depth = e.slaves.values().map(|v| version.0 - v.0.min(version.0)).max().unwrap_or(0);
            store.stats.max_queue_depth = store.stats.max_queue_depth.max(depth);
            store.stats.commits += 1;
        }
        let node = &self.node.node;
        use_multicast = s.cfg.multicast && slaves.len() >= 2 && node.has_multicast() && {
            let members = node.multicast_members();
            slaves.iter().all(|u| members.contains(u))
        };
        // Sending under the store lock keeps payloads in version order
        // relative to mapping replies.
        if use_multicast {
            node.multicast(OBJ_DATA, &msg)?;
            store.stats.multicast_payloads += 1;
        } else {
            for u in &slaves {
                if node.send(*u, OBJ_DATA, &msg).is_ok() {
                    store.stats.unicast_payloads += 1;
                }
            }
        }
        Ok(version)
    }
}

struct SlaveInner<T> {
    node: ObjectNode,
    id: ObjectId,
    master: Uuid,
    change_type: ChangeType,
    version: Version,
    obj: T,
}

impl<T> SlaveInner<T> {
    fn send_synced(&self) {
        let mut w = ByteWriter::new();
        w.u128(self.id.0);
        w.u64(self.version.0);
        // A lost master is reported by the next sync.
        let _ = self.node.node.send(self.master, SYNCED, w.as_slice());
    }
}

impl<T> Drop for SlaveInner<T> {
    fn drop(&mut self) {
        self.node.shared.lock().slaves.remove(&self.id);
        let _ = self.node.node.send(self.master, UNMAP, &self.id.0.to_le_bytes());
    }
}

/// A mapped replica. Clones share it; the last clone unmaps.
pub struct Slave<T> {
    inner: Arc<Mutex<SlaveInner<T>>>,
    id: ObjectId,
}

impl<T> Clone for Slave<T> {
    fn clone(&self) -> Self {
        Self { inner: self.inner.clone(), id: self.id }
    }
}

impl<T: Serializable + Send + 'static> Slave<T> {
    fn lock(&self) -> MutexGuard<'_, SlaveInner<T>> {
        self.inner.lock().unwrap()
    }

    pub fn id(&self) -> ObjectId {
        self.id
    }

    pub fn version(&self) -> Version {
        self.lock().version
    }

    pub fn change_type(&self) -> ChangeType {
        self.lock().change_type
    }

    pub fn with<R>(&self, f: impl FnOnce(&T) -> R) -> R {
        f(&self.lock().obj)
    }

    /// All-fields serialization of the replica, comparable to
    /// [`Master::snapshot`].
    pub fn instance(&self) -> Vec<u8> {
        instance_of(&self.lock().obj, 0)
    }

    /// Applies queued versions up to `target`, waiting for ones not yet
    /// received. [`Version::HEAD`] applies whatever is queued without
    /// waiting.
    pub fn sync(&self, target: Version) -> Result<Version> {
        self.sync_timeout(target, None)
    }

    pub fn sync_timeout(&self, target: Version, timeout: Option<Duration>) -> Result<Version> {
        let mut me = self.lock();
        let id = self.id;
        if target == Version::OLDEST || (target != Version::HEAD && target < me.version) {
            return Err(Error::SyncBackwards { id, current: me.version, target });
        }
        if target == me.version {
            return Ok(me.version);
        }
        let s = me.node.shared.clone();
        let current = me.version;
        let store = s.lock();
        let (payloads, mut store) = if target == Version::HEAD {
            let mut store = store;
            let inbox = store.slaves.get_mut(&id).expect("mapped slave");
            let mut out = Vec::new();
            let mut next = current.next();
            while let Some(p) = inbox.queue.remove(&next) {
                out.push((next, p));
                next = next.next();
            }
            (Ok(out), store)
        } else {
            match s.wait_for(store, "object version", timeout, |st| {
                let inbox = st.slaves.get_mut(&id).expect("mapped slave");
                if inbox.queue.range(current.next()..=target).count() as u64 == target.0 - current.0 {
                    let out: Vec<_> = (current.0 + 1..=target.0)
                        .map(|v| (Version(v), inbox.queue.remove(&Version(v)).unwrap()))
                        .collect();
                    return Some(Ok(out));
                }
                inbox.master_lost.then(|| Err(Error::MasterLost(id)))
            }) {
                Ok((r, st)) => (r, st),
                Err(e) => return Err(e),
            }
        };
        let payloads = payloads?;
        if let Some((v, _)) = payloads.last() {
            store.slaves.get_mut(&id).expect("mapped slave").current = *v;
        }
        drop(store);
        for (v, (_, body)) in payloads {
            let raw = s.decode_body(&body)?;
            apply_fields(&mut me.obj, &mut ByteReader::new(&raw))?;
            me.version = v;
        }
        me.obj.set_dirty(DirtyMask::NONE);
        if me.version != current {
            me.send_synced();
        }
        Ok(me.version)
    }
}
