//! Nodes exchanging typed commands over connections and multicast groups.
//!
//! Every peer connection has a receive thread that frames incoming bytes
//! into [`Command`]s and queues them for the node's single command thread,
//! which dispatches them to handlers in arrival order. Handlers therefore
//! run one at a time and must not block.

use std::collections::{HashMap, HashSet};
use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock, Weak};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};
use uuid::Uuid;

use super::conn::{self, ConnWriter, Connection, ConnectionDescription, Pacer};
use super::rsp::{RspEndpoint, RspReader};

pub type CommandKind = u32;

/// Command kinds from here up are used by the node itself.
pub const RESERVED_KINDS: CommandKind = 0xffff_0000;
const HELLO: CommandKind = RESERVED_KINDS + 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub from: Uuid,
    pub kind: CommandKind,
    pub payload: Arc<Vec<u8>>,
    /// Arrived through the multicast group.
    pub multicast: bool,
}

pub type Handler = Arc<dyn Fn(&LocalNode, &Command) + Send + Sync>;
pub type DisconnectHook = Arc<dyn Fn(&LocalNode, Uuid) + Send + Sync>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub dispatched: u64,
    /// Commands without a registered handler.
    pub rejected: u64,
    pub unicast_sent: u64,
    pub multicast_sent: u64,
}

#[derive(Default)]
struct Counters {
    dispatched: AtomicU64,
    rejected: AtomicU64,
    unicast_sent: AtomicU64,
    multicast_sent: AtomicU64,
}

enum Event {
    Command(Command),
    Disconnected(Uuid),
}

/// Proxy of a connected peer.
#[derive(Clone)]
pub struct RemoteNode {
    id: Uuid,
    writer: Arc<Mutex<ConnWriter>>,
}

impl RemoteNode {
    pub fn id(&self) -> Uuid {
        self.id
    }

    /// Frames and sends one command: `u32 len, u32 kind, payload`, little endian.
    pub fn send_command(&self, kind: CommandKind, payload: &[u8]) -> io::Result<()> {
        self.send_parts(kind, &[payload])
    }

    /// Sends the concatenation of `parts` as one command.
    pub fn send_parts(&self, kind: CommandKind, parts: &[&[u8]]) -> io::Result<()> {
        let len: usize = parts.iter().map(|p| p.len()).sum();
        let mut w = self.writer.lock().unwrap();
        let mut head = [0u8; 8];
        head[..4].copy_from_slice(&(len as u32).to_le_bytes());
        head[4..].copy_from_slice(&kind.to_le_bytes());
        w.write_all(&head)?;
        for p in parts {
            w.write_all(p)?;
        }
        w.flush()
    }
}

struct Multicast {
    ep: Arc<RspEndpoint>,
    write: Mutex<()>,
}

struct Inner {
    id: Uuid,
    handlers: RwLock<HashMap<CommandKind, Handler>>,
    hooks: RwLock<Vec<DisconnectHook>>,
    peers: Mutex<HashMap<Uuid, RemoteNode>>,
    peers_changed: Condvar,
    events: Sender<Event>,
    counters: Counters,
    rejections: Mutex<Vec<(Uuid, CommandKind)>>,
    pacer: Option<Arc<Pacer>>,
    multicast: RwLock<Option<Arc<Multicast>>>,
    mc_members: Mutex<HashSet<Uuid>>,
}

/// This process's node.
#[derive(Clone)]
pub struct LocalNode {
    inner: Arc<Inner>,
}

impl LocalNode {
    pub fn new() -> Self {
        Self::build(None)
    }

    /// A node whose outgoing unicast traffic shares one link of
    /// `bytes_per_sec`.
    pub fn with_link_rate(bytes_per_sec: f64) -> Self {
        Self::build(Some(Arc::new(Pacer::new(bytes_per_sec))))
    }

    fn build(pacer: Option<Arc<Pacer>>) -> Self {
        let (tx, rx) = unbounded::<Event>();
        let inner = Arc::new(Inner {
            id: Uuid::new_v4(),
            handlers: RwLock::default(),
            hooks: RwLock::default(),
            peers: Mutex::default(),
            peers_changed: Condvar::new(),
            events: tx,
            counters: Counters::default(),
            rejections: Mutex::default(),
            pacer,
            multicast: RwLock::default(),
            mc_members: Mutex::default(),
        });
        let weak: Weak<Inner> = Arc::downgrade(&inner);
        std::thread::Builder::new()
            .name("node-commands".into())
            .spawn(move || {
                for ev in rx {
                    let Some(inner) = weak.upgrade() else { break };
                    let node = LocalNode { inner };
                    match ev {
                        Event::Command(c) => node.dispatch(&c),
                        Event::Disconnected(peer) => node.peer_lost(peer),
                    }
                }
            })
            .expect("spawn command thread");
        LocalNode { inner }
    }

    pub fn id(&self) -> Uuid {
        self.inner.id
    }

    pub fn register_handler(&self, kind: CommandKind, handler: Handler) {
        self.inner.handlers.write().unwrap().insert(kind, handler);
    }

    pub fn on_disconnect(&self, hook: DisconnectHook) {
        self.inner.hooks.write().unwrap().push(hook);
    }

    /// Invokes the handler for `cmd`, or counts it as rejected.
    pub fn dispatch(&self, cmd: &Command) {
        if cmd.kind == HELLO {
            self.inner.mc_members.lock().unwrap().insert(cmd.from);
            return;
        }
        let h = self.inner.handlers.read().unwrap().get(&cmd.kind).cloned();
        match h {
            Some(h) => {
                self.inner.counters.dispatched.fetch_add(1, Ordering::Relaxed);
                h(self, cmd);
            }
            None => {
                self.inner.counters.rejected.fetch_add(1, Ordering::Relaxed);
                self.inner.rejections.lock().unwrap().push((cmd.from, cmd.kind));
            }
        }
    }

    fn peer_lost(&self, peer: Uuid) {
        self.inner.peers.lock().unwrap().remove(&peer);
        self.inner.peers_changed.notify_all();
        let hooks = self.inner.hooks.read().unwrap().clone();
        for h in hooks {
            h(self, peer);
        }
    }

    pub fn stats(&self) -> NodeStats {
        let c = &self.inner.counters;
        NodeStats {
            dispatched: c.dispatched.load(Ordering::Relaxed),
            rejected: c.rejected.load(Ordering::Relaxed),
            unicast_sent: c.unicast_sent.load(Ordering::Relaxed),
            multicast_sent: c.multicast_sent.load(Ordering::Relaxed),
        }
    }

    /// Sender and kind of every rejected command so far.
    pub fn rejections(&self) -> Vec<(Uuid, CommandKind)> {
        self.inner.rejections.lock().unwrap().clone()
    }

    /// Closes every peer connection. Peers observe a disconnect.
    pub fn disconnect_all(&self) {
        let peers: Vec<Uuid> = self.inner.peers.lock().unwrap().drain().map(|(id, _)| id).collect();
        self.inner.peers_changed.notify_all();
        for p in peers {
            let _ = self.inner.events.send(Event::Disconnected(p));
        }
    }

    pub fn peers(&self) -> Vec<RemoteNode> {
        self.inner.peers.lock().unwrap().values().cloned().collect()
    }

    pub fn peer(&self, id: Uuid) -> Option<RemoteNode> {
        self.inner.peers.lock().unwrap().get(&id).cloned()
    }

    /// Waits until at least `n` peers are connected.
    pub fn wait_peers(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut peers = self.inner.peers.lock().unwrap();
        while peers.len() < n {
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            peers = self.inner.peers_changed.wait_timeout(peers, deadline - now).unwrap().0;
        }
        true
    }

    /// Sends to a peer, or loops back through the command thread when `to`
    /// is this node.
    pub fn send(&self, to: Uuid, kind: CommandKind, payload: &[u8]) -> io::Result<()> {
        self.send_parts(to, kind, &[payload])
    }

    /// [`send`](Self::send) of the concatenation of `parts`.
    pub fn send_parts(&self, to: Uuid, kind: CommandKind, parts: &[&[u8]]) -> io::Result<()> {
        if to == self.id() {
            let cmd = Command { from: to, kind, payload: Arc::new(parts.concat()), multicast: false };
            return self.inner.events.send(Event::Command(cmd)).map_err(|_| io::ErrorKind::BrokenPipe.into());
        }
        let peer = self.peer(to).ok_or_else(|| io::Error::new(io::ErrorKind::NotConnected, to.to_string()))?;
        peer.send_parts(kind, parts)?;
        self.inner.counters.unicast_sent.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Accepts peers on `desc` in a background thread. Returns the bound
    /// description.
    pub fn listen(&self, desc: &ConnectionDescription) -> io::Result<ConnectionDescription> {
        let l = conn::listen(desc)?;
        let bound = l.description().clone();
        let weak = Arc::downgrade(&self.inner);
        std::thread::Builder::new().name("node-accept".into()).spawn(move || {
            while let Ok(c) = l.accept() {
                let Some(inner) = weak.upgrade() else { break };
                let _ = LocalNode { inner }.attach(c);
            }
        })?;
        Ok(bound)
    }

    pub fn connect(&self, desc: &ConnectionDescription) -> io::Result<RemoteNode> {
        self.attach(conn::connect(desc)?)
    }

    fn attach(&self, c: Connection) -> io::Result<RemoteNode> {
        let (mut reader, mut writer) = c.split();
        writer.write_all(self.id().as_bytes())?;
        let mut id = [0u8; 16];
        reader.read_exact(&mut id)?;
        let peer = Uuid::from_bytes(id);
        if let Some(p) = &self.inner.pacer {
            writer = writer.paced(p.clone());
        }
        let remote = RemoteNode { id: peer, writer: Arc::new(Mutex::new(writer)) };
        self.inner.peers.lock().unwrap().insert(peer, remote.clone());
        self.inner.peers_changed.notify_all();
        let events = self.inner.events.clone();
        std::thread::Builder::new().name("node-recv".into()).spawn(move || {
            let mut head = [0u8; 8];
            while reader.read_exact(&mut head).is_ok() {
                let len = u32::from_le_bytes(head[..4].try_into().unwrap()) as usize;
                let kind = u32::from_le_bytes(head[4..].try_into().unwrap());
                let mut payload = vec![0; len];
                if reader.read_exact(&mut payload).is_err() {
                    break;
                }
                let cmd = Command { from: peer, kind, payload: Arc::new(payload), multicast: false };
                if events.send(Event::Command(cmd)).is_err() {
                    return;
                }
            }
            let _ = events.send(Event::Disconnected(peer));
        })?;
        Ok(remote)
    }

    /// Routes multicast traffic of this node through `ep` and announces the
    /// node to the group.
    pub fn join_multicast(&self, ep: RspEndpoint) -> io::Result<()> {
        for w in ep.peers().to_vec() {
            let Some(r) = ep.take_reader(w) else { continue };
            let events = self.inner.events.clone();
            std::thread::Builder::new().name("node-mcast".into()).spawn(move || multicast_reader(r, events))?;
        }
        let m = Arc::new(Multicast { ep: Arc::new(ep), write: Mutex::new(()) });
        *self.inner.multicast.write().unwrap() = Some(m);
        self.multicast(HELLO, &[])
    }

    pub fn has_multicast(&self) -> bool {
        self.inner.multicast.read().unwrap().is_some()
    }

    /// Nodes heard on this node's multicast group.
    pub fn multicast_members(&self) -> HashSet<Uuid> {
        self.inner.mc_members.lock().unwrap().clone()
    }

    /// Waits until `n` other nodes announced themselves on the group.
    pub fn wait_multicast_members(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while self.inner.mc_members.lock().unwrap().len() < n {
            if Instant::now() >= deadline {
                return false;
            }
            std::thread::sleep(Duration::from_millis(1));
        }
        true
    }

    /// Sends one command to every other member of the group.
    pub fn multicast(&self, kind: CommandKind, payload: &[u8]) -> io::Result<()> {
        let m = self.inner.multicast.read().unwrap().clone();
        let m = m.ok_or_else(|| io::Error::new(io::ErrorKind::NotConnected, "no multicast group"))?;
        let mut frame = Vec::with_capacity(24 + payload.len());
        frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        frame.extend_from_slice(&kind.to_le_bytes());
        frame.extend_from_slice(self.id().as_bytes());
        frame.extend_from_slice(payload);
        let _g = m.write.lock().unwrap();
        m.ep.write(&frame).map_err(|e| io::Error::new(io::ErrorKind::BrokenPipe, e))?;
        if kind != HELLO {
            self.inner.counters.multicast_sent.fetch_add(1, Ordering::Relaxed);
        }
        Ok(())
    }
}

impl Default for LocalNode {
    fn default() -> Self {
        Self::new()
    }
}

fn multicast_reader(mut r: RspReader, events: Sender<Event>) {
    let mut head = [0u8; 24];
    while r.read_exact(&mut head).is_ok() {
        let len = u32::from_le_bytes(head[..4].try_into().unwrap()) as usize;
        let kind = u32::from_le_bytes(head[4..8].try_into().unwrap());
        let from = Uuid::from_bytes(head[8..].try_into().unwrap());
        let mut payload = vec![0; len];
        if r.read_exact(&mut payload).is_err() {
            break;
        }
        if events.send(Event::Command(Command { from, kind, payload: Arc::new(payload), multicast: true })).is_err() {
            break;
        }
    }
}
