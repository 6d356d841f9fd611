//! Threaded RSP endpoints over real or in-process datagram transports.
//!
//! One protocol thread owns the transport and the [`Protocol`] state
//! machine of a member. Application threads talk to it only through
//! channels: writes go in through a bounded command queue, each remote
//! writer's stream comes out through its own bounded queue.

use std::collections::HashMap;
use std::io::{self, Read};
use std::net::{Ipv4Addr, SocketAddrV4, UdpSocket};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender, TryRecvError, TrySendError};
use eqsim_core::rsp::sim::LinkModel;
use eqsim_core::rsp::{Protocol, RspConfig, RspError, RspStats};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socket2::{Domain, Protocol as SockProtocol, Socket, Type};

/// Unreliable datagram service of one group member.
pub trait DatagramTransport: Send + 'static {
    /// Sends to every other member.
    fn send(&mut self, datagram: &[u8]) -> io::Result<()>;

    /// Waits at most `timeout` for the next datagram.
    fn recv(&mut self, timeout: Duration) -> io::Result<Option<Vec<u8>>>;
}

/// In-process multicast hub with seeded loss, duplication and reordering.
#[derive(Clone)]
pub struct MemoryGroup {
    hub: Arc<Mutex<Hub>>,
}

struct Hub {
    link: LinkModel,
    rng: ChaCha8Rng,
    members: Vec<Sender<Vec<u8>>>,
    held: Vec<Option<Vec<u8>>>,
}

impl MemoryGroup {
    pub fn new(link: LinkModel, seed: u64) -> Self {
        Self {
            hub: Arc::new(Mutex::new(Hub {
                link,
                rng: ChaCha8Rng::seed_from_u64(seed),
                members: Vec::new(),
                held: Vec::new(),
            })),
        }
    }

    pub fn lossless() -> Self {
        Self::new(LinkModel::default(), 0)
    }

    /// A new endpoint on the hub. It hears datagrams sent after this call.
    pub fn attach(&self) -> MemoryTransport {
        let (tx, rx) = unbounded();
        let mut hub = self.hub.lock().unwrap();
        hub.members.push(tx);
        hub.held.push(None);
        MemoryTransport { hub: self.hub.clone(), index: hub.members.len() - 1, rx }
    }
}

pub struct MemoryTransport {
    hub: Arc<Mutex<Hub>>,
    index: usize,
    rx: Receiver<Vec<u8>>,
}

impl DatagramTransport for MemoryTransport {
    fn send(&mut self, datagram: &[u8]) -> io::Result<()> {
        let mut guard = self.hub.lock().unwrap();
        let hub = &mut *guard;
        for j in 0..hub.members.len() {
            if j == self.index {
                continue;
            }
            let link = &hub.link;
            if link.loss > 0.0 && hub.rng.random::<f64>() < link.loss {
                continue;
            }
            let copies = if link.duplicate > 0.0 && hub.rng.random::<f64>() < link.duplicate { 2 } else { 1 };
            let hold = link.reorder > 0.0 && hub.rng.random::<f64>() < link.reorder;
            if hold && hub.held[j].is_none() {
                hub.held[j] = Some(datagram.to_vec());
                continue;
            }
            // a closed member simply stops hearing the group
            for _ in 0..copies {
                let _ = hub.members[j].send(datagram.to_vec());
            }
            if let Some(h) = hub.held[j].take() {
                let _ = hub.members[j].send(h);
            }
        }
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> io::Result<Option<Vec<u8>>> {
        match self.rx.recv_timeout(timeout) {
            Ok(d) => Ok(Some(d)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(io::ErrorKind::NotConnected.into()),
        }
    }
}

/// IPv4 UDP multicast socket.
pub struct UdpMulticast {
    socket: UdpSocket,
    group: SocketAddrV4,
    buf: Vec<u8>,
}

impl UdpMulticast {
    /// Joins `group:port` on `interface` (0.0.0.0 lets the kernel pick).
    /// Loopback is enabled so that members on one host hear each other.
    pub fn join(group: Ipv4Addr, port: u16, interface: Ipv4Addr) -> io::Result<Self> {
        let s = Socket::new(Domain::IPV4, Type::DGRAM, Some(SockProtocol::UDP))?;
        s.set_reuse_address(true)?;
        #[cfg(unix)]
        s.set_reuse_port(true)?;
        s.bind(&SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, port).into())?;
        s.join_multicast_v4(&group, &interface)?;
        s.set_multicast_if_v4(&interface)?;
        s.set_multicast_loop_v4(true)?;
        s.set_multicast_ttl_v4(1)?;
        s.set_recv_buffer_size(4 << 20)?;
        Ok(Self { socket: s.into(), group: SocketAddrV4::new(group, port), buf: vec![0; 65536] })
    }
}

impl DatagramTransport for UdpMulticast {
    fn send(&mut self, datagram: &[u8]) -> io::Result<()> {
        self.socket.send_to(datagram, self.group).map(|_| ())
    }

    fn recv(&mut self, timeout: Duration) -> io::Result<Option<Vec<u8>>> {
        self.socket.set_read_timeout(Some(timeout.max(Duration::from_micros(50))))?;
        match self.socket.recv(&mut self.buf) {
            Ok(n) => Ok(Some(self.buf[..n].to_vec())),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

enum Cmd {
    Write(Vec<u8>),
    Leave,
}

enum RxMsg {
    Data(Vec<u8>),
    End,
    Failed(RspError),
}

#[derive(Default)]
struct Status {
    stats: RspStats,
    error: Option<RspError>,
    joined: bool,
    /// Everything written so far was acknowledged by all live members.
    drained: bool,
    in_flight: usize,
    stopped: bool,
}

struct Shared {
    status: Mutex<Status>,
    changed: Condvar,
}

/// A joined group member.
pub struct RspEndpoint {
    id: u16,
    peers: Vec<u16>,
    cmd: Sender<Cmd>,
    readers: Mutex<HashMap<u16, RspReader>>,
    shared: Arc<Shared>,
    write_chunk: usize,
    thread: Option<JoinHandle<()>>,
}

const READ_QUEUE: usize = 64;
const WRITE_QUEUE: usize = 16;

impl RspEndpoint {
    /// Starts member `id`'s protocol thread without waiting for the other
    /// members; see [`RspEndpoint::wait_joined`].
    pub fn start(cfg: RspConfig, id: u16, transport: impl DatagramTransport) -> Result<Self, RspError> {
        let nonce = rand::random::<u32>();
        let proto = Protocol::new(id, cfg.clone(), nonce, Duration::ZERO)?;
        let (cmd_tx, cmd_rx) = bounded(WRITE_QUEUE);
        let mut readers = HashMap::new();
        let mut outs = HashMap::new();
        let proto_peers: Vec<u16> = proto.peers().collect();
        for &p in &proto_peers {
            let (tx, rx) = bounded(READ_QUEUE);
            readers.insert(p, RspReader { writer: p, rx, buf: Vec::new(), pos: 0, done: None });
            outs.insert(p, tx);
        }
        let shared = Arc::new(Shared { status: Mutex::new(Status::default()), changed: Condvar::new() });
        let s2 = shared.clone();
        let thread = std::thread::Builder::new()
            .name(format!("rsp-{id}"))
            .spawn(move || protocol_thread(proto, transport, cmd_rx, outs, s2))
            .map_err(|_| RspError::Closed)?;
        Ok(Self {
            id,
            peers: proto_peers,
            cmd: cmd_tx,
            readers: Mutex::new(readers),
            shared,
            write_chunk: cfg.max_payload() * 32,
            thread: Some(thread),
        })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    /// The other members of the group.
    pub fn peers(&self) -> &[u16] {
        &self.peers
    }

    /// Blocks until every member announced itself or an error occurs.
    pub fn wait_joined(&self, timeout: Duration) -> Result<(), RspError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.shared.status.lock().unwrap();
        loop {
            if let Some(e) = &st.error {
                return Err(e.clone());
            }
            if st.joined {
                return Ok(());
            }
            let now = Instant::now();
            if now >= deadline || st.stopped {
                return Err(RspError::Closed);
            }
            st = self.shared.changed.wait_timeout(st, deadline - now).unwrap().0;
        }
    }

    /// Queues `data` for the group; blocks while the write queue is full.
    pub fn write(&self, data: &[u8]) -> Result<(), RspError> {
        for chunk in data.chunks(self.write_chunk) {
            if let Some(e) = self.error() {
                return Err(e);
            }
            self.cmd.send(Cmd::Write(chunk.to_vec())).map_err(|_| RspError::Closed)?;
        }
        Ok(())
    }

    /// Waits until everything written so far is acknowledged by all members.
    pub fn wait_drained(&self, timeout: Duration) -> Result<(), RspError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.shared.status.lock().unwrap();
        loop {
            if let Some(e) = &st.error {
                return Err(e.clone());
            }
            if st.drained && self.cmd.is_empty() {
                return Ok(());
            }
            let now = Instant::now();
            if now >= deadline || st.stopped {
                return Err(RspError::Closed);
            }
            st = self.shared.changed.wait_timeout(st, (deadline - now).min(Duration::from_millis(5))).unwrap().0;
        }
    }

    /// Moves the stream of `writer` out of the endpoint, e.g. to hand it
    /// to a dedicated reading thread.
    pub fn take_reader(&self, writer: u16) -> Option<RspReader> {
        self.readers.lock().unwrap().remove(&writer)
    }

    /// Reads exactly `n` bytes of `writer`'s stream, blocking.
    pub fn read_exact(&self, writer: u16, n: usize) -> Result<Vec<u8>, RspError> {
        let mut readers = self.readers.lock().unwrap();
        let r = readers.get_mut(&writer).ok_or(RspError::UnknownMember(writer))?;
        let mut out = vec![0; n];
        r.fill(&mut out)?;
        Ok(out)
    }

    pub fn stats(&self) -> RspStats {
        self.shared.status.lock().unwrap().stats.clone()
    }

    pub fn in_flight(&self) -> usize {
        self.shared.status.lock().unwrap().in_flight
    }

    pub fn error(&self) -> Option<RspError> {
        self.shared.status.lock().unwrap().error.clone()
    }

    /// Announces departure once all queued data is in the window and waits
    /// for the protocol thread to finish.
    pub fn leave(mut self) -> RspStats {
        self.shutdown();
        self.stats()
    }

    fn shutdown(&mut self) {
        let _ = self.cmd.send(Cmd::Leave);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RspEndpoint {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Joins a group: starts the member and waits for all others.
pub fn rsp_join(
    cfg: RspConfig,
    id: u16,
    transport: impl DatagramTransport,
    timeout: Duration,
) -> Result<RspEndpoint, RspError> {
    let ep = RspEndpoint::start(cfg, id, transport)?;
    ep.wait_joined(timeout)?;
    Ok(ep)
}

/// One remote writer's byte stream.
pub struct RspReader {
    writer: u16,
    rx: Receiver<RxMsg>,
    buf: Vec<u8>,
    pos: usize,
    done: Option<Result<(), RspError>>,
}

impl RspReader {
    pub fn writer(&self) -> u16 {
        self.writer
    }

    /// Next bytes of the stream, blocking; an empty result marks the end.
    fn next(&mut self, out: &mut [u8]) -> Result<usize, RspError> {
        while self.pos == self.buf.len() {
            if let Some(d) = &self.done {
                return d.clone().map(|_| 0);
            }
            match self.rx.recv() {
                Ok(RxMsg::Data(b)) => {
                    self.buf = b;
                    self.pos = 0;
                }
                Ok(RxMsg::End) => self.done = Some(Ok(())),
                Ok(RxMsg::Failed(e)) => self.done = Some(Err(e)),
                Err(_) => self.done = Some(Err(RspError::Closed)),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }

    fn fill(&mut self, out: &mut [u8]) -> Result<(), RspError> {
        let mut got = 0;
        while got < out.len() {
            match self.next(&mut out[got..])? {
                0 => return Err(RspError::WriterLeft(self.writer)),
                n => got += n,
            }
        }
        Ok(())
    }
}

impl Read for RspReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        self.next(out).map_err(|e| io::Error::new(io::ErrorKind::ConnectionAborted, e))
    }
}

fn protocol_thread(
    mut proto: Protocol,
    mut transport: impl DatagramTransport,
    cmd: Receiver<Cmd>,
    outs: HashMap<u16, Sender<RxMsg>>,
    shared: Arc<Shared>,
) {
    let start = Instant::now();
    let mut pending: Vec<u8> = Vec::new();
    let mut offset = 0;
    let mut leaving = false;
    let mut left_at: Option<Instant> = None;
    let mut ended: HashMap<u16, bool> = outs.keys().map(|&k| (k, false)).collect();
    let mut scratch = vec![0u8; 64 * 1024];
    let linger = Duration::from_secs(5);
    loop {
        let now = start.elapsed();
        // take application writes while the window has room
        loop {
            if offset == pending.len() {
                pending.clear();
                offset = 0;
                match cmd.try_recv() {
                    Ok(Cmd::Write(d)) => pending = d,
                    Ok(Cmd::Leave) | Err(TryRecvError::Disconnected) => leaving = true,
                    Err(TryRecvError::Empty) => {}
                }
            }
            if offset == pending.len() {
                break;
            }
            match proto.queue_write(&pending[offset..]) {
                Ok(0) => break,
                Ok(n) => offset += n,
                Err(_) => {
                    pending.clear();
                    offset = 0;
                    break;
                }
            }
        }
        if offset == pending.len() && cmd.is_empty() {
            // nothing else coming right now: send the partial datagram
            proto.flush();
        }
        if leaving && left_at.is_none() && offset == pending.len() && proto.flush() {
            proto.leave();
            left_at = Some(Instant::now());
        }
        while let Some(d) = proto.poll_transmit(start.elapsed()) {
            if transport.send(&d).is_err() {
                break;
            }
        }
        for (&w, tx) in &outs {
            if ended[&w] {
                continue;
            }
            while !tx.is_full() {
                match proto.read(w, &mut scratch) {
                    Ok(0) => break,
                    Ok(n) => {
                        if tx.try_send(RxMsg::Data(scratch[..n].to_vec())).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.try_send(RxMsg::Failed(e));
                        ended.insert(w, true);
                        break;
                    }
                }
            }
            if !ended[&w] && proto.finished(w) && !matches!(tx.try_send(RxMsg::End), Err(TrySendError::Full(_))) {
                ended.insert(w, true);
            }
        }
        {
            let mut st = shared.status.lock().unwrap();
            st.stats = proto.stats().clone();
            st.in_flight = proto.in_flight();
            st.error = proto.error().cloned();
            st.joined = proto.joined().unwrap_or(false);
            st.drained = proto.is_drained() && offset == pending.len();
            shared.changed.notify_all();
        }
        if let Some(t) = left_at {
            if proto.is_drained() || proto.error().is_some() || t.elapsed() > linger {
                // push out anything still queued, such as the leave beacon
                while let Some(d) = proto.poll_transmit(start.elapsed()) {
                    let _ = transport.send(&d);
                }
                break;
            }
        }
        let now2 = start.elapsed();
        let busy = offset < pending.len() || !cmd.is_empty();
        let cap = if busy { Duration::from_micros(200) } else { Duration::from_millis(2) };
        let wait = proto.next_timeout(now2).map_or(cap, |t| t.saturating_sub(now2).min(cap));
        let _ = now;
        match transport.recv(wait) {
            Ok(Some(d)) => {
                proto.handle_datagram(&d, start.elapsed());
                for _ in 0..256 {
                    match transport.recv(Duration::ZERO) {
                        Ok(Some(d)) => proto.handle_datagram(&d, start.elapsed()),
                        _ => break,
                    }
                }
            }
            Ok(None) => {}
            Err(_) => break,
        }
        proto.handle_timeout(start.elapsed());
    }
    let mut st = shared.status.lock().unwrap();
    st.stats = proto.stats().clone();
    st.stopped = true;
    st.error = st.error.take().or_else(|| proto.error().cloned());
    for (w, tx) in &outs {
        if !ended[w] {
            let _ = tx.try_send(RxMsg::Failed(RspError::Closed));
        }
    }
    shared.changed.notify_all();
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    fn group(n: u16, link: LinkModel, seed: u64) -> Vec<RspEndpoint> {
        let cfg = RspConfig::default().with_members(0..n);
        let g = MemoryGroup::new(link, seed);
        let eps: Vec<_> = (0..n).map(|i| RspEndpoint::start(cfg.clone(), i, g.attach()).unwrap()).collect();
        for e in &eps {
            e.wait_joined(Duration::from_secs(5)).unwrap();
        }
        eps
    }

    fn bytes(n: usize, seed: u64) -> Vec<u8> {
        crate::codec::random_buffer(n, seed)
    }

    #[test]
    fn three_members_exchange_streams() {
        let eps = group(3, LinkModel::default(), 1);
        let data: Vec<Vec<u8>> = (0..3).map(|i| bytes(200_000 + i, i as u64)).collect();
        thread::scope(|s| {
            for (i, e) in eps.iter().enumerate() {
                let d = &data[i];
                s.spawn(move || e.write(d).unwrap());
            }
            for (i, e) in eps.iter().enumerate() {
                for w in (0..3).filter(|w| *w != i) {
                    let mut r = e.take_reader(w as u16).unwrap();
                    let d = &data[w];
                    s.spawn(move || {
                        let mut got = vec![0; d.len()];
                        r.read_exact(&mut got).unwrap();
                        assert!(got == *d);
                    });
                }
            }
        });
    }

    #[test]
    fn lossy_group_delivers_and_ends() {
        let mut eps = group(2, LinkModel::lossy(0.02, 0.02, 0.005), 7);
        let data = bytes(500_000, 3);
        let reader = eps[1].take_reader(0).unwrap();
        let w = eps.remove(0);
        let d2 = data.clone();
        let t = thread::spawn(move || {
            w.write(&d2).unwrap();
            w.leave()
        });
        let mut got = Vec::new();
        let mut r = reader;
        r.read_to_end(&mut got).unwrap();
        let stats = t.join().unwrap();
        assert!(got == data);
        assert!(stats.retransmit_ratio() > 0.0);
    }

    #[test]
    fn single_member_has_no_readers() {
        let eps = group(1, LinkModel::default(), 0);
        eps[0].write(&bytes(10_000, 1)).unwrap();
        eps[0].wait_drained(Duration::from_secs(2)).unwrap();
        assert!(eps[0].take_reader(0).is_none());
    }

    #[test]
    fn mismatched_mtu_fails_join() {
        let g = MemoryGroup::lossless();
        let base = RspConfig::default().with_members([0, 1]);
        let a = RspEndpoint::start(base.clone(), 0, g.attach()).unwrap();
        let b = RspEndpoint::start(RspConfig { mtu: 1400, ..base }, 1, g.attach()).unwrap();
        assert!(matches!(a.wait_joined(Duration::from_secs(2)), Err(RspError::ConfigMismatch(1))));
        assert!(b.wait_joined(Duration::from_millis(200)).is_err());
    }

    #[test]
    fn duplicate_id_fails_join() {
        let g = MemoryGroup::lossless();
        let cfg = RspConfig::default().with_members([0, 1]);
        let a = RspEndpoint::start(cfg.clone(), 0, g.attach()).unwrap();
        let b = RspEndpoint::start(cfg, 0, g.attach()).unwrap();
        let ra = a.wait_joined(Duration::from_secs(1));
        let rb = b.wait_joined(Duration::from_secs(1));
        assert!(matches!(ra, Err(RspError::DuplicateMember(0))) || matches!(rb, Err(RspError::DuplicateMember(0))));
    }
}
