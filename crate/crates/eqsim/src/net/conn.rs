use std::collections::HashMap;
use std::fmt;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::atomic::{AtomicU16, Ordering};
use std::sync::{Arc, LazyLock, Mutex};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

const PIPE_PIECE: usize = 64 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transport {
    /// In-process byte pipe, addressed by name and port.
    LocalPipe,
    Tcp,
    RspMulticast,
}

impl Transport {
    fn scheme(self) -> &'static str {
        match self {
            Transport::LocalPipe => "pipe",
            Transport::Tcp => "tcp",
            Transport::RspMulticast => "rsp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConnectionDescription {
    pub protocol: Transport,
    pub host: String,
    pub port: u16,
    pub interface: Option<String>,
}

impl ConnectionDescription {
    pub fn pipe(name: &str, port: u16) -> Self {
        Self { protocol: Transport::LocalPipe, host: name.into(), port, interface: None }
    }

    pub fn tcp(host: &str, port: u16) -> Self {
        Self { protocol: Transport::Tcp, host: host.into(), port, interface: None }
    }

    pub fn rsp(group: &str, port: u16) -> Self {
        Self { protocol: Transport::RspMulticast, host: group.into(), port, interface: None }
    }
}

/// `scheme://host:port`, with `?if=name` for an interface.
impl fmt::Display for ConnectionDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}:{}", self.protocol.scheme(), self.host, self.port)?;
        if let Some(i) = &self.interface {
            write!(f, "?if={i}")?;
        }
        Ok(())
    }
}

impl FromStr for ConnectionDescription {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (scheme, rest) = s.split_once("://").ok_or_else(|| format!("missing scheme in {s:?}"))?;
        let protocol = [Transport::LocalPipe, Transport::Tcp, Transport::RspMulticast]
            .into_iter()
            .find(|t| t.scheme() == scheme)
            .ok_or_else(|| format!("unknown scheme {scheme:?}"))?;
        let (addr, interface) = match rest.split_once("?if=") {
            Some((a, i)) => (a, Some(i.to_string())),
            None => (rest, None),
        };
        let (host, port) = addr.rsplit_once(':').ok_or_else(|| format!("missing port in {s:?}"))?;
        let port = port.parse().map_err(|_| format!("bad port in {s:?}"))?;
        Ok(Self { protocol, host: host.into(), port, interface })
    }
}

/// Read half of a connection. End of stream reads 0 bytes.
pub struct ConnReader(ReadHalf);

enum ReadHalf {
    Pipe { rx: Receiver<Vec<u8>>, buf: Vec<u8>, pos: usize },
    Tcp(TcpStream),
}

impl Read for ConnReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        match &mut self.0 {
            ReadHalf::Tcp(s) => s.read(out),
            ReadHalf::Pipe { rx, buf, pos } => {
                if out.is_empty() {
                    return Ok(0);
                }
                while *pos == buf.len() {
                    match rx.recv() {
                        Ok(b) => {
                            *buf = b;
                            *pos = 0;
                        }
                        Err(_) => return Ok(0),
                    }
                }
                let n = out.len().min(buf.len() - *pos);
                out[..n].copy_from_slice(&buf[*pos..*pos + n]);
                *pos += n;
                Ok(n)
            }
        }
    }
}

/// Write half of a connection. Dropping it closes the direction, which the
/// peer observes as end of stream.
pub struct ConnWriter {
    half: WriteHalf,
    pacer: Option<Arc<Pacer>>,
}

enum WriteHalf {
    Pipe(Sender<Vec<u8>>),
    Tcp(TcpStream),
}

impl ConnWriter {
    /// Limits this writer to a link shared through `pacer`.
    pub fn paced(mut self, pacer: Arc<Pacer>) -> Self {
        self.pacer = Some(pacer);
        self
    }
}

impl Write for ConnWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        match &mut self.half {
            WriteHalf::Tcp(s) => {
                if let Some(p) = &self.pacer {
                    p.transmit(data.len());
                }
                s.write_all(data)?;
                Ok(data.len())
            }
            WriteHalf::Pipe(tx) => {
                // Small pieces keep large messages in recycled heap memory
                // instead of a fresh mapping per message.
                for piece in data.chunks(PIPE_PIECE) {
                    if let Some(p) = &self.pacer {
                        p.transmit(piece.len());
                    }
                    tx.send(piece.to_vec()).map_err(|_| io::Error::from(io::ErrorKind::BrokenPipe))?;
                }
                Ok(data.len())
            }
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match &mut self.half {
            WriteHalf::Tcp(s) => s.flush(),
            WriteHalf::Pipe(_) => Ok(()),
        }
    }
}

impl Drop for ConnWriter {
    fn drop(&mut self) {
        if let WriteHalf::Tcp(s) = &self.half {
            let _ = s.shutdown(Shutdown::Write);
        }
    }
}

/// Ordered, reliable point-to-point byte stream.
pub struct Connection {
    pub reader: ConnReader,
    pub writer: ConnWriter,
    pub peer: ConnectionDescription,
}

impl Connection {
    pub fn split(self) -> (ConnReader, ConnWriter) {
        (self.reader, self.writer)
    }

    fn pipe_pair(peer_a: ConnectionDescription, peer_b: ConnectionDescription) -> (Connection, Connection) {
        let (a_tx, a_rx) = unbounded();
        let (b_tx, b_rx) = unbounded();
        let mk = |rx, tx, peer| Connection {
            reader: ConnReader(ReadHalf::Pipe { rx, buf: Vec::new(), pos: 0 }),
            writer: ConnWriter { half: WriteHalf::Pipe(tx), pacer: None },
            peer,
        };
        (mk(a_rx, b_tx, peer_a), mk(b_rx, a_tx, peer_b))
    }

    fn tcp(s: TcpStream) -> io::Result<Connection> {
        s.set_nodelay(true)?;
        let addr = s.peer_addr()?;
        Ok(Connection {
            reader: ConnReader(ReadHalf::Tcp(s.try_clone()?)),
            writer: ConnWriter { half: WriteHalf::Tcp(s), pacer: None },
            peer: ConnectionDescription::tcp(&addr.ip().to_string(), addr.port()),
        })
    }
}

impl Read for Connection {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        self.reader.read(out)
    }
}

impl Write for Connection {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.writer.write(data)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

type PipeKey = (String, u16);

static PIPES: LazyLock<Mutex<HashMap<PipeKey, Sender<Connection>>>> = LazyLock::new(Default::default);
static NEXT_PIPE_PORT: AtomicU16 = AtomicU16::new(40000);

pub struct Listener {
    kind: ListenKind,
    desc: ConnectionDescription,
}

enum ListenKind {
    Pipe(Receiver<Connection>),
    Tcp(TcpListener),
}

impl Listener {
    /// The bound address; port 0 requests are resolved.
    pub fn description(&self) -> &ConnectionDescription {
        &self.desc
    }

    pub fn accept(&self) -> io::Result<Connection> {
        match &self.kind {
            ListenKind::Pipe(rx) => rx.recv().map_err(|_| io::Error::from(io::ErrorKind::NotConnected)),
            ListenKind::Tcp(l) => Connection::tcp(l.accept()?.0),
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        if let ListenKind::Pipe(_) = self.kind {
            PIPES.lock().unwrap().remove(&(self.desc.host.clone(), self.desc.port));
        }
    }
}

pub fn listen(desc: &ConnectionDescription) -> io::Result<Listener> {
    match desc.protocol {
        Transport::LocalPipe => {
            let mut desc = desc.clone();
            let mut pipes = PIPES.lock().unwrap();
            if desc.port == 0 {
                desc.port = loop {
                    let p = NEXT_PIPE_PORT.fetch_add(1, Ordering::Relaxed).max(1);
                    if !pipes.contains_key(&(desc.host.clone(), p)) {
                        break p;
                    }
                };
            }
            let key = (desc.host.clone(), desc.port);
            if pipes.contains_key(&key) {
                return Err(io::Error::new(io::ErrorKind::AddrInUse, desc.to_string()));
            }
            let (tx, rx) = unbounded();
            pipes.insert(key, tx);
            Ok(Listener { kind: ListenKind::Pipe(rx), desc })
        }
        Transport::Tcp => {
            let l = TcpListener::bind((desc.host.as_str(), desc.port))?;
            let port = l.local_addr()?.port();
            Ok(Listener { kind: ListenKind::Tcp(l), desc: ConnectionDescription { port, ..desc.clone() } })
        }
        Transport::RspMulticast => Err(io::Error::new(
            io::ErrorKind::Unsupported,
            "multicast groups are joined, not listened on",
        )),
    }
}

pub fn connect(desc: &ConnectionDescription) -> io::Result<Connection> {
    match desc.protocol {
        Transport::LocalPipe => {
            let tx = PIPES
                .lock()
                .unwrap()
                .get(&(desc.host.clone(), desc.port))
                .cloned()
                .ok_or_else(|| io::Error::new(io::ErrorKind::ConnectionRefused, desc.to_string()))?;
            let client = ConnectionDescription::pipe(&format!("{}-client", desc.host), 0);
            let (mine, theirs) = Connection::pipe_pair(desc.clone(), client);
            tx.send(theirs).map_err(|_| io::Error::new(io::ErrorKind::ConnectionRefused, desc.to_string()))?;
            Ok(mine)
        }
        Transport::Tcp => Connection::tcp(TcpStream::connect((desc.host.as_str(), desc.port))?),
        Transport::RspMulticast => Err(io::Error::new(
            io::ErrorKind::Unsupported,
            "multicast groups are joined, not connected to",
        )),
    }
}

/// Serializes transmissions over one simulated link of fixed bandwidth.
///
/// Each transmission reserves the next free slot on the link and sleeps
/// until its last byte would have left. Slots are scheduled from the ideal
/// timeline, so oversleeping does not accumulate.
#[derive(Debug)]
pub struct Pacer {
    bytes_per_sec: f64,
    next_free: Mutex<Option<Instant>>,
}

impl Pacer {
    pub fn new(bytes_per_sec: f64) -> Self {
        assert!(bytes_per_sec > 0.0);
        Self { bytes_per_sec, next_free: Mutex::new(None) }
    }

    pub fn rate(&self) -> f64 {
        self.bytes_per_sec
    }

    pub fn transmit(&self, bytes: usize) {
        let slack = Duration::from_millis(2);
        let end = {
            let mut next = self.next_free.lock().unwrap();
            let now = Instant::now();
            let start = match *next {
                Some(t) if t + slack > now => t,
                _ => now,
            };
            let end = start + Duration::from_secs_f64(bytes as f64 / self.bytes_per_sec);
            *next = Some(end);
            end
        };
        let now = Instant::now();
        if end > now {
            std::thread::sleep(end - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn description_round_trips_through_text() {
        for d in [
            ConnectionDescription::pipe("a", 1),
            ConnectionDescription::tcp("127.0.0.1", 4242),
            ConnectionDescription { interface: Some("lo".into()), ..ConnectionDescription::rsp("239.255.42.1", 4243) },
        ] {
            assert_eq!(d.to_string().parse::<ConnectionDescription>().unwrap(), d);
        }
        assert!("udp://x:1".parse::<ConnectionDescription>().is_err());
    }

    #[test]
    fn pipe_close_is_observed() {
        let l = listen(&ConnectionDescription::pipe("close-test", 0)).unwrap();
        let c = connect(l.description()).unwrap();
        let mut s = l.accept().unwrap();
        let (_, w) = c.split();
        drop(w);
        let mut buf = [0u8; 4];
        assert_eq!(s.read(&mut buf).unwrap(), 0);
    }

    #[test]
    fn pacer_holds_rate() {
        let p = Pacer::new(10.0e6);
        let t = Instant::now();
        for _ in 0..20 {
            p.transmit(25_000);
        }
        let secs = t.elapsed().as_secs_f64();
        assert!((0.05..0.08).contains(&secs), "{secs}");
    }
}
