//! Deterministic discrete-event network for exercising [`Protocol`] members.
//!
//! Every datagram is delivered to every other member independently, subject
//! to seeded loss, duplication, reordering and latency. Applications are
//! modelled as writers pushing a byte source and readers consuming at an
//! optional byte rate. The whole run is a pure function of its inputs.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::time::Duration;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Protocol, RspConfig, RspError, RspStats};

/// Per-delivery fault model. The default is lossless and in order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub loss: f64,
    pub duplicate: f64,
    /// Probability that a delivery is held back by `reorder_delay`.
    pub reorder: f64,
    pub latency: Duration,
    pub jitter: Duration,
    pub reorder_delay: Duration,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            loss: 0.0,
            duplicate: 0.0,
            reorder: 0.0,
            latency: Duration::from_micros(50),
            jitter: Duration::ZERO,
            reorder_delay: Duration::from_micros(300),
        }
    }
}

impl LinkModel {
    pub fn lossy(loss: f64, reorder: f64, duplicate: f64) -> Self {
        Self { loss, reorder, duplicate, jitter: Duration::from_micros(20), ..Self::default() }
    }
}

/// Application behaviour of one member.
#[derive(Debug, Clone, Default)]
pub struct MemberApp {
    /// Bytes this member writes into its stream.
    pub source: Vec<u8>,
    /// Size of each application write; 0 writes everything at once.
    pub write_size: usize,
    /// Read rate in bytes per second; `None` reads as fast as data arrives.
    pub read_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MemberReport {
    pub id: u16,
    pub stats: RspStats,
    /// Bytes received from each other member, by member id.
    pub received: Vec<(u16, Vec<u8>)>,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub elapsed: Duration,
    pub deliveries: u64,
    /// FNV-1a digest over every scheduled delivery (time, endpoints, bytes).
    pub trace_digest: u64,
    pub max_in_flight: usize,
    pub max_rx_pending: usize,
    pub members: Vec<MemberReport>,
}

impl SimReport {
    /// Retransmission ratio over all writers.
    pub fn retransmit_ratio(&self) -> f64 {
        let (mut r, mut t) = (0u64, 0u64);
        for m in &self.members {
            r += m.stats.retransmitted;
            t += m.stats.retransmitted + m.stats.data_sent;
        }
        if t == 0 {
            0.0
        } else {
            r as f64 / t as f64
        }
    }

    pub fn received(&self, reader: u16, writer: u16) -> Option<&[u8]> {
        let m = self.members.iter().find(|m| m.id == reader)?;
        m.received.iter().find(|(w, _)| *w == writer).map(|(_, b)| b.as_slice())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Protocol(#[from] RspError),
    #[error("simulation did not finish within {0:?} of virtual time")]
    Timeout(Duration),
}

struct Node {
    proto: Protocol,
    app: MemberApp,
    written: usize,
    flushed: bool,
    budget: f64,
    last_read: Duration,
    received: Vec<(u16, Vec<u8>)>,
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Delivery {
    at: Duration,
    order: u64,
    to: usize,
    bytes: Vec<u8>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub struct SimNetwork {
    now: Duration,
    nodes: Vec<Node>,
    queue: BinaryHeap<Reverse<Delivery>>,
    rng: ChaCha8Rng,
    link: LinkModel,
    order: u64,
    deliveries: u64,
    digest: u64,
    max_in_flight: usize,
    max_rx_pending: usize,
    limit: Duration,
}

impl SimNetwork {
    /// One member per entry of `cfg.members`, paired with `apps` in order.
    pub fn new(cfg: &RspConfig, apps: Vec<MemberApp>, link: LinkModel, seed: u64) -> Result<Self, RspError> {
        assert_eq!(cfg.members.len(), apps.len(), "one app per member");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = Vec::with_capacity(apps.len());
        for (&id, app) in cfg.members.iter().zip(apps) {
            let proto = Protocol::new(id, cfg.clone(), rng.random(), Duration::ZERO)?;
            let received = cfg.members.iter().filter(|m| **m != id).map(|&m| (m, Vec::new())).collect();
            nodes.push(Node {
                proto,
                app,
                written: 0,
                flushed: false,
                budget: 0.0,
                last_read: Duration::ZERO,
                received,
            });
        }
        Ok(Self {
            now: Duration::ZERO,
            nodes,
            queue: BinaryHeap::new(),
            rng,
            link,
            order: 0,
            deliveries: 0,
            digest: FNV_OFFSET,
            max_in_flight: 0,
            max_rx_pending: 0,
            limit: Duration::from_secs(600),
        })
    }

    /// Virtual time after which [`SimNetwork::run`] gives up.
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.limit = limit;
        self
    }

    pub fn now(&self) -> Duration {
        self.now
    }

    fn feed_writers(&mut self) -> Result<(), RspError> {
        for n in &mut self.nodes {
            let src = &n.app.source;
            while n.written < src.len() {
                let step = if n.app.write_size == 0 { src.len() } else { n.app.write_size };
                let end = (n.written + step).min(src.len());
                let took = n.proto.queue_write(&src[n.written..end])?;
                n.written += took;
                if took == 0 {
                    break;
                }
                if n.written == end && n.app.write_size != 0 && !n.proto.flush() {
                    break;
                }
            }
            if n.written == src.len() && !n.flushed && n.proto.flush() {
                n.flushed = true;
            }
        }
        Ok(())
    }

    /// Reads what each reader's rate allows; returns the earliest time a
    /// rate-limited reader with pending data can continue.
    fn consume(&mut self) -> Option<Duration> {
        let now = self.now;
        let mut wake: Option<Duration> = None;
        let mut buf = vec![0u8; 64 * 1024];
        for n in &mut self.nodes {
            let dt = (now - n.last_read).as_secs_f64();
            n.last_read = now;
            let max_payload = n.proto.config().max_payload();
            for (writer, sink) in n.received.iter_mut() {
                loop {
                    let avail = n.proto.readable(*writer);
                    if avail == 0 {
                        break;
                    }
                    let allowed = match n.app.read_rate {
                        None => buf.len(),
                        Some(rate) => {
                            n.budget = (n.budget + dt * rate).min(4.0 * max_payload as f64);
                            let whole = n.budget as usize;
                            if whole < avail.min(max_payload) {
                                let need = avail.min(max_payload) as f64 - n.budget;
                                let t = now + Duration::from_secs_f64(need / rate);
                                wake = Some(wake.map_or(t, |w| w.min(t)));
                                break;
                            }
                            whole.min(buf.len())
                        }
                    };
                    let k = n.proto.read(*writer, &mut buf[..allowed.min(avail)]).unwrap_or(0);
                    if k == 0 {
                        break;
                    }
                    if n.app.read_rate.is_some() {
                        n.budget -= k as f64;
                    }
                    sink.extend_from_slice(&buf[..k]);
                }
            }
            // the budget only accrues once per call
            if n.app.read_rate.is_some() && dt > 0.0 {
                n.last_read = now;
            }
        }
        wake
    }

    fn transmit(&mut self) {
        let now = self.now;
        for from in 0..self.nodes.len() {
            self.nodes[from].proto.handle_timeout(now);
            while let Some(bytes) = self.nodes[from].proto.poll_transmit(now) {
                for to in 0..self.nodes.len() {
                    if to == from {
                        continue;
                    }
                    if self.rng.random_bool(self.link.loss) {
                        continue;
                    }
                    let copies = if self.rng.random_bool(self.link.duplicate) { 2 } else { 1 };
                    for _ in 0..copies {
                        let jitter = self.link.jitter.as_nanos() as u64;
                        let mut at = now + self.link.latency;
                        if jitter > 0 {
                            at += Duration::from_nanos(self.rng.random_range(0..=jitter));
                        }
                        if self.rng.random_bool(self.link.reorder) {
                            at += self.link.reorder_delay;
                        }
                        let mut h = fnv(self.digest, &(at.as_nanos() as u64).to_le_bytes());
                        h = fnv(h, &[from as u8, to as u8]);
                        self.digest = fnv(h, &bytes);
                        self.order += 1;
                        self.queue.push(Reverse(Delivery { at, order: self.order, to, bytes: bytes.clone() }));
                    }
                }
            }
            let p = &self.nodes[from].proto;
            self.max_in_flight = self.max_in_flight.max(p.in_flight());
            for w in p.peers() {
                self.max_rx_pending = self.max_rx_pending.max(p.rx_pending(w));
            }
        }
    }

    fn done(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.flushed && n.proto.is_drained()
        }) && self.nodes.iter().all(|n| {
            n.received.iter().all(|(w, got)| {
                let src = &self.nodes.iter().find(|m| m.proto.id() == *w).unwrap().app.source;
                got.len() == src.len()
            })
        })
    }

    /// Runs until every stream has been delivered and acknowledged.
    pub fn run(mut self) -> Result<SimReport, SimError> {
        loop {
            self.feed_writers()?;
            let wake = self.consume();
            self.transmit();
            for n in &self.nodes {
                if let Some(e) = n.proto.error() {
                    return Err(e.clone().into());
                }
            }
            if self.done() {
                break;
            }
            let mut next = wake;
            let mut take = |t: Duration| next = Some(next.map_or(t, |x: Duration| x.min(t)));
            if let Some(Reverse(d)) = self.queue.peek() {
                take(d.at);
            }
            for n in &self.nodes {
                if let Some(t) = n.proto.next_timeout(self.now) {
                    take(t);
                }
            }
            let Some(next) = next else {
                return Err(SimError::Timeout(self.now));
            };
            // a timer at `now` has just been serviced; never stall in place
            self.now = next.max(self.now + Duration::from_nanos(1));
            if self.now > self.limit {
                return Err(SimError::Timeout(self.limit));
            }
            while self.queue.peek().is_some_and(|Reverse(d)| d.at <= self.now) {
                let Reverse(d) = self.queue.pop().unwrap();
                self.deliveries += 1;
                self.nodes[d.to].proto.handle_datagram(&d.bytes, self.now);
            }
        }
        Ok(SimReport {
            elapsed: self.now,
            deliveries: self.deliveries,
            trace_digest: self.digest,
            max_in_flight: self.max_in_flight,
            max_rx_pending: self.max_rx_pending,
            members: self
                .nodes
                .into_iter()
                .map(|n| MemberReport { id: n.proto.id(), stats: n.proto.stats().clone(), received: n.received })
                .collect(),
        })
    }
}

/// One writer streaming `data` to `receivers` readers.
pub fn broadcast(
    cfg: &RspConfig,
    data: Vec<u8>,
    receivers: usize,
    link: LinkModel,
    read_rate: Option<f64>,
    seed: u64,
) -> Result<SimReport, SimError> {
    let cfg = cfg.clone().with_members(0..=receivers as u16);
    let mut apps = vec![MemberApp { source: data, ..Default::default() }];
    apps.extend((0..receivers).map(|_| MemberApp { read_rate, ..Default::default() }));
    SimNetwork::new(&cfg, apps, link, seed)?.run()
}
