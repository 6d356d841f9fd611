//! Sans-IO state machine of one group member.
//!
//! Every member writes one stream and reads the streams of all other
//! members. The driver feeds received datagrams into [`Protocol::handle_datagram`],
//! calls [`Protocol::handle_timeout`] whenever [`Protocol::next_timeout`]
//! expires, and sends whatever [`Protocol::poll_transmit`] yields to the whole
//! group. Time is an opaque monotonic [`Duration`].

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;
use core::time::Duration;

use super::bucket::{congestion_update, RateEvent, TokenBucket};
use super::config::RspConfig;
use super::seq;
use super::wire::{Datagram, NackRange, MAX_NACK_RANGES};
use super::RspError;

/// NACK datagrams emitted per gap scan at most.
const MAX_NACKS_PER_SCAN: usize = 4;

/// Counters exported by a member.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RspStats {
    /// DATA datagrams sent for the first time.
    pub data_sent: u64,
    pub retransmitted: u64,
    pub payload_bytes_sent: u64,
    pub periodic_acks: u64,
    pub requested_acks: u64,
    pub nacks_sent: u64,
    pub nacks_received: u64,
    pub ackreqs_sent: u64,
    pub unknown_writer: u64,
    pub malformed: u64,
    pub duplicates: u64,
    /// DATA dropped because the receive buffers were full.
    pub dropped_full: u64,
    /// Largest number of sent but unacknowledged datagrams observed.
    pub max_in_flight: usize,
    /// Largest number of datagrams buffered for one writer observed.
    pub max_rx_pending: usize,
}

impl RspStats {
    /// Retransmitted divided by all DATA datagrams sent.
    pub fn retransmit_ratio(&self) -> f64 {
        let total = self.data_sent + self.retransmitted;
        if total == 0 {
            0.0
        } else {
            self.retransmitted as f64 / total as f64
        }
    }
}

struct Slot {
    payload: Vec<u8>,
    last_sent: Option<Duration>,
    queued: bool,
}

#[derive(Default)]
struct RxStream {
    next: u32,
    /// One past the highest sequence seen.
    seen_end: u32,
    ready: VecDeque<Vec<u8>>,
    front_offset: usize,
    ooo: BTreeMap<u32, Vec<u8>>,
    received: u64,
    last_ack: Option<u32>,
    nack_due: Option<Duration>,
    ended_at: Option<u32>,
    /// NACK rounds without progress since the writer left.
    stalled_nacks: u32,
}

impl RxStream {
    fn pending(&self) -> usize {
        self.ready.len() + self.ooo.len()
    }

    fn has_gap(&self) -> bool {
        seq::lt(self.next, self.seen_end)
    }

    /// Missing sequences below `seen_end` that would fit into free buffers.
    fn missing(&self, num_buffers: usize) -> Vec<NackRange> {
        let space = num_buffers.saturating_sub(self.ready.len()) as u32;
        let span = (seq::diff(self.seen_end, self.next).max(0) as u32).min(space);
        let mut out = Vec::new();
        let mut open: Option<u32> = None;
        for i in 0..span {
            let s = self.next.wrapping_add(i);
            if self.ooo.contains_key(&s) {
                if let Some(first) = open.take() {
                    out.push(NackRange { first, last: s.wrapping_sub(1) });
                    if out.len() == MAX_NACK_RANGES * MAX_NACKS_PER_SCAN {
                        return out;
                    }
                }
            } else if open.is_none() {
                open = Some(s);
            }
        }
        if let Some(first) = open {
            out.push(NackRange { first, last: self.next.wrapping_add(span - 1) });
        }
        out
    }
}

struct Peer {
    id: u16,
    /// Next sequence this peer expects from us.
    acked: u32,
    heard: bool,
    silent_timeouts: u32,
    lost: bool,
    left: bool,
    beacon_seen: bool,
    rx: RxStream,
}

/// State machine of one member.
pub struct Protocol {
    id: u16,
    cfg: RspConfig,
    nonce: u32,
    peers: Vec<Peer>,
    staging: Vec<u8>,
    base: u32,
    send_next: u32,
    next_seq: u32,
    window: VecDeque<Slot>,
    retransmit: VecDeque<u32>,
    control: VecDeque<Vec<u8>>,
    rate: f64,
    bucket: TokenBucket,
    ackreq_due: Option<Duration>,
    ackreq_retry: bool,
    error: Option<RspError>,
    left: bool,
    stats: RspStats,
}

impl Protocol {
    /// Creates member `id`; `nonce` distinguishes two processes that claim
    /// the same id.
    pub fn new(id: u16, cfg: RspConfig, nonce: u32, now: Duration) -> Result<Self, RspError> {
        cfg.validate()?;
        if !cfg.members.contains(&id) {
            return Err(RspError::NotAMember(id));
        }
        let first = cfg.first_sequence;
        let peers = cfg
            .members
            .iter()
            .filter(|m| **m != id)
            .map(|&m| Peer {
                id: m,
                acked: first,
                heard: false,
                silent_timeouts: 0,
                lost: false,
                left: false,
                beacon_seen: false,
                rx: RxStream { next: first, seen_end: first, ..Default::default() },
            })
            .collect();
        let rate = cfg.send_rate_max;
        let bucket = TokenBucket::new(cfg.bucket_capacity, rate, now);
        let mut p = Self {
            id,
            nonce,
            peers,
            staging: Vec::new(),
            base: first,
            send_next: first,
            next_seq: first,
            window: VecDeque::new(),
            retransmit: VecDeque::new(),
            control: VecDeque::new(),
            rate,
            bucket,
            ackreq_due: None,
            ackreq_retry: false,
            error: None,
            left: false,
            stats: RspStats::default(),
            cfg,
        };
        p.push_beacon(false);
        Ok(p)
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn config(&self) -> &RspConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &RspStats {
        &self.stats
    }

    pub fn send_rate(&self) -> f64 {
        self.rate
    }

    /// Ids of the other members.
    pub fn peers(&self) -> impl Iterator<Item = u16> + '_ {
        self.peers.iter().map(|p| p.id)
    }

    /// Fatal error recorded for this member, if any.
    pub fn error(&self) -> Option<&RspError> {
        self.error.as_ref()
    }

    /// True once a matching beacon was received from every other member.
    pub fn joined(&self) -> Result<bool, RspError> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        Ok(self.peers.iter().all(|p| p.beacon_seen))
    }

    fn push_beacon(&mut self, leave: bool) {
        let d = Datagram::Beacon {
            from: self.id,
            next: self.next_seq,
            leave,
            info: self.cfg.beacon_info(self.nonce),
        };
        self.control.push_back(d.encode());
    }

    // ---- writer side ----

    /// Datagrams queued or in flight.
    pub fn buffers_used(&self) -> usize {
        self.window.len()
    }

    /// Sent but not yet acknowledged by every live member.
    pub fn in_flight(&self) -> usize {
        seq::diff(self.send_next, self.base) as usize
    }

    /// Appends as much of `data` as free buffers allow and returns the number
    /// of bytes taken. Full datagrams are formed immediately; a partial tail
    /// waits in a staging buffer until more data or [`Protocol::flush`].
    pub fn queue_write(&mut self, data: &[u8]) -> Result<usize, RspError> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        if self.left {
            return Err(RspError::Closed);
        }
        let max = self.cfg.max_payload();
        let mut taken = 0;
        while taken < data.len() {
            if self.staging.is_empty() && self.window.len() >= self.cfg.num_buffers {
                break;
            }
            let n = (max - self.staging.len()).min(data.len() - taken);
            self.staging.extend_from_slice(&data[taken..taken + n]);
            taken += n;
            if self.staging.len() == max {
                if self.window.len() >= self.cfg.num_buffers {
                    break;
                }
                self.seal_staging();
            }
        }
        Ok(taken)
    }

    /// Turns a staged partial datagram into a sendable one. Returns false if
    /// no buffer is free.
    pub fn flush(&mut self) -> bool {
        if self.staging.is_empty() {
            return true;
        }
        if self.window.len() >= self.cfg.num_buffers {
            return false;
        }
        self.seal_staging();
        true
    }

    fn seal_staging(&mut self) {
        let payload = core::mem::take(&mut self.staging);
        self.window.push_back(Slot { payload, last_sent: None, queued: false });
        self.next_seq = self.next_seq.wrapping_add(1);
    }

    /// All written data acknowledged by every live member.
    pub fn is_drained(&self) -> bool {
        self.staging.is_empty() && self.window.is_empty()
    }

    /// Announces departure; readers treat the stream as complete at the
    /// current sequence.
    pub fn leave(&mut self) {
        if !self.left {
            self.left = true;
            self.push_beacon(true);
        }
    }

    fn slot_index(&self, s: u32) -> Option<usize> {
        let d = seq::diff(s, self.base);
        if d >= 0 && (d as usize) < self.window.len() && seq::lt(s, self.send_next) {
            Some(d as usize)
        } else {
            None
        }
    }

    fn advance_window(&mut self) {
        let mut target = self.send_next;
        for p in self.peers.iter().filter(|p| !p.lost && !p.left) {
            if seq::lt(p.acked, target) {
                target = p.acked;
            }
        }
        let n = seq::diff(target, self.base);
        if n <= 0 {
            return;
        }
        for _ in 0..n {
            self.window.pop_front();
        }
        self.base = target;
        self.rate = congestion_update(
            self.rate,
            RateEvent::AdvanceOk,
            self.cfg.send_rate_min,
            self.cfg.send_rate_max,
            self.cfg.rate_increase,
            self.cfg.rate_decrease,
        );
        self.ackreq_retry = false;
        if self.window.is_empty() {
            self.ackreq_due = None;
        }
    }

    fn on_ack(&mut self, from: usize, next: u32) {
        if seq::lt(self.send_next, next) {
            return;
        }
        let p = &mut self.peers[from];
        p.acked = seq::max(p.acked, next);
        self.advance_window();
    }

    fn on_nack(&mut self, from: usize, next: u32, ranges: &[NackRange], now: Duration) {
        self.stats.nacks_received += 1;
        self.on_ack(from, next);
        let guard = self.cfg.nack_delay;
        let mut wanted = false;
        for r in ranges {
            let mut s = r.first;
            loop {
                if let Some(i) = self.slot_index(s) {
                    let slot = &mut self.window[i];
                    let fresh = slot.last_sent.is_some_and(|t| now < t + guard);
                    if !slot.queued && !fresh {
                        slot.queued = true;
                        self.retransmit.push_back(s);
                        wanted = true;
                    }
                }
                if s == r.last {
                    break;
                }
                s = s.wrapping_add(1);
            }
        }
        if wanted {
            self.rate = congestion_update(
                self.rate,
                RateEvent::RetransmitNeeded,
                self.cfg.send_rate_min,
                self.cfg.send_rate_max,
                self.cfg.rate_increase,
                self.cfg.rate_decrease,
            );
        }
    }

    // ---- reader side ----

    fn peer_index(&self, id: u16) -> Option<usize> {
        self.peers.iter().position(|p| p.id == id)
    }

    /// Copies buffered in-order bytes of `writer`'s stream into `buf`.
    /// Returns 0 when nothing is available yet (see [`Protocol::finished`]).
    pub fn read(&mut self, writer: u16, buf: &mut [u8]) -> Result<usize, RspError> {
        let i = self.peer_index(writer).ok_or(RspError::UnknownMember(writer))?;
        let rx = &mut self.peers[i].rx;
        let mut n = 0;
        while n < buf.len() {
            let Some(front) = rx.ready.front() else { break };
            let avail = &front[rx.front_offset..];
            let k = avail.len().min(buf.len() - n);
            buf[n..n + k].copy_from_slice(&avail[..k]);
            n += k;
            rx.front_offset += k;
            if rx.front_offset == front.len() {
                rx.ready.pop_front();
                rx.front_offset = 0;
            }
        }
        if n == 0 && !buf.is_empty() {
            if let Some(end) = rx.ended_at {
                // a departed writer keeps answering NACKs while it lingers
                if seq::lt(rx.next, end) && rx.stalled_nacks >= self.cfg.max_silent_timeouts {
                    return Err(RspError::WriterLeft(writer));
                }
            }
        }
        Ok(n)
    }

    /// Bytes of `writer`'s stream ready to read.
    pub fn readable(&self, writer: u16) -> usize {
        self.peer_index(writer).map_or(0, |i| {
            let rx = &self.peers[i].rx;
            rx.ready.iter().map(Vec::len).sum::<usize>() - rx.front_offset
        })
    }

    /// Datagrams buffered for `writer`, in order or not.
    pub fn rx_pending(&self, writer: u16) -> usize {
        self.peer_index(writer).map_or(0, |i| self.peers[i].rx.pending())
    }

    /// True once `writer` left and every byte of its stream was read.
    pub fn finished(&self, writer: u16) -> bool {
        self.peer_index(writer).is_some_and(|i| {
            let rx = &self.peers[i].rx;
            rx.ended_at == Some(rx.next) && rx.ready.is_empty()
        })
    }

    fn on_data(&mut self, i: usize, s: u32, payload: Vec<u8>, now: Duration) {
        let num_buffers = self.cfg.num_buffers;
        let ack_freq = self.cfg.ack_freq as u64;
        let offset = self.id as u64 % ack_freq;
        let writer = self.peers[i].id;
        let rx = &mut self.peers[i].rx;
        let d = seq::diff(s, rx.next);
        if d < 0 {
            self.stats.duplicates += 1;
            return;
        }
        rx.seen_end = seq::max(rx.seen_end, s.wrapping_add(1));
        let space = num_buffers.saturating_sub(rx.ready.len());
        if d as usize >= space {
            self.stats.dropped_full += 1;
            return;
        }
        if d > 0 {
            if rx.ooo.insert(s, payload).is_some() {
                self.stats.duplicates += 1;
            } else if rx.nack_due.is_none() {
                rx.nack_due = Some(now + self.cfg.nack_delay);
            }
            self.stats.max_rx_pending = self.stats.max_rx_pending.max(rx.pending());
            return;
        }
        let mut ack = false;
        let mut payload = Some(payload);
        loop {
            let p = match payload.take() {
                Some(p) => p,
                None => match rx.ooo.remove(&rx.next) {
                    Some(p) => p,
                    None => break,
                },
            };
            rx.ready.push_back(p);
            rx.next = rx.next.wrapping_add(1);
            rx.stalled_nacks = 0;
            rx.received += 1;
            ack |= rx.received % ack_freq == offset;
        }
        self.stats.max_rx_pending = self.stats.max_rx_pending.max(rx.pending());
        if !rx.has_gap() {
            rx.nack_due = None;
        }
        if ack {
            rx.last_ack = Some(rx.next);
            let next = rx.next;
            self.stats.periodic_acks += 1;
            self.control
                .push_back(Datagram::Ack { from: self.id, target: writer, next }.encode());
        }
    }

    fn send_nacks(&mut self, i: usize, now: Duration) -> bool {
        let ranges = self.peers[i].rx.missing(self.cfg.num_buffers);
        if ranges.is_empty() {
            return false;
        }
        let target = self.peers[i].id;
        let next = self.peers[i].rx.next;
        for chunk in ranges.chunks(MAX_NACK_RANGES) {
            self.stats.nacks_sent += 1;
            self.control.push_back(
                Datagram::Nack { from: self.id, target, next, ranges: chunk.to_vec() }.encode(),
            );
        }
        let left = self.peers[i].left;
        let rx = &mut self.peers[i].rx;
        rx.nack_due = Some(now + self.cfg.retransmit_interval);
        if left {
            rx.stalled_nacks += 1;
        }
        true
    }

    fn send_ack(&mut self, i: usize) {
        let target = self.peers[i].id;
        let rx = &mut self.peers[i].rx;
        rx.last_ack = Some(rx.next);
        let d = Datagram::Ack { from: self.id, target, next: rx.next };
        self.stats.requested_acks += 1;
        self.control.push_back(d.encode());
    }

    fn on_ackreq(&mut self, i: usize, next: u32, retry: bool, now: Duration) {
        let rx = &mut self.peers[i].rx;
        if seq::le(next, rx.next) {
            let covered = rx.last_ack.is_some_and(|a| seq::le(next, a));
            if retry || !covered {
                self.send_ack(i);
            }
            return;
        }
        rx.seen_end = seq::max(rx.seen_end, next);
        if !self.send_nacks(i, now) {
            // no room for anything: report progress so the writer knows we live
            self.send_ack(i);
        }
    }

    // ---- driver interface ----

    /// Processes one received datagram.
    pub fn handle_datagram(&mut self, bytes: &[u8], now: Duration) {
        let d = match Datagram::decode(bytes) {
            Ok(d) => d,
            Err(_) => {
                self.stats.malformed += 1;
                return;
            }
        };
        let from = d.sender();
        if from == self.id {
            if let Datagram::Beacon { info, .. } = &d {
                if info.nonce != self.nonce {
                    self.error = Some(RspError::DuplicateMember(from));
                }
            }
            return;
        }
        let Some(i) = self.peer_index(from) else {
            self.stats.unknown_writer += 1;
            return;
        };
        let p = &mut self.peers[i];
        p.heard = true;
        p.silent_timeouts = 0;
        match d {
            Datagram::Data { sequence, payload, .. } => self.on_data(i, sequence, payload, now),
            Datagram::Ack { target, next, .. } if target == self.id => self.on_ack(i, next),
            Datagram::Nack { target, next, ranges, .. } if target == self.id => self.on_nack(i, next, &ranges, now),
            Datagram::Ack { .. } | Datagram::Nack { .. } => {}
            Datagram::AckReq { next, retry, .. } => self.on_ackreq(i, next, retry, now),
            Datagram::Beacon { next, leave, info, .. } => {
                if !self.cfg.matches(&info) {
                    self.error = Some(RspError::ConfigMismatch(from));
                    return;
                }
                let first = !self.peers[i].beacon_seen;
                self.peers[i].beacon_seen = true;
                if leave {
                    self.peers[i].left = true;
                    let rx = &mut self.peers[i].rx;
                    rx.ended_at = Some(next);
                    rx.seen_end = seq::max(rx.seen_end, next);
                    self.advance_window();
                } else if first && !self.left {
                    // answer late joiners once so they learn about us
                    self.push_beacon(false);
                }
            }
        }
    }

    /// Fires expired timers.
    pub fn handle_timeout(&mut self, now: Duration) {
        for i in 0..self.peers.len() {
            let rx = &mut self.peers[i].rx;
            if rx.nack_due.is_none() && rx.has_gap() && rx.ready.len() < self.cfg.num_buffers {
                rx.nack_due = Some(now + self.cfg.nack_delay);
            }
            if rx.nack_due.is_some_and(|t| t <= now) && !self.send_nacks(i, now) {
                self.peers[i].rx.nack_due = None;
            }
        }
        if self.window.is_empty() {
            self.ackreq_due = None;
            return;
        }
        let idle = self.retransmit.is_empty() && self.send_next == self.next_seq;
        let full = self.window.len() >= self.cfg.num_buffers;
        if !(idle || full) {
            return;
        }
        let due = *self.ackreq_due.get_or_insert(now);
        if due > now {
            return;
        }
        if self.ackreq_retry {
            for p in self.peers.iter_mut().filter(|p| !p.lost && !p.left) {
                if seq::lt(p.acked, self.send_next) && !p.heard {
                    p.silent_timeouts += 1;
                    if p.silent_timeouts >= self.cfg.max_silent_timeouts {
                        p.lost = true;
                        self.error.get_or_insert(RspError::MemberLost(p.id));
                    }
                }
            }
            self.advance_window();
            if self.window.is_empty() {
                return;
            }
        }
        for p in self.peers.iter_mut() {
            p.heard = false;
        }
        let d = Datagram::AckReq { writer: self.id, next: self.send_next, retry: self.ackreq_retry };
        self.control.push_back(d.encode());
        self.stats.ackreqs_sent += 1;
        self.ackreq_retry = true;
        self.ackreq_due = Some(now + self.cfg.ack_timeout);
    }

    /// Next datagram to send to the group, if any is allowed now.
    pub fn poll_transmit(&mut self, now: Duration) -> Option<Vec<u8>> {
        if let Some(c) = self.control.pop_front() {
            return Some(c);
        }
        while let Some(&s) = self.retransmit.front() {
            let Some(i) = self.slot_index(s) else {
                self.retransmit.pop_front();
                continue;
            };
            let len = (self.window[i].payload.len() + super::wire::HEADER_LEN) as f64;
            self.bucket.set_fill_rate(self.rate, now);
            if !self.bucket.acquire(len, now).ok()?.is_zero() {
                return None;
            }
            self.retransmit.pop_front();
            let slot = &mut self.window[i];
            slot.queued = false;
            slot.last_sent = Some(now);
            self.stats.retransmitted += 1;
            let d = Datagram::Data { writer: self.id, sequence: s, payload: slot.payload.clone() };
            return Some(d.encode());
        }
        if self.send_next != self.next_seq {
            let s = self.send_next;
            let i = seq::diff(s, self.base) as usize;
            let len = (self.window[i].payload.len() + super::wire::HEADER_LEN) as f64;
            self.bucket.set_fill_rate(self.rate, now);
            if !self.bucket.acquire(len, now).ok()?.is_zero() {
                return None;
            }
            let slot = &mut self.window[i];
            slot.last_sent = Some(now);
            self.stats.data_sent += 1;
            self.stats.payload_bytes_sent += slot.payload.len() as u64;
            let d = Datagram::Data { writer: self.id, sequence: s, payload: slot.payload.clone() };
            self.send_next = s.wrapping_add(1);
            self.ackreq_due = None;
            self.ackreq_retry = false;
            self.stats.max_in_flight = self.stats.max_in_flight.max(self.in_flight());
            if self.peers.iter().all(|p| p.lost || p.left) {
                self.advance_window();
            }
            return Some(d.encode());
        }
        // running idle may arm the ack request
        self.handle_timeout(now);
        self.control.pop_front()
    }

    /// Earliest time at which calling the driver hooks makes progress.
    pub fn next_timeout(&self, now: Duration) -> Option<Duration> {
        if !self.control.is_empty() {
            return Some(now);
        }
        let mut t: Option<Duration> = None;
        let mut take = |c: Duration| t = Some(t.map_or(c, |x: Duration| x.min(c)));
        let pending = self
            .retransmit
            .iter()
            .find_map(|&s| self.slot_index(s))
            .or_else(|| (self.send_next != self.next_seq).then(|| seq::diff(self.send_next, self.base) as usize));
        if let Some(i) = pending {
            let len = (self.window[i].payload.len() + super::wire::HEADER_LEN) as f64;
            let mut b = self.bucket.clone();
            b.set_fill_rate(self.rate, now);
            take(now + b.wait_time(len, now));
        }
        if !self.window.is_empty() {
            let idle = self.retransmit.is_empty() && self.send_next == self.next_seq;
            if idle || self.window.len() >= self.cfg.num_buffers {
                take(self.ackreq_due.unwrap_or(now));
            }
        }
        for p in &self.peers {
            if let Some(d) = p.rx.nack_due {
                take(d);
            } else if p.rx.has_gap() && p.rx.ready.len() < self.cfg.num_buffers {
                take(now);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    fn cfg() -> RspConfig {
        RspConfig::default().with_members([1, 2])
    }

    fn data(writer: u16, s: u32) -> Vec<u8> {
        Datagram::Data { writer, sequence: s, payload: vec![s as u8; 4] }.encode()
    }

    fn drain(p: &mut Protocol, now: Duration) -> Vec<Datagram> {
        p.handle_timeout(now);
        let mut out = Vec::new();
        while let Some(b) = p.poll_transmit(now) {
            out.push(Datagram::decode(&b).unwrap());
        }
        out
    }

    fn receiver() -> Protocol {
        let mut r = Protocol::new(2, cfg(), 7, Duration::ZERO).unwrap();
        drain(&mut r, Duration::ZERO);
        r
    }

    #[test]
    fn gap_is_nacked_after_delay() {
        let mut r = receiver();
        for s in [0, 1, 3] {
            r.handle_datagram(&data(1, s), Duration::ZERO);
        }
        let early = drain(&mut r, Duration::ZERO);
        assert!(!early.iter().any(|d| matches!(d, Datagram::Nack { .. })));
        let out = drain(&mut r, ms(1));
        assert_eq!(
            out,
            [Datagram::Nack { from: 2, target: 1, next: 2, ranges: vec![NackRange { first: 2, last: 2 }] }]
        );
    }

    #[test]
    fn seventeen_datagrams_one_ack() {
        let mut r = receiver();
        let mut acks = 0;
        for s in 0..17 {
            r.handle_datagram(&data(1, s), Duration::ZERO);
            acks += drain(&mut r, Duration::ZERO)
                .iter()
                .filter(|d| matches!(d, Datagram::Ack { .. }))
                .count();
        }
        assert_eq!(acks, 1);
        // member 2 acknowledges when its in-order count is 2 mod 17
        assert_eq!(r.stats().periodic_acks, 1);
    }

    #[test]
    fn unknown_writer_counted() {
        let mut r = receiver();
        r.handle_datagram(&data(9, 0), Duration::ZERO);
        assert_eq!(r.stats().unknown_writer, 1);
        assert_eq!(r.readable(1), 0);
    }

    #[test]
    fn window_slides_on_ack() {
        let mut w = Protocol::new(1, cfg(), 1, Duration::ZERO).unwrap();
        let max = w.config().max_payload();
        assert_eq!(w.queue_write(&vec![0u8; 4 * max]).unwrap(), 4 * max);
        let sent = drain(&mut w, Duration::ZERO);
        assert_eq!(sent.iter().filter(|d| matches!(d, Datagram::Data { .. })).count(), 4);
        assert_eq!(w.in_flight(), 4);
        w.handle_datagram(&Datagram::Ack { from: 2, target: 1, next: 3 }.encode(), ms(1));
        assert_eq!(w.in_flight(), 1);
        assert_eq!(w.buffers_used(), 1);
    }

    #[test]
    fn nack_triggers_retransmission() {
        let mut w = Protocol::new(1, cfg(), 1, Duration::ZERO).unwrap();
        let max = w.config().max_payload();
        w.queue_write(&vec![5u8; 3 * max]).unwrap();
        drain(&mut w, Duration::ZERO);
        let nack = Datagram::Nack { from: 2, target: 1, next: 1, ranges: vec![NackRange { first: 1, last: 1 }] };
        w.handle_datagram(&nack.encode(), ms(2));
        let out = drain(&mut w, ms(2));
        assert!(out.iter().any(|d| matches!(d, Datagram::Data { sequence: 1, .. })));
        assert_eq!(w.stats().retransmitted, 1);
        assert_eq!(w.in_flight(), 2);
    }

    #[test]
    fn idle_writer_requests_ack() {
        let mut w = Protocol::new(1, cfg(), 1, Duration::ZERO).unwrap();
        w.queue_write(&[1, 2, 3]).unwrap();
        assert!(w.flush());
        let out = drain(&mut w, Duration::ZERO);
        assert!(matches!(out.last(), Some(Datagram::AckReq { next: 1, retry: false, .. })));
        let out = drain(&mut w, ms(10));
        assert!(matches!(out.last(), Some(Datagram::AckReq { retry: true, .. })));
    }

    #[test]
    fn silent_member_is_lost() {
        let mut w = Protocol::new(1, cfg(), 1, Duration::ZERO).unwrap();
        w.queue_write(&[1]).unwrap();
        w.flush();
        let mut t = Duration::ZERO;
        for _ in 0..=50 {
            drain(&mut w, t);
            t += ms(10);
        }
        assert_eq!(w.error(), Some(&RspError::MemberLost(2)));
        assert!(w.queue_write(&[1]).is_err());
    }

    #[test]
    fn mismatched_mtu_fails_join() {
        let mut a = Protocol::new(1, cfg(), 1, Duration::ZERO).unwrap();
        let b = Protocol::new(2, RspConfig { mtu: 1400, ..cfg() }, 2, Duration::ZERO);
        let mut b = b.unwrap();
        let beacon = b.poll_transmit(Duration::ZERO).unwrap();
        a.handle_datagram(&beacon, Duration::ZERO);
        assert_eq!(a.joined(), Err(RspError::ConfigMismatch(2)));
    }

    #[test]
    fn duplicate_id_fails_join() {
        let mut a = Protocol::new(1, cfg(), 1, Duration::ZERO).unwrap();
        let mut imposter = Protocol::new(1, cfg(), 99, Duration::ZERO).unwrap();
        a.handle_datagram(&imposter.poll_transmit(Duration::ZERO).unwrap(), Duration::ZERO);
        assert_eq!(a.joined(), Err(RspError::DuplicateMember(1)));
    }

    #[test]
    fn wrapping_sequences() {
        let c = RspConfig { first_sequence: u32::MAX - 2, ..cfg() };
        let mut r = Protocol::new(2, c, 7, Duration::ZERO).unwrap();
        for s in [u32::MAX - 2, u32::MAX - 1, 0, u32::MAX, 1] {
            r.handle_datagram(&data(1, s), Duration::ZERO);
        }
        let mut buf = [0u8; 64];
        assert_eq!(r.read(1, &mut buf).unwrap(), 20);
        assert_eq!(&buf[..20], &[253, 253, 253, 253, 254, 254, 254, 254, 255, 255, 255, 255, 0, 0, 0, 0, 1, 1, 1, 1][..]);
    }
}
