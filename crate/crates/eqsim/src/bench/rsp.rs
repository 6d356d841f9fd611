//! One writer streaming to the rest of a group.

use std::io;
use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use eqsim_core::rsp::sim::{broadcast, LinkModel};
use eqsim_core::rsp::{RspConfig, RspError};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fmt_f64, Table};
use crate::codec::random_buffer;
use crate::net::{DatagramTransport, RspEndpoint, UdpMulticast};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RspTransport {
    /// Deterministic simulated network on a virtual clock.
    Sim,
    /// Real UDP multicast on this host, wall clock.
    Udp,
}

#[derive(Debug, Clone)]
pub struct RspBench {
    /// Group size, writer included.
    pub members: usize,
    pub bytes: usize,
    pub loss: f64,
    pub seed: u64,
    pub transport: RspTransport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RspRow {
    pub members: usize,
    pub bytes: usize,
    pub seconds: f64,
    pub retransmit_ratio: f64,
}

impl RspRow {
    pub fn mbps(&self) -> f64 {
        self.bytes as f64 / self.seconds.max(1e-12) / 1e6
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RspBenchError {
    #[error("a group needs at least 2 members")]
    TooFewMembers,
    #[error("member {0} received different bytes")]
    Corrupt(usize),
    #[error(transparent)]
    Rsp(#[from] RspError),
    #[error(transparent)]
    Sim(#[from] eqsim_core::rsp::sim::SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn run(b: &RspBench) -> Result<RspRow, RspBenchError> {
    if b.members < 2 {
        return Err(RspBenchError::TooFewMembers);
    }
    let data = random_buffer(b.bytes, b.seed);
    match b.transport {
        RspTransport::Sim => {
            let link = if b.loss > 0.0 { LinkModel::lossy(b.loss, 0.0, 0.0) } else { LinkModel::default() };
            let report = broadcast(&RspConfig::default(), data.clone(), b.members - 1, link, None, b.seed)?;
            for r in 1..b.members as u16 {
                if report.received(r, 0) != Some(&data[..]) {
                    return Err(RspBenchError::Corrupt(r as usize));
                }
            }
            Ok(RspRow {
                members: b.members,
                bytes: b.bytes,
                seconds: report.elapsed.as_secs_f64(),
                retransmit_ratio: report.retransmit_ratio(),
            })
        }
        RspTransport::Udp => udp(b, data),
    }
}

/// Drops outgoing datagrams at random to emulate a lossy network.
struct Lossy<T> {
    inner: T,
    loss: f64,
    rng: ChaCha8Rng,
}

impl<T: DatagramTransport> DatagramTransport for Lossy<T> {
    fn send(&mut self, datagram: &[u8]) -> io::Result<()> {
        if self.loss > 0.0 && self.rng.random::<f64>() < self.loss {
            return Ok(());
        }
        self.inner.send(datagram)
    }

    fn recv(&mut self, timeout: Duration) -> io::Result<Option<Vec<u8>>> {
        self.inner.recv(timeout)
    }
}

fn udp(b: &RspBench, data: Vec<u8>) -> Result<RspRow, RspBenchError> {
    let group = Ipv4Addr::new(239, 255, 42, (b.seed % 250) as u8 + 1);
    let port = 20_000 + (b.seed % 20_000) as u16;
    let cfg = RspConfig::default().with_members(0..b.members as u16);
    let mut eps = Vec::with_capacity(b.members);
    for i in 0..b.members {
        let t = UdpMulticast::join(group, port, Ipv4Addr::UNSPECIFIED)?;
        let t = Lossy { inner: t, loss: b.loss, rng: ChaCha8Rng::seed_from_u64(b.seed ^ i as u64) };
        eps.push(RspEndpoint::start(cfg.clone(), i as u16, t)?);
    }
    for ep in &eps {
        ep.wait_joined(Duration::from_secs(10))?;
    }
    let start = Instant::now();
    let len = data.len();
    let readers: Vec<_> = eps
        .drain(1..)
        .map(|ep| std::thread::spawn(move || ep.read_exact(0, len).map(|got| (ep, got))))
        .collect();
    let writer = &eps[0];
    writer.write(&data)?;
    let mut done = Vec::new();
    for (i, r) in readers.into_iter().enumerate() {
        let (ep, got) = r.join().expect("reader thread")?;
        if got != data {
            return Err(RspBenchError::Corrupt(i + 1));
        }
        done.push(ep);
    }
    let seconds = start.elapsed().as_secs_f64();
    writer.wait_drained(Duration::from_secs(10))?;
    let ratio = writer.stats().retransmit_ratio();
    drop(done);
    Ok(RspRow { members: b.members, bytes: b.bytes, seconds, retransmit_ratio: ratio })
}

pub fn table(rows: &[RspRow]) -> Table {
    let mut t = Table::new(&["members", "bytes", "seconds", "MBps", "retransmit_ratio"]);
    for r in rows {
        t.push(vec![
            r.members.to_string(),
            r.bytes.to_string(),
            fmt_f64(r.seconds),
            fmt_f64(r.mbps()),
            fmt_f64(r.retransmit_ratio),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulated_stream_is_deterministic() {
        let b = RspBench { members: 3, bytes: 200_000, loss: 0.02, seed: 5, transport: RspTransport::Sim };
        let r1 = run(&b).unwrap();
        let r2 = run(&b).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.retransmit_ratio > 0.0 && r1.seconds > 0.0);
        assert!(matches!(run(&RspBench { members: 1, ..b }), Err(RspBenchError::TooFewMembers)));
    }
}
