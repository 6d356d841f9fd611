//! Wiring helpers for in-process clusters.

use std::io;
use std::time::Duration;

use eqsim_core::rsp::sim::LinkModel;
use eqsim_core::rsp::RspConfig;

use super::conn::ConnectionDescription;
use super::node::LocalNode;
use super::rsp::{MemoryGroup, RspEndpoint};

const WIRING_TIMEOUT: Duration = Duration::from_secs(10);

fn timed_out(what: &str) -> io::Error {
    io::Error::new(io::ErrorKind::TimedOut, what.to_string())
}

/// Connects every pair of `nodes` over in-process pipes and waits until
/// each node sees all others.
pub fn connect_mesh(nodes: &[LocalNode]) -> io::Result<()> {
    let descs = nodes
        .iter()
        .map(|n| n.listen(&ConnectionDescription::pipe("mesh", 0)))
        .collect::<io::Result<Vec<_>>>()?;
    for (i, a) in nodes.iter().enumerate() {
        for desc in &descs[i + 1..] {
            a.connect(desc)?;
        }
    }
    for n in nodes {
        if !n.wait_peers(nodes.len() - 1, WIRING_TIMEOUT) {
            return Err(timed_out("mesh peers"));
        }
    }
    Ok(())
}

/// Puts `nodes` on one in-memory reliable multicast group.
pub fn join_memory_multicast(nodes: &[LocalNode], link: LinkModel, seed: u64) -> io::Result<()> {
    let group = MemoryGroup::new(link, seed);
    let cfg = RspConfig::default().with_members(0..nodes.len() as u16);
    let eps = (0..nodes.len())
        .map(|i| RspEndpoint::start(cfg.clone(), i as u16, group.attach()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io::Error::other)?;
    for ep in &eps {
        ep.wait_joined(WIRING_TIMEOUT).map_err(io::Error::other)?;
    }
    for (n, ep) in nodes.iter().zip(eps) {
        n.join_multicast(ep)?;
    }
    for n in nodes {
        if !n.wait_multicast_members(nodes.len() - 1, WIRING_TIMEOUT) {
            return Err(timed_out("multicast members"));
        }
    }
    Ok(())
}
