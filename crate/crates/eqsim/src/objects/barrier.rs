//! Master-counted barrier.

use std::time::Duration;

use eqsim_core::object::{ByteReader, ByteWriter, ObjectId};
use uuid::Uuid;

use super::{BarrierMaster, Error, ObjectNode, Result, Shared, Store, BARRIER_ENTER, BARRIER_RELEASE};
use crate::net::{Command, LocalNode};

/// What other nodes need to join a barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierHandle {
    pub id: ObjectId,
    pub master: Uuid,
}

/// One participant of a barrier. Every participant enters rounds in the
/// same sequence; the master releases a round once `height` entered it.
pub struct Barrier {
    node: ObjectNode,
    handle: BarrierHandle,
    round: u64,
}

impl ObjectNode {
    /// Creates a barrier mastered by this node.
    pub fn new_barrier(&self, height: u32) -> Barrier {
        let id = ObjectId(Uuid::new_v4().as_u128());
        self.shared.lock().barriers.insert(id, BarrierMaster { height: height.max(1), ..Default::default() });
        self.join_barrier(BarrierHandle { id, master: self.id() })
    }

    pub fn join_barrier(&self, handle: BarrierHandle) -> Barrier {
        Barrier { node: self.clone(), handle, round: 0 }
    }
}

impl Barrier {
    pub fn handle(&self) -> BarrierHandle {
        self.handle
    }

    /// Completed rounds of this participant.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Blocks until every participant entered the current round.
    pub fn enter(&mut self, timeout: Option<Duration>) -> Result<()> {
        self.round += 1;
        let key = (self.handle.id, self.round);
        let mut w = ByteWriter::new();
        w.u128(self.handle.id.0);
        w.u64(self.round);
        self.node.node.send(self.handle.master, BARRIER_ENTER, w.as_slice())?;
        let s = &self.node.shared;
        let master = self.handle.master;
        let (ok, _store) = s.wait_for(s.lock(), "barrier release", timeout, |st| {
            if let Some(ok) = st.released.remove(&key) {
                return Some(ok);
            }
            st.lost_peers.contains(&master).then_some(false)
        })?;
        if ok {
            Ok(())
        } else {
            Err(Error::BarrierBroken(self.handle.id))
        }
    }
}

fn release(node: &LocalNode, id: ObjectId, round: u64, ok: bool, to: &[Uuid]) {
    let mut w = ByteWriter::new();
    w.u128(id.0);
    w.u64(round);
    w.u8(ok as u8);
    for u in to {
        let _ = node.send(*u, BARRIER_RELEASE, w.as_slice());
    }
}

pub(super) fn on_enter(s: &Shared, node: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let id = ObjectId(r.u128()?);
    let round = r.u64()?;
    let mut store = s.lock();
    let Some(b) = store.barriers.get_mut(&id).filter(|b| !b.broken) else {
        drop(store);
        release(node, id, round, false, &[c.from]);
        return Ok(());
    };
    b.members.insert(c.from);
    let entered = b.rounds.entry(round).or_default();
    entered.push(c.from);
    if entered.len() >= b.height as usize {
        let all = b.rounds.remove(&round).unwrap();
        drop(store);
        release(node, id, round, true, &all);
    }
    Ok(())
}

pub(super) fn on_release(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let id = ObjectId(r.u128()?);
    let round = r.u64()?;
    let ok = r.u8()? != 0;
    s.lock().released.insert((id, round), ok);
    s.cond.notify_all();
    Ok(())
}

/// Breaks the barriers mastered here that `peer` took part in: open rounds fail now and later
/// enters fail immediately. Returns the releases to send.
pub(super) fn peer_lost(store: &mut Store, peer: Uuid) -> Vec<(ObjectId, u64, Vec<Uuid>)> {
    let mut out = Vec::new();
    for (id, b) in store.barriers.iter_mut().filter(|(_, b)| b.members.contains(&peer)) {
        b.broken = true;
        out.extend(b.rounds.drain().map(|(round, entered)| (*id, round, entered)));
    }
    out
}

pub(super) fn send_failures(node: &LocalNode, failed: Vec<(ObjectId, u64, Vec<Uuid>)>) {
    for (id, round, to) in failed {
        release(node, id, round, false, &to);
    }
}
