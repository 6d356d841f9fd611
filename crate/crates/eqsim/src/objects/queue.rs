//! Single-producer queue whose consumers prefetch items from the master.

use std::time::Duration;

use eqsim_core::object::{ByteReader, ByteWriter, ObjectId};
use uuid::Uuid;

use super::{Error, ObjectNode, QueueMaster, Result, Shared, Store, QUEUE_ITEMS, QUEUE_POP};
use crate::net::{Command, LocalNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueHandle {
    pub id: ObjectId,
    pub master: Uuid,
}

/// The producing side, living on the master node.
pub struct QueueProducer {
    node: ObjectNode,
    handle: QueueHandle,
}

/// One consumer. It keeps up to `prefetch` items requested or buffered.
pub struct QueueConsumer {
    node: ObjectNode,
    handle: QueueHandle,
    prefetch: u32,
}

impl ObjectNode {
    pub fn new_queue(&self) -> QueueProducer {
        let id = ObjectId(Uuid::new_v4().as_u128());
        self.shared.lock().queues.insert(id, QueueMaster::default());
        QueueProducer { node: self.clone(), handle: QueueHandle { id, master: self.id() } }
    }

    pub fn queue_consumer(&self, handle: QueueHandle, prefetch: u32) -> QueueConsumer {
        self.shared.lock().consumers.entry(handle.id).or_default();
        QueueConsumer { node: self.clone(), handle, prefetch: prefetch.max(1) }
    }
}

fn items_message(id: ObjectId, end: bool, items: &[Vec<u8>]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u128(id.0);
    w.u8(end as u8);
    w.u32(items.len() as u32);
    for i in items {
        w.blob(i);
    }
    w.into_inner()
}

/// Hands queued items to parked requests in arrival order.
fn serve(node: &LocalNode, id: ObjectId, q: &mut QueueMaster) {
    while let Some((to, want)) = q.waiting.front_mut() {
        let n = (*want as usize).min(q.items.len());
        let batch: Vec<Vec<u8>> = q.items.drain(..n).collect();
        *want -= n as u32;
        let to = *to;
        let done = *want == 0;
        let end = !done && q.closed;
        if done || end {
            q.waiting.pop_front();
        }
        if !batch.is_empty() || end {
            let _ = node.send(to, QUEUE_ITEMS, &items_message(id, end, &batch));
        }
        if !done && !end {
            break;
        }
    }
}

impl QueueProducer {
    pub fn handle(&self) -> QueueHandle {
        self.handle
    }

    pub fn push(&self, item: Vec<u8>) {
        let mut store = self.node.shared.lock();
        let q = store.queues.get_mut(&self.handle.id).expect("own queue");
        q.items.push_back(item);
        serve(&self.node.node, self.handle.id, q);
    }

    /// Marks the end of the queue; consumers drain what is left and then
    /// pop `None`.
    pub fn close(&self) {
        let mut store = self.node.shared.lock();
        let q = store.queues.get_mut(&self.handle.id).expect("own queue");
        q.closed = true;
        serve(&self.node.node, self.handle.id, q);
    }

    pub fn pending(&self) -> usize {
        self.node.shared.lock().queues[&self.handle.id].items.len()
    }
}

impl QueueConsumer {
    /// Largest number of received but unpopped items seen so far.
    pub fn max_buffered(&self) -> usize {
        self.node.shared.lock().consumers[&self.handle.id].max_buffered
    }

    /// Next item, or `None` once the queue is closed and drained.
    pub fn pop(&self, timeout: Option<Duration>) -> Result<Option<Vec<u8>>> {
        let s = &self.node.shared;
        let (id, master) = (self.handle.id, self.handle.master);
        let node = &self.node.node;
        let prefetch = self.prefetch;
        let refill = |st: &mut Store| -> Result<()> {
            let inbox = st.consumers.get_mut(&id).expect("registered consumer");
            let held = inbox.items.len() as u32 + inbox.outstanding;
            if !inbox.ended && held < prefetch {
                let mut w = ByteWriter::new();
                w.u128(id.0);
                w.u32(prefetch - held);
                node.send(master, QUEUE_POP, w.as_slice())?;
                inbox.outstanding += prefetch - held;
            }
            Ok(())
        };
        let (r, _store) = s.wait_for(s.lock(), "queue item", timeout, |st| {
            let inbox = st.consumers.get_mut(&id).expect("registered consumer");
            if let Some(item) = inbox.items.pop_front() {
                return Some(refill(st).map(|_| Some(item)));
            }
            if inbox.ended {
                return Some(Ok(None));
            }
            if st.lost_peers.contains(&master) {
                return Some(Err(Error::MasterLost(id)));
            }
            refill(st).err().map(Err)
        })?;
        r
    }
}

pub(super) fn on_pop(s: &Shared, node: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let id = ObjectId(r.u128()?);
    let want = r.u32()?;
    let mut store = s.lock();
    match store.queues.get_mut(&id) {
        Some(q) => {
            q.waiting.push_back((c.from, want));
            serve(node, id, q);
        }
        None => {
            drop(store);
            node.send(c.from, QUEUE_ITEMS, &items_message(id, true, &[]))?;
        }
    }
    Ok(())
}

pub(super) fn on_items(s: &Shared, _: &LocalNode, c: &Command) -> Result<()> {
    let mut r = ByteReader::new(&c.payload);
    let id = ObjectId(r.u128()?);
    let end = r.u8()? != 0;
    let n = r.u32()?;
    let mut items = Vec::with_capacity(n as usize);
    for _ in 0..n {
        items.push(r.blob()?.to_vec());
    }
    let mut store = s.lock();
    let inbox = store.consumers.entry(id).or_default();
    inbox.outstanding = inbox.outstanding.saturating_sub(n);
    inbox.items.extend(items);
    inbox.max_buffered = inbox.max_buffered.max(inbox.items.len());
    if end {
        inbox.ended = true;
        inbox.outstanding = 0;
    }
    s.cond.notify_all();
    Ok(())
}

pub(super) fn peer_lost(store: &mut Store, peer: Uuid) {
    for q in store.queues.values_mut() {
        q.waiting.retain(|(u, _)| *u != peer);
    }
}
