//! Connections, reliable multicast endpoints and command-dispatching nodes.

mod cluster;
mod conn;
mod node;
mod rsp;

pub use cluster::{connect_mesh, join_memory_multicast};
pub use conn::{connect, listen, ConnReader, ConnWriter, Connection, ConnectionDescription, Listener, Pacer, Transport};
pub use node::{Command, CommandKind, DisconnectHook, Handler, LocalNode, NodeStats, RemoteNode, RESERVED_KINDS};
pub use rsp::{rsp_join, DatagramTransport, MemoryGroup, MemoryTransport, RspEndpoint, RspReader, UdpMulticast};
