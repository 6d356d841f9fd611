//! Identity, versioning and serialization primitives of distributed objects.

mod cache;
mod history;
mod mask;
mod wire;

pub use cache::{CacheStats, InstanceCache};
pub use history::VersionHistory;
pub use mask::{apply_fields, pack_fields, DirtyMask, Serializable};
pub use wire::{ByteReader, ByteWriter, PayloadHeader, PayloadKind};

use core::fmt;

/// Cluster-wide 128-bit object address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObjectId(pub u128);

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectId({self})")
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Object version. Masters produce consecutive versions starting at
/// [`Version::FIRST`]; the registered initial state is version 0.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Version(pub u64);

impl Version {
    pub const NONE: Version = Version(0);
    pub const FIRST: Version = Version(1);
    /// Mapping sentinel: the oldest version still retained by the master.
    pub const OLDEST: Version = Version(u64::MAX - 1);
    /// Sync sentinel: the newest version received so far.
    pub const HEAD: Version = Version(u64::MAX);

    pub fn is_sentinel(self) -> bool {
        self == Self::OLDEST || self == Self::HEAD
    }

    pub fn next(self) -> Version {
        Version(self.0 + 1)
    }
}

impl fmt::Debug for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Version::OLDEST => f.write_str("OLDEST"),
            Version::HEAD => f.write_str("HEAD"),
            Version(v) => write!(f, "v{v}"),
        }
    }
}

/// How an object distributes its state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ChangeType {
    /// Never changes after registration.
    Static = 0,
    /// Every version ships the full instance data.
    Instance = 1,
    /// Versions ship the change since the previous version.
    Delta = 2,
    /// Versioned like `Delta`, but the master keeps no history.
    Unbuffered = 3,
}

impl ChangeType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Self::Static,
            1 => Self::Instance,
            2 => Self::Delta,
            3 => Self::Unbuffered,
            _ => return None,
        })
    }

    pub fn is_versioned(self) -> bool {
        self != ChangeType::Static
    }

    pub fn is_buffered(self) -> bool {
        matches!(self, ChangeType::Instance | ChangeType::Delta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObjectError {
    #[error("payload truncated")]
    Truncated,
    #[error("dirty mask carries bits {0:#x} unknown to the object")]
    UnknownBits(u64),
    #[error("malformed payload: {0}")]
    Malformed(&'static str),
}
