//! A distributed directory of objects and their versions.

use eqsim_core::object::{ByteReader, ByteWriter, ChangeType, DirtyMask, ObjectError, ObjectId, Serializable, Version};

use super::{Error, Master, ObjectNode, Result, Slave};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapEntry {
    pub id: ObjectId,
    pub version: Version,
    /// Application-defined type tag.
    pub tag: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct MapState {
    entries: Vec<MapEntry>,
    dirty: DirtyMask,
}

impl Serializable for MapState {
    fn field_mask(&self) -> DirtyMask {
        DirtyMask::field(0)
    }

    fn dirty(&self) -> DirtyMask {
        self.dirty
    }

    fn set_dirty(&mut self, mask: DirtyMask) {
        self.dirty = mask;
    }

    fn serialize(&self, mask: DirtyMask, out: &mut ByteWriter) {
        if mask.contains(DirtyMask::field(0)) {
            out.u32(self.entries.len() as u32);
            for e in &self.entries {
                out.u128(e.id.0);
                out.u64(e.version.0);
                out.u32(e.tag);
            }
        }
    }

    fn deserialize(&mut self, mask: DirtyMask, input: &mut ByteReader<'_>) -> Result<(), ObjectError> {
        if mask.contains(DirtyMask::field(0)) {
            let n = input.u32()?;
            self.entries = (0..n)
                .map(|_| Ok(MapEntry { id: ObjectId(input.u128()?), version: Version(input.u64()?), tag: input.u32()? }))
                .collect::<Result<_, ObjectError>>()?;
        }
        Ok(())
    }
}

trait Committable: Send {
    fn object_id(&self) -> ObjectId;
    fn commit_now(&self) -> Result<Version>;
}

impl<T: Serializable + Send + 'static> Committable for Master<T> {
    fn object_id(&self) -> ObjectId {
        self.id()
    }

    fn commit_now(&self) -> Result<Version> {
        match self.change_type() {
            ChangeType::Static => Ok(self.version()),
            _ => self.commit(),
        }
    }
}

trait Syncable: Send {
    fn object_id(&self) -> ObjectId;
    fn sync_to(&self, v: Version) -> Result<Version>;
}

impl<T: Serializable + Send + 'static> Syncable for Slave<T> {
    fn object_id(&self) -> ObjectId {
        self.id()
    }

    fn sync_to(&self, v: Version) -> Result<Version> {
        self.sync(v)
    }
}

/// Master side: commits its objects, then itself.
pub struct ObjectMap {
    master: Master<MapState>,
    objects: Vec<(Box<dyn Committable>, u32)>,
}

/// Slave side: maps a subset of the listed objects and syncs them to the
/// versions recorded in the map.
pub struct ObjectMapSlave {
    node: ObjectNode,
    map: Slave<MapState>,
    mapped: Vec<Box<dyn Syncable>>,
}

impl ObjectNode {
    pub fn new_object_map(&self) -> Result<ObjectMap> {
        Ok(ObjectMap { master: self.register(MapState::default(), ChangeType::Instance)?, objects: Vec::new() })
    }

    pub fn map_object_map(&self, id: ObjectId, requested: Version) -> Result<ObjectMapSlave> {
        let map = self.map(id, requested, MapState::default())?;
        Ok(ObjectMapSlave { node: self.clone(), map, mapped: Vec::new() })
    }
}

impl ObjectMap {
    pub fn id(&self) -> ObjectId {
        self.master.id()
    }

    pub fn version(&self) -> Version {
        self.master.version()
    }

    /// Adds a master; it is committed by every following [`ObjectMap::commit`].
    pub fn add<T: Serializable + Send + 'static>(&mut self, obj: &Master<T>, tag: u32) {
        self.objects.push((Box::new(obj.clone()), tag));
    }

    /// Commits every dirty object, then the map if any recorded version
    /// changed.
    pub fn commit(&mut self) -> Result<Version> {
        let entries = self
            .objects
            .iter()
            .map(|(o, tag)| Ok(MapEntry { id: o.object_id(), version: o.commit_now()?, tag: *tag }))
            .collect::<Result<Vec<_>>>()?;
        self.master.with_mut(|m| {
            if m.entries != entries {
                m.entries = entries;
                m.dirty = DirtyMask::field(0);
            }
        });
        self.master.commit()
    }
}

impl ObjectMapSlave {
    pub fn version(&self) -> Version {
        self.map.version()
    }

    pub fn entries(&self) -> Vec<MapEntry> {
        self.map.with(|m| m.entries.clone())
    }

    /// Maps the listed object `id` at the version the map records.
    pub fn map<T: Serializable + Send + 'static>(&mut self, id: ObjectId, obj: T) -> Result<Slave<T>> {
        let entry = self.entries().into_iter().find(|e| e.id == id).ok_or(Error::UnknownObject(id))?;
        let slave = self.node.map(id, entry.version, obj)?;
        self.mapped.push(Box::new(slave.clone()));
        Ok(slave)
    }

    /// Advances the map to `target` and every mapped object to its recorded
    /// version. Objects no longer listed are left alone.
    pub fn sync(&mut self, target: Version) -> Result<Version> {
        let v = self.map.sync(target)?;
        let entries = self.entries();
        for s in &self.mapped {
            let id = s.object_id();
            let Some(e) = entries.iter().find(|e| e.id == id) else { continue };
            s.sync_to(e.version).map_err(|err| Error::MapSync { id, reason: err.to_string() })?;
        }
        Ok(v)
    }
}
