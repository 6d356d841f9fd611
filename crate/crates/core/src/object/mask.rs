//! Field-level change tracking.

use core::ops::{BitOr, BitOrAssign};

use super::{ByteReader, ByteWriter, ObjectError};

/// 64-bit dirty mask. Bit 0 is reserved for attachment bookkeeping; fields
/// use bits 1 to 63.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DirtyMask(u64);

impl DirtyMask {
    pub const NONE: DirtyMask = DirtyMask(0);
    pub const ATTACHED: DirtyMask = DirtyMask(1);
    /// Every field bit; used when mapping.
    pub const ALL: DirtyMask = DirtyMask(!1);

    pub const fn from_bits(bits: u64) -> Self {
        DirtyMask(bits)
    }

    /// Mask of field number `n`, counted from 0 (bit `n + 1`).
    pub const fn field(n: u32) -> Self {
        assert!(n < 63);
        DirtyMask(1 << (n + 1))
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn fields(self) -> DirtyMask {
        DirtyMask(self.0 & !1)
    }

    pub const fn is_clean(self) -> bool {
        self.0 & !1 == 0
    }

    pub const fn contains(self, other: DirtyMask) -> bool {
        self.0 & other.0 == other.0
    }

    pub const fn intersects(self, other: DirtyMask) -> bool {
        self.0 & other.0 != 0
    }

    pub fn set(&mut self, other: DirtyMask) {
        self.0 |= other.0;
    }
}

impl BitOr for DirtyMask {
    type Output = DirtyMask;

    fn bitor(self, rhs: Self) -> Self {
        DirtyMask(self.0 | rhs.0)
    }
}

impl BitOrAssign for DirtyMask {
    fn bitor_assign(&mut self, rhs: Self) {
        self.0 |= rhs.0;
    }
}

/// State that (de)serializes the fields selected by a mask.
pub trait Serializable {
    /// Field bits assigned by this type.
    fn field_mask(&self) -> DirtyMask;

    /// Fields changed since the last commit.
    fn dirty(&self) -> DirtyMask;

    fn set_dirty(&mut self, mask: DirtyMask);

    /// Writes the fields selected by `mask`, in a fixed order.
    fn serialize(&self, mask: DirtyMask, out: &mut ByteWriter);

    /// Reads the fields selected by `mask`, in the same order.
    fn deserialize(&mut self, mask: DirtyMask, input: &mut ByteReader<'_>) -> Result<(), ObjectError>;
}

/// Serializes the masked fields, prefixed with the mask itself.
pub fn pack_fields<S: Serializable + ?Sized>(obj: &S, mask: DirtyMask, out: &mut ByteWriter) {
    let mask = DirtyMask(mask.fields().0 & obj.field_mask().0);
    out.u64(mask.0);
    obj.serialize(mask, out);
}

/// Applies data produced by [`pack_fields`]; returns the applied mask.
pub fn apply_fields<S: Serializable + ?Sized>(obj: &mut S, input: &mut ByteReader<'_>) -> Result<DirtyMask, ObjectError> {
    let mask = DirtyMask(input.u64()?).fields();
    let unknown = mask.0 & !obj.field_mask().0;
    if unknown != 0 {
        return Err(ObjectError::UnknownBits(unknown));
    }
    obj.deserialize(mask, input)?;
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone, PartialEq, Default)]
    struct Camera {
        position: [f64; 3],
        fov: f64,
        frame: u64,
        dirty: DirtyMask,
    }

    const POSITION: DirtyMask = DirtyMask::field(0);
    const FOV: DirtyMask = DirtyMask::field(1);
    const FRAME: DirtyMask = DirtyMask::field(2);

    impl Camera {
        fn fields(&self) -> ([f64; 3], f64, u64) {
            (self.position, self.fov, self.frame)
        }
    }

    impl Serializable for Camera {
        fn field_mask(&self) -> DirtyMask {
            POSITION | FOV | FRAME
        }
        fn dirty(&self) -> DirtyMask {
            self.dirty
        }
        fn set_dirty(&mut self, mask: DirtyMask) {
            self.dirty = mask;
        }
        fn serialize(&self, mask: DirtyMask, out: &mut ByteWriter) {
            if mask.contains(POSITION) {
                self.position.iter().for_each(|v| out.f64(*v));
            }
            if mask.contains(FOV) {
                out.f64(self.fov);
            }
            if mask.contains(FRAME) {
                out.u64(self.frame);
            }
        }
        fn deserialize(&mut self, mask: DirtyMask, input: &mut ByteReader<'_>) -> Result<(), ObjectError> {
            if mask.contains(POSITION) {
                for v in &mut self.position {
                    *v = input.f64()?;
                }
            }
            if mask.contains(FOV) {
                self.fov = input.f64()?;
            }
            if mask.contains(FRAME) {
                self.frame = input.u64()?;
            }
            Ok(())
        }
    }

    fn transfer(src: &Camera, dst: &mut Camera, mask: DirtyMask) {
        let mut w = ByteWriter::new();
        pack_fields(src, mask, &mut w);
        let bytes = w.into_inner();
        apply_fields(dst, &mut ByteReader::new(&bytes)).unwrap();
    }

    fn camera() -> impl Strategy<Value = Camera> {
        (any::<[i32; 3]>(), any::<i32>(), any::<u64>()).prop_map(|(p, f, frame)| Camera {
            position: p.map(f64::from),
            fov: f as f64,
            frame,
            dirty: DirtyMask::NONE,
        })
    }

    #[test]
    fn all_bits_copy_everything() {
        let src = Camera { position: [1.0, 2.0, 3.0], fov: 45.0, frame: 9, dirty: DirtyMask::NONE };
        let mut dst = Camera::default();
        transfer(&src, &mut dst, DirtyMask::ALL);
        assert_eq!(dst, src);
    }

    #[test]
    fn unknown_bit_is_rejected() {
        let mut w = ByteWriter::new();
        w.u64(DirtyMask::field(10).bits());
        let bytes = w.into_inner();
        let r = apply_fields(&mut Camera::default(), &mut ByteReader::new(&bytes));
        assert_eq!(r, Err(ObjectError::UnknownBits(1 << 11)));
    }

    proptest! {
        #[test]
        fn single_field_changes_only_that_field(src in camera(), dst in camera(), which in 0u32..3) {
            let mut out = dst.clone();
            transfer(&src, &mut out, DirtyMask::field(which));
            let (a, b, c) = out.fields();
            let expect = (
                if which == 0 { src.position } else { dst.position },
                if which == 1 { src.fov } else { dst.fov },
                if which == 2 { src.frame } else { dst.frame },
            );
            prop_assert_eq!((a, b, c), expect);
        }

        #[test]
        fn sequential_partials_equal_combined(a in camera(), b in camera(), start in camera(), m1 in 0u64..8, m2 in 0u64..8) {
            let m1 = DirtyMask::from_bits(m1 << 1);
            let m2 = DirtyMask::from_bits(m2 << 1);
            // two commits: the first at state a with m1, the second at state b with m2
            let mut seq = start.clone();
            transfer(&a, &mut seq, m1);
            transfer(&b, &mut seq, m2);
            // one commit of the final master state b' = a overridden by b on m2
            let mut master = a.clone();
            transfer(&b, &mut master, m2);
            let mut once = start.clone();
            transfer(&master, &mut once, m1 | m2);
            prop_assert_eq!(seq.fields(), once.fields());
        }
    }
}
