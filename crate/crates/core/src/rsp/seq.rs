//! Serial-number arithmetic on 32-bit sequence numbers.
//!
//! Two sequences compare by the sign of their wrapping difference, which is
//! unambiguous while they are less than 2^31 apart.

#[inline]
pub fn diff(a: u32, b: u32) -> i32 {
    a.wrapping_sub(b) as i32
}

#[inline]
pub fn lt(a: u32, b: u32) -> bool {
    diff(a, b) < 0
}

#[inline]
pub fn le(a: u32, b: u32) -> bool {
    diff(a, b) <= 0
}

#[inline]
pub fn max(a: u32, b: u32) -> u32 {
    if lt(a, b) {
        b
    } else {
        a
    }
}
