//! Synthetic images and their composition.

use alloc::vec;
use alloc::vec::Vec;

use super::geom::{PixelParam, PixelRect, Range, SubpixelParam};

/// One rendered sample: nearest surface and its shade.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Fragment {
    pub depth: f32,
    pub value: u32,
}

impl Fragment {
    pub const BACKGROUND: Fragment = Fragment {
        depth: f32::INFINITY,
        value: 0,
    };

    pub fn is_background(&self) -> bool {
        self.depth == f32::INFINITY
    }

    /// Depth test with a deterministic tie break on the shade.
    pub fn nearer(&self, o: &Fragment) -> bool {
        (self.depth, self.value) < (o.depth, o.value)
    }
}

/// Fragments covering `rect`, row-major.
#[derive(Clone, PartialEq, Debug)]
pub struct Image {
    pub rect: PixelRect,
    pub data: Vec<Fragment>,
}

impl Image {
    pub fn new(rect: PixelRect) -> Self {
        Image {
            rect,
            data: vec![Fragment::BACKGROUND; rect.area() as usize],
        }
    }

    fn index(&self, px: u32, py: u32) -> usize {
        ((py - self.rect.y) * self.rect.w + (px - self.rect.x)) as usize
    }

    /// Fragment at absolute pixel coordinates.
    pub fn at(&self, px: u32, py: u32) -> Fragment {
        self.data[self.index(px, py)]
    }

    pub fn set(&mut self, px: u32, py: u32, f: Fragment) {
        let i = self.index(px, py);
        self.data[i] = f;
    }

    /// Bounding box of non-background fragments.
    pub fn content_bounds(&self) -> PixelRect {
        let mut r = PixelRect::default();
        for y in 0..self.rect.h {
            let row = &self.data[(y * self.rect.w) as usize..((y + 1) * self.rect.w) as usize];
            let Some(first) = row.iter().position(|f| !f.is_background()) else {
                continue;
            };
            let last = row.iter().rposition(|f| !f.is_background()).unwrap_or(first);
            r = r.union(&PixelRect::new(
                self.rect.x + first as u32,
                self.rect.y + y,
                (last - first + 1) as u32,
                1,
            ));
        }
        r
    }

    /// Averages sample layers of equal extent into one image; shades are
    /// rounded to nearest, depth is the nearest sample.
    pub fn resolve(layers: &[Image]) -> Image {
        let n = layers.len() as u64;
        assert!(n > 0, "resolve needs at least one layer");
        let mut out = Image::new(layers[0].rect);
        for (i, f) in out.data.iter_mut().enumerate() {
            let mut sum = 0u64;
            let mut depth = f32::INFINITY;
            for l in layers {
                sum += l.data[i].value as u64;
                depth = depth.min(l.data[i].depth);
            }
            *f = Fragment {
                depth,
                value: ((sum + n / 2) / n) as u32,
            };
        }
        out
    }
}

/// An input of [`composite`]: a rendered image with the attributes of the
/// task that produced it.
#[derive(Clone, Copy, Debug)]
pub struct FrameInput<'a> {
    pub image: &'a Image,
    pub pixel: PixelParam,
    pub subpixel: SubpixelParam,
    pub range: Range,
    /// Part of the image carrying content; only this area is read.
    pub roi: PixelRect,
    /// Produced on the compositing node; costs no network transfer.
    pub local: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct CompositeStats {
    pub inputs: usize,
    pub pixels_read: u64,
    pub transferred_bytes: u64,
    pub local_bytes: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, thiserror::Error)]
pub enum CompositeError {
    #[error("inputs {0} and {1} cover the same pixels")]
    Overlap(usize, usize),
    #[error("input {0} has a different sample count")]
    SampleCount(usize),
    #[error("input {0} lies outside the destination")]
    OutOfBounds(usize),
}

/// Bytes per pixel read back: shade only, plus depth for range-split inputs.
pub(crate) fn pixel_bytes(range: &Range) -> u64 {
    if range.is_full() {
        4
    } else {
        8
    }
}

fn residues_meet(a: (u32, u32), b: (u32, u32), start: u32, len: u32) -> bool {
    let period = (a.1 as u64 * b.1 as u64).min(len as u64);
    (0..period as u32).any(|i| {
        let v = start + i;
        v % a.1 == a.0 && v % b.1 == b.0
    })
}

fn overlap(a: &FrameInput<'_>, b: &FrameInput<'_>) -> bool {
    let r = a.image.rect.intersect(&b.image.rect);
    !r.is_empty()
        && a.subpixel.index == b.subpixel.index
        && a.range.overlaps(&b.range)
        && residues_meet(
            (a.pixel.x_offset, a.pixel.x_count),
            (b.pixel.x_offset, b.pixel.x_count),
            r.x,
            r.w,
        )
        && residues_meet(
            (a.pixel.y_offset, a.pixel.y_count),
            (b.pixel.y_offset, b.pixel.y_count),
            r.y,
            r.h,
        )
}

/// Assembles task outputs onto the destination area.
///
/// Inputs with the same sample index are merged per pixel by depth, which
/// pastes disjoint viewports, interleaves pixel slots and sorts database
/// ranges alike. Sample layers are then averaged. Inputs that would write the
/// same pixel of the same sample from overlapping data ranges are rejected.
pub fn composite(dest: PixelRect, inputs: &[FrameInput<'_>]) -> Result<(Image, CompositeStats), CompositeError> {
    let samples = inputs.first().map(|i| i.subpixel.size).unwrap_or(1);
    for (i, a) in inputs.iter().enumerate() {
        if a.subpixel.size != samples {
            return Err(CompositeError::SampleCount(i));
        }
        if a.image.rect.intersect(&dest) != a.image.rect && !a.image.rect.is_empty() {
            return Err(CompositeError::OutOfBounds(i));
        }
        for (j, b) in inputs.iter().enumerate().skip(i + 1) {
            if overlap(a, b) {
                return Err(CompositeError::Overlap(i, j));
            }
        }
    }
    let mut layers: Vec<Image> = (0..samples).map(|_| Image::new(dest)).collect();
    let mut stats = CompositeStats {
        inputs: inputs.len(),
        ..CompositeStats::default()
    };
    for input in inputs {
        let roi = input.roi.intersect(&input.image.rect);
        let owned = input.pixel.owned_in(&roi);
        stats.pixels_read += owned;
        let bytes = owned * pixel_bytes(&input.range);
        if input.local {
            stats.local_bytes += bytes;
        } else {
            stats.transferred_bytes += bytes;
        }
        let layer = &mut layers[input.subpixel.index as usize];
        let p = input.pixel;
        let first_x = roi.x + (p.x_offset + p.x_count - roi.x % p.x_count) % p.x_count;
        for py in roi.y..roi.top() {
            if py % p.y_count != p.y_offset {
                continue;
            }
            let mut px = first_x;
            while px < roi.right() {
                let f = input.image.at(px, py);
                let i = layer.index(px, py);
                if f.nearer(&layer.data[i]) {
                    layer.data[i] = f;
                }
                px += p.x_count;
            }
        }
    }
    Ok((Image::resolve(&layers), stats))
}
