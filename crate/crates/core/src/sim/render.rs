use alloc::string::String;
use alloc::vec::Vec;

use super::scene::CostField;
use crate::compound::{Fragment, Image, PixelParam, PixelRect, Range, RenderTask, SubpixelParam, Viewport};

/// Result of rendering one task against a cost field.
#[derive(Clone, PartialEq, Debug)]
pub struct TaskRender {
    /// Owned samples of the task; present when requested.
    pub image: Option<Image>,
    /// Cost at unit capacity.
    pub time_ms: f64,
    /// Bounding box of drawn, owned pixels.
    pub roi: PixelRect,
    /// Destination megapixels owned by the task.
    pub fill_mpix: f64,
    /// Objects submitted by the task.
    pub visible: usize,
}

/// Position of sample `index` of `size` inside a pixel: a Hammersley point
/// set shifted so that a single sample sits at the center.
pub fn sample_offset(index: u32, size: u32) -> (f64, f64) {
    let n = size.max(1) as f64;
    let x = (index as f64 + 0.5) / n;
    let radical = index.reverse_bits() as f64 / 4294967296.0;
    let y = radical + 0.5 / n;
    (x, y - libm::floor(y))
}

/// Rasterizes the objects of `field` that the task submits and prices the
/// work.
///
/// An object is submitted when its footprint meets the task viewport and its
/// data range meets the task range; each submission costs its full geometry
/// time, since culling happens per object. Fill is charged per covered
/// sample in the task rectangle, scaled by the pixel ownership fraction.
/// Only samples whose database coordinate lies in the task range are drawn.
pub fn render_task(field: &CostField, task: &RenderTask, size: (u32, u32), with_image: bool) -> TaskRender {
    let rect = task.pixels;
    let frac = task.pixel.fraction();
    let (w, h) = (size.0 as f64, size.1 as f64);
    let (jx, jy) = sample_offset(task.subpixel.index, task.subpixel.size);
    let mut image = with_image.then(|| Image::new(rect));
    let mut time = field.background_density * rect.area() as f64 * frac / 1e6;
    let mut visible = 0;
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);

    for obj in &field.objects {
        if rect.is_empty()
            || !obj.on_screen()
            || !obj.overlaps_viewport(&task.viewport)
            || !task.range.overlaps(&obj.range)
        {
            continue;
        }
        visible += 1;
        time += obj.geometry_ms;
        let f = &obj.footprint;
        let clampx = |v: f64| (v.max(0.0) as u32).clamp(rect.x, rect.right());
        let clampy = |v: f64| (v.max(0.0) as u32).clamp(rect.y, rect.top());
        let (bx0, bx1) = (clampx(libm::floor(f.x * w)), clampx(libm::ceil(f.right() * w)));
        let (by0, by1) = (clampy(libm::floor(f.y * h)), clampy(libm::ceil(f.top() * h)));
        let fragment = Fragment {
            depth: obj.depth,
            value: obj.shade,
        };
        let mut covered = 0u64;
        for py in by0..by1 {
            let sy = (py as f64 + jy) / h;
            if !task.range.contains(obj.range_coord(sy)) {
                continue;
            }
            for px in bx0..bx1 {
                let sx = (px as f64 + jx) / w;
                if !obj.covers(sx, sy) {
                    continue;
                }
                covered += 1;
                if !task.pixel.owns(px, py) {
                    continue;
                }
                x0 = x0.min(px);
                x1 = x1.max(px + 1);
                y0 = y0.min(py);
                y1 = y1.max(py + 1);
                if let Some(img) = image.as_mut() {
                    if fragment.nearer(&img.at(px, py)) {
                        img.set(px, py, fragment);
                    }
                }
            }
        }
        time += obj.fill_density * covered as f64 / 1e6 * frac;
    }
    let roi = if x1 > x0 {
        PixelRect::new(x0, y0, x1 - x0, y1 - y0)
    } else {
        PixelRect::default()
    };
    TaskRender {
        image,
        time_ms: time,
        roi,
        fill_mpix: rect.area() as f64 * frac / 1e6,
        visible,
    }
}

/// A task covering the whole destination with one sample position.
pub fn full_task(size: (u32, u32), subpixel: SubpixelParam) -> RenderTask {
    RenderTask {
        path: Vec::new(),
        node: String::new(),
        channel: String::new(),
        frame: 0,
        viewport: Viewport::FULL,
        pixels: PixelRect::sized(size.0, size.1),
        range: Range::FULL,
        pixel: PixelParam::FULL,
        subpixel,
        eyes: Vec::new(),
        local: true,
        tile: None,
        roi: None,
    }
}

/// Single-pass render of the whole destination with `samples` samples per
/// pixel.
pub fn render_reference(field: &CostField, size: (u32, u32), samples: u32) -> Image {
    let n = samples.max(1);
    let layers: Vec<Image> = (0..n)
        .map(|k| {
            let task = full_task(size, SubpixelParam { index: k, size: n });
            render_task(field, &task, size, true).image.expect("image requested")
        })
        .collect();
    Image::resolve(&layers)
}
