use crate::compound::{PixelRect, Viewport};

/// Scale and offset placing a segment's image in a monitoring channel.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct MonitorTransform {
    pub zoom: (f64, f64),
    pub offset: (f64, f64),
}

/// Maps the output of a segment occupying `segment` of its canvas, rendered
/// at `segment_px`, into `dst` so that the monitor shows the whole canvas.
pub fn monitor_transform(segment: &Viewport, segment_px: (u32, u32), dst: &PixelRect) -> MonitorTransform {
    MonitorTransform {
        zoom: (
            dst.w as f64 * segment.w / segment_px.0 as f64,
            dst.h as f64 * segment.h / segment_px.1 as f64,
        ),
        offset: (
            dst.x as f64 + segment.x * dst.w as f64,
            dst.y as f64 + segment.y * dst.h as f64,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(i: u32) -> Viewport {
        Viewport::new((i % 2) as f64 * 0.5, (i / 2) as f64 * 0.5, 0.5, 0.5).unwrap()
    }

    #[test]
    fn canvas_sized_monitor_is_identity_scale() {
        let t = monitor_transform(&quad(3), (1024, 1024), &PixelRect::sized(2048, 2048));
        assert_eq!(t.zoom, (1.0, 1.0));
        assert_eq!(t.offset, (1024.0, 1024.0));
    }

    #[test]
    fn downscaled_wall() {
        let dst = PixelRect::sized(512, 512);
        for i in 0..4 {
            let t = monitor_transform(&quad(i), (1024, 1024), &dst);
            assert_eq!(t.zoom, (0.25, 0.25));
            assert_eq!(t.offset, ((i % 2) as f64 * 256.0, (i / 2) as f64 * 256.0));
        }
    }

    #[test]
    fn non_square_monitor_fills_both_axes() {
        let dst = PixelRect::new(10, 20, 800, 300);
        let mut right = 0.0f64;
        let mut top = 0.0f64;
        for i in 0..4 {
            let t = monitor_transform(&quad(i), (1024, 1024), &dst);
            assert!(t.zoom.0 != t.zoom.1);
            right = right.max(t.offset.0 + 1024.0 * t.zoom.0);
            top = top.max(t.offset.1 + 1024.0 * t.zoom.1);
        }
        assert_eq!((right, top), (810.0, 320.0));
    }
}
