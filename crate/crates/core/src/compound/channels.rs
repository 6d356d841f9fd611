use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::geom::Viewport;
use super::model::{Canvas, Layout, Wall};

/// A destination channel produced by a view overlapping a segment.
#[derive(Clone, PartialEq, Debug)]
pub struct DestinationChannel {
    /// Generated name, `<segment channel>.<view>`.
    pub name: String,
    pub view: String,
    pub segment: usize,
    /// Channel driving the segment.
    pub channel: String,
    /// The intersection in canvas coordinates.
    pub area: Viewport,
    /// The intersection relative to the segment's channel.
    pub viewport: Viewport,
    /// The intersection relative to the view.
    pub view_viewport: Viewport,
    pub frustum: Option<Wall>,
}

/// One destination channel per view and segment with overlapping area.
pub fn derive_channels(canvas: &Canvas, layout: &Layout) -> Vec<DestinationChannel> {
    let mut out = Vec::new();
    for view in &layout.views {
        for (i, seg) in canvas.segments.iter().enumerate() {
            let Some(area) = view.viewport.intersect(&seg.viewport) else {
                continue;
            };
            let viewport = seg.viewport.relative(&area);
            let frustum = match (&seg.wall, &canvas.wall) {
                (Some(w), _) => Some(w.restrict(&viewport)),
                (None, Some(w)) => Some(w.restrict(&area)),
                (None, None) => None,
            };
            out.push(DestinationChannel {
                name: format!("{}.{}", seg.channel, view.name),
                view: view.name.clone(),
                segment: i,
                channel: seg.channel.clone(),
                area,
                viewport,
                view_viewport: view.viewport.relative(&area),
                frustum,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::{Segment, View};
    use alloc::string::ToString;
    use alloc::vec;

    fn seg(ch: &str, x: f64, y: f64, w: f64, h: f64) -> Segment {
        Segment {
            name: None,
            channel: ch.to_string(),
            viewport: Viewport::new(x, y, w, h).unwrap(),
            wall: None,
        }
    }

    fn view(n: &str, x: f64, y: f64, w: f64, h: f64) -> View {
        View {
            name: n.to_string(),
            viewport: Viewport::new(x, y, w, h).unwrap(),
            observer: None,
        }
    }

    fn wall2x2() -> Canvas {
        Canvas {
            name: "wall".into(),
            layout: None,
            wall: Some(Wall {
                bottom_left: [-2.0, -1.0, -1.0],
                bottom_right: [2.0, -1.0, -1.0],
                top_left: [-2.0, 1.0, -1.0],
            }),
            swap_barrier: true,
            segments: vec![
                seg("lb", 0.0, 0.0, 0.5, 0.5),
                seg("rb", 0.5, 0.0, 0.5, 0.5),
                seg("lt", 0.0, 0.5, 0.5, 0.5),
                seg("rt", 0.5, 0.5, 0.5, 0.5),
            ],
        }
    }

    #[test]
    fn single_segment_single_view() {
        let canvas = Canvas {
            segments: vec![seg("c", 0.0, 0.0, 1.0, 1.0)],
            ..Canvas::default()
        };
        let layout = Layout {
            name: "l".into(),
            views: vec![view("v", 0.0, 0.0, 1.0, 1.0)],
        };
        let ch = derive_channels(&canvas, &layout);
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].viewport, Viewport::FULL);
    }

    #[test]
    fn empty_intersection_yields_nothing() {
        let canvas = Canvas {
            segments: vec![seg("a", 0.0, 0.0, 0.5, 1.0), seg("b", 0.5, 0.0, 0.5, 1.0)],
            ..Canvas::default()
        };
        let layout = Layout {
            name: "l".into(),
            views: vec![view("v", 0.0, 0.0, 0.5, 1.0)],
        };
        let ch = derive_channels(&canvas, &layout);
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].channel, "a");
    }

    #[test]
    fn unaligned_views_on_tiled_wall() {
        let layout = Layout {
            name: "four".into(),
            views: vec![
                view("v1", 0.0, 0.0, 0.6, 0.6),
                view("v2", 0.6, 0.0, 0.4, 0.45),
                view("v3", 0.6, 0.55, 0.4, 0.45),
                view("v4", 0.0, 0.65, 0.45, 0.35),
            ],
        };
        let ch = derive_channels(&wall2x2(), &layout);
        assert_eq!(ch.len(), 7);
        // total area equals the views' area
        let total: f64 = ch.iter().map(|c| c.area.area()).sum();
        let views: f64 = layout.views.iter().map(|v| v.viewport.area()).sum();
        assert!((total - views).abs() < 1e-12);
    }

    #[test]
    fn sub_frusta_are_planar_restrictions() {
        let layout = Layout {
            name: "l".into(),
            views: vec![view("v", 0.0, 0.0, 1.0, 1.0)],
        };
        let ch = derive_channels(&wall2x2(), &layout);
        let rt = ch.iter().find(|c| c.channel == "rt").unwrap();
        let f = rt.frustum.unwrap();
        assert_eq!(f.bottom_left, [0.0, 0.0, -1.0]);
        assert_eq!(f.top_right(), [2.0, 1.0, -1.0]);

        let mut canvas = wall2x2();
        let own = Wall {
            bottom_left: [5.0, 0.0, 0.0],
            bottom_right: [5.0, 0.0, -2.0],
            top_left: [5.0, 2.0, 0.0],
        };
        canvas.segments[3].wall = Some(own);
        let ch = derive_channels(&canvas, &layout);
        let rt = ch.iter().find(|c| c.channel == "rt").unwrap();
        assert_eq!(rt.frustum, Some(own));
    }
}
