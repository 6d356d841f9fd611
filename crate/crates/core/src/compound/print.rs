//! Canonical text form of a [`Config`]; parsing the output yields an equal
//! config.

use alloc::string::String;
use core::fmt::Write;

use super::model::*;

struct Out {
    s: String,
    depth: usize,
}

impl Out {
    fn line(&mut self, text: core::fmt::Arguments<'_>) {
        for _ in 0..self.depth {
            self.s.push_str("  ");
        }
        let _ = self.s.write_fmt(text);
        self.s.push('\n');
    }

    fn open(&mut self, key: &str) {
        self.line(format_args!("{key} {{"));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line(format_args!("}}"));
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn vec3(v: &[f64; 3]) -> String {
    let mut s = String::new();
    let _ = write!(s, "[ {} {} {} ]", v[0], v[1], v[2]);
    s
}

pub fn print_config(cfg: &Config) -> String {
    let mut o = Out {
        s: String::new(),
        depth: 0,
    };
    if let Some(l) = cfg.latency {
        o.line(format_args!("latency {l}"));
    }
    for c in &cfg.channels {
        o.open("channel");
        o.line(format_args!("name {}", quote(&c.name)));
        if let Some(n) = &c.node {
            o.line(format_args!("node {}", quote(n)));
        }
        if let Some((w, h)) = c.size {
            o.line(format_args!("size [ {w} {h} ]"));
        }
        o.close();
    }
    for ob in &cfg.observers {
        o.open("observer");
        o.line(format_args!("name {}", quote(&ob.name)));
        if ob.position != [0.0; 3] {
            o.line(format_args!("position {}", vec3(&ob.position)));
        }
        o.close();
    }
    for l in &cfg.layouts {
        o.open("layout");
        o.line(format_args!("name {}", quote(&l.name)));
        for v in &l.views {
            o.open("view");
            o.line(format_args!("name {}", quote(&v.name)));
            viewport(&mut o, &v.viewport);
            if let Some(ob) = &v.observer {
                o.line(format_args!("observer {}", quote(ob)));
            }
            o.close();
        }
        o.close();
    }
    for c in &cfg.canvases {
        o.open("canvas");
        o.line(format_args!("name {}", quote(&c.name)));
        if let Some(l) = &c.layout {
            o.line(format_args!("layout {}", quote(l)));
        }
        if let Some(w) = &c.wall {
            wall(&mut o, w);
        }
        if c.swap_barrier {
            o.line(format_args!("swap_barrier {{}}"));
        }
        for s in &c.segments {
            o.open("segment");
            if let Some(n) = &s.name {
                o.line(format_args!("name {}", quote(n)));
            }
            o.line(format_args!("channel {}", quote(&s.channel)));
            viewport(&mut o, &s.viewport);
            if let Some(w) = &s.wall {
                wall(&mut o, w);
            }
            o.close();
        }
        o.close();
    }
    for c in &cfg.compounds {
        compound(&mut o, c);
    }
    o.s
}

fn viewport(o: &mut Out, vp: &super::Viewport) {
    if !vp.is_full() {
        o.line(format_args!("viewport [ {} {} {} {} ]", vp.x, vp.y, vp.w, vp.h));
    }
}

fn wall(o: &mut Out, w: &Wall) {
    o.open("wall");
    o.line(format_args!("bottom_left {}", vec3(&w.bottom_left)));
    o.line(format_args!("bottom_right {}", vec3(&w.bottom_right)));
    o.line(format_args!("top_left {}", vec3(&w.top_left)));
    o.close();
}

fn frame(o: &mut Out, key: &str, f: &FrameSpec) {
    match (&f.name, f.texture) {
        (None, false) => o.line(format_args!("{key} {{}}")),
        (Some(n), false) => o.line(format_args!("{key} {{ name {} }}", quote(n))),
        (None, true) => o.line(format_args!("{key} {{ type texture }}")),
        (Some(n), true) => o.line(format_args!("{key} {{ name {} type texture }}", quote(n))),
    }
}

fn split(o: &mut Out, key: &str, p: &SplitParams) {
    o.open(key);
    o.line(format_args!("mode {}", p.mode.keyword()));
    o.line(format_args!("damping {}", p.damping));
    o.line(format_args!("resistance {}", p.resistance));
    o.line(format_args!("boundary [ {} {} ]", p.boundary.0, p.boundary.1));
    o.close();
}

fn compound(o: &mut Out, c: &Compound) {
    o.open("compound");
    if let Some(ch) = &c.channel {
        o.line(format_args!("channel {}", quote(ch)));
    }
    if !c.eyes.is_empty() {
        let mut s = String::new();
        for e in &c.eyes {
            let _ = write!(s, " {e}");
        }
        o.line(format_args!("eye [{s} ]"));
    }
    if c.usage != 1.0 {
        o.line(format_args!("usage {}", c.usage));
    }
    viewport(o, &c.viewport);
    if !c.range.is_full() {
        o.line(format_args!("range [ {} {} ]", c.range.lo, c.range.hi));
    }
    if !c.pixel.is_full() {
        let p = c.pixel;
        o.line(format_args!("pixel [ {} {} {} {} ]", p.x_offset, p.y_offset, p.x_count, p.y_count));
    }
    if !c.subpixel.is_full() {
        o.line(format_args!("subpixel [ {} {} ]", c.subpixel.index, c.subpixel.size));
    }
    if !c.phase.is_always() {
        o.line(format_args!("phase {} period {}", c.phase.phase, c.phase.period));
    }
    for e in &c.equalizers {
        match e {
            EqualizerSpec::Load(p) => split(o, "load_equalizer", p),
            EqualizerSpec::Tree(p) => split(o, "tree_equalizer", p),
            EqualizerSpec::Framerate => o.line(format_args!("framerate_equalizer {{}}")),
            EqualizerSpec::Monitor => o.line(format_args!("monitor_equalizer {{}}")),
            EqualizerSpec::Dfr { framerate } => o.line(format_args!("dfr_equalizer {{ framerate {framerate} }}")),
            EqualizerSpec::Tile { name, size } => {
                o.open("tile_equalizer");
                if let Some(n) = name {
                    o.line(format_args!("name {}", quote(n)));
                }
                if let Some((w, h)) = size {
                    o.line(format_args!("size [ {w} {h} ]"));
                }
                o.close();
            }
        }
    }
    if let Some(t) = &c.output_tiles {
        o.open("outputtiles");
        o.line(format_args!("name {}", quote(&t.name)));
        o.line(format_args!("size [ {} {} ]", t.size.0, t.size.1));
        o.close();
    }
    if let Some(t) = &c.input_tiles {
        o.line(format_args!("inputtiles {{ name {} }}", quote(t)));
    }
    for child in &c.children {
        compound(o, child);
    }
    for f in &c.output_frames {
        frame(o, "outputframe", f);
    }
    for f in &c.input_frames {
        frame(o, "inputframe", f);
    }
    o.close();
}
