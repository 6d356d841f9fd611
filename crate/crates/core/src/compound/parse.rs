//! Reader for the block configuration syntax.
//!
//! ```text
//! file   = item*
//! item   = WORD value* block?
//! block  = "{" item* "}"
//! value  = STRING | NUMBER | array | WORD      (WORD only for enum keys)
//! array  = "[" (STRING | NUMBER | WORD)* "]"
//! ```
//!
//! Tokens are separated by whitespace or braces/brackets; `#` starts a comment
//! running to the end of the line. Unknown keys are skipped with a warning.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::geom::{PixelParam, Range, SubpixelParam, Viewport};
use super::model::*;
use super::ModelError;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Warning {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: warning: {}", self.pos, self.message)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Parsed {
    pub config: Config,
    pub warnings: Vec<Warning>,
}

fn err<T>(pos: Pos, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos,
        message: message.into(),
    })
}

#[derive(Clone, PartialEq, Debug)]
enum Tok {
    Word(String),
    Str(String),
    Num(f64),
    Open,
    Close,
    LBracket,
    RBracket,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '{' | '}' | '[' | ']' => {
                bump!();
                out.push((
                    match c {
                        '{' => Tok::Open,
                        '}' => Tok::Close,
                        '[' => Tok::LBracket,
                        _ => Tok::RBracket,
                    },
                    pos,
                ));
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None => return err(pos, "unterminated string"),
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(c @ ('"' | '\\')) => s.push(c),
                            _ => return err(pos, "invalid escape in string"),
                        },
                        Some(c) => s.push(c),
                    }
                }
                out.push((Tok::Str(s), pos));
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '{' | '}' | '[' | ']' | '"' | '#') {
                        break;
                    }
                    s.push(c);
                    bump!();
                }
                let numeric = s.starts_with(|c: char| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'));
                match s.parse::<f64>() {
                    Ok(v) if numeric && v.is_finite() => out.push((Tok::Num(v), pos)),
                    _ => out.push((Tok::Word(s), pos)),
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, PartialEq, Debug)]
enum Value {
    Str(String),
    Num(f64),
    Word(String),
    Array(Vec<(Value, Pos)>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Word(_) => "word",
            Value::Array(_) => "array",
        }
    }
}

#[derive(Clone, Debug)]
struct Item {
    key: String,
    pos: Pos,
    values: Vec<(Value, Pos)>,
    block: Option<Vec<Item>>,
}

/// Keys whose first value is a bare word.
const WORD_KEYS: &[&str] = &["mode", "type", "eye"];

struct Reader {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Reader {
    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.toks.get(self.at)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn items(&mut self, nested: Option<Pos>) -> Result<Vec<Item>, ParseError> {
        let mut items = Vec::new();
        loop {
            match self.next() {
                None => {
                    return match nested {
                        Some(open) => err(open, "unbalanced braces: block is never closed"),
                        None => Ok(items),
                    }
                }
                Some((Tok::Close, pos)) => {
                    return match nested {
                        Some(_) => Ok(items),
                        None => err(pos, "unbalanced braces: unexpected '}'"),
                    }
                }
                Some((Tok::Word(key), pos)) => items.push(self.item(key, pos)?),
                Some((t, pos)) => return err(pos, format!("expected a key, found {}", tok_name(&t))),
            }
        }
    }

    fn item(&mut self, key: String, pos: Pos) -> Result<Item, ParseError> {
        let mut values = Vec::new();
        let word_key = WORD_KEYS.contains(&key.as_str());
        loop {
            let Some((t, p)) = self.peek().cloned() else { break };
            match t {
                Tok::Str(s) => values.push((Value::Str(s), p)),
                Tok::Num(v) => values.push((Value::Num(v), p)),
                Tok::Word(w) if word_key && values.is_empty() => values.push((Value::Word(w), p)),
                Tok::LBracket => {
                    self.at += 1;
                    values.push((Value::Array(self.array(p)?), p));
                    continue;
                }
                _ => break,
            }
            self.at += 1;
        }
        let block = match self.peek() {
            Some((Tok::Open, p)) => {
                let p = *p;
                self.at += 1;
                Some(self.items(Some(p))?)
            }
            _ => None,
        };
        Ok(Item {
            key,
            pos,
            values,
            block,
        })
    }

    fn array(&mut self, open: Pos) -> Result<Vec<(Value, Pos)>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.next() {
                Some((Tok::RBracket, _)) => return Ok(out),
                Some((Tok::Num(v), p)) => out.push((Value::Num(v), p)),
                Some((Tok::Str(s), p)) => out.push((Value::Str(s), p)),
                Some((Tok::Word(w), p)) => out.push((Value::Word(w), p)),
                Some((t, p)) => return err(p, format!("malformed array: unexpected {}", tok_name(&t))),
                None => return err(open, "malformed array: missing ']'"),
            }
        }
    }
}

fn tok_name(t: &Tok) -> &'static str {
    match t {
        Tok::Word(_) => "word",
        Tok::Str(_) => "string",
        Tok::Num(_) => "number",
        Tok::Open => "'{'",
        Tok::Close => "'}'",
        Tok::LBracket => "'['",
        Tok::RBracket => "']'",
    }
}

struct Builder {
    warnings: Vec<Warning>,
}

impl Item {
    fn no_block(&self) -> Result<(), ParseError> {
        if self.block.is_some() {
            return err(self.pos, format!("'{}' takes no block", self.key));
        }
        Ok(())
    }

    fn block(&self) -> Result<&[Item], ParseError> {
        match &self.block {
            Some(b) => Ok(b),
            None => err(self.pos, format!("'{}' needs a block", self.key)),
        }
    }

    fn arity(&self, n: usize) -> Result<(), ParseError> {
        if self.values.len() != n {
            return err(
                self.pos,
                format!("'{}' expects {} value(s), found {}", self.key, n, self.values.len()),
            );
        }
        Ok(())
    }

    fn string(&self) -> Result<String, ParseError> {
        self.no_block()?;
        self.arity(1)?;
        match &self.values[0] {
            (Value::Str(s), _) => Ok(s.clone()),
            (v, p) => err(*p, format!("'{}' expects a string, found {}", self.key, v.describe())),
        }
    }

    fn word(&self) -> Result<String, ParseError> {
        self.no_block()?;
        self.arity(1)?;
        match &self.values[0] {
            (Value::Word(s) | Value::Str(s), _) => Ok(s.clone()),
            (v, p) => err(*p, format!("'{}' expects a keyword, found {}", self.key, v.describe())),
        }
    }

    fn number(&self) -> Result<f64, ParseError> {
        self.no_block()?;
        self.arity(1)?;
        match &self.values[0] {
            (Value::Num(v), _) => Ok(*v),
            (v, p) => err(*p, format!("'{}' expects a number, found {}", self.key, v.describe())),
        }
    }

    fn uint(&self) -> Result<u32, ParseError> {
        let v = self.number()?;
        to_u32(v, self.values[0].1)
    }

    fn numbers(&self, n: usize) -> Result<Vec<f64>, ParseError> {
        self.no_block()?;
        self.arity(1)?;
        let (v, p) = &self.values[0];
        let Value::Array(a) = v else {
            return err(*p, format!("'{}' expects an array of {} numbers", self.key, n));
        };
        if a.len() != n {
            return err(
                *p,
                format!("malformed array: '{}' expects {} numbers, found {}", self.key, n, a.len()),
            );
        }
        a.iter()
            .map(|(v, p)| match v {
                Value::Num(x) => Ok(*x),
                other => err(*p, format!("malformed array: expected number, found {}", other.describe())),
            })
            .collect()
    }

    fn uints(&self, n: usize) -> Result<Vec<u32>, ParseError> {
        let vals = self.numbers(n)?;
        let (_, p) = &self.values[0];
        vals.into_iter().map(|v| to_u32(v, *p)).collect()
    }

    fn words(&self) -> Result<Vec<String>, ParseError> {
        self.no_block()?;
        let mut out = Vec::new();
        for (v, p) in &self.values {
            match v {
                Value::Word(w) | Value::Str(w) => out.push(w.clone()),
                Value::Array(a) => {
                    for (v, p) in a {
                        match v {
                            Value::Word(w) | Value::Str(w) => out.push(w.clone()),
                            other => return err(*p, format!("expected keyword, found {}", other.describe())),
                        }
                    }
                }
                other => return err(*p, format!("expected keyword, found {}", other.describe())),
            }
        }
        Ok(out)
    }
}

fn to_u32(v: f64, p: Pos) -> Result<u32, ParseError> {
    if v < 0.0 || libm::trunc(v) != v || v > u32::MAX as f64 {
        return err(p, format!("expected a non-negative integer, found {v}"));
    }
    Ok(v as u32)
}

fn model(pos: Pos, r: Result<(), ModelError>) -> Result<(), ParseError> {
    r.map_err(|e| ParseError {
        pos,
        message: e.to_string(),
    })
}

impl Builder {
    fn unknown(&mut self, item: &Item, context: &str) {
        self.warnings.push(Warning {
            pos: item.pos,
            message: format!("unknown key '{}' in {} ignored", item.key, context),
        });
    }

    fn config(&mut self, items: &[Item]) -> Result<Config, ParseError> {
        let mut cfg = Config::default();
        for it in items {
            match it.key.as_str() {
                "latency" => cfg.latency = Some(it.uint()?),
                "channel" => cfg.channels.push(self.channel(it)?),
                "observer" => cfg.observers.push(self.observer(it)?),
                "layout" => cfg.layouts.push(self.layout(it)?),
                "canvas" => cfg.canvases.push(self.canvas(it)?),
                "compound" => cfg.compounds.push(self.compound(it)?),
                _ => self.unknown(it, "config"),
            }
        }
        Ok(cfg)
    }

    fn channel(&mut self, item: &Item) -> Result<ChannelDecl, ParseError> {
        item.arity(0)?;
        let mut c = ChannelDecl::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => c.name = it.string()?,
                "node" => c.node = Some(it.string()?),
                "size" => {
                    let v = it.uints(2)?;
                    c.size = Some((v[0], v[1]));
                }
                _ => self.unknown(it, "channel"),
            }
        }
        if c.name.is_empty() {
            return err(item.pos, "channel needs a name");
        }
        Ok(c)
    }

    fn observer(&mut self, item: &Item) -> Result<Observer, ParseError> {
        item.arity(0)?;
        let mut o = Observer::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => o.name = it.string()?,
                "position" => {
                    let v = it.numbers(3)?;
                    o.position = [v[0], v[1], v[2]];
                }
                "eye_base" | "eye_left" | "eye_right" | "eye_cyclop" | "focus_distance" | "focus_mode"
                | "stereo_mode" | "camera" | "vrpn_tracker" | "opencv_camera" => self.warnings.push(Warning {
                    pos: it.pos,
                    message: format!("observer attribute '{}' is not supported and was ignored", it.key),
                }),
                _ => self.unknown(it, "observer"),
            }
        }
        Ok(o)
    }

    fn layout(&mut self, item: &Item) -> Result<Layout, ParseError> {
        item.arity(0)?;
        let mut l = Layout::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => l.name = it.string()?,
                "view" => l.views.push(self.view(it)?),
                _ => self.unknown(it, "layout"),
            }
        }
        Ok(l)
    }

    fn view(&mut self, item: &Item) -> Result<View, ParseError> {
        item.arity(0)?;
        let mut v = View::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => v.name = it.string()?,
                "viewport" => v.viewport = viewport(it)?,
                "observer" => v.observer = Some(it.string()?),
                _ => self.unknown(it, "view"),
            }
        }
        Ok(v)
    }

    fn canvas(&mut self, item: &Item) -> Result<Canvas, ParseError> {
        item.arity(0)?;
        let mut c = Canvas::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => c.name = it.string()?,
                "layout" => c.layout = Some(it.string()?),
                "wall" => c.wall = Some(self.wall(it)?),
                "swap_barrier" => {
                    it.arity(0)?;
                    for b in it.block()? {
                        self.unknown(b, "swap_barrier");
                    }
                    c.swap_barrier = true;
                }
                "segment" => c.segments.push(self.segment(it)?),
                _ => self.unknown(it, "canvas"),
            }
        }
        if c.segments.is_empty() {
            return err(item.pos, "canvas needs at least one segment");
        }
        Ok(c)
    }

    fn segment(&mut self, item: &Item) -> Result<Segment, ParseError> {
        item.arity(0)?;
        let mut s = Segment::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => s.name = Some(it.string()?),
                "channel" => s.channel = it.string()?,
                "viewport" => s.viewport = viewport(it)?,
                "wall" => s.wall = Some(self.wall(it)?),
                _ => self.unknown(it, "segment"),
            }
        }
        if s.channel.is_empty() {
            return err(item.pos, "segment needs a channel");
        }
        Ok(s)
    }

    fn wall(&mut self, item: &Item) -> Result<Wall, ParseError> {
        item.arity(0)?;
        let mut w = Wall::default();
        let mut seen = 0;
        for it in item.block()? {
            let slot = match it.key.as_str() {
                "bottom_left" => &mut w.bottom_left,
                "bottom_right" => &mut w.bottom_right,
                "top_left" => &mut w.top_left,
                _ => {
                    self.unknown(it, "wall");
                    continue;
                }
            };
            let v = it.numbers(3)?;
            *slot = [v[0], v[1], v[2]];
            seen += 1;
        }
        if seen < 3 {
            return err(item.pos, "wall needs bottom_left, bottom_right and top_left");
        }
        Ok(w)
    }

    fn frame(&mut self, item: &Item) -> Result<FrameSpec, ParseError> {
        item.arity(0)?;
        let mut f = FrameSpec::default();
        for it in item.block()? {
            match it.key.as_str() {
                "name" => f.name = Some(it.string()?),
                "type" => match it.word()?.as_str() {
                    "texture" | "TEXTURE" => f.texture = true,
                    "memory" | "MEMORY" => f.texture = false,
                    other => return err(it.pos, format!("unknown frame type '{other}'")),
                },
                _ => self.unknown(it, "frame"),
            }
        }
        Ok(f)
    }

    fn split_params(&mut self, item: &Item) -> Result<SplitParams, ParseError> {
        let mut p = SplitParams::default();
        for it in item.block()? {
            match it.key.as_str() {
                "mode" => {
                    let w = it.word()?;
                    p.mode = SplitMode::from_keyword(&w)
                        .ok_or_else(|| ParseError {
                            pos: it.pos,
                            message: format!("unknown split mode '{w}'"),
                        })?;
                }
                "damping" => p.damping = it.number()?,
                "resistance" => p.resistance = it.number()?,
                "boundary" => {
                    let v = it.uints(2)?;
                    p.boundary = (v[0], v[1]);
                }
                _ => self.unknown(it, &item.key),
            }
        }
        Ok(p)
    }

    fn equalizer(&mut self, item: &Item) -> Result<Option<EqualizerSpec>, ParseError> {
        item.arity(0)?;
        let body = item.block()?;
        let spec = match item.key.as_str() {
            "load_equalizer" => EqualizerSpec::Load(self.split_params(item)?),
            "tree_equalizer" => EqualizerSpec::Tree(self.split_params(item)?),
            "framerate_equalizer" => {
                for it in body {
                    self.unknown(it, "framerate_equalizer");
                }
                EqualizerSpec::Framerate
            }
            "monitor_equalizer" => {
                for it in body {
                    self.unknown(it, "monitor_equalizer");
                }
                EqualizerSpec::Monitor
            }
            "tile_equalizer" => {
                let (mut name, mut size) = (None, None);
                for it in body {
                    match it.key.as_str() {
                        "name" => name = Some(it.string()?),
                        "size" => {
                            let v = it.uints(2)?;
                            size = Some((v[0], v[1]));
                        }
                        _ => self.unknown(it, "tile_equalizer"),
                    }
                }
                EqualizerSpec::Tile { name, size }
            }
            "dfr_equalizer" => {
                let mut framerate = 10.0;
                for it in body {
                    match it.key.as_str() {
                        "framerate" => framerate = it.number()?,
                        _ => self.unknown(it, "dfr_equalizer"),
                    }
                }
                EqualizerSpec::Dfr { framerate }
            }
            _ => return Ok(None),
        };
        Ok(Some(spec))
    }

    fn compound(&mut self, item: &Item) -> Result<Compound, ParseError> {
        item.arity(0)?;
        let c = self.compound_body(item)?;
        let mut warnings = Vec::new();
        model(item.pos, c.validate_tree(&mut warnings))?;
        self.warnings.extend(warnings.into_iter().map(|message| Warning { pos: item.pos, message }));
        Ok(c)
    }

    fn compound_body(&mut self, item: &Item) -> Result<Compound, ParseError> {
        let mut c = Compound::default();
        for it in item.block()? {
            match it.key.as_str() {
                "channel" => c.channel = Some(it.string()?),
                "eye" => c.eyes = it.words()?,
                "usage" => c.usage = it.number()?,
                "viewport" => c.viewport = viewport(it)?,
                "range" => {
                    let v = it.numbers(2)?;
                    let r = Range { lo: v[0], hi: v[1] };
                    model(it.pos, r.validate())?;
                    c.range = r;
                }
                "pixel" => {
                    let v = it.uints(4)?;
                    let p = PixelParam {
                        x_offset: v[0],
                        y_offset: v[1],
                        x_count: v[2],
                        y_count: v[3],
                    };
                    model(it.pos, p.validate())?;
                    c.pixel = p;
                }
                "subpixel" => {
                    let v = it.uints(2)?;
                    let s = SubpixelParam { index: v[0], size: v[1] };
                    model(it.pos, s.validate())?;
                    c.subpixel = s;
                }
                "phase" => c.phase.phase = it.uint()?,
                "period" => c.phase.period = it.uint()?,
                "outputframe" => c.output_frames.push(self.frame(it)?),
                "inputframe" => c.input_frames.push(self.frame(it)?),
                "outputtiles" => {
                    it.arity(0)?;
                    let mut t = TileSpec {
                        name: String::new(),
                        size: DEFAULT_TILE_SIZE,
                    };
                    for a in it.block()? {
                        match a.key.as_str() {
                            "name" => t.name = a.string()?,
                            "size" => {
                                let v = a.uints(2)?;
                                t.size = (v[0], v[1]);
                            }
                            _ => self.unknown(a, "outputtiles"),
                        }
                    }
                    c.output_tiles = Some(t);
                }
                "inputtiles" => {
                    it.arity(0)?;
                    let mut name = String::new();
                    for a in it.block()? {
                        match a.key.as_str() {
                            "name" => name = a.string()?,
                            _ => self.unknown(a, "inputtiles"),
                        }
                    }
                    c.input_tiles = Some(name);
                }
                "compound" => {
                    it.arity(0)?;
                    c.children.push(self.compound_body(it)?);
                }
                k if k.ends_with("_equalizer") => match self.equalizer(it)? {
                    Some(e) => c.equalizers.push(e),
                    None => self.unknown(it, "compound"),
                },
                _ => self.unknown(it, "compound"),
            }
        }
        model(item.pos, c.phase.validate())?;
        Ok(c)
    }
}

fn viewport(it: &Item) -> Result<Viewport, ParseError> {
    let v = it.numbers(4)?;
    let vp = Viewport {
        x: v[0],
        y: v[1],
        w: v[2],
        h: v[3],
    };
    model(it.pos, vp.validate())?;
    Ok(vp)
}

/// Parses a configuration and validates it.
pub fn parse_config(text: &str) -> Result<Parsed, ParseError> {
    let toks = lex(text)?;
    let mut r = Reader { toks, at: 0 };
    let items = r.items(None)?;
    let mut b = Builder { warnings: Vec::new() };
    let config = b.config(&items)?;
    let start = items.first().map(|i| i.pos).unwrap_or_default();
    // cross-reference checks; compound-level findings were reported already
    config.validate().map_err(|e| ParseError {
        pos: start,
        message: e.to_string(),
    })?;
    Ok(Parsed {
        config,
        warnings: b.warnings,
    })
}
