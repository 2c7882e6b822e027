//! Deterministic box layout: blocks stack vertically, inline content flows
//! in fixed-metric runs.

use super::css::Style;
use super::dom::{Document, NodeData};
use crate::snapshot::Rect;

pub const VIEWPORT_WIDTH: f64 = 1280.0;
pub const VIEWPORT_HEIGHT: f64 = 720.0;
pub const CHAR_WIDTH: f64 = 8.0;
pub const LINE_HEIGHT: f64 = 20.0;

#[derive(Debug, Clone, Default)]
pub struct Layout {
    /// Border box per arena index; `None` when not rendered.
    pub boxes: Vec<Option<Rect>>,
    pub width: f64,
    pub height: f64,
}

struct Ctx<'a> {
    doc: &'a Document,
    styles: &'a [Style],
    boxes: Vec<Option<Rect>>,
}

fn text_width(t: &str) -> f64 {
    let words: Vec<&str> = t.split_whitespace().collect();
    if words.is_empty() {
        return 0.0;
    }
    words.join(" ").chars().count() as f64 * CHAR_WIDTH
}

pub fn layout(doc: &Document, styles: &[Style]) -> Layout {
    let mut ctx = Ctx { doc, styles, boxes: vec![None; doc.nodes.len()] };
    let mut height = 0.0;
    for &c in &doc.nodes[0].children {
        height += ctx.block(c, 0.0, height, VIEWPORT_WIDTH);
    }
    let bottom = ctx.boxes.iter().flatten().map(|b| b.bottom()).fold(height, f64::max);
    Layout { boxes: ctx.boxes, width: VIEWPORT_WIDTH, height: bottom.max(VIEWPORT_HEIGHT) }
}

impl Ctx<'_> {
    fn hidden(&self, i: usize) -> bool {
        self.doc.element(i).is_some() && self.styles[i].display == "none"
    }

    fn is_block(&self, i: usize) -> bool {
        if self.doc.element(i).is_none() {
            return false;
        }
        let d = self.styles[i].display.as_str();
        if matches!(d, "block" | "flex" | "grid" | "list-item" | "table" | "table-row") {
            return true;
        }
        // Inline wrappers around block content behave as blocks.
        !self.replaced(i) && self.doc.nodes[i].children.iter().any(|&c| !self.hidden(c) && self.is_block(c))
    }

    fn absolute(&self, i: usize) -> bool {
        matches!(self.styles[i].position.as_str(), "absolute" | "fixed")
    }

    fn replaced(&self, i: usize) -> bool {
        matches!(
            self.doc.tag(i),
            Some("input" | "select" | "textarea" | "img" | "button" | "iframe" | "video" | "canvas" | "svg" | "progress" | "meter")
        )
    }

    /// Intrinsic size of replaced elements.
    fn replaced_size(&self, i: usize) -> (f64, f64) {
        let doc = self.doc;
        let attr_px = |n: &str| doc.attr(i, n).and_then(super::css::px);
        match doc.tag(i).unwrap_or("") {
            "input" => match doc.input_type(i).as_str() {
                "checkbox" | "radio" => (16.0, 16.0),
                "submit" | "button" | "reset" => {
                    let label = doc.attr(i, "value").unwrap_or("Submit");
                    (text_width(label) + 16.0, 24.0)
                }
                _ => {
                    let size = doc.attr(i, "size").and_then(|s| s.parse::<f64>().ok()).unwrap_or(25.0);
                    (size * CHAR_WIDTH, 24.0)
                }
            },
            "button" => (self.inline_content_width(i) + 16.0, 24.0),
            "select" => {
                let longest = doc.options(i).iter().map(|&o| text_width(&doc.option_label(o))).fold(0.0, f64::max);
                (longest + 32.0, 24.0)
            }
            "textarea" => (240.0, 48.0),
            "img" => (attr_px("width").unwrap_or(100.0), attr_px("height").unwrap_or(100.0)),
            _ => (attr_px("width").unwrap_or(300.0), attr_px("height").unwrap_or(150.0)),
        }
    }

    fn inline_content_width(&self, i: usize) -> f64 {
        self.doc.nodes[i]
            .children
            .iter()
            .map(|&c| match &self.doc.nodes[c].data {
                NodeData::Text(t) => text_width(t),
                _ if self.hidden(c) => 0.0,
                _ => self.inline_size(c).0,
            })
            .sum()
    }

    fn inline_size(&self, i: usize) -> (f64, f64) {
        let s = &self.styles[i];
        let (w, h) = if self.replaced(i) {
            self.replaced_size(i)
        } else {
            let w = self.inline_content_width(i);
            (w, if w > 0.0 { LINE_HEIGHT } else { 0.0 })
        };
        (s.width.unwrap_or(w), s.height.unwrap_or(h))
    }

    /// Positions an inline element and its inline descendants on one line.
    fn place_inline(&mut self, i: usize, x: f64, y: f64) -> (f64, f64) {
        let (w, h) = self.inline_size(i);
        self.boxes[i] = Some(Rect::new(x, y, w, h));
        if !self.replaced(i) || self.doc.tag(i) == Some("button") {
            let mut cx = x;
            for c in self.doc.nodes[i].children.clone() {
                match &self.doc.nodes[c].data {
                    NodeData::Text(t) => cx += text_width(t),
                    NodeData::Element(_) if !self.hidden(c) => {
                        let (cw, _) = self.place_inline(c, cx, y);
                        cx += cw;
                    }
                    _ => {}
                }
            }
        }
        (w, h)
    }

    fn place_absolute(&mut self, i: usize, container: Rect) {
        let s = self.styles[i].clone();
        let x = s.left.map(|l| container.x + l).unwrap_or(container.x);
        let y = s.top.map(|t| container.y + t).unwrap_or(container.y);
        if self.is_block(i) {
            let w = s.width.unwrap_or(container.width);
            self.block(i, x, y, w);
        } else {
            self.place_inline(i, x, y);
        }
    }

    /// Lays out a block-level box and returns its height.
    fn block(&mut self, i: usize, x: f64, y: f64, width: f64) -> f64 {
        if self.hidden(i) {
            return 0.0;
        }
        if self.doc.element(i).is_none() {
            return 0.0;
        }
        let style = self.styles[i].clone();
        let width = style.width.unwrap_or(width);
        let mut cy = y;
        let mut line_x = x;
        let mut line_h: f64 = 0.0;
        let children = self.doc.nodes[i].children.clone();
        let mut absolutes = Vec::new();
        for c in children {
            match &self.doc.nodes[c].data {
                NodeData::Text(t) => {
                    let w = text_width(t);
                    if w == 0.0 {
                        if !t.is_empty() && line_x > x {
                            line_x += CHAR_WIDTH;
                        }
                        continue;
                    }
                    if line_x > x && line_x + w > x + width {
                        cy += line_h;
                        line_x = x;
                        line_h = 0.0;
                    }
                    if w > width {
                        let lines = (w / width).ceil();
                        cy += line_h + (lines - 1.0) * LINE_HEIGHT;
                        line_x = x + (w - (lines - 1.0) * width);
                        line_h = LINE_HEIGHT;
                    } else {
                        line_x += w;
                        line_h = line_h.max(LINE_HEIGHT);
                    }
                }
                NodeData::Element(_) => {
                    if self.hidden(c) {
                        continue;
                    }
                    if self.absolute(c) {
                        absolutes.push(c);
                        continue;
                    }
                    if self.is_block(c) {
                        cy += line_h;
                        line_x = x;
                        line_h = 0.0;
                        cy += self.block(c, x, cy, width);
                    } else {
                        let (w, _) = self.inline_size(c);
                        if line_x > x && line_x + w > x + width {
                            cy += line_h;
                            line_x = x;
                            line_h = 0.0;
                        }
                        let (w, h) = self.place_inline(c, line_x, cy);
                        line_x += w;
                        line_h = line_h.max(h);
                    }
                }
                NodeData::Document => {}
            }
        }
        cy += line_h;
        let height = style.height.unwrap_or(cy - y);
        let rect = Rect::new(x, y, width, height);
        self.boxes[i] = Some(rect);
        for a in absolutes {
            self.place_absolute(a, Rect::new(0.0, 0.0, VIEWPORT_WIDTH, VIEWPORT_HEIGHT));
        }
        height
    }
}
