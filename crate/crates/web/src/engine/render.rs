//! Wireframe PNG rendering of laid-out pages.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use super::css::Style;
use super::dom::{Document, NodeData};
use super::layout::{Layout, CHAR_WIDTH, LINE_HEIGHT};
use crate::snapshot::Rect;

const MAX_HEIGHT: f64 = 8000.0;

fn stroke(img: &mut RgbImage, r: Rect, color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = r.x.floor() as i64;
    let y0 = r.y.floor() as i64;
    let x1 = (r.right().ceil() as i64 - 1).max(x0);
    let y1 = (r.bottom().ceil() as i64 - 1).max(y0);
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            img.put_pixel(x as u32, y as u32, color);
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

fn fill(img: &mut RgbImage, r: Rect, color: Rgb<u8>) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x0 = r.x.max(0.0) as u32;
    let y0 = r.y.max(0.0) as u32;
    let x1 = r.right().min(w).max(0.0) as u32;
    let y1 = r.bottom().min(h).max(0.0) as u32;
    for y in y0..y1 {
        for x in x0..x1 {
            img.put_pixel(x, y, color);
        }
    }
}

pub fn render_png(doc: &Document, styles: &[Style], layout: &Layout) -> Vec<u8> {
    let width = layout.width.max(1.0) as u32;
    let height = layout.height.clamp(1.0, MAX_HEIGHT) as u32;
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    for (i, style) in styles.iter().enumerate().take(doc.nodes.len()) {
        let Some(b) = layout.boxes[i] else { continue };
        if style.visibility != "visible" || b.is_empty() {
            continue;
        }
        let color = match doc.tag(i) {
            Some("a") => Rgb([40, 90, 200]),
            Some("button" | "input" | "select" | "textarea") => Rgb([90, 90, 90]),
            _ => Rgb([225, 225, 225]),
        };
        stroke(&mut img, b, color);
        // Text runs become grey bars along the element's first line.
        let mut x = b.x;
        for &c in &doc.nodes[i].children {
            if let NodeData::Text(t) = &doc.nodes[c].data {
                let w = t.split_whitespace().collect::<Vec<_>>().join(" ").chars().count() as f64 * CHAR_WIDTH;
                if w > 0.0 {
                    fill(&mut img, Rect::new(x + 1.0, b.y + 6.0, w.min(b.width) - 2.0, LINE_HEIGHT - 12.0), Rgb([120, 120, 120]));
                    x += w;
                }
            }
        }
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("png encodes");
    out.into_inner()
}
