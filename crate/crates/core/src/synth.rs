//! Synthetic page archetypes for smoke tests and demos: typed text, ruled
//! tables, halftone photos and sparse line drawings.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::forest::tree_seed;
use crate::pixelio::{ColorImage, PixelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Archetype {
    Text,
    Table,
    Photo,
    Drawing,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [Archetype::Text, Archetype::Table, Archetype::Photo, Archetype::Drawing];

    /// Taxonomy label the archetype stands in for.
    pub fn label(self) -> &'static str {
        match self {
            Archetype::Text => "TEXT_T",
            Archetype::Table => "LINE_T",
            Archetype::Photo => "PHOTO",
            Archetype::Drawing => "DRAW",
        }
    }
}

struct Canvas {
    w: i64,
    h: i64,
    px: Vec<u8>,
}

impl Canvas {
    fn new(w: u32, h: u32, paper: u8) -> Self {
        Self {
            w: w as i64,
            h: h as i64,
            px: vec![paper; (w * h) as usize],
        }
    }

    fn set(&mut self, x: i64, y: i64, v: u8) {
        if (0..self.w).contains(&x) && (0..self.h).contains(&y) {
            self.px[(y * self.w + x) as usize] = v;
        }
    }

    fn rect(&mut self, x0: i64, y0: i64, w: i64, h: i64, v: u8) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.set(x, y, v);
            }
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), v: u8) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as i64;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.set(
                (x0 + (x1 - x0) * t).round() as i64,
                (y0 + (y1 - y0) * t).round() as i64,
                v,
            );
        }
    }

    fn into_image(self, tint: [i16; 3]) -> ColorImage {
        let data = self
            .px
            .iter()
            .map(|&g| tint.map(|t| (g as i16 + t).clamp(0, 255) as u8))
            .collect();
        ColorImage::new(self.w as u32, self.h as u32, data).expect("canvas dimensions are valid")
    }
}

fn add_noise<R: Rng + ?Sized>(c: &mut Canvas, sigma: f64, rng: &mut R) {
    let n = Normal::new(0.0, sigma).expect("sigma is positive");
    for p in &mut c.px {
        *p = (*p as f64 + n.sample(rng)).round().clamp(0.0, 255.0) as u8;
    }
}

fn words<R: Rng + ?Sized>(c: &mut Canvas, x0: i64, x1: i64, y: i64, glyph_h: i64, rng: &mut R) {
    let mut x = x0;
    while x < x1 {
        let word = rng.random_range(3..9);
        for _ in 0..word {
            if x >= x1 {
                break;
            }
            let gw = rng.random_range(3..6);
            let rise = if rng.random_bool(0.2) { glyph_h / 3 } else { 0 };
            // Glyph outline: two stems and a bar, like a crude letter.
            c.rect(x, y - rise, 1, glyph_h + rise, 30);
            c.rect(x + gw - 1, y, 1, glyph_h, 30);
            c.rect(x, y + glyph_h / 2, gw, 1, 40);
            x += gw + 1;
        }
        x += rng.random_range(4..8);
    }
}

fn text_page<R: Rng + ?Sized>(c: &mut Canvas, rng: &mut R) {
    let margin = rng.random_range(14..24);
    let glyph_h = rng.random_range(6..9);
    let pitch = glyph_h + rng.random_range(4..7);
    let mut y = margin;
    while y + glyph_h < c.h - margin {
        let end = if rng.random_bool(0.15) {
            c.w / 2 + rng.random_range(0..c.w / 3)
        } else {
            c.w - margin
        };
        words(c, margin, end, y, glyph_h, rng);
        y += pitch;
    }
}

fn table_page<R: Rng + ?Sized>(c: &mut Canvas, rng: &mut R) {
    let margin = rng.random_range(12..22);
    let cols = rng.random_range(3..6);
    let rows = rng.random_range(8..14);
    let (x0, x1) = (margin, c.w - margin);
    let (y0, y1) = (margin + 10, c.h - margin);
    let weight = rng.random_range(1..3);
    let col_w = (x1 - x0) as f64 / cols as f64;
    let row_h = (y1 - y0) as f64 / rows as f64;
    for i in 0..=cols {
        let x = x0 + (i as f64 * col_w) as i64;
        c.rect(x, y0, weight, y1 - y0, 20);
    }
    for j in 0..=rows {
        let y = y0 + (j as f64 * row_h) as i64;
        c.rect(x0, y, x1 - x0 + weight, weight, 20);
    }
    for j in 0..rows {
        for i in 0..cols {
            if rng.random_bool(0.6) {
                let cx = x0 + (i as f64 * col_w) as i64 + 4;
                let cy = y0 + (j as f64 * row_h) as i64 + (row_h as i64 - 6) / 2;
                let len = rng.random_range(6..(col_w as i64 - 6).max(7));
                words(c, cx, cx + len, cy, 5, rng);
            }
        }
    }
}

fn photo_page<R: Rng + ?Sized>(c: &mut Canvas, rng: &mut R) {
    let margin = rng.random_range(10..30);
    let (x0, y0) = (margin, margin + rng.random_range(0..20));
    let (x1, y1) = (c.w - margin, c.h - margin - rng.random_range(0..40));
    let base = rng.random_range(70.0..150.0);
    let gx = rng.random_range(-0.4..0.4);
    let gy = rng.random_range(-0.4..0.4);
    // A few soft blobs over a gradient, then halftone-style dot noise.
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(3..7))
        .map(|_| {
            (
                rng.random_range(x0 as f64..x1 as f64),
                rng.random_range(y0 as f64..y1 as f64),
                rng.random_range(15.0..60.0),
                rng.random_range(-70.0..70.0),
            )
        })
        .collect();
    let grain = Normal::new(0.0, 28.0).unwrap();
    for y in y0..y1 {
        for x in x0..x1 {
            let mut v = base + gx * (x - x0) as f64 + gy * (y - y0) as f64;
            for &(bx, by, r, amp) in &blobs {
                let d2 = ((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)) / (r * r);
                v += amp * (-d2).exp();
            }
            if (x + y) % 3 == 0 {
                v -= 25.0;
            }
            v += grain.sample(rng);
            c.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
}

fn drawing_page<R: Rng + ?Sized>(c: &mut Canvas, rng: &mut R) {
    let (w, h) = (c.w as f64, c.h as f64);
    for _ in 0..rng.random_range(4..9) {
        match rng.random_range(0..3) {
            0 => {
                let a = (rng.random_range(0.1..0.9) * w, rng.random_range(0.1..0.9) * h);
                let b = (rng.random_range(0.1..0.9) * w, rng.random_range(0.1..0.9) * h);
                c.line(a, b, 35);
            }
            1 => {
                let (cx, cy) = (rng.random_range(0.2..0.8) * w, rng.random_range(0.2..0.8) * h);
                let r = rng.random_range(10.0..w / 4.0);
                let n = (r * 7.0) as usize;
                for i in 0..n {
                    let t0 = i as f64 / n as f64 * std::f64::consts::TAU;
                    let t1 = (i + 1) as f64 / n as f64 * std::f64::consts::TAU;
                    c.line((cx + r * t0.cos(), cy + r * t0.sin()), (cx + r * t1.cos(), cy + r * t1.sin()), 35);
                }
            }
            _ => {
                // Meandering curve.
                let mut p = (rng.random_range(0.1..0.9) * w, rng.random_range(0.1..0.9) * h);
                let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                for _ in 0..rng.random_range(20..60) {
                    heading += rng.random_range(-0.5..0.5);
                    let q = (
                        (p.0 + 4.0 * heading.cos()).clamp(2.0, w - 3.0),
                        (p.1 + 4.0 * heading.sin()).clamp(2.0, h - 3.0),
                    );
                    c.line(p, q, 40);
                    p = q;
                }
            }
        }
    }
}

/// Renders one page. Size, margins, paper tone and content vary with `rng`.
pub fn render_page<R: Rng + ?Sized>(kind: Archetype, rng: &mut R) -> ColorImage {
    let w = rng.random_range(224..=272);
    let h = rng.random_range(300..=352);
    let paper = rng.random_range(225..=250);
    let mut c = Canvas::new(w, h, paper);
    match kind {
        Archetype::Text => text_page(&mut c, rng),
        Archetype::Table => table_page(&mut c, rng),
        Archetype::Photo => photo_page(&mut c, rng),
        Archetype::Drawing => drawing_page(&mut c, rng),
    }
    add_noise(&mut c, rng.random_range(2.0..6.0), rng);
    let warm = rng.random_range(0..8);
    c.into_image([warm, warm / 2, -warm / 2])
}

/// Writes `per_class` pages per archetype as `root/<LABEL>/<label>-NNNN.png`
/// and returns the written paths in generation order.
pub fn write_dataset(root: &Path, per_class: usize, seed: u64) -> Result<Vec<PathBuf>, PixelError> {
    let mut paths = Vec::with_capacity(per_class * Archetype::ALL.len());
    for (k, kind) in Archetype::ALL.into_iter().enumerate() {
        let dir = root.join(kind.label());
        fs::create_dir_all(&dir).map_err(|source| PixelError::UnwritableFile {
            path: dir.clone(),
            source,
        })?;
        for i in 0..per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, (k * 1_000_000 + i) as u64));
            let path = dir.join(format!("{}-{:04}.png", kind.label().to_ascii_lowercase(), i + 1));
            render_page(kind, &mut rng).save_png(&path)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, FEATURE_LEN};

    #[test]
    fn pages_are_deterministic_and_valid() {
        for kind in Archetype::ALL {
            let a = render_page(kind, &mut ChaCha8Rng::seed_from_u64(4));
            let b = render_page(kind, &mut ChaCha8Rng::seed_from_u64(4));
            assert_eq!(a.pixels(), b.pixels());
            let fv = extract_features(&a);
            assert_eq!(fv.as_slice().len(), FEATURE_LEN);
            assert!(fv.as_slice().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn dataset_layout() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_dataset(dir.path(), 2, 1).unwrap();
        assert_eq!(paths.len(), 8);
        assert!(dir.path().join("LINE_T/line_t-0002.png").exists());
    }
}
