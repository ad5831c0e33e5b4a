//! Binarization, basic page properties and photometric augmentation.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::pixelio::{luma, ColorImage, RasterImage};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("dimension mismatch: raster {raster:?} vs mask {mask:?}")]
    DimensionMismatch { raster: (u32, u32), mask: (u32, u32) },
    #[error("invalid augmentation policy: {0}")]
    InvalidPolicy(String),
}

/// Foreground mask. `true` marks ink (dark) pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    bits: Vec<bool>,
    threshold: u8,
}

impl BinaryImage {
    /// Builds a mask from explicit bits. Panics if the length does not match.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>, threshold: u8) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        Self {
            width,
            height,
            bits,
            threshold,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn ink_ratio(&self) -> f64 {
        self.foreground_count() as f64 / self.bits.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicProps {
    pub width: u32,
    pub height: u32,
    pub aspect_ratio: f64,
    pub ink_ratio: f64,
    pub mean_intensity: f64,
}

pub fn histogram_counts(img: &RasterImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu's threshold over the 256-bin histogram.
///
/// Pixels `<= t` form the lower class. The score for each candidate is the
/// between-class variance, compared exactly as rationals so that ties resolve
/// to the smallest `t` deterministically. A constant image returns its value.
pub fn otsu_threshold(img: &RasterImage) -> u8 {
    let hist = histogram_counts(img);
    otsu_from_histogram(&hist)
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let occupied: Vec<usize> = (0..256).filter(|&v| hist[v] > 0).collect();
    if occupied.len() <= 1 {
        return occupied.first().copied().unwrap_or(0) as u8;
    }

    let total: u128 = hist.iter().map(|&c| c as u128).sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u128 * c as u128)
        .sum();

    // σ_b²·N² = (s0·N − S·n0)² / (n0·n1); the N² factor is common to all t.
    let mut best_t = 0usize;
    let mut best = (0u128, 1u128);
    let (mut n0, mut s0) = (0u128, 0u128);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count as u128;
        s0 += t as u128 * count as u128;
        let n1 = total - n0;
        let score = if n0 == 0 || n1 == 0 {
            (0, 1)
        } else {
            let diff = (s0 * total).abs_diff(total_sum * n0);
            (diff * diff, n0 * n1)
        };
        if cmp_fraction(score.0, score.1, best.0, best.1) == Ordering::Greater {
            best = score;
            best_t = t;
        }
    }
    best_t as u8
}

/// Exact comparison of `a/b` and `c/d` via continued-fraction expansion.
pub(crate) fn cmp_fraction(a: u128, b: u128, c: u128, d: u128) -> Ordering {
    let (q1, q2) = (a / b, c / d);
    if q1 != q2 {
        return q1.cmp(&q2);
    }
    let (r1, r2) = (a % b, c % d);
    match (r1 == 0, r2 == 0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        // a/b = q + r1/b, so comparing r1/b with r2/d flips into d/r2 vs b/r1.
        (false, false) => cmp_fraction(d, r2, b, r1),
    }
}

/// Marks `intensity <= t` as foreground. A constant image yields an empty mask.
pub fn binarize(img: &RasterImage, t: u8) -> BinaryImage {
    let px = img.pixels();
    let constant = px.iter().all(|&v| v == px[0]);
    let bits = if constant {
        vec![false; px.len()]
    } else {
        px.iter().map(|&v| v <= t).collect()
    };
    BinaryImage {
        width: img.width(),
        height: img.height(),
        bits,
        threshold: t,
    }
}

pub fn basic_props(img: &RasterImage, bin: &BinaryImage) -> Result<BasicProps, PreprocessError> {
    if (img.width(), img.height()) != (bin.width, bin.height) {
        return Err(PreprocessError::DimensionMismatch {
            raster: (img.width(), img.height()),
            mask: (bin.width, bin.height),
        });
    }
    let sum: u64 = img.pixels().iter().map(|&v| v as u64).sum();
    Ok(BasicProps {
        width: img.width(),
        height: img.height(),
        aspect_ratio: img.width() as f64 / img.height() as f64,
        ink_ratio: bin.ink_ratio(),
        mean_intensity: sum as f64 / img.len() as f64,
    })
}

/// Training-time photometric jitter. Geometric transforms are deliberately absent.
///
/// Factors for brightness, contrast and saturation draw a multiplier from
/// `[1 - f, 1 + f]`; the hue factor draws a shift from `[-f, f]` of the full
/// hue circle.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub brightness_prob: f64,
    pub brightness_factor: f64,
    pub contrast_prob: f64,
    pub contrast_factor: f64,
    pub saturation_prob: f64,
    pub saturation_factor: f64,
    pub hue_prob: f64,
    pub hue_factor: f64,
    pub sharpness_prob: f64,
    pub sharpness_range: (f64, f64),
    pub blur_prob: f64,
    pub blur_radius_range: (f64, f64),
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            brightness_prob: 0.5,
            brightness_factor: 0.5,
            contrast_prob: 0.5,
            contrast_factor: 0.5,
            saturation_prob: 0.5,
            saturation_factor: 0.5,
            hue_prob: 0.5,
            hue_factor: 0.5,
            sharpness_prob: 0.5,
            sharpness_range: (0.5, 1.5),
            blur_prob: 0.5,
            blur_radius_range: (0.0, 2.0),
        }
    }
}

impl AugmentPolicy {
    /// Policy that never applies any transform.
    pub fn disabled() -> Self {
        Self {
            brightness_prob: 0.0,
            contrast_prob: 0.0,
            saturation_prob: 0.0,
            hue_prob: 0.0,
            sharpness_prob: 0.0,
            blur_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let probs = [
            ("brightness_prob", self.brightness_prob),
            ("contrast_prob", self.contrast_prob),
            ("saturation_prob", self.saturation_prob),
            ("hue_prob", self.hue_prob),
            ("sharpness_prob", self.sharpness_prob),
            ("blur_prob", self.blur_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(PreprocessError::InvalidPolicy(format!(
                    "{name}={p} outside [0,1]"
                )));
            }
        }
        for (name, f) in [
            ("brightness_factor", self.brightness_factor),
            ("contrast_factor", self.contrast_factor),
            ("saturation_factor", self.saturation_factor),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(PreprocessError::InvalidPolicy(format!(
                    "{name}={f} outside [0,1]"
                )));
            }
        }
        if !(0.0..=0.5).contains(&self.hue_factor) {
            return Err(PreprocessError::InvalidPolicy(format!(
                "hue_factor={} outside [0,0.5]",
                self.hue_factor
            )));
        }
        for (name, (lo, hi)) in [
            ("sharpness_range", self.sharpness_range),
            ("blur_radius_range", self.blur_radius_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(PreprocessError::InvalidPolicy(format!(
                    "{name}=({lo},{hi}) is not a valid range"
                )));
            }
        }
        Ok(())
    }
}

fn draw_in<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Applies the policy's transforms in the fixed order brightness, contrast,
/// saturation, hue, sharpness, blur. Each stage first draws its Bernoulli gate,
/// then (if taken) its parameter, so the stream of draws is fixed per seed.
pub fn augment<R: Rng + ?Sized>(img: &ColorImage, policy: &AugmentPolicy, rng: &mut R) -> ColorImage {
    let mut out = img.clone();

    if rng.random_bool(policy.brightness_prob) {
        let f = draw_in(rng, 1.0 - policy.brightness_factor, 1.0 + policy.brightness_factor);
        adjust_brightness(&mut out, f);
    }
    if rng.random_bool(policy.contrast_prob) {
        let f = draw_in(rng, 1.0 - policy.contrast_factor, 1.0 + policy.contrast_factor);
        adjust_contrast(&mut out, f);
    }
    if rng.random_bool(policy.saturation_prob) {
        let f = draw_in(rng, 1.0 - policy.saturation_factor, 1.0 + policy.saturation_factor);
        adjust_saturation(&mut out, f);
    }
    if rng.random_bool(policy.hue_prob) {
        let shift = draw_in(rng, -policy.hue_factor, policy.hue_factor);
        rotate_hue(&mut out, shift);
    }
    if rng.random_bool(policy.sharpness_prob) {
        let (lo, hi) = policy.sharpness_range;
        let f = draw_in(rng, lo, hi);
        out = adjust_sharpness(&out, f);
    }
    if rng.random_bool(policy.blur_prob) {
        let (lo, hi) = policy.blur_radius_range;
        let r = draw_in(rng, lo, hi);
        out = gaussian_blur(&out, r);
    }
    out
}

#[inline]
fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
fn blend(a: f64, b: f64, factor: f64) -> u8 {
    // factor·a + (1 − factor)·b
    clamp_u8(b + factor * (a - b))
}

pub fn adjust_brightness(img: &mut ColorImage, factor: f64) {
    for px in img.pixels_mut() {
        for c in px.iter_mut() {
            *c = blend(*c as f64, 0.0, factor);
        }
    }
}

pub fn adjust_contrast(img: &mut ColorImage, factor: f64) {
    let n = img.pixels().len() as f64;
    let mean = img.pixels().iter().map(|&p| luma(p) as f64).sum::<f64>() / n;
    for px in img.pixels_mut() {
        for c in px.iter_mut() {
            *c = blend(*c as f64, mean, factor);
        }
    }
}

pub fn adjust_saturation(img: &mut ColorImage, factor: f64) {
    for px in img.pixels_mut() {
        let gray = luma(*px) as f64;
        for c in px.iter_mut() {
            *c = blend(*c as f64, gray, factor);
        }
    }
}

/// Shifts hue by `shift` turns (`[-0.5, 0.5]`).
pub fn rotate_hue(img: &mut ColorImage, shift: f64) {
    if shift == 0.0 {
        return;
    }
    for px in img.pixels_mut() {
        let (h, s, v) = rgb_to_hsv(*px);
        let h = (h + shift).rem_euclid(1.0);
        *px = hsv_to_rgb(h, s, v);
    }
}

fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let sector = (h * 6.0).floor();
    let f = h * 6.0 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match (sector as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [clamp_u8(r * 255.0), clamp_u8(g * 255.0), clamp_u8(b * 255.0)]
}

/// Blends with a 3×3 smoothed copy; factor 1 is the identity, >1 sharpens.
/// Border pixels are left untouched.
pub fn adjust_sharpness(img: &ColorImage, factor: f64) -> ColorImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = img.clone();
    if w < 3 || h < 3 || factor == 1.0 {
        return out;
    }
    let src = img.pixels();
    let dst = out.pixels_mut();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        let weight = if dx == 1 && dy == 1 { 5.0 } else { 1.0 };
                        acc += weight * src[(y + dy - 1) * w + (x + dx - 1)][c] as f64;
                    }
                }
                let smooth = (acc / 13.0).round();
                dst[y * w + x][c] = blend(src[y * w + x][c] as f64, smooth, factor);
            }
        }
    }
    out
}

/// Separable Gaussian blur with sigma = `radius`, edges clamped.
pub fn gaussian_blur(img: &ColorImage, radius: f64) -> ColorImage {
    if radius <= 0.0 {
        return img.clone();
    }
    let half = (3.0 * radius).ceil() as i64;
    let kernel: Vec<f64> = {
        let raw: Vec<f64> = (-half..=half)
            .map(|i| (-(i * i) as f64 / (2.0 * radius * radius)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|k| k / sum).collect()
    };
    let (w, h) = (img.width() as i64, img.height() as i64);
    let src = img.pixels();

    let mut tmp = vec![[0.0f64; 3]; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, &kw) in kernel.iter().enumerate() {
                let sx = (x + k as i64 - half).clamp(0, w - 1);
                let p = src[(y * w + sx) as usize];
                for c in 0..3 {
                    acc[c] += kw * p[c] as f64;
                }
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = img.clone();
    let dst = out.pixels_mut();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, &kw) in kernel.iter().enumerate() {
                let sy = (y + k as i64 - half).clamp(0, h - 1);
                let p = tmp[(sy * w + x) as usize];
                for c in 0..3 {
                    acc[c] += kw * p[c];
                }
            }
            dst[(y * w + x) as usize] = [clamp_u8(acc[0]), clamp_u8(acc[1]), clamp_u8(acc[2])];
        }
    }
    out
}
