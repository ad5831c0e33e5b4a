//! Image decoding and canonical 8-bit rasters.
//!
//! Everything downstream of this module works on [`RasterImage`], a row-major
//! grayscale buffer. [`ColorImage`] exists so that color-aware augmentation can
//! run before the grayscale conversion.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Default cap on the longer image side before feature extraction.
pub const DEFAULT_MAX_SIDE: u32 = 1024;

#[derive(Debug, Error)]
pub enum PixelError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    UnwritableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },
    #[error("degenerate image dimensions {width}x{height}")]
    DegenerateImage { width: u32, height: u32 },
    #[error("pixel buffer of length {len} does not match {width}x{height}")]
    BufferMismatch { width: u32, height: u32, len: usize },
}

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, PixelError> {
        if width == 0 || height == 0 {
            return Err(PixelError::DegenerateImage { width, height });
        }
        if data.len() != width as usize * height as usize {
            return Err(PixelError::BufferMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single intensity.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, PixelError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.data
    }
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    data: Vec<[u8; 3]>,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, data: Vec<[u8; 3]>) -> Result<Self, PixelError> {
        if width == 0 || height == 0 {
            return Err(PixelError::DegenerateImage { width, height });
        }
        if data.len() != width as usize * height as usize {
            return Err(PixelError::BufferMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Expands a grayscale raster into equal RGB triples.
    pub fn from_gray(gray: &RasterImage) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.data
    }

    /// Encodes the image as an 8-bit RGB PNG.
    pub fn save_png(&self, path: &Path) -> Result<(), PixelError> {
        let flat: Vec<u8> = self.data.iter().flatten().copied().collect();
        image::save_buffer_with_format(
            path,
            &flat,
            self.width,
            self.height,
            image::ColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(source) => PixelError::UnwritableFile {
                path: path.to_path_buf(),
                source,
            },
            other => PixelError::CorruptImage {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
    }
}

fn sniff_format(bytes: &[u8]) -> Option<image::ImageFormat> {
    const PNG: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(PNG) {
        Some(image::ImageFormat::Png)
    } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        Some(image::ImageFormat::Jpeg)
    } else if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        Some(image::ImageFormat::Tiff)
    } else {
        None
    }
}

/// Decodes a PNG, JPEG or TIFF file into RGB.
///
/// The format is chosen from the leading magic bytes, not the file extension.
/// Alpha is composited over white.
pub fn load_image(path: &Path) -> Result<ColorImage, PixelError> {
    let bytes = fs::read(path).map_err(|source| PixelError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, path)
}

/// Same as [`load_image`] for an in-memory buffer; `origin` is used for error messages.
pub fn decode_image(bytes: &[u8], origin: &Path) -> Result<ColorImage, PixelError> {
    let format =
        sniff_format(bytes).ok_or_else(|| PixelError::UnsupportedFormat(origin.to_path_buf()))?;
    let decoded = image::load_from_memory_with_format(bytes, format).map_err(|e| {
        PixelError::CorruptImage {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        }
    })?;
    let rgba = decoded.to_rgba8();
    let (width, height) = rgba.dimensions();
    let data = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            [
                composite_over_white(r, a),
                composite_over_white(g, a),
                composite_over_white(b, a),
            ]
        })
        .collect();
    ColorImage::new(width, height, data)
}

/// `c·α + 255·(1−α)` with α = a/255, rounded half-up, in integer arithmetic.
#[inline]
fn composite_over_white(c: u8, a: u8) -> u8 {
    let (c, a) = (c as u32, a as u32);
    let scaled = c * a + 255 * (255 - a);
    ((2 * scaled + 255) / 510) as u8
}

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)` rounded half-up.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb;
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn to_grayscale(img: &ColorImage) -> RasterImage {
    RasterImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&p| luma(p)).collect(),
    }
}

/// Bilinear downscale so that the longer side equals `max_side`.
///
/// Images already within the cap are returned unchanged; the function never
/// upscales.
pub fn resize_max_side(img: &RasterImage, max_side: u32) -> Result<RasterImage, PixelError> {
    let (w, h) = (img.width, img.height);
    let longest = w.max(h);
    if longest <= max_side {
        return Ok(img.clone());
    }
    let scale = max_side as f64 / longest as f64;
    let (nw, nh) = if w >= h {
        (max_side, ((h as f64 * scale).round() as u32).max(1))
    } else {
        (((w as f64 * scale).round() as u32).max(1), max_side)
    };
    if nw == 0 || nh == 0 {
        return Err(PixelError::DegenerateImage {
            width: nw,
            height: nh,
        });
    }

    let xs = sample_positions(w, nw);
    let ys = sample_positions(h, nh);
    let src = &img.data;
    let stride = w as usize;
    let mut out = Vec::with_capacity(nw as usize * nh as usize);
    for &(y0, y1, fy) in &ys {
        let row0 = &src[y0 * stride..(y0 + 1) * stride];
        let row1 = &src[y1 * stride..(y1 + 1) * stride];
        for &(x0, x1, fx) in &xs {
            let top = row0[x0] as f64 * (1.0 - fx) + row0[x1] as f64 * fx;
            let bottom = row1[x0] as f64 * (1.0 - fx) + row1[x1] as f64 * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RasterImage::new(nw, nh, out)
}

/// Pixel-center aligned source coordinates for each destination index.
fn sample_positions(src_len: u32, dst_len: u32) -> Vec<(usize, usize, f64)> {
    let ratio = src_len as f64 / dst_len as f64;
    let last = (src_len - 1) as f64;
    (0..dst_len)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, last);
            let lo = pos.floor();
            let hi = (lo + 1.0).min(last);
            (lo as usize, hi as usize, pos - lo)
        })
        .collect()
}
