//! Handcrafted page descriptors: Hu moments, Haralick texture statistics and
//! intensity histograms, assembled into a fixed 283-value [`FeatureVector`].

use thiserror::Error;

use crate::pixelio::{self, ColorImage, RasterImage};
use crate::preprocess::{self, BinaryImage};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("mask has no foreground pixels")]
    EmptyForeground,
    #[error("image {width}x{height} has no pixel pairs for offset {offset:?}")]
    ImageTooSmall {
        width: u32,
        height: u32,
        offset: (i32, i32),
    },
    #[error("GLCM levels must lie in [2, 256], got {0}")]
    InvalidLevels(usize),
    #[error("no co-occurrence matrices given")]
    NoMatrices,
}

/// Unit displacements `(dx, dy)` for the four GLCM directions: 0°, 45°, 90°, 135°.
pub const GLCM_OFFSETS: [(i32, i32); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
pub const DEFAULT_GLCM_LEVELS: usize = 64;

pub const FEATURE_LEN: usize = 283;
pub const PROPS_RANGE: std::ops::Range<usize> = 0..5;
pub const HU_RANGE: std::ops::Range<usize> = 5..12;
pub const HARALICK_RANGE: std::ops::Range<usize> = 12..25;
pub const GRAY_HIST_RANGE: std::ops::Range<usize> = 25..281;
pub const BINARY_HIST_RANGE: std::ops::Range<usize> = 281..283;

/// Geometric moments up to order 3, indexed `[p][q]`. Entries with `p + q > 3` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralMoments {
    pub raw: [[f64; 4]; 4],
    pub central: [[f64; 4]; 4],
    pub normalized: [[f64; 4]; 4],
}

/// Moments of the foreground mass of `bin`, with x the column and y the row index.
///
/// Raw sums are exact integers and central moments are derived from them in
/// `i128` scaled by powers of `m00`, so translating or rotating a mask by 90°
/// permutes the integer inputs exactly. Exact for images up to ~10⁸ pixels.
pub fn central_moments(bin: &BinaryImage) -> Result<CentralMoments, FeatureError> {
    let mut m = [[0i128; 4]; 4];
    let w = bin.width() as usize;
    for (idx, _) in bin.bits().iter().enumerate().filter(|(_, &b)| b) {
        let x = (idx % w) as i128;
        let y = (idx / w) as i128;
        let (x2, y2) = (x * x, y * y);
        m[0][0] += 1;
        m[1][0] += x;
        m[0][1] += y;
        m[2][0] += x2;
        m[1][1] += x * y;
        m[0][2] += y2;
        m[3][0] += x2 * x;
        m[2][1] += x2 * y;
        m[1][2] += x * y2;
        m[0][3] += y2 * y;
    }
    let n = m[0][0];
    if n == 0 {
        return Err(FeatureError::EmptyForeground);
    }
    let (sx, sy) = (m[1][0], m[0][1]);

    // s[p][q] = m00^(p+q-1) · μ_pq
    let mut s = [[0i128; 4]; 4];
    s[2][0] = n * m[2][0] - sx * sx;
    s[0][2] = n * m[0][2] - sy * sy;
    s[1][1] = n * m[1][1] - sx * sy;
    s[3][0] = n * n * m[3][0] - 3 * n * sx * m[2][0] + 2 * sx * sx * sx;
    s[0][3] = n * n * m[0][3] - 3 * n * sy * m[0][2] + 2 * sy * sy * sy;
    s[2][1] = n * n * m[2][1] - 2 * n * sx * m[1][1] - n * sy * m[2][0] + 2 * sx * sx * sy;
    s[1][2] = n * n * m[1][2] - 2 * n * sy * m[1][1] - n * sx * m[0][2] + 2 * sy * sy * sx;

    let nf = n as f64;
    let mut raw = [[0.0; 4]; 4];
    let mut central = [[0.0; 4]; 4];
    let mut normalized = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 - p {
            raw[p][q] = m[p][q] as f64;
        }
    }
    central[0][0] = nf;
    normalized[0][0] = 1.0;
    let second = nf.powi(3);
    let third = nf.powi(4) * nf.sqrt();
    for (p, q) in [(2, 0), (1, 1), (0, 2)] {
        central[p][q] = s[p][q] as f64 / nf;
        normalized[p][q] = s[p][q] as f64 / second;
    }
    for (p, q) in [(3, 0), (2, 1), (1, 2), (0, 3)] {
        central[p][q] = s[p][q] as f64 / (nf * nf);
        normalized[p][q] = s[p][q] as f64 / third;
    }
    Ok(CentralMoments {
        raw,
        central,
        normalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuVector(pub [f64; 7]);

/// Hu's seven invariants, stored raw (no log transform).
pub fn hu_moments(m: &CentralMoments) -> HuVector {
    let e = &m.normalized;
    let (n20, n02, n11) = (e[2][0], e[0][2], e[1][1]);
    let (n30, n21, n12, n03) = (e[3][0], e[2][1], e[1][2], e[0][3]);

    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;

    let h1 = n20 + n02;
    let h2 = (n20 - n02).powi(2) + 4.0 * n11 * n11;
    let h3 = c * c + d * d;
    let h4 = a * a + b * b;
    let h5 = c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b);
    let h6 = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
    let h7 = d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b);
    HuVector([h1, h2, h3, h4, h5, h6, h7])
}

/// Normalized, symmetric gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    levels: usize,
    entries: Vec<f64>,
}

impl GlcmMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.levels + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

#[inline]
pub fn quantize(v: u8, levels: usize) -> usize {
    v as usize * levels / 256
}

/// One symmetric GLCM per offset. Each unordered pixel pair `(p, p + d)`
/// contributes to both `(a, b)` and `(b, a)`.
pub fn glcm(
    img: &RasterImage,
    levels: usize,
    offsets: &[(i32, i32)],
) -> Result<Vec<GlcmMatrix>, FeatureError> {
    if !(2..=256).contains(&levels) {
        return Err(FeatureError::InvalidLevels(levels));
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let q: Vec<u16> = img
        .pixels()
        .iter()
        .map(|&v| quantize(v, levels) as u16)
        .collect();

    offsets
        .iter()
        .map(|&(dx, dy)| {
            let (dx, dy) = (dx as i64, dy as i64);
            let x_range = 0.max(-dx)..w.min(w - dx);
            let y_range = 0.max(-dy)..h.min(h - dy);
            if x_range.is_empty() || y_range.is_empty() {
                return Err(FeatureError::ImageTooSmall {
                    width: img.width(),
                    height: img.height(),
                    offset: (dx as i32, dy as i32),
                });
            }
            let mut counts = vec![0u64; levels * levels];
            for y in y_range.clone() {
                let row = (y * w) as usize;
                let other = ((y + dy) * w) as usize;
                for x in x_range.clone() {
                    let a = q[row + x as usize] as usize;
                    let b = q[other + (x + dx) as usize] as usize;
                    counts[a * levels + b] += 1;
                    counts[b * levels + a] += 1;
                }
            }
            let total: u64 = counts.iter().sum();
            let total = total as f64;
            Ok(GlcmMatrix {
                levels,
                entries: counts.into_iter().map(|c| c as f64 / total).collect(),
            })
        })
        .collect()
}

/// Haralick's 13 statistics: ASM, contrast, correlation, sum of squares,
/// inverse difference moment, sum average, sum variance, sum entropy, entropy,
/// difference variance, difference entropy, and the two information measures
/// of correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaralickVector(pub [f64; 13]);

#[inline]
fn plog2p(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Features of each matrix, averaged across matrices.
///
/// Gray levels are indexed from 0. Sum variance is taken about the sum
/// average. Logs are base 2 with `0·log 0 = 0`. Correlation is 0 when a
/// marginal has zero variance; the information measures are 0 when the
/// marginal entropies vanish.
pub fn haralick_features(glcms: &[GlcmMatrix]) -> Result<HaralickVector, FeatureError> {
    if glcms.is_empty() {
        return Err(FeatureError::NoMatrices);
    }
    let mut acc = [0.0; 13];
    for g in glcms {
        let f = haralick_single(g);
        for (a, v) in acc.iter_mut().zip(f.iter()) {
            *a += v;
        }
    }
    let n = glcms.len() as f64;
    Ok(HaralickVector(acc.map(|v| v / n)))
}

fn haralick_single(g: &GlcmMatrix) -> [f64; 13] {
    let levels = g.levels;
    let mut px = vec![0.0; levels];
    let mut py = vec![0.0; levels];
    let mut p_sum = vec![0.0; 2 * levels - 1];
    let mut p_diff = vec![0.0; levels];

    let mut asm = 0.0;
    let mut contrast = 0.0;
    let mut idm = 0.0;
    let mut entropy = 0.0;
    for (i, row) in g.entries.chunks_exact(levels).enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            px[i] += p;
            py[j] += p;
            p_sum[i + j] += p;
            let d = i.abs_diff(j);
            p_diff[d] += p;
            let d2 = (d * d) as f64;
            asm += p * p;
            contrast += d2 * p;
            idm += p / (1.0 + d2);
            entropy -= plog2p(p);
        }
    }

    let mean_of = |dist: &[f64]| -> f64 { dist.iter().enumerate().map(|(k, &p)| k as f64 * p).sum() };
    let var_of = |dist: &[f64], mean: f64| -> f64 {
        dist.iter()
            .enumerate()
            .map(|(k, &p)| (k as f64 - mean).powi(2) * p)
            .sum()
    };
    let entropy_of = |dist: &[f64]| -> f64 { -dist.iter().map(|&p| plog2p(p)).sum::<f64>() };

    let (mu_x, mu_y) = (mean_of(&px), mean_of(&py));
    let (var_x, var_y) = (var_of(&px, mu_x), var_of(&py, mu_y));

    let mut cov = 0.0;
    let mut hxy1 = 0.0;
    for (i, row) in g.entries.chunks_exact(levels).enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            cov += (i as f64 - mu_x) * (j as f64 - mu_y) * p;
            hxy1 -= p * (px[i] * py[j]).log2();
        }
    }
    let correlation = if var_x > 0.0 && var_y > 0.0 {
        cov / (var_x.sqrt() * var_y.sqrt())
    } else {
        0.0
    };

    let mut hxy2 = 0.0;
    for &a in px.iter().filter(|&&a| a > 0.0) {
        for &b in py.iter().filter(|&&b| b > 0.0) {
            hxy2 -= plog2p(a * b);
        }
    }

    let sum_average = mean_of(&p_sum);
    let sum_variance = var_of(&p_sum, sum_average);
    let sum_entropy = entropy_of(&p_sum);
    let diff_variance = var_of(&p_diff, mean_of(&p_diff));
    let diff_entropy = entropy_of(&p_diff);

    let (hx, hy) = (entropy_of(&px), entropy_of(&py));
    let h_max = hx.max(hy);
    let imc1 = if h_max > 0.0 {
        (entropy - hxy1) / h_max
    } else {
        0.0
    };
    let imc2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp()).max(0.0).sqrt();

    [
        asm,
        contrast,
        correlation,
        var_x,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        diff_variance,
        diff_entropy,
        imc1,
        imc2,
    ]
}

pub fn intensity_histogram(img: &RasterImage) -> [f64; 256] {
    let counts = preprocess::histogram_counts(img);
    let n = img.len() as f64;
    counts.map(|c| c as f64 / n)
}

/// `[background fraction, ink fraction]`.
pub fn binary_histogram(bin: &BinaryImage) -> [f64; 2] {
    let total = bin.bits().len();
    let ink = bin.foreground_count();
    let n = total as f64;
    [(total - ink) as f64 / n, ink as f64 / n]
}

/// Fixed-layout page descriptor:
///
/// | index    | content                                          |
/// |----------|--------------------------------------------------|
/// | 0..5     | width, height, aspect ratio, ink ratio, mean     |
/// | 5..12    | Hu h1..h7 (zeros when the page has no ink)       |
/// | 12..25   | Haralick f1..f13, averaged over four directions  |
/// | 25..281  | normalized grayscale histogram                   |
/// | 281..283 | normalized binary histogram                      |
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        (values.len() == FEATURE_LEN).then_some(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    /// Longer-side cap applied before any feature math.
    pub max_side: u32,
    pub glcm_levels: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_side: pixelio::DEFAULT_MAX_SIDE,
            glcm_levels: DEFAULT_GLCM_LEVELS,
        }
    }
}

pub fn extract_features(img: &ColorImage) -> FeatureVector {
    extract_features_with(img, &FeatureConfig::default())
}

/// Full pipeline from decoded pixels to descriptor.
///
/// Degenerate inputs never fail: a page without ink gets an all-zero Hu block,
/// and a page too thin for any GLCM offset gets an all-zero Haralick block.
pub fn extract_features_with(img: &ColorImage, config: &FeatureConfig) -> FeatureVector {
    let gray = pixelio::to_grayscale(img);
    let gray = pixelio::resize_max_side(&gray, config.max_side.max(8))
        .expect("downscaling a valid raster keeps both sides >= 1");
    features_from_gray(&gray, config.glcm_levels.clamp(2, 256))
}

pub fn features_from_gray(gray: &RasterImage, glcm_levels: usize) -> FeatureVector {
    let t = preprocess::otsu_threshold(gray);
    let bin = preprocess::binarize(gray, t);
    let props = preprocess::basic_props(gray, &bin).expect("mask derived from the same raster");

    let hu = central_moments(&bin)
        .map(|m| hu_moments(&m).0)
        .unwrap_or([0.0; 7]);

    let usable: Vec<(i32, i32)> = GLCM_OFFSETS
        .iter()
        .copied()
        .filter(|&(dx, dy)| (dx.unsigned_abs() < gray.width()) && (dy.unsigned_abs() < gray.height()))
        .collect();
    let haralick = if usable.is_empty() {
        [0.0; 13]
    } else {
        let mats = glcm(gray, glcm_levels, &usable).expect("offsets filtered to fit the raster");
        haralick_features(&mats).expect("at least one matrix").0
    };

    let mut values = Vec::with_capacity(FEATURE_LEN);
    values.extend([
        props.width as f64,
        props.height as f64,
        props.aspect_ratio,
        props.ink_ratio,
        props.mean_intensity,
    ]);
    values.extend(hu);
    values.extend(haralick);
    values.extend(intensity_histogram(gray));
    values.extend(binary_histogram(&bin));
    debug_assert_eq!(values.len(), FEATURE_LEN);
    FeatureVector(values)
}
