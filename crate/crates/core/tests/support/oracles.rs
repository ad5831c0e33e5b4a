//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls into the library's numeric code.

#![allow(dead_code, clippy::needless_range_loop)]

/// Exhaustive threshold scan. Between-class variance for each t is compared
/// with exact integer cross-multiplication; ties keep the smallest t.
/// A constant image returns its value.
pub fn otsu_exhaustive(px: &[u8]) -> u8 {
    if px.iter().all(|&v| v == px[0]) {
        return px[0];
    }
    let n = px.len() as i128;
    let mut best_t = 0u8;
    let (mut best_num, mut best_den) = (0i128, 1i128);
    for t in 0..=255u8 {
        let (mut n0, mut s0, mut s1) = (0i128, 0i128, 0i128);
        for &v in px {
            if v <= t {
                n0 += 1;
                s0 += v as i128;
            } else {
                s1 += v as i128;
            }
        }
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // ω0ω1(μ0−μ1)² · N² = (s0·n1 − s1·n0)² / (n0·n1)
        let d = s0 * n1 - s1 * n0;
        let (num, den) = (d * d, n0 * n1);
        if num * best_den > best_num * den {
            best_num = num;
            best_den = den;
            best_t = t;
        }
    }
    best_t
}

/// Brute-force symmetric GLCM: enumerate every ordered pixel pair and count
/// those whose displacement is `d` or `-d`.
pub fn glcm_bruteforce(
    px: &[u8],
    width: usize,
    height: usize,
    levels: usize,
    offset: (i64, i64),
) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0f64; levels]; levels];
    let mut total = 0.0;
    let q = |v: u8| (v as usize * levels) / 256;
    for y1 in 0..height as i64 {
        for x1 in 0..width as i64 {
            for y2 in 0..height as i64 {
                for x2 in 0..width as i64 {
                    let (dx, dy) = (x2 - x1, y2 - y1);
                    if (dx, dy) == offset || (-dx, -dy) == offset {
                        let a = q(px[(y1 * width as i64 + x1) as usize]);
                        let b = q(px[(y2 * width as i64 + x2) as usize]);
                        counts[a][b] += 1.0;
                        total += 1.0;
                    }
                }
            }
        }
    }
    for row in counts.iter_mut() {
        for c in row.iter_mut() {
            *c /= total;
        }
    }
    counts
}

fn xlog2x(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.log2()
    }
}

/// Literal transcription of the 13 Haralick formulas with 0-based levels,
/// sum variance about the sum average, base-2 logs and the degenerate
/// conventions (correlation 0 on zero variance, IMC1 0 on zero marginal entropy).
pub fn haralick_direct(p: &[Vec<f64>]) -> [f64; 13] {
    let ng = p.len();
    let px: Vec<f64> = (0..ng).map(|i| (0..ng).map(|j| p[i][j]).sum()).collect();
    let py: Vec<f64> = (0..ng).map(|j| (0..ng).map(|i| p[i][j]).sum()).collect();

    let mut f1 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            f1 += p[i][j] * p[i][j];
        }
    }

    let mut f2 = 0.0;
    for n in 0..ng {
        let mut s = 0.0;
        for i in 0..ng {
            for j in 0..ng {
                if (i as i64 - j as i64).unsigned_abs() as usize == n {
                    s += p[i][j];
                }
            }
        }
        f2 += (n * n) as f64 * s;
    }

    let mu_x: f64 = (0..ng).map(|i| i as f64 * px[i]).sum();
    let mu_y: f64 = (0..ng).map(|j| j as f64 * py[j]).sum();
    let sd_x = (0..ng).map(|i| (i as f64 - mu_x).powi(2) * px[i]).sum::<f64>().sqrt();
    let sd_y = (0..ng).map(|j| (j as f64 - mu_y).powi(2) * py[j]).sum::<f64>().sqrt();
    let mut sum_ij = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            sum_ij += (i * j) as f64 * p[i][j];
        }
    }
    let f3 = if sd_x == 0.0 || sd_y == 0.0 {
        0.0
    } else {
        (sum_ij - mu_x * mu_y) / (sd_x * sd_y)
    };

    let mut f4 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            f4 += (i as f64 - mu_x).powi(2) * p[i][j];
        }
    }

    let mut f5 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            f5 += p[i][j] / (1.0 + ((i as f64 - j as f64).powi(2)));
        }
    }

    let p_sum: Vec<f64> = (0..2 * ng - 1)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..ng {
                for j in 0..ng {
                    if i + j == k {
                        s += p[i][j];
                    }
                }
            }
            s
        })
        .collect();
    let f6: f64 = p_sum.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let f7: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - f6).powi(2) * v)
        .sum();
    let f8: f64 = -p_sum.iter().map(|&v| xlog2x(v)).sum::<f64>();

    let mut f9 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            f9 -= xlog2x(p[i][j]);
        }
    }

    let p_diff: Vec<f64> = (0..ng)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..ng {
                for j in 0..ng {
                    if (i as i64 - j as i64).unsigned_abs() as usize == k {
                        s += p[i][j];
                    }
                }
            }
            s
        })
        .collect();
    let mean_d: f64 = p_diff.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let f10: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - mean_d).powi(2) * v)
        .sum();
    let f11: f64 = -p_diff.iter().map(|&v| xlog2x(v)).sum::<f64>();

    let hx: f64 = -px.iter().map(|&v| xlog2x(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| xlog2x(v)).sum::<f64>();
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            let prod = px[i] * py[j];
            if p[i][j] > 0.0 {
                hxy1 -= p[i][j] * prod.log2();
            }
            if prod > 0.0 {
                hxy2 -= prod * prod.log2();
            }
        }
    }
    let f12 = if hx.max(hy) == 0.0 {
        0.0
    } else {
        (f9 - hxy1) / hx.max(hy)
    };
    let f13 = (1.0 - (-2.0 * (hxy2 - f9)).exp()).max(0.0).sqrt();

    [f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13]
}

/// Direction-averaged Haralick vector via brute-force GLCMs.
pub fn haralick_reference(
    px: &[u8],
    width: usize,
    height: usize,
    levels: usize,
    offsets: &[(i64, i64)],
) -> [f64; 13] {
    let mut acc = [0.0; 13];
    for &o in offsets {
        let f = haralick_direct(&glcm_bruteforce(px, width, height, levels, o));
        for k in 0..13 {
            acc[k] += f[k];
        }
    }
    acc.map(|v| v / offsets.len() as f64)
}

/// `|a - b| <= tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Relative difference, 0 when both values are 0.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Replays a per-category draw log against the reset-and-reshuffle contract:
/// each consecutive chunk of `pool_len` draws is a permutation of the pool,
/// and the trailing partial chunk has no repeats.
pub fn check_pass_structure(draws: &[usize], pool: &[usize]) -> Result<(), String> {
    let mut sorted_pool = pool.to_vec();
    sorted_pool.sort_unstable();
    for (pass, chunk) in draws.chunks(pool.len()).enumerate() {
        let mut seen = chunk.to_vec();
        seen.sort_unstable();
        if chunk.len() == pool.len() {
            if seen != sorted_pool {
                return Err(format!("pass {pass} is not a permutation of the pool"));
            }
        } else {
            let before = seen.len();
            seen.dedup();
            if seen.len() != before {
                return Err(format!("partial pass {pass} repeats an index"));
            }
            if seen.iter().any(|i| sorted_pool.binary_search(i).is_err()) {
                return Err(format!("partial pass {pass} draws outside the pool"));
            }
        }
    }
    Ok(())
}

/// Textbook Hu moments in floating point, straight from the mask pixels.
pub fn hu_direct(mask: &[bool], width: usize) -> [f64; 7] {
    let pts: Vec<(f64, f64)> = mask
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| ((i % width) as f64, (i / width) as f64))
        .collect();
    let m00 = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / m00;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / m00;
    let mu = |p: i32, q: i32| -> f64 {
        pts.iter()
            .map(|&(x, y)| (x - cx).powi(p) * (y - cy).powi(q))
            .sum()
    };
    let eta = |p: i32, q: i32| mu(p, q) / m00.powf(1.0 + (p + q) as f64 / 2.0);
    let (n20, n02, n11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (n30, n03, n21, n12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));
    let h1 = n20 + n02;
    let h2 = (n20 - n02).powi(2) + 4.0 * n11 * n11;
    let h3 = (n30 - 3.0 * n12).powi(2) + (3.0 * n21 - n03).powi(2);
    let h4 = (n30 + n12).powi(2) + (n21 + n03).powi(2);
    let h5 = (n30 - 3.0 * n12) * (n30 + n12) * ((n30 + n12).powi(2) - 3.0 * (n21 + n03).powi(2))
        + (3.0 * n21 - n03) * (n21 + n03) * (3.0 * (n30 + n12).powi(2) - (n21 + n03).powi(2));
    let h6 = (n20 - n02) * ((n30 + n12).powi(2) - (n21 + n03).powi(2))
        + 4.0 * n11 * (n30 + n12) * (n21 + n03);
    let h7 = (3.0 * n21 - n03) * (n30 + n12) * ((n30 + n12).powi(2) - 3.0 * (n21 + n03).powi(2))
        - (n30 - 3.0 * n12) * (n21 + n03) * (3.0 * (n30 + n12).powi(2) - (n21 + n03).powi(2));
    [h1, h2, h3, h4, h5, h6, h7]
}
