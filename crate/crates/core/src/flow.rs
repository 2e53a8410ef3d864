//! Dense two-frame optical flow after Farnebäck (polynomial expansion,
//! coarse-to-fine displacement estimation), plus Middlebury `.flo` I/O.
//!
//! Estimation runs on BT.601 luma scaled to the 8-bit range `[0, 255]`, so
//! the determinant regularizer has the same meaning as in the common
//! 8-bit implementations. Row loops run on the ambient rayon pool; every
//! output value depends only on its inputs, so results are identical for
//! any thread count.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Matrix6;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgseq::{to_luma, ColorSpace, Frame};
use crate::warp::{sample_bilinear, FlowDirection, FlowField};
use crate::Scalar;

/// Smallest side, in pixels, any pyramid level may have.
pub const MIN_LEVEL_SIZE: usize = 16;

const DET_EPS: f64 = 1e-3;
const FLO_MAGIC: &[u8; 4] = b"PIEH";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub pyramid_scale: f64,
    pub levels: usize,
    pub window: usize,
    pub iterations: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { pyramid_scale: 0.5, levels: 3, window: 15, iterations: 3, poly_n: 5, poly_sigma: 1.2 }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad(format!("pyramid_scale must be in (0, 1), got {}", self.pyramid_scale));
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.window % 2 == 0 {
            return bad(format!("window must be odd, got {}", self.window));
        }
        if self.poly_n % 2 == 0 {
            return bad(format!("poly_n must be odd, got {}", self.poly_n));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.poly_sigma > 0.0 && self.poly_sigma.is_finite()) {
            return bad(format!("poly_sigma must be positive, got {}", self.poly_sigma));
        }
        Ok(())
    }
}

/// Per-pixel quadratic model `f(x + d) ≈ dᵀ A d + bᵀ d + c`, `A` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs<T> {
    pub height: usize,
    pub width: usize,
    pub a11: Vec<T>,
    pub a12: Vec<T>,
    pub a22: Vec<T>,
    pub b1: Vec<T>,
    pub b2: Vec<T>,
    pub c: Vec<T>,
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

#[inline]
fn clamp_idx(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Horizontal correlation with replicate borders.
fn filter_rows<T: Scalar>(src: &[T], width: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![T::zero(); src.len()];
    out.par_chunks_mut(width).zip(src.par_chunks(width)).for_each(|(dst, row)| {
        for (x, d) in dst.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (k, &w) in kernel.iter().enumerate() {
                acc = acc + w * row[clamp_idx(x as isize + k as isize - r, width)];
            }
            *d = acc;
        }
    });
    out
}

/// Vertical correlation with replicate borders.
fn filter_cols<T: Scalar>(src: &[T], width: usize, height: usize, kernel: &[T]) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![T::zero(); src.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        for (k, &w) in kernel.iter().enumerate() {
            let sy = clamp_idx(y as isize + k as isize - r, height);
            let row = &src[sy * width..(sy + 1) * width];
            for (d, &s) in dst.iter_mut().zip(row) {
                *d = *d + w * s;
            }
        }
    });
    out
}

fn gaussian_blur<T: Scalar>(src: &[T], width: usize, height: usize, sigma: f64) -> Vec<T> {
    let radius = ((sigma * 3.0).ceil() as usize).max(1);
    let kernel: Vec<T> = gaussian_kernel(sigma, radius).into_iter().map(T::lit).collect();
    filter_cols(&filter_rows(src, width, &kernel), width, height, &kernel)
}

/// Bilinear resize with pixel-centre alignment.
fn resize_bilinear<T: Scalar>(src: &[T], width: usize, height: usize, new_w: usize, new_h: usize) -> Vec<T> {
    let sx = width as f64 / new_w as f64;
    let sy = height as f64 / new_h as f64;
    let mut out = vec![T::zero(); new_w * new_h];
    out.par_chunks_mut(new_w).enumerate().for_each(|(y, row)| {
        let fy = T::lit(((y as f64 + 0.5) * sy - 0.5).max(0.0));
        for (x, d) in row.iter_mut().enumerate() {
            let fx = T::lit(((x as f64 + 0.5) * sx - 0.5).max(0.0));
            *d = sample_bilinear(src, width, height, fx, fy);
        }
    });
    out
}

fn level_sizes(height: usize, width: usize, levels: usize, scale: f64) -> Vec<(usize, usize)> {
    let mut sizes = vec![(height, width)];
    while sizes.len() < levels {
        let &(h, w) = sizes.last().expect("non-empty");
        let nh = (h as f64 * scale).round() as usize;
        let nw = (w as f64 * scale).round() as usize;
        if nh < MIN_LEVEL_SIZE || nw < MIN_LEVEL_SIZE {
            break;
        }
        sizes.push((nh, nw));
    }
    sizes
}

/// Level 0 is the (luma) input; each further level is Gaussian-smoothed and
/// resampled by `scale` from the previous one. Levels whose smaller side
/// would drop below [`MIN_LEVEL_SIZE`] are not generated.
pub fn gaussian_pyramid<T: Scalar>(f: &Frame<T>, levels: usize, scale: f64) -> Vec<Frame<T>> {
    let base = to_luma(f);
    let sizes = level_sizes(base.height(), base.width(), levels.max(1), scale);
    let sigma = (1.0 / scale - 1.0) * 0.5;
    let mut out = vec![base];
    for &(h, w) in &sizes[1..] {
        let prev = out.last().expect("non-empty");
        let smoothed = gaussian_blur(prev.data(), prev.width(), prev.height(), sigma);
        let data = resize_bilinear(&smoothed, prev.width(), prev.height(), w, h);
        out.push(Frame::new(h, w, ColorSpace::Luma, data).expect("pyramid level shape"));
    }
    out
}

/// Inverse of the 6x6 Gram matrix of the basis `{1, x, y, x², y², xy}` under
/// the separable Gaussian applicability.
fn poly_gram_inverse(kernel: &[f64]) -> Matrix6<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut g = Matrix6::<f64>::zeros();
    for (iy, &wy) in kernel.iter().enumerate() {
        for (ix, &wx) in kernel.iter().enumerate() {
            let x = ix as i64 as f64 - r as f64;
            let y = iy as i64 as f64 - r as f64;
            let phi = [1.0, x, y, x * x, y * y, x * y];
            let w = wx * wy;
            for i in 0..6 {
                for j in 0..6 {
                    g[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
    }
    g.try_inverse().expect("polynomial basis Gram matrix is positive definite")
}

/// Weighted least-squares quadratic fit around every pixel; the
/// applicability is a Gaussian with `poly_sigma` truncated at radius `poly_n`.
pub fn poly_expansion<T: Scalar>(f: &Frame<T>, poly_n: usize, poly_sigma: f64) -> PolyCoeffs<T> {
    let luma = to_luma(f);
    let (h, w) = (luma.height(), luma.width());
    let g = gaussian_kernel(poly_sigma, poly_n);
    let r = poly_n as f64;
    let k0: Vec<T> = g.iter().map(|&v| T::lit(v)).collect();
    let k1: Vec<T> = g.iter().enumerate().map(|(i, &v)| T::lit(v * (i as f64 - r))).collect();
    let k2: Vec<T> = g.iter().enumerate().map(|(i, &v)| T::lit(v * (i as f64 - r).powi(2))).collect();

    let src = luma.data();
    let v0 = filter_cols(src, w, h, &k0);
    let v1 = filter_cols(src, w, h, &k1);
    let v2 = filter_cols(src, w, h, &k2);
    // moments ordered as the basis {1, x, y, x², y², xy}
    let moments = [
        filter_rows(&v0, w, &k0),
        filter_rows(&v0, w, &k1),
        filter_rows(&v1, w, &k0),
        filter_rows(&v0, w, &k2),
        filter_rows(&v2, w, &k0),
        filter_rows(&v1, w, &k1),
    ];
    let ginv = poly_gram_inverse(&g);
    let ginv: [[T; 6]; 6] = std::array::from_fn(|i| std::array::from_fn(|j| T::lit(ginv[(i, j)])));

    let n = h * w;
    let mut theta: Vec<Vec<T>> = vec![vec![T::zero(); n]; 6];
    for (k, out) in theta.iter_mut().enumerate() {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut acc = T::zero();
            for (j, m) in moments.iter().enumerate() {
                acc = acc + ginv[k][j] * m[i];
            }
            *o = acc;
        });
    }
    let half = T::lit(0.5);
    let [c, b1, b2, a11, a22, axy]: [Vec<T>; 6] = theta.try_into().expect("six coefficient planes");
    PolyCoeffs { height: h, width: w, a11, a12: axy.into_iter().map(|v| v * half).collect(), a22, b1, b2, c }
}

/// Per-pixel normal equations `(AᵀA, AᵀΔb)` for the current displacement.
fn update_matrices<T: Scalar>(r0: &PolyCoeffs<T>, r1: &PolyCoeffs<T>, u: &[T], v: &[T]) -> [Vec<T>; 5] {
    let (h, w) = (r0.height, r0.width);
    let n = h * w;
    let mut rows: Vec<[T; 5]> = vec![[T::zero(); 5]; n];
    let half = T::lit(0.5);
    rows.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let yf = T::lit(y as f64);
        for (x, o) in out.iter_mut().enumerate() {
            let i = y * w + x;
            let (dx, dy) = (u[i], v[i]);
            let sx = T::lit(x as f64) + dx;
            let sy = yf + dy;
            let s = |p: &[T]| sample_bilinear(p, w, h, sx, sy);
            let a11 = (r0.a11[i] + s(&r1.a11)) * half;
            let a12 = (r0.a12[i] + s(&r1.a12)) * half;
            let a22 = (r0.a22[i] + s(&r1.a22)) * half;
            let db1 = (r0.b1[i] - s(&r1.b1)) * half + a11 * dx + a12 * dy;
            let db2 = (r0.b2[i] - s(&r1.b2)) * half + a12 * dx + a22 * dy;
            *o = [
                a11 * a11 + a12 * a12,
                a12 * (a11 + a22),
                a12 * a12 + a22 * a22,
                a11 * db1 + a12 * db2,
                a12 * db1 + a22 * db2,
            ];
        }
    });
    std::array::from_fn(|k| rows.iter().map(|r| r[k]).collect())
}

fn box_mean<T: Scalar>(src: &[T], width: usize, height: usize, window: usize) -> Vec<T> {
    let k = vec![T::one() / T::lit(window as f64); window];
    filter_cols(&filter_rows(src, width, &k), width, height, &k)
}

fn solve_flow<T: Scalar>(m: &[Vec<T>; 5]) -> (Vec<T>, Vec<T>) {
    let eps = T::lit(DET_EPS);
    let n = m[0].len();
    let mut uv: Vec<(T, T)> = vec![(T::zero(), T::zero()); n];
    uv.par_iter_mut().enumerate().for_each(|(i, o)| {
        let (g11, g12, g22, h1, h2) = (m[0][i], m[1][i], m[2][i], m[3][i], m[4][i]);
        let idet = T::one() / (g11 * g22 - g12 * g12 + eps);
        *o = ((g22 * h1 - g12 * h2) * idet, (g11 * h2 - g12 * h1) * idet);
    });
    uv.into_iter().unzip()
}

/// Dense flow from `prev` to `next`: `prev(x) ≈ next(x + flow(x))`.
pub fn estimate_flow<T: Scalar>(prev: &Frame<T>, next: &Frame<T>, p: &FlowParams) -> Result<FlowField<T>> {
    p.validate()?;
    if prev.height() != next.height() || prev.width() != next.width() {
        return Err(Error::shape(format!(
            "flow inputs {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    let eight_bit = T::lit(255.0);
    let a = to_luma(prev).map(|v| v * eight_bit);
    let b = to_luma(next).map(|v| v * eight_bit);
    let pyr_a = gaussian_pyramid(&a, p.levels, p.pyramid_scale);
    let pyr_b = gaussian_pyramid(&b, p.levels, p.pyramid_scale);

    let mut flow: Option<(usize, usize, Vec<T>, Vec<T>)> = None;
    for (la, lb) in pyr_a.iter().zip(&pyr_b).rev() {
        let (h, w) = (la.height(), la.width());
        let (mut u, mut v) = match flow.take() {
            None => (vec![T::zero(); h * w], vec![T::zero(); h * w]),
            Some((ph, pw, pu, pv)) => {
                let fx = T::lit(w as f64 / pw as f64);
                let fy = T::lit(h as f64 / ph as f64);
                let u = resize_bilinear(&pu, pw, ph, w, h).into_iter().map(|x| x * fx).collect();
                let v = resize_bilinear(&pv, pw, ph, w, h).into_iter().map(|x| x * fy).collect();
                (u, v)
            }
        };
        let r0 = poly_expansion(la, p.poly_n, p.poly_sigma);
        let r1 = poly_expansion(lb, p.poly_n, p.poly_sigma);
        for _ in 0..p.iterations {
            let m = update_matrices(&r0, &r1, &u, &v);
            let blurred: [Vec<T>; 5] = std::array::from_fn(|k| box_mean(&m[k], w, h, p.window));
            (u, v) = solve_flow(&blurred);
        }
        flow = Some((h, w, u, v));
    }
    let (h, w, u, v) = flow.expect("at least one pyramid level");
    Ok(FlowField::from_parts_unchecked(h, w, u, v, FlowDirection::Forward))
}

/// Flow that aligns `previous` onto `current` by backward warping:
/// `current(x) ≈ previous(x + flow(x))`.
pub fn estimate_backward_flow<T: Scalar>(current: &Frame<T>, previous: &Frame<T>, p: &FlowParams) -> Result<FlowField<T>> {
    Ok(estimate_flow(current, previous, p)?.with_direction(FlowDirection::Backward))
}

/// Writes a Middlebury `.flo` file.
pub fn write_flo<T: Scalar>(flow: &FlowField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(12 + 8 * flow.u().len());
    bytes.extend_from_slice(FLO_MAGIC);
    bytes.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    bytes.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        bytes.extend_from_slice(&(u.as_f64() as f32).to_le_bytes());
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads a Middlebury `.flo` file; the direction tag is taken as forward.
pub fn read_flo<T: Scalar>(path: impl AsRef<Path>) -> Result<FlowField<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::BadFlo { path: path.to_path_buf(), detail };
    if bytes.len() < 12 || &bytes[..4] != FLO_MAGIC {
        return Err(bad("missing PIEH header".into()));
    }
    let word = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (w, h) = (word(4), word(8));
    if w <= 0 || h <= 0 {
        return Err(bad(format!("non-positive size {w}x{h}")));
    }
    let n = w as usize * h as usize;
    if bytes.len() != 12 + 8 * n {
        return Err(bad(format!("expected {} bytes for {w}x{h}, found {}", 12 + 8 * n, bytes.len())));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for pair in bytes[12..].chunks_exact(8) {
        u.push(T::lit(f32::from_le_bytes(pair[..4].try_into().expect("4 bytes")) as f64));
        v.push(T::lit(f32::from_le_bytes(pair[4..].try_into().expect("4 bytes")) as f64));
    }
    FlowField::new(h as usize, w as usize, u, v, FlowDirection::Forward)
}
