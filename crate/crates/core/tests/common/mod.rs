#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use teco_core::imgseq::{ColorSpace, Frame, Sequence};

/// Periodic random texture: uniform noise blurred by a wrap-around Gaussian,
/// stretched to [0.1, 0.9].
pub fn texture(seed: u64, h: usize, w: usize, sigma: f64) -> Frame<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let ks: f64 = k.iter().sum();
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-r..=r).map(|d| k[(d + r) as usize] * noise[y * w + wrap(x as isize + d, w)]).sum::<f64>() / ks;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-r..=r).map(|d| k[(d + r) as usize] * tmp[wrap(y as isize + d, h) * w + x]).sum::<f64>() / ks;
        }
    }
    let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = out.iter().map(|v| 0.1 + 0.8 * (v - lo) / (hi - lo)).collect();
    Frame::new(h, w, ColorSpace::Luma, data).unwrap()
}

pub fn texture_rgb(seed: u64, h: usize, w: usize, sigma: f64) -> Frame<f64> {
    let planes: Vec<Frame<f64>> = (0..3).map(|c| texture(seed * 3 + c, h, w, sigma)).collect();
    let data = planes.iter().flat_map(|p| p.data().to_vec()).collect();
    Frame::new(h, w, ColorSpace::Rgb, data).unwrap()
}

/// `out(x, y) = f(x - dx, y - dy)` with wrap-around.
pub fn roll(f: &Frame<f64>, dx: isize, dy: isize) -> Frame<f64> {
    let (h, w) = (f.height(), f.width());
    Frame::from_fn(h, w, f.colorspace(), |x, y, c| {
        let sx = (x as isize - dx).rem_euclid(w as isize) as usize;
        let sy = (y as isize - dy).rem_euclid(h as isize) as usize;
        f.get(sx, sy, c)
    })
}

/// Frames panning by `(dx, dy)` per step.
pub fn panning(seed: u64, n: usize, h: usize, w: usize, dx: isize, dy: isize) -> Sequence<f64> {
    let base = texture_rgb(seed, h, w, 2.0);
    let frames = (0..n).map(|i| roll(&base, dx * i as isize, dy * i as isize)).collect();
    Sequence::new(frames, 0).unwrap()
}

pub fn add_noise(s: &Sequence<f64>, sigma: f64, seed: u64) -> Sequence<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let frames = s
        .frames()
        .iter()
        .map(|f| {
            let noise: Vec<f64> = (0..f.data().len()).map(|_| normal.sample(&mut rng)).collect();
            let data = f.data().iter().zip(&noise).map(|(v, n)| v + n).collect();
            Frame::new(f.height(), f.width(), f.colorspace(), data).unwrap()
        })
        .collect();
    Sequence::new(frames, s.start_index()).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
