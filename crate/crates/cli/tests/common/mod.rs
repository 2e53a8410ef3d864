#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use teco_core::imgseq::{save_frame, ColorSpace, Frame, Sequence};

pub fn teco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teco")).args(args).output().expect("teco runs")
}

pub fn teco_env(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teco"))
        .args(args)
        .env("TECO_THREADS", threads.to_string())
        .output()
        .expect("teco runs")
}

/// Wrap-around blurred noise in [0.1, 0.9], one plane per channel.
pub fn texture(seed: u64, h: usize, w: usize, cs: ColorSpace) -> Frame<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: f64 = 2.0;
    let r = 6isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let ks: f64 = k.iter().sum();
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    let mut data = Vec::new();
    for _ in 0..cs.channels() {
        let noise: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
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
        data.extend(out.iter().map(|v| 0.1 + 0.8 * (v - lo) / (hi - lo)));
    }
    Frame::new(h, w, cs, data).unwrap()
}

/// `out(x, y) = f(x - dx, y - dy)` with wrap-around.
pub fn roll(f: &Frame<f64>, dx: isize, dy: isize) -> Frame<f64> {
    let (h, w) = (f.height(), f.width());
    Frame::from_fn(h, w, f.colorspace(), |x, y, c| {
        f.get((x as isize - dx).rem_euclid(w as isize) as usize, (y as isize - dy).rem_euclid(h as isize) as usize, c)
    })
}

pub fn panning(seed: u64, n: usize, h: usize, w: usize, dx: isize, dy: isize) -> Sequence<f64> {
    let base = texture(seed, h, w, ColorSpace::Rgb);
    Sequence::new((0..n).map(|i| roll(&base, dx * i as isize, dy * i as isize)).collect(), 0).unwrap()
}

pub fn add_noise(s: &Sequence<f64>, sigma: f64, seed: u64) -> Sequence<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let frames = s
        .frames()
        .iter()
        .map(|f| {
            let data = f.data().iter().map(|v| v + normal.sample(&mut rng)).collect();
            Frame::new(f.height(), f.width(), f.colorspace(), data).unwrap()
        })
        .collect();
    Sequence::new(frames, s.start_index()).unwrap()
}

pub fn write_seq(s: &Sequence<f64>, dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, f) in s.frames().iter().enumerate() {
        save_frame(f, dir.join(format!("{i:04}.png"))).unwrap();
    }
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
