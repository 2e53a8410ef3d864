//! Frames, sequences, PNG I/O, luma conversion and the evaluation crop protocol.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Luma,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Rgb => 3,
            ColorSpace::Luma => 1,
        }
    }
}

/// One image stored as channel planes (`data[c * h * w + y * w + x]`).
///
/// `label` carries the source file identity (`"<parent>/<basename>"` for
/// loaded frames); table-driven perceptual backends key on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    height: usize,
    width: usize,
    colorspace: ColorSpace,
    data: Vec<T>,
    label: Option<String>,
}

impl<T: Scalar> Frame<T> {
    pub fn new(height: usize, width: usize, colorspace: ColorSpace, data: Vec<T>) -> Result<Self> {
        let expected = height * width * colorspace.channels();
        if height == 0 || width == 0 {
            return Err(Error::shape(format!("frame dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != expected {
            return Err(Error::shape(format!(
                "frame data has {} values, {width}x{height}x{} needs {expected}",
                data.len(),
                colorspace.channels()
            )));
        }
        Ok(Frame { height, width, colorspace, data, label: None })
    }

    pub fn filled(height: usize, width: usize, colorspace: ColorSpace, value: T) -> Self {
        assert!(height > 0 && width > 0, "frame dimensions must be positive");
        Frame {
            height,
            width,
            colorspace,
            data: vec![value; height * width * colorspace.channels()],
            label: None,
        }
    }

    /// Builds a frame from `f(x, y, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        colorspace: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        assert!(height > 0 && width > 0, "frame dimensions must be positive");
        let mut data = Vec::with_capacity(height * width * colorspace.channels());
        for c in 0..colorspace.channels() {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Frame { height, width, colorspace, data, label: None }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels())
    }

    pub fn same_shape(&self, other: &Frame<T>) -> bool {
        self.shape() == other.shape() && self.colorspace == other.colorspace
    }

    pub(crate) fn check_same_shape(&self, other: &Frame<T>, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width,
                self.height,
                self.channels(),
                other.width,
                other.height,
                other.channels()
            )))
        }
    }

    /// Same geometry, new data, label kept.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Frame { data, ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// Crops the window `[x0, x0 + width) x [y0, y0 + height)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} frame",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels());
        for c in 0..self.channels() {
            let plane = self.plane(c);
            for y in y0..y0 + height {
                data.extend_from_slice(&plane[y * self.width + x0..y * self.width + x0 + width]);
            }
        }
        Ok(Frame { height, width, colorspace: self.colorspace, data, label: self.label.clone() })
    }

    pub fn cast<U: Scalar>(&self) -> Frame<U> {
        Frame {
            height: self.height,
            width: self.width,
            colorspace: self.colorspace,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            label: self.label.clone(),
        }
    }

    /// Builds a frame from an interleaved `(H, W, C)` buffer with C of 1 or 3.
    pub fn from_hwc(height: usize, width: usize, channels: usize, hwc: &[T]) -> Result<Self> {
        let colorspace = match channels {
            1 => ColorSpace::Luma,
            3 => ColorSpace::Rgb,
            c => return Err(Error::shape(format!("{c} channels; expected 1 or 3"))),
        };
        if hwc.len() != height * width * channels {
            return Err(Error::shape(format!(
                "buffer of {} values for a {width}x{height}x{channels} frame",
                hwc.len()
            )));
        }
        let n = height * width;
        let mut data = vec![T::zero(); hwc.len()];
        for (i, px) in hwc.chunks_exact(channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * n + i] = v;
            }
        }
        Frame::new(height, width, colorspace, data)
    }

    /// Interleaved `(H, W, C)` copy of the data.
    pub fn to_hwc(&self) -> Vec<T> {
        let n = self.height * self.width;
        let ch = self.channels();
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..n {
            for c in 0..ch {
                out.push(self.data[c * n + i]);
            }
        }
        out
    }
}

/// An ordered, non-empty run of equally shaped frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<T> {
    frames: Vec<Frame<T>>,
    start_index: i64,
}

impl<T: Scalar> Sequence<T> {
    pub fn new(frames: Vec<Frame<T>>, start_index: i64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Empty { op: "sequence", detail: "no frames".into() });
        };
        for (i, f) in frames.iter().enumerate().skip(1) {
            first.check_same_shape(f, &format!("frame {} vs frame {}", start_index, start_index + i as i64))?;
        }
        Ok(Sequence { frames, start_index })
    }

    pub fn frames(&self) -> &[Frame<T>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame<T>> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn get(&self, i: usize) -> Option<&Frame<T>> {
        self.frames.get(i)
    }

    pub fn first(&self) -> &Frame<T> {
        &self.frames[0]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    /// Frames `[start, end)`; `start_index` advances by `start`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Empty {
                op: "slice",
                detail: format!("range {start}..{end} of {} frames", self.len()),
            });
        }
        Ok(Sequence { frames: self.frames[start..end].to_vec(), start_index: self.start_index + start as i64 })
    }

    /// Splits an interleaved `(N, H, W, C)` buffer into frames indexed from 0.
    pub fn from_nhwc(n: usize, height: usize, width: usize, channels: usize, buf: &[T]) -> Result<Self> {
        let per = height * width * channels;
        if n == 0 || buf.len() != n * per {
            return Err(Error::shape(format!(
                "buffer of {} values for {n} frames of {width}x{height}x{channels}",
                buf.len()
            )));
        }
        let frames = buf.chunks_exact(per).map(|c| Frame::from_hwc(height, width, channels, c)).collect::<Result<Vec<_>>>()?;
        Sequence::new(frames, 0)
    }

    pub fn map_frames(&self, f: impl Fn(&Frame<T>) -> Result<Frame<T>>) -> Result<Self> {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        Sequence::new(frames, self.start_index)
    }
}

/// Reads an 8-bit grayscale or RGB PNG; values are scaled to `[0, 1]`.
pub fn load_frame<T: Scalar>(path: impl AsRef<Path>) -> Result<Frame<T>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(image::ImageFormat::Png) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("expected PNG, found {other:?}"),
            })
        }
    }
    let img = reader.decode().map_err(|e| Error::Decode { path: path.to_path_buf(), detail: e.to_string() })?;
    let scale = T::lit(255.0);
    let frame = match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let data = buf.into_raw().into_iter().map(|v| T::lit(v as f64) / scale).collect();
            Frame::new(h as usize, w as usize, ColorSpace::Luma, data)?
        }
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let raw = buf.into_raw();
            let mut data = vec![T::zero(); w * h * 3];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * w * h + i] = T::lit(px[c] as f64) / scale;
                }
            }
            Frame::new(h, w, ColorSpace::Rgb, data)?
        }
        other => {
            let color = other.color();
            let err = match color {
                ColorType::L16 | ColorType::La16 | ColorType::Rgb16 | ColorType::Rgba16 | ColorType::Rgb32F | ColorType::Rgba32F => {
                    Error::UnsupportedBitDepth {
                        path: path.to_path_buf(),
                        detail: format!("{color:?}; only 8-bit PNG is accepted"),
                    }
                }
                _ => Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                    detail: format!("{color:?}; only 8-bit grayscale or RGB is accepted"),
                },
            };
            return Err(err);
        }
    };
    Ok(frame.with_label(frame_label(path)))
}

fn frame_label(path: &Path) -> String {
    let base = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(|p| p.file_name()) {
        Some(parent) => format!("{}/{}", parent.to_string_lossy(), base),
        None => base,
    }
}

/// Writes an 8-bit PNG (values clamped to `[0, 1]` and rounded).
pub fn save_frame<T: Scalar>(frame: &Frame<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = (frame.height as u32, frame.width as u32);
    let quant = |v: T| -> u8 { (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8 };
    let n = frame.height * frame.width;
    let result = match frame.colorspace {
        ColorSpace::Luma => {
            let raw: Vec<u8> = frame.data.iter().map(|&v| quant(v)).collect();
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer size").save(path)
        }
        ColorSpace::Rgb => {
            let mut raw = Vec::with_capacity(n * 3);
            for i in 0..n {
                for c in 0..3 {
                    raw.push(quant(frame.data[c * n + i]));
                }
            }
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("buffer size").save(path)
        }
    };
    result.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat { path: path.to_path_buf(), detail: other.to_string() },
    })
}

/// A printf-style frame name template with exactly one integer conversion,
/// e.g. `%04d.png` or `frame_%d.png`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    prefix: String,
    suffix: String,
    pad: usize,
}

impl FramePattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let bad = || Error::BadPattern(pattern.to_string());
        let start = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[start + 1..];
        let d = rest.find('d').ok_or_else(bad)?;
        let spec = &rest[..d];
        let pad = if spec.is_empty() {
            0
        } else if spec.bytes().all(|b| b.is_ascii_digit()) {
            spec.parse::<usize>().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        let suffix = &rest[d + 1..];
        if suffix.contains('%') || pattern[..start].contains('%') {
            return Err(bad());
        }
        Ok(FramePattern { prefix: pattern[..start].to_string(), suffix: suffix.to_string(), pad })
    }

    pub fn format(&self, index: i64) -> String {
        format!("{}{:0width$}{}", self.prefix, index, self.suffix, width = self.pad)
    }

    /// Frame index encoded in `name`, if it matches the template.
    pub fn match_name(&self, name: &str) -> Option<i64> {
        let mid = name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if mid.is_empty() || !mid.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if self.pad > 0 && mid.len() < self.pad {
            return None;
        }
        if self.pad == 0 && mid.len() > 1 && mid.starts_with('0') {
            return None;
        }
        mid.parse().ok()
    }
}

impl Default for FramePattern {
    fn default() -> Self {
        FramePattern::parse("%04d.png").expect("default pattern")
    }
}

/// Loads consecutively numbered frames from `dir`.
///
/// Without `range` every matching file is used and the indices must be
/// contiguous; with `range` (inclusive) exactly those indices are read.
pub fn load_sequence<T: Scalar>(
    dir: impl AsRef<Path>,
    pattern: &FramePattern,
    range: Option<(i64, i64)>,
) -> Result<Sequence<T>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let indices: Vec<i64> = match range {
        Some((lo, hi)) => {
            if hi < lo {
                return Err(Error::InvalidArgument(format!("empty frame range {lo}..={hi}")));
            }
            (lo..=hi).collect()
        }
        None => {
            let mut found = Vec::new();
            for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let entry = entry.map_err(|e| Error::io(dir, e))?;
                if let Some(idx) = entry.file_name().to_str().and_then(|n| pattern.match_name(n)) {
                    found.push(idx);
                }
            }
            found.sort_unstable();
            found.dedup();
            let (Some(&lo), Some(&hi)) = (found.first(), found.last()) else {
                return Err(Error::EmptySequence {
                    dir: dir.to_path_buf(),
                    pattern: format!("{}%0{}d{}", pattern.prefix, pattern.pad, pattern.suffix),
                });
            };
            (lo..=hi).collect()
        }
    };
    let mut frames = Vec::with_capacity(indices.len());
    for &idx in &indices {
        let path: PathBuf = dir.join(pattern.format(idx));
        if !path.is_file() {
            return Err(Error::MissingFrame(idx));
        }
        frames.push(load_frame(&path)?);
    }
    Sequence::new(frames, indices[0])
}

/// BT.601 luma; 1-channel input is returned unchanged.
pub fn to_luma<T: Scalar>(f: &Frame<T>) -> Frame<T> {
    match f.colorspace {
        ColorSpace::Luma => f.clone(),
        ColorSpace::Rgb => {
            let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
            let (r, g, b) = (f.plane(0), f.plane(1), f.plane(2));
            let data = r.iter().zip(g).zip(b).map(|((&r, &g), &b)| wr * r + wg * g + wb * b).collect();
            Frame { height: f.height, width: f.width, colorspace: ColorSpace::Luma, data, label: f.label.clone() }
        }
    }
}

/// Window kept by [`protocol_crop`] for one frame size: `(x0, y0, width, height)`.
pub fn protocol_window(height: usize, width: usize, border: usize, divisor: usize) -> Result<(usize, usize, usize, usize)> {
    if divisor == 0 {
        return Err(Error::InvalidArgument("divisor must be positive".into()));
    }
    let axis = |len: usize, name: &str| -> Result<(usize, usize)> {
        let inner = len.checked_sub(2 * border).filter(|&v| v > 0).ok_or_else(|| Error::Empty {
            op: "protocol_crop",
            detail: format!("{name} {len} with border {border}"),
        })?;
        let kept = inner - inner % divisor;
        if kept == 0 {
            return Err(Error::Empty {
                op: "protocol_crop",
                detail: format!("{name} {len}: {inner} px after border, below divisor {divisor}"),
            });
        }
        let excess = inner - kept;
        Ok((border + excess / 2, kept))
    };
    let (x0, w) = axis(width, "width")?;
    let (y0, h) = axis(height, "height")?;
    Ok((x0, y0, w, h))
}

/// Removes `border` pixels per side, then shrinks symmetrically until both
/// dimensions are multiples of `divisor` (odd excess: one more on the right/bottom).
pub fn protocol_crop<T: Scalar>(s: &Sequence<T>, border: usize, divisor: usize) -> Result<Sequence<T>> {
    let (h, w, _) = s.shape();
    let (x0, y0, cw, ch) = protocol_window(h, w, border, divisor)?;
    s.map_frames(|f| f.crop(x0, y0, cw, ch))
}

/// Drops `head` leading and `tail` trailing frames.
pub fn skip_frames<T: Scalar>(s: &Sequence<T>, head: usize, tail: usize) -> Result<Sequence<T>> {
    if head + tail >= s.len() {
        return Err(Error::Empty {
            op: "skip_frames",
            detail: format!("skipping {head}+{tail} of {} frames", s.len()),
        });
    }
    s.slice(head, s.len() - tail)
}

/// Bicubic (Keys, a = -0.5) resampling with edge clamping, per channel.
pub fn resize_bicubic<T: Scalar>(f: &Frame<T>, height: usize, width: usize) -> Frame<T> {
    assert!(height > 0 && width > 0, "target size must be positive");
    if height == f.height && width == f.width {
        return f.clone();
    }
    let taps_x = cubic_taps(f.width, width);
    let taps_y = cubic_taps(f.height, height);
    let mut data = Vec::with_capacity(height * width * f.channels());
    let mut rows = vec![T::zero(); f.height * width];
    for c in 0..f.channels() {
        let plane = f.plane(c);
        for y in 0..f.height {
            let src = &plane[y * f.width..(y + 1) * f.width];
            for (x, (idx, wts)) in taps_x.iter().enumerate() {
                rows[y * width + x] = idx.iter().zip(wts).map(|(&i, &w)| src[i] * T::lit(w)).sum();
            }
        }
        for (idx, wts) in &taps_y {
            for x in 0..width {
                data.push(idx.iter().zip(wts).map(|(&i, &w)| rows[i * width + x] * T::lit(w)).sum());
            }
        }
    }
    Frame { height, width, colorspace: f.colorspace, data, label: f.label.clone() }
}

fn cubic_taps(src: usize, dst: usize) -> Vec<([usize; 4], [f64; 4])> {
    let kernel = |t: f64| -> f64 {
        let a = -0.5;
        let t = t.abs();
        if t <= 1.0 {
            (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
        } else if t < 2.0 {
            a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
        } else {
            0.0
        }
    };
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = (i as f64 + 0.5) * scale - 0.5;
            let base = pos.floor();
            let frac = pos - base;
            let mut idx = [0usize; 4];
            let mut wts = [0f64; 4];
            for k in 0..4 {
                let off = k as f64 - 1.0;
                idx[k] = (base + off).clamp(0.0, (src - 1) as f64) as usize;
                wts[k] = kernel(off - frac);
            }
            let sum: f64 = wts.iter().sum();
            wts.iter_mut().for_each(|w| *w /= sum);
            (idx, wts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(h: usize, w: usize, f: impl FnMut(usize, usize, usize) -> f64) -> Frame<f64> {
        Frame::from_fn(h, w, ColorSpace::Rgb, f)
    }

    fn seq_of(len: usize, h: usize, w: usize) -> Sequence<f64> {
        let frames = (0..len).map(|i| Frame::filled(h, w, ColorSpace::Luma, i as f64 / len as f64)).collect();
        Sequence::new(frames, 0).unwrap()
    }

    #[test]
    fn luma_weights() {
        let white = Frame::filled(2, 2, ColorSpace::Rgb, 1.0f64);
        assert!(to_luma(&white).data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let red = rgb(1, 1, |_, _, c| if c == 0 { 1.0 } else { 0.0 });
        assert!((to_luma(&red).data()[0] - 0.299).abs() < 1e-12);
        let gray = Frame::from_fn(3, 3, ColorSpace::Luma, |x, y, _| (x + y) as f64 / 4.0);
        assert_eq!(to_luma(&gray), gray);
        let l = to_luma(&rgb(4, 4, |x, y, c| ((x * 3 + y + c) % 7) as f64 / 7.0));
        assert_eq!(to_luma(&l), l);
    }

    #[test]
    fn protocol_window_sizes() {
        assert_eq!(protocol_window(536, 1280, 8, 8).unwrap(), (8, 8, 1264, 520));
        // 118 px after the border: 6 px excess, 3 left and 3 right.
        assert_eq!(protocol_window(134, 320, 8, 8).unwrap(), (8, 11, 304, 112));
        // odd excess: floor to the left/top
        assert_eq!(protocol_window(21, 21, 0, 4).unwrap(), (0, 0, 20, 20));
        assert_eq!(protocol_window(23, 23, 0, 4).unwrap(), (1, 1, 20, 20));
        assert!(protocol_window(16, 16, 8, 8).is_err());
        assert!(protocol_window(20, 20, 8, 8).is_err());
    }

    #[test]
    fn protocol_crop_is_idempotent_when_aligned() {
        let s = Sequence::new(vec![rgb(134, 320, |x, y, c| ((x + 2 * y + c) % 11) as f64 / 10.0)], 0).unwrap();
        let once = protocol_crop(&s, 8, 8).unwrap();
        assert_eq!(once.shape(), (112, 304, 3));
        assert_eq!(once.first().get(0, 0, 1), s.first().get(8, 11, 1));
        assert_eq!(protocol_crop(&once, 0, 8).unwrap(), once);
    }

    #[test]
    fn skip_rules() {
        let s = seq_of(10, 2, 2);
        let spatial = skip_frames(&s, 2, 2).unwrap();
        assert_eq!(spatial.len(), 6);
        assert_eq!(spatial.start_index(), 2);
        assert_eq!(skip_frames(&s, 3, 2).unwrap().len(), 5);
        assert_eq!(skip_frames(&s, 0, 0).unwrap(), s);
        assert!(skip_frames(&s, 5, 5).is_err());
    }

    #[test]
    fn sequence_rejects_mixed_shapes() {
        let a = Frame::filled(2, 2, ColorSpace::Luma, 0.0f64);
        let b = Frame::filled(2, 3, ColorSpace::Luma, 0.0f64);
        assert!(matches!(Sequence::new(vec![a, b], 0), Err(Error::ShapeMismatch(_))));
        assert!(Sequence::<f64>::new(vec![], 0).is_err());
    }

    #[test]
    fn pattern_parsing() {
        let p = FramePattern::parse("frame_%04d.png").unwrap();
        assert_eq!(p.format(3), "frame_0003.png");
        assert_eq!(p.match_name("frame_0012.png"), Some(12));
        assert_eq!(p.match_name("frame_12.png"), None);
        assert_eq!(p.match_name("frame_0012.jpg"), None);
        let bare = FramePattern::parse("%d.png").unwrap();
        assert_eq!(bare.match_name("7.png"), Some(7));
        assert!(FramePattern::parse("frame.png").is_err());
        assert!(FramePattern::parse("%s.png").is_err());
        assert!(FramePattern::parse("%d_%d.png").is_err());
    }

    #[test]
    fn bicubic_preserves_constants_and_linear_ramps() {
        let c = Frame::filled(7, 9, ColorSpace::Rgb, 0.25f64);
        let up = resize_bicubic(&c, 14, 18);
        assert!(up.data().iter().all(|&v| (v - 0.25).abs() < 1e-12));
        // Keys' cubic reproduces linear functions away from the clamped edge.
        let ramp = Frame::from_fn(8, 16, ColorSpace::Luma, |x, _, _| x as f64);
        let up = resize_bicubic(&ramp, 16, 32);
        for x in 4..28 {
            let expected = (x as f64 + 0.5) * 0.5 - 0.5;
            assert!((up.get(x, 5, 0) - expected).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn hwc_round_trip() {
        let f = rgb(3, 4, |x, y, c| (x * 100 + y * 10 + c) as f64);
        let hwc = f.to_hwc();
        assert_eq!(&hwc[..6], &[0.0, 1.0, 2.0, 100.0, 101.0, 102.0]);
        assert_eq!(Frame::from_hwc(3, 4, 3, &hwc).unwrap(), f);
        assert!(Frame::from_hwc(3, 4, 2, &hwc).is_err());
        assert!(Frame::from_hwc(3, 3, 3, &hwc).is_err());
        let seq = Sequence::from_nhwc(2, 3, 4, 3, &[hwc.clone(), hwc].concat()).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.get(1).unwrap(), &f);
    }
}
