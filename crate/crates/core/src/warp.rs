//! Backward warping and warped-triplet boundary zeroing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgseq::Frame;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    Forward,
    Backward,
}

/// Per-pixel displacement in pixels; `u` along x, `v` along y.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    height: usize,
    width: usize,
    u: Vec<T>,
    v: Vec<T>,
    direction: FlowDirection,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(height: usize, width: usize, u: Vec<T>, v: Vec<T>, direction: FlowDirection) -> Result<Self> {
        let n = height * width;
        if n == 0 || u.len() != n || v.len() != n {
            return Err(Error::shape(format!(
                "flow components of length {}/{} for a {width}x{height} field",
                u.len(),
                v.len()
            )));
        }
        if !u.iter().chain(&v).all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("flow contains non-finite displacements".into()));
        }
        Ok(FlowField { height, width, u, v, direction })
    }

    pub fn zeros(height: usize, width: usize, direction: FlowDirection) -> Self {
        let n = height * width;
        FlowField { height, width, u: vec![T::zero(); n], v: vec![T::zero(); n], direction }
    }

    pub fn constant(height: usize, width: usize, u: T, v: T, direction: FlowDirection) -> Self {
        let n = height * width;
        FlowField { height, width, u: vec![u; n], v: vec![v; n], direction }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn with_direction(mut self, direction: FlowDirection) -> Self {
        self.direction = direction;
        self
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (T, T) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, u: Vec<T>, v: Vec<T>, direction: FlowDirection) -> Self {
        FlowField { height, width, u, v, direction }
    }

    fn check_frame(&self, f: &Frame<T>) -> Result<()> {
        if f.height() != self.height || f.width() != self.width {
            return Err(Error::shape(format!(
                "flow {}x{} vs frame {}x{}",
                self.width,
                self.height,
                f.width(),
                f.height()
            )));
        }
        Ok(())
    }
}

/// Bilinear sample of one plane at `(sx, sy)`, coordinates clamped to the image.
#[inline]
pub(crate) fn sample_bilinear<T: Scalar>(plane: &[T], width: usize, height: usize, sx: T, sy: T) -> T {
    let max_x = T::lit((width - 1) as f64);
    let max_y = T::lit((height - 1) as f64);
    let sx = sx.max(T::zero()).min(max_x);
    let sy = sy.max(T::zero()).min(max_y);
    let x0f = sx.floor();
    let y0f = sy.floor();
    let fx = sx - x0f;
    let fy = sy - y0f;
    let x0 = x0f.to_usize().unwrap_or(0);
    let y0 = y0f.to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let p00 = plane[y0 * width + x0];
    let p01 = plane[y0 * width + x1];
    let p10 = plane[y1 * width + x0];
    let p11 = plane[y1 * width + x1];
    // Written as p + f * (q - p) so f == 0 reproduces p exactly.
    let top = p00 + fx * (p01 - p00);
    let bottom = p10 + fx * (p11 - p10);
    top + fy * (bottom - top)
}

/// `out(x, y) = f(x + u(x, y), y + v(x, y))`, bilinear, edge-clamped.
pub fn backward_warp<T: Scalar>(f: &Frame<T>, flow: &FlowField<T>) -> Result<Frame<T>> {
    flow.check_frame(f)?;
    let (h, w) = (f.height(), f.width());
    let mut data = Vec::with_capacity(f.data().len());
    for c in 0..f.channels() {
        let plane = f.plane(c);
        for y in 0..h {
            let yf = T::lit(y as f64);
            for x in 0..w {
                let i = y * w + x;
                let sx = T::lit(x as f64) + flow.u[i];
                let sy = yf + flow.v[i];
                data.push(sample_bilinear(plane, w, h, sx, sy));
            }
        }
    }
    Ok(f.with_data(data))
}

pub fn scale_flow<T: Scalar>(flow: &FlowField<T>, factor: T) -> FlowField<T> {
    FlowField {
        height: flow.height,
        width: flow.width,
        u: flow.u.iter().map(|&x| x * factor).collect(),
        v: flow.v.iter().map(|&x| x * factor).collect(),
        direction: flow.direction,
    }
}

/// Zeroes every pixel closer than `margin` to any side.
pub fn zero_border<T: Scalar>(f: &Frame<T>, margin: usize) -> Result<Frame<T>> {
    let (h, w) = (f.height(), f.width());
    if 2 * margin >= h.min(w) {
        return Err(Error::InvalidArgument(format!("border margin {margin} too large for a {w}x{h} frame")));
    }
    if margin == 0 {
        return Ok(f.clone());
    }
    let mut out = f.clone();
    for c in 0..f.channels() {
        let plane = out.plane_mut(c);
        for y in 0..h {
            let row = &mut plane[y * w..(y + 1) * w];
            if y < margin || y >= h - margin {
                row.fill(T::zero());
            } else {
                row[..margin].fill(T::zero());
                row[w - margin..].fill(T::zero());
            }
        }
    }
    Ok(out)
}
