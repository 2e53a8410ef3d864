//! Perceptual distance backends used by tLP and spatial perceptual reporting.
//!
//! No learned network ships with the crate. The built-in [`MsGradBackend`]
//! is a deterministic gradient-structure and local-luminance distance whose values are not
//! comparable to published LPIPS numbers; [`TableBackend`] serves distances
//! computed offline (e.g. AlexNet-LPIPS) from a CSV table.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgseq::{ColorSpace, Frame};
use crate::Scalar;

pub const MSGRAD_ID: &str = "msgrad";
pub const MSGRAD_LEVELS: usize = 3;
/// Floor added to the local mean gradient magnitude before normalizing.
pub const MSGRAD_EPS: f64 = 1e-3;
/// Side of the box window giving the local mean magnitude.
pub const MSGRAD_WINDOW: usize = 7;

pub trait PerceptualBackend<T: Scalar>: Send + Sync {
    fn id(&self) -> &str;

    /// Non-negative, symmetric, zero on identical inputs.
    fn distance(&self, a: &Frame<T>, b: &Frame<T>) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MsGradBackend;

impl<T: Scalar> PerceptualBackend<T> for MsGradBackend {
    fn id(&self) -> &str {
        MSGRAD_ID
    }

    fn distance(&self, a: &Frame<T>, b: &Frame<T>) -> Result<f64> {
        msgrad_distance(a, b)
    }
}

/// Per pyramid level (3 levels, 2x2 mean downsampling): mean absolute
/// difference of contrast-normalized Sobel magnitude maps plus mean absolute
/// difference of 7x7 local mean intensity. Levels are averaged.
pub fn msgrad_distance<T: Scalar>(a: &Frame<T>, b: &Frame<T>) -> Result<f64> {
    a.check_same_shape(b, "msgrad_distance")?;
    let mut la = planes_f64(a);
    let mut lb = planes_f64(b);
    let (mut h, mut w) = (a.height(), a.width());
    let mut total = 0.0;
    let mut used = 0;
    for level in 0..MSGRAD_LEVELS {
        if level > 0 {
            if h < 2 || w < 2 {
                break;
            }
            la = la.iter().map(|p| halve(p, w, h)).collect();
            lb = lb.iter().map(|p| halve(p, w, h)).collect();
            h /= 2;
            w /= 2;
        }
        let (na, ma) = normalized_gradient(&la, w, h);
        let (nb, mb) = normalized_gradient(&lb, w, h);
        let mad = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>() / p.len() as f64;
        total += mad(&na, &nb) + mad(&ma, &mb);
        used += 1;
    }
    Ok(total / used as f64)
}

fn planes_f64<T: Scalar>(f: &Frame<T>) -> Vec<Vec<f64>> {
    (0..f.channels()).map(|c| f.plane(c).iter().map(|v| v.as_f64()).collect()).collect()
}

fn halve(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (p[i] + p[i + 1] + p[i + w] + p[i + w + 1]));
        }
    }
    out
}

/// Channel-averaged Sobel magnitude divided by its local box mean + ε, and
/// the channel-averaged local mean intensity.
fn normalized_gradient(planes: &[Vec<f64>], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |p: &[f64], x: isize, y: isize| {
        p[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize]
    };
    let nc = planes.len() as f64;
    let mut mag = vec![0.0; w * h];
    let mut lum = vec![0.0; w * h];
    for p in planes {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let col = |cx: isize| at(p, cx, y - 1) + 2.0 * at(p, cx, y) + at(p, cx, y + 1);
                let row = |ry: isize| at(p, x - 1, ry) + 2.0 * at(p, x, ry) + at(p, x + 1, ry);
                let gx = col(x + 1) - col(x - 1);
                let gy = row(y + 1) - row(y - 1);
                let i = y as usize * w + x as usize;
                mag[i] += (gx * gx + gy * gy).sqrt() / nc;
                lum[i] += p[i] / nc;
            }
        }
    }
    let mean_mag = box_mean(&mag, w, h);
    let out = mag.iter().zip(&mean_mag).map(|(m, s)| m / (s + MSGRAD_EPS)).collect();
    (out, box_mean(&lum, w, h))
}

fn box_mean(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| p[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let r = (MSGRAD_WINDOW / 2) as isize;
    let area = (MSGRAD_WINDOW * MSGRAD_WINDOW) as f64;
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut s = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    s += at(x + dx, y + dy);
                }
            }
            out[y as usize * w + x as usize] = s / area;
        }
    }
    out
}

/// Distances looked up from a `frameA,frameB,distance` CSV.
///
/// Keys are frame labels: a frame labelled `"gt/0001.png"` first matches
/// rows written with that qualified name, then rows using the bare
/// basename `"0001.png"`. Lookups are symmetric, and a frame compared with
/// an identically labelled frame has distance 0.
#[derive(Debug, Clone)]
pub struct TableBackend {
    id: String,
    table: HashMap<(String, String), f64>,
}

impl TableBackend {
    pub fn from_rows(id: impl Into<String>, rows: impl IntoIterator<Item = (String, String, f64)>) -> Result<Self> {
        let id = id.into();
        let mut table = HashMap::new();
        for (a, b, d) in rows {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Backend { backend: id, detail: format!("distance for ({a}, {b}) is {d}") });
            }
            for key in [(a.clone(), b.clone()), (b, a)] {
                if let Some(prev) = table.insert(key.clone(), d) {
                    if prev != d {
                        return Err(Error::Backend {
                            backend: id,
                            detail: format!("conflicting distances {prev} and {d} for ({}, {})", key.0, key.1),
                        });
                    }
                }
            }
        }
        Ok(TableBackend { id, table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Distinct label pairs, each once, in sorted order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut v: Vec<_> = self.table.keys().filter(|(a, b)| a <= b).cloned().collect();
        v.sort();
        v
    }

    pub fn lookup(&self, a: &str, b: &str) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let base = |s: &str| s.rsplit('/').next().unwrap_or(s).to_string();
        let candidates = [(a.to_string(), b.to_string()), (base(a), base(b))];
        candidates
            .iter()
            .find_map(|k| self.table.get(k).copied())
            .ok_or_else(|| Error::Backend { backend: self.id.clone(), detail: format!("no distance for pair ({a}, {b})") })
    }
}

/// Loads a table backend; the header row is optional.
pub fn external_table_backend(path: impl AsRef<Path>) -> Result<TableBackend> {
    let path = path.as_ref();
    let id = format!("table:{}", path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Backend { backend: id.clone(), detail: e.to_string() })?;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Backend { backend: id.clone(), detail: e.to_string() })?;
        if rec.len() != 3 {
            return Err(Error::Backend { backend: id, detail: format!("row {}: expected 3 columns", line + 1) });
        }
        match rec[2].parse::<f64>() {
            Ok(d) => rows.push((rec[0].to_string(), rec[1].to_string(), d)),
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(Error::Backend { backend: id, detail: format!("row {}: bad distance {:?}", line + 1, &rec[2]) })
            }
        }
    }
    TableBackend::from_rows(id, rows)
}

impl<T: Scalar> PerceptualBackend<T> for TableBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn distance(&self, a: &Frame<T>, b: &Frame<T>) -> Result<f64> {
        let label = |f: &Frame<T>| {
            f.label().map(str::to_string).ok_or_else(|| Error::Backend {
                backend: self.id.clone(),
                detail: "frame has no file label to look up".into(),
            })
        };
        self.lookup(&label(a)?, &label(b)?)
    }
}

/// Checks zero self-distance and symmetry on the given probe pairs.
pub fn validate_backend<T: Scalar>(backend: &dyn PerceptualBackend<T>, probes: &[(Frame<T>, Frame<T>)]) -> Result<()> {
    let fail = |detail: String| Error::Backend { backend: backend.id().to_string(), detail };
    for (i, (a, b)) in probes.iter().enumerate() {
        for f in [a, b] {
            let d = backend.distance(f, f)?;
            if d != 0.0 {
                return Err(fail(format!("probe {i}: self-distance {d}")));
            }
        }
        let ab = backend.distance(a, b)?;
        let ba = backend.distance(b, a)?;
        if ab.is_nan() || ab < 0.0 || (ab - ba).abs() > 1e-9 {
            return Err(fail(format!("probe {i}: d(a,b)={ab}, d(b,a)={ba}")));
        }
    }
    Ok(())
}

/// Three fixed synthetic probe pairs (smooth, textured, flat-vs-edge).
pub fn synthetic_probes<T: Scalar>() -> Vec<(Frame<T>, Frame<T>)> {
    let mk = |f: &dyn Fn(usize, usize) -> f64| Frame::from_fn(24, 24, ColorSpace::Luma, |x, y, _| T::lit(f(x, y)));
    vec![
        (mk(&|x, _| x as f64 / 23.0), mk(&|_, y| y as f64 / 23.0)),
        (mk(&|x, y| ((x / 3 + y / 3) % 2) as f64), mk(&|x, y| (((x + 1) / 3 + y / 3) % 2) as f64)),
        (mk(&|_, _| 0.5), mk(&|x, _| if x < 12 { 0.2 } else { 0.8 })),
    ]
}

/// Validates a backend on probe frames labelled from its own table rows.
pub fn validate_table_backend<T: Scalar>(backend: &TableBackend) -> Result<()> {
    let probes: Vec<(Frame<T>, Frame<T>)> = backend
        .pairs()
        .into_iter()
        .take(3)
        .map(|(a, b)| {
            let f = Frame::filled(1, 1, ColorSpace::Luma, T::zero());
            (f.clone().with_label(a), f.with_label(b))
        })
        .collect();
    validate_backend(backend, &probes)
}
