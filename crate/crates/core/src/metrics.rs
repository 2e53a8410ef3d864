//! Spatial and temporal quality metrics and per-scene reports.
//!
//! All per-pixel norms are means over pixels (and channels), so values do
//! not depend on resolution. Reports keep raw values; `scaling` holds the
//! conventional display multipliers (tOF x10, tLP x100, ...).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{estimate_backward_flow, estimate_flow, FlowParams};
use crate::imgseq::{load_sequence, protocol_crop, resize_bicubic, FramePattern, Frame, Sequence};
use crate::perceptual::PerceptualBackend;
use crate::warp::{backward_warp, FlowField};
use crate::Scalar;

/// Schema version written into JSON reports.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Psnr,
    /// Spatial perceptual distance between generated and reference frames.
    Lp,
    Tdiff,
    /// `|T-diff(gen) - T-diff(ref)|` per frame; zero when gen == ref.
    TdiffDelta,
    Tof,
    Tlp,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Metric::Psnr, Metric::Lp, Metric::Tdiff, Metric::TdiffDelta, Metric::Tof, Metric::Tlp];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Lp => "lp",
            Metric::Tdiff => "tdiff",
            Metric::TdiffDelta => "tdiff_delta",
            Metric::Tof => "tof",
            Metric::Tlp => "tlp",
        }
    }

    pub fn display_scale(self) -> f64 {
        match self {
            Metric::Psnr => 1.0,
            Metric::Lp | Metric::Tof => 10.0,
            Metric::Tdiff | Metric::TdiffDelta | Metric::Tlp => 100.0,
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Psnr)
    }

    pub fn is_temporal(self) -> bool {
        !matches!(self, Metric::Psnr | Metric::Lp)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

/// Where the reference sequence comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RefMode {
    /// Pixel-aligned ground truth.
    #[default]
    Vsr,
    /// Input-domain sequence, bicubically resampled to the output size.
    Uvt,
}

fn mean_of<T: Scalar>(it: impl Iterator<Item = T>, n: usize) -> f64 {
    it.map(|v| v.as_f64()).sum::<f64>() / n as f64
}

pub fn mse<T: Scalar>(a: &Frame<T>, b: &Frame<T>) -> Result<f64> {
    a.check_same_shape(b, "mse")?;
    Ok(mean_of(a.data().iter().zip(b.data()).map(|(&x, &y)| (x - y) * (x - y)), a.data().len()))
}

pub fn mean_abs_diff<T: Scalar>(a: &Frame<T>, b: &Frame<T>) -> Result<f64> {
    a.check_same_shape(b, "mean_abs_diff")?;
    Ok(mean_of(a.data().iter().zip(b.data()).map(|(&x, &y)| (x - y).abs()), a.data().len()))
}

/// PSNR in dB for peak 1.0; identical frames give `f64::INFINITY`.
pub fn psnr<T: Scalar>(gt: &Frame<T>, gen: &Frame<T>) -> Result<f64> {
    let e = mse(gt, gen)?;
    Ok(if e == 0.0 { f64::INFINITY } else { -10.0 * e.log10() })
}

fn pairwise<R: Send>(
    metric: &'static str,
    n: usize,
    f: impl Fn(usize) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    (1..n)
        .into_par_iter()
        .map(|t| f(t).map_err(|e| Error::AtPair { metric, pair: t, source: Box::new(e) }))
        .collect()
}

/// Backward flows for consecutive frames: element `t - 1` aligns frame `t - 1` onto frame `t`.
pub fn backward_flows<T: Scalar>(s: &Sequence<T>, p: &FlowParams) -> Result<Vec<FlowField<T>>> {
    let f = s.frames();
    pairwise("flow", s.len(), |t| estimate_backward_flow(&f[t], &f[t - 1], p))
}

/// `mean |g_t - W(g_{t-1}, v_t)|` for t = 1..n. Flows come from
/// [`backward_flows`] when not supplied.
pub fn tdiff<T: Scalar>(gen: &Sequence<T>, flows: Option<&[FlowField<T>]>, p: &FlowParams) -> Result<Vec<f64>> {
    let frames = gen.frames();
    if let Some(fl) = flows {
        if fl.len() + 1 != gen.len() {
            return Err(Error::LengthMismatch(format!("{} flows for {} frames", fl.len(), gen.len())));
        }
    }
    pairwise("tdiff", gen.len(), |t| {
        let owned;
        let flow = match flows {
            Some(fl) => &fl[t - 1],
            None => {
                owned = estimate_backward_flow(&frames[t], &frames[t - 1], p)?;
                &owned
            }
        };
        mean_abs_diff(&frames[t], &backward_warp(&frames[t - 1], flow)?)
    })
}

fn check_pair_sequences<T: Scalar>(reference: &Sequence<T>, gen: &Sequence<T>) -> Result<()> {
    if reference.len() != gen.len() {
        return Err(Error::LengthMismatch(format!("reference has {} frames, generated has {}", reference.len(), gen.len())));
    }
    reference.first().check_same_shape(gen.first(), "reference vs generated")
}

/// `mean |OF(ref_{t-1}, ref_t) - OF(gen_{t-1}, gen_t)|` with `|·| = |du| + |dv|`.
pub fn tof<T: Scalar>(reference: &Sequence<T>, gen: &Sequence<T>, p: &FlowParams) -> Result<Vec<f64>> {
    if reference.len() != gen.len() {
        return Err(Error::LengthMismatch(format!("reference has {} frames, generated has {}", reference.len(), gen.len())));
    }
    let (rf, gf) = (reference.frames(), gen.frames());
    if rf[0].height() != gf[0].height() || rf[0].width() != gf[0].width() {
        return Err(Error::shape(format!(
            "tof: reference {}x{} vs generated {}x{}",
            rf[0].width(),
            rf[0].height(),
            gf[0].width(),
            gf[0].height()
        )));
    }
    pairwise("tof", gen.len(), |t| {
        let a = estimate_flow(&rf[t - 1], &rf[t], p)?;
        let b = estimate_flow(&gf[t - 1], &gf[t], p)?;
        let n = a.u().len();
        let du = a.u().iter().zip(b.u()).map(|(&x, &y)| (x - y).abs());
        let dv = a.v().iter().zip(b.v()).map(|(&x, &y)| (x - y).abs());
        Ok(mean_of(du.chain(dv), n))
    })
}

/// Resamples every reference frame to the generated frame size (UVT mode).
pub fn align_reference<T: Scalar>(reference: &Sequence<T>, height: usize, width: usize) -> Result<Sequence<T>> {
    reference.map_frames(|f| Ok(resize_bicubic(f, height, width)))
}

/// `|LP(ref_{t-1}, ref_t) - LP(gen_{t-1}, gen_t)|`.
pub fn tlp<T: Scalar>(reference: &Sequence<T>, gen: &Sequence<T>, backend: &dyn PerceptualBackend<T>) -> Result<Vec<f64>> {
    check_pair_sequences(reference, gen)?;
    let (rf, gf) = (reference.frames(), gen.frames());
    pairwise("tlp", gen.len(), |t| {
        let a = backend.distance(&rf[t - 1], &rf[t])?;
        let b = backend.distance(&gf[t - 1], &gf[t])?;
        Ok((a - b).abs())
    })
}

/// Per-frame spatial perceptual distance between reference and generated frames.
pub fn lp<T: Scalar>(reference: &Sequence<T>, gen: &Sequence<T>, backend: &dyn PerceptualBackend<T>) -> Result<Vec<f64>> {
    check_pair_sequences(reference, gen)?;
    (0..gen.len())
        .into_par_iter()
        .map(|t| {
            backend
                .distance(&reference.frames()[t], &gen.frames()[t])
                .map_err(|e| Error::AtPair { metric: "lp", pair: t, source: Box::new(e) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub mode: RefMode,
    pub border: usize,
    pub divisor: usize,
    /// Frames dropped (head, tail) for spatial metrics.
    pub spatial_skip: (usize, usize),
    /// Frames dropped (head, tail) for temporal metrics.
    pub temporal_skip: (usize, usize),
    pub flow: FlowParams,
    pub backend: String,
    pub metrics: Vec<Metric>,
}

impl Protocol {
    pub fn standard(backend: impl Into<String>) -> Self {
        Protocol {
            mode: RefMode::Vsr,
            border: 8,
            divisor: 8,
            spatial_skip: (2, 2),
            temporal_skip: (3, 2),
            flow: FlowParams::default(),
            backend: backend.into(),
            metrics: vec![Metric::Psnr, Metric::Lp, Metric::Tdiff, Metric::TdiffDelta, Metric::Tof, Metric::Tlp],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.metrics.is_empty() {
            return Err(Error::InvalidArgument("no metrics selected".into()));
        }
        if self.mode == RefMode::Uvt && self.metrics.contains(&Metric::Psnr) {
            return Err(Error::InvalidArgument("psnr needs pixel-aligned ground truth; not available in uvt mode".into()));
        }
        Ok(())
    }
}

mod report_float {
    use serde::de::{self, Deserializer};
    use serde::ser::{SerializeMap, SerializeSeq, Serializer};
    use serde::Deserialize;
    use std::collections::BTreeMap;

    struct Num(f64);

    impl serde::Serialize for Num {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            match self.0 {
                v if v.is_finite() => s.serialize_f64(v),
                v if v.is_nan() => s.serialize_str("nan"),
                v if v > 0.0 => s.serialize_str("inf"),
                _ => s.serialize_str("-inf"),
            }
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        N(f64),
        S(String),
    }

    fn parse<E: de::Error>(r: Raw) -> Result<f64, E> {
        match r {
            Raw::N(v) => Ok(v),
            Raw::S(s) => s.parse::<f64>().map_err(|_| E::custom(format!("bad number {s:?}"))),
        }
    }

    pub fn format(v: f64) -> String {
        match v {
            v if v.is_finite() => format!("{v}"),
            v if v.is_nan() => "nan".into(),
            v if v > 0.0 => "inf".into(),
            _ => "-inf".into(),
        }
    }

    pub mod scalar_map {
        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let mut map = s.serialize_map(Some(m.len()))?;
            for (k, v) in m {
                map.serialize_entry(k, &Num(*v))?;
            }
            map.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            BTreeMap::<String, Raw>::deserialize(d)?.into_iter().map(|(k, v)| Ok((k, parse(v)?))).collect()
        }
    }

    pub mod vec_map {
        use super::*;

        struct Seq<'a>(&'a [f64]);

        impl serde::Serialize for Seq<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.len()))?;
                for v in self.0 {
                    seq.serialize_element(&Num(*v))?;
                }
                seq.end()
            }
        }

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
            let mut map = s.serialize_map(Some(m.len()))?;
            for (k, v) in m {
                map.serialize_entry(k, &Seq(v))?;
            }
            map.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Vec<f64>>, D::Error> {
            BTreeMap::<String, Vec<Raw>>::deserialize(d)?
                .into_iter()
                .map(|(k, v)| Ok((k, v.into_iter().map(parse).collect::<Result<Vec<_>, _>>()?)))
                .collect()
        }
    }
}

/// Formats a report value the way JSON and CSV outputs spell it (`inf` for
/// non-finite PSNR).
pub fn format_value(v: f64) -> String {
    report_float::format(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scene: String,
    pub method: String,
    #[serde(with = "report_float::vec_map")]
    pub per_frame: BTreeMap<String, Vec<f64>>,
    /// Frame index (in the loaded numbering) of every per-frame value.
    pub frame_indices: BTreeMap<String, Vec<i64>>,
    #[serde(with = "report_float::scalar_map")]
    pub mean: BTreeMap<String, f64>,
    pub scaling: BTreeMap<String, f64>,
    pub protocol: Protocol,
}

impl MetricReport {
    pub fn new(scene: impl Into<String>, method: impl Into<String>, protocol: Protocol) -> Self {
        MetricReport {
            scene: scene.into(),
            method: method.into(),
            per_frame: BTreeMap::new(),
            frame_indices: BTreeMap::new(),
            mean: BTreeMap::new(),
            scaling: BTreeMap::new(),
            protocol,
        }
    }

    pub fn insert(&mut self, metric: Metric, first_index: i64, values: Vec<f64>) {
        let name = metric.name().to_string();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.frame_indices.insert(name.clone(), (0..values.len() as i64).map(|i| first_index + i).collect());
        self.mean.insert(name.clone(), mean);
        self.scaling.insert(name.clone(), metric.display_scale());
        self.per_frame.insert(name, values);
    }

    pub fn mean_of(&self, metric: Metric) -> Option<f64> {
        self.mean.get(metric.name()).copied()
    }

    pub fn per_frame_of(&self, metric: Metric) -> Option<&[f64]> {
        self.per_frame.get(metric.name()).map(Vec::as_slice)
    }
}

fn with_scene<R>(scene: &str, r: Result<R>) -> Result<R> {
    r.map_err(|e| Error::Scene { scene: scene.to_string(), source: Box::new(e) })
}

/// Runs the evaluation protocol on in-memory sequences.
///
/// Both sequences are cropped (border, then divisor alignment). Spatial
/// metrics cover frames `head..n-tail` of the spatial skip; temporal metrics
/// report frames `head..n-tail` of the temporal skip, each using its
/// predecessor.
pub fn evaluate_sequences<T: Scalar>(
    scene: &str,
    method: &str,
    reference: &Sequence<T>,
    gen: &Sequence<T>,
    protocol: &Protocol,
    backend: &dyn PerceptualBackend<T>,
) -> Result<MetricReport> {
    with_scene(scene, evaluate_inner(scene, method, reference, gen, protocol, backend))
}

fn evaluate_inner<T: Scalar>(
    scene: &str,
    method: &str,
    reference: &Sequence<T>,
    gen: &Sequence<T>,
    protocol: &Protocol,
    backend: &dyn PerceptualBackend<T>,
) -> Result<MetricReport> {
    protocol.validate()?;
    if protocol.backend != backend.id() {
        return Err(Error::InvalidArgument(format!(
            "protocol names backend {:?} but {:?} was supplied",
            protocol.backend,
            backend.id()
        )));
    }
    if reference.len() != gen.len() {
        return Err(Error::LengthMismatch(format!(
            "reference has {} frames, generated has {}",
            reference.len(),
            gen.len()
        )));
    }
    let (h, w, _) = gen.shape();
    let reference = match protocol.mode {
        RefMode::Vsr => reference.clone(),
        RefMode::Uvt => align_reference(reference, h, w)?,
    };
    reference.first().check_same_shape(gen.first(), "reference vs generated")?;
    let r = protocol_crop(&reference, protocol.border, protocol.divisor)?;
    let g = protocol_crop(gen, protocol.border, protocol.divisor)?;
    let n = g.len();

    let window = |(head, tail): (usize, usize), temporal: bool| -> Result<(usize, usize)> {
        let first = if temporal { head.max(1) } else { head };
        if first + tail >= n {
            return Err(Error::Empty {
                op: "evaluate",
                detail: format!("skipping ({head}, {tail}) frames of {n} leaves no {} values", if temporal { "temporal" } else { "spatial" }),
            });
        }
        Ok((first, n - tail))
    };

    let mut report = MetricReport::new(scene, method, protocol.clone());
    let start = g.start_index();
    let mut metrics = protocol.metrics.clone();
    metrics.sort();
    metrics.dedup();
    for metric in metrics {
        let (first, values) = if metric.is_temporal() {
            let (first, end) = window(protocol.temporal_skip, true)?;
            let (rs, gs) = (r.slice(first - 1, end)?, g.slice(first - 1, end)?);
            let v = match metric {
                Metric::Tdiff => tdiff(&gs, None, &protocol.flow)?,
                Metric::TdiffDelta => {
                    let a = tdiff(&gs, None, &protocol.flow)?;
                    let b = tdiff(&rs, None, &protocol.flow)?;
                    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect()
                }
                Metric::Tof => tof(&rs, &gs, &protocol.flow)?,
                Metric::Tlp => tlp(&rs, &gs, backend)?,
                Metric::Psnr | Metric::Lp => unreachable!("spatial metric"),
            };
            (first, v)
        } else {
            let (first, end) = window(protocol.spatial_skip, false)?;
            let (rs, gs) = (r.slice(first, end)?, g.slice(first, end)?);
            let v = match metric {
                Metric::Psnr => rs.frames().iter().zip(gs.frames()).map(|(a, b)| psnr(a, b)).collect::<Result<Vec<_>>>()?,
                Metric::Lp => lp(&rs, &gs, backend)?,
                _ => unreachable!("temporal metric"),
            };
            (first, v)
        };
        report.insert(metric, start + first as i64, values);
    }
    Ok(report)
}

/// Loads `reference_dir` and `gen_dir` with `pattern` and evaluates them.
pub fn evaluate_scene<T: Scalar>(
    scene: &str,
    method: &str,
    reference_dir: impl AsRef<Path>,
    gen_dir: impl AsRef<Path>,
    pattern: &FramePattern,
    protocol: &Protocol,
    backend: &dyn PerceptualBackend<T>,
) -> Result<MetricReport> {
    let reference = with_scene(scene, load_sequence::<T>(reference_dir, pattern, None))?;
    let gen = with_scene(scene, load_sequence::<T>(gen_dir, pattern, None))?;
    evaluate_sequences(scene, method, &reference, &gen, protocol, backend)
}
