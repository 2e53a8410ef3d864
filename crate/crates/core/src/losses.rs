//! Generator and discriminator loss terms for temporally coherent GANs.
//!
//! Every `‖·‖₂` term is a mean squared error (not a root, not a sum over
//! pixels). Log arguments are clamped at [`LOG_EPS`]; cosine denominators at
//! [`COSINE_EPS`]. Gram matrices are normalized by the number of positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgseq::{Frame, Sequence};
use crate::warp::{backward_warp, FlowField};
use crate::Scalar;

pub const LOG_EPS: f64 = 1e-8;
pub const COSINE_EPS: f64 = 1e-12;

/// Feature activations laid out `channels x positions`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    positions: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, positions: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || positions == 0 || data.len() != channels * positions {
            return Err(Error::shape(format!(
                "feature map of {} values for {channels} channels x {positions} positions",
                data.len()
            )));
        }
        Ok(FeatureMap { channels, positions, data })
    }

    /// Treats each frame channel as a feature channel.
    pub fn from_frame(f: &Frame<T>) -> Self {
        FeatureMap { channels: f.channels(), positions: f.height() * f.width(), data: f.data().to_vec() }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.positions..(c + 1) * self.positions]
    }

    fn check_same(&self, other: &FeatureMap<T>, what: &str) -> Result<()> {
        if self.channels != other.channels || self.positions != other.positions {
            return Err(Error::shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.channels, self.positions, other.channels, other.positions
            )));
        }
        Ok(())
    }
}

fn mse_slices<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = T::lit(a.len() as f64);
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() / n
}

fn frame_mse<T: Scalar>(a: &Frame<T>, b: &Frame<T>, what: &str) -> Result<T> {
    a.check_same_shape(b, what)?;
    Ok(mse_slices(a.data(), b.data()))
}

fn mean<T: Scalar>(v: &[T]) -> Result<T> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty score array".into()));
    }
    Ok(v.iter().copied().sum::<T>() / T::lit(v.len() as f64))
}

/// `-ln(max(x, ε))`
fn neg_log<T: Scalar>(x: T) -> T {
    -x.max(T::lit(LOG_EPS)).ln()
}

/// `Σ_t MSE(a_t, W(a_{t-1}, flows[t-1]))`.
pub fn warp_loss<T: Scalar>(a: &Sequence<T>, flows: &[FlowField<T>]) -> Result<T> {
    warp_loss_interior(a, flows, 0)
}

/// [`warp_loss`] restricted to pixels at least `margin` away from every side.
pub fn warp_loss_interior<T: Scalar>(a: &Sequence<T>, flows: &[FlowField<T>], margin: usize) -> Result<T> {
    if flows.len() + 1 != a.len() {
        return Err(Error::LengthMismatch(format!("{} flows for {} frames", flows.len(), a.len())));
    }
    let (h, w, _) = a.shape();
    if 2 * margin >= h.min(w) {
        return Err(Error::InvalidArgument(format!("margin {margin} too large for {w}x{h}")));
    }
    let frames = a.frames();
    let mut total = T::zero();
    for t in 1..a.len() {
        let warped = backward_warp(&frames[t - 1], &flows[t - 1])?;
        let (x, y) = (frames[t].crop(margin, margin, w - 2 * margin, h - 2 * margin)?, warped.crop(margin, margin, w - 2 * margin, h - 2 * margin)?);
        total = total + frame_mse(&x, &y, "warp_loss")?;
    }
    Ok(total)
}

/// `Σ_t MSE(g_t, g'_t)` over the two index-aligned legs of a ping-pong run.
pub fn pp_loss<T: Scalar>(forward: &[Frame<T>], backward: &[Frame<T>]) -> Result<T> {
    if forward.len() != backward.len() {
        return Err(Error::LengthMismatch(format!("forward leg {} vs backward leg {}", forward.len(), backward.len())));
    }
    forward.iter().zip(backward).try_fold(T::zero(), |acc, (g, gp)| Ok(acc + frame_mse(g, gp, "pp_loss")?))
}

pub fn content_loss_vsr<T: Scalar>(g: &Frame<T>, b: &Frame<T>) -> Result<T> {
    frame_mse(g, b, "content_loss_vsr")
}

/// Cycle-consistency content loss for both translation directions.
pub fn content_loss_uvt<T: Scalar>(cycle_a: &Frame<T>, a: &Frame<T>, cycle_b: &Frame<T>, b: &Frame<T>) -> Result<T> {
    Ok(frame_mse(cycle_a, a, "content_loss_uvt a")? + frame_mse(cycle_b, b, "content_loss_uvt b")?)
}

/// Non-saturating generator loss `mean(-log d)`.
pub fn adv_g_vsr<T: Scalar>(d_fake: &[T]) -> Result<T> {
    mean(&d_fake.iter().map(|&d| neg_log(d)).collect::<Vec<_>>())
}

/// Least-squares generator loss `mean((d - 1)²)`.
pub fn adv_g_uvt<T: Scalar>(d_fake: &[T]) -> Result<T> {
    mean(&d_fake.iter().map(|&d| (d - T::one()) * (d - T::one())).collect::<Vec<_>>())
}

/// `mean(-log d_real) + mean(-log(1 - d_fake))`.
pub fn d_loss_vsr<T: Scalar>(d_real: &[T], d_fake: &[T]) -> Result<T> {
    let real = mean(&d_real.iter().map(|&d| neg_log(d)).collect::<Vec<_>>())?;
    let fake = mean(&d_fake.iter().map(|&d| neg_log(T::one() - d)).collect::<Vec<_>>())?;
    Ok(real + fake)
}

/// `mean((d_real - 1)²) + mean(d_fake²)`.
pub fn d_loss_uvt<T: Scalar>(d_real: &[T], d_fake: &[T]) -> Result<T> {
    let real = mean(&d_real.iter().map(|&d| (d - T::one()) * (d - T::one())).collect::<Vec<_>>())?;
    let fake = mean(&d_fake.iter().map(|&d| d * d).collect::<Vec<_>>())?;
    Ok(real + fake)
}

/// `1 - cos(fg, fb)` over the flattened feature vectors.
pub fn cosine_feature_loss<T: Scalar>(fg: &FeatureMap<T>, fb: &FeatureMap<T>) -> Result<T> {
    fg.check_same(fb, "cosine_feature_loss")?;
    let dot: T = fg.data.iter().zip(&fb.data).map(|(&a, &b)| a * b).sum();
    let na = fg.data.iter().map(|&a| a * a).sum::<T>().sqrt();
    let nb = fb.data.iter().map(|&b| b * b).sum::<T>().sqrt();
    Ok(T::one() - dot / (na * nb).max(T::lit(COSINE_EPS)))
}

/// `F Fᵀ / positions`, row-major `channels x channels`.
pub fn gram_matrix<T: Scalar>(f: &FeatureMap<T>) -> Vec<T> {
    let c = f.channels;
    let n = T::lit(f.positions as f64);
    let mut g = vec![T::zero(); c * c];
    for i in 0..c {
        for j in i..c {
            let v = f.channel(i).iter().zip(f.channel(j)).map(|(&a, &b)| a * b).sum::<T>() / n;
            g[i * c + j] = v;
            g[j * c + i] = v;
        }
    }
    g
}

/// MSE between the Gram matrices of the two feature maps.
pub fn gram_loss<T: Scalar>(fg: &FeatureMap<T>, fb: &FeatureMap<T>) -> Result<T> {
    fg.check_same(fb, "gram_loss")?;
    Ok(mse_slices(&gram_matrix(fg), &gram_matrix(fb)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub warp: f64,
    pub pp: f64,
    pub adv: f64,
    pub phi: f64,
    pub content: f64,
}

/// Named weight presets from the published training configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Full VSR model, VGG feature term (λ_φ = 0.2).
    VsrTecoGan,
    /// Full VSR model, discriminator feature term (λ_φ = 1.0).
    VsrTecoGanDiscriminatorFeatures,
    /// VSR ablation without the ping-pong term.
    VsrDsOnly,
    /// Full UVT model at the start of training (λ_φ = 1e6, decays to 0).
    UvtTecoGan,
    /// UVT ablation without the ping-pong term.
    UvtDsOnly,
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Preset::VsrTecoGan, Preset::VsrTecoGanDiscriminatorFeatures, Preset::VsrDsOnly, Preset::UvtTecoGan, Preset::UvtDsOnly];

    pub fn name(self) -> &'static str {
        match self {
            Preset::VsrTecoGan => "vsr-teco-gan",
            Preset::VsrTecoGanDiscriminatorFeatures => "vsr-teco-gan-discriminator-features",
            Preset::VsrDsOnly => "vsr-ds-only",
            Preset::UvtTecoGan => "uvt-teco-gan",
            Preset::UvtDsOnly => "uvt-ds-only",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss preset {s:?}")))
    }
}

impl LossWeights {
    pub fn new(warp: f64, pp: f64, adv: f64, phi: f64, content: f64) -> Result<Self> {
        let w = LossWeights { warp, pp, adv, phi, content };
        if [warp, pp, adv, phi, content].iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(w)
        } else {
            Err(Error::InvalidArgument(format!("loss weights must be finite and non-negative: {w:?}")))
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::VsrTecoGan => LossWeights { warp: 1.0, pp: 0.5, adv: 1e-3, phi: 0.2, content: 1.0 },
            Preset::VsrTecoGanDiscriminatorFeatures => LossWeights { warp: 1.0, pp: 0.5, adv: 1e-3, phi: 1.0, content: 1.0 },
            Preset::VsrDsOnly => LossWeights { warp: 1.0, pp: 0.0, adv: 1e-3, phi: 0.2, content: 1.0 },
            Preset::UvtTecoGan => LossWeights { warp: 0.0, pp: 100.0, adv: 0.5, phi: 1e6, content: 10.0 },
            Preset::UvtDsOnly => LossWeights { warp: 0.0, pp: 0.0, adv: 0.5, phi: 1e6, content: 10.0 },
        }
    }
}

/// Individual loss values; `None` parts count as zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub warp: Option<f64>,
    pub pp: Option<f64>,
    pub adv: Option<f64>,
    pub phi: Option<f64>,
    pub content: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedTotal {
    pub total: f64,
    /// Names of the parts that were absent and treated as zero.
    pub missing: Vec<&'static str>,
}

impl WeightedTotal {
    pub fn has_missing(&self) -> bool {
        !self.missing.is_empty()
    }
}

pub fn total_generator_loss(parts: &LossParts, w: &LossWeights) -> WeightedTotal {
    let terms = [
        ("warp", parts.warp, w.warp),
        ("pp", parts.pp, w.pp),
        ("adv", parts.adv, w.adv),
        ("phi", parts.phi, w.phi),
        ("content", parts.content, w.content),
    ];
    let mut missing = Vec::new();
    let mut total = 0.0;
    for (name, value, weight) in terms {
        match value {
            Some(v) => total += weight * v,
            None => missing.push(name),
        }
    }
    WeightedTotal { total, missing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgseq::ColorSpace;
    use crate::warp::FlowDirection;

    fn uniform(v: f64) -> Frame<f64> {
        Frame::filled(4, 4, ColorSpace::Rgb, v)
    }

    #[test]
    fn content_losses() {
        assert_eq!(content_loss_vsr(&uniform(0.3), &uniform(0.3)).unwrap(), 0.0);
        assert!((content_loss_vsr(&uniform(0.0), &uniform(0.5)).unwrap() - 0.25).abs() < 1e-12);
        let n = 4 * 4 * 3;
        let mut one = uniform(0.0);
        one.data_mut()[5] = 1.0;
        assert!((content_loss_vsr(&one, &uniform(0.0)).unwrap() - 1.0 / n as f64).abs() < 1e-12);
        assert!(content_loss_vsr(&uniform(0.0), &Frame::filled(4, 5, ColorSpace::Rgb, 0.0)).is_err());

        let (a, b) = (uniform(0.2), uniform(0.7));
        assert_eq!(content_loss_uvt(&a, &a, &b, &b).unwrap(), 0.0);
        assert!((content_loss_uvt(&uniform(0.3), &a, &b, &b).unwrap() - 0.01).abs() < 1e-12);
        assert!((content_loss_uvt(&uniform(0.3), &a, &uniform(0.6), &b).unwrap() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn adversarial_closed_forms() {
        assert_eq!(adv_g_vsr(&[1.0f64, 1.0]).unwrap(), 0.0);
        assert!((adv_g_vsr(&[0.5f64]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let big = adv_g_vsr(&[0.0f64]).unwrap();
        assert!((big + LOG_EPS.ln()).abs() < 1e-12);

        assert_eq!(adv_g_uvt(&[1.0f64]).unwrap(), 0.0);
        assert_eq!(adv_g_uvt(&[0.0f64]).unwrap(), 1.0);
        assert_eq!(adv_g_uvt(&[0.5f64]).unwrap(), 0.25);

        assert_eq!(d_loss_vsr(&[1.0f64], &[0.0]).unwrap(), 0.0);
        assert!((d_loss_vsr(&[0.5f64], &[0.5]).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(d_loss_vsr(&[0.0f64], &[0.0]).unwrap().is_finite());

        assert_eq!(d_loss_uvt(&[1.0f64], &[0.0]).unwrap(), 0.0);
        assert_eq!(d_loss_uvt(&[0.0f64], &[1.0]).unwrap(), 2.0);
        assert_eq!(d_loss_uvt(&[0.5f64], &[0.5]).unwrap(), 0.5);
        assert!(d_loss_uvt::<f64>(&[], &[0.5]).is_err());
    }

    #[test]
    fn cosine_cases() {
        let f = FeatureMap::new(2, 3, vec![1.0f64, 2.0, 3.0, -1.0, 0.5, 2.0]).unwrap();
        assert!(cosine_feature_loss(&f, &f).unwrap().abs() < 1e-12);
        let twice = FeatureMap::new(2, 3, f.data().iter().map(|v| v * 2.0).collect()).unwrap();
        assert!(cosine_feature_loss(&f, &twice).unwrap().abs() < 1e-12);
        let a = FeatureMap::new(1, 2, vec![1.0f64, 0.0]).unwrap();
        let b = FeatureMap::new(1, 2, vec![0.0f64, 1.0]).unwrap();
        assert_eq!(cosine_feature_loss(&a, &b).unwrap(), 1.0);
        let zero = FeatureMap::new(1, 2, vec![0.0f64, 0.0]).unwrap();
        assert_eq!(cosine_feature_loss(&a, &zero).unwrap(), 1.0);
    }

    #[test]
    fn gram_cases() {
        let ones = FeatureMap::new(2, 4, vec![1.0f64; 8]).unwrap();
        assert_eq!(gram_matrix(&ones), vec![1.0; 4]);
        assert_eq!(gram_matrix(&FeatureMap::new(3, 2, vec![0.0f64; 6]).unwrap()), vec![0.0; 9]);
        let g1 = FeatureMap::new(1, 3, vec![1.0f64; 3]).unwrap();
        let g0 = FeatureMap::new(1, 3, vec![0.0f64; 3]).unwrap();
        assert_eq!(gram_loss(&g1, &g0).unwrap(), 1.0);
        assert_eq!(gram_loss(&g1, &g1).unwrap(), 0.0);
    }

    #[test]
    fn warp_loss_cases() {
        let frames: Vec<_> = (0..3)
            .map(|t| Frame::from_fn(8, 10, ColorSpace::Luma, move |x, y, _| ((x + 2 * t) * 7 + y * 3) as f64 % 11.0 / 10.0))
            .collect();
        let moving = Sequence::new(frames.clone(), 0).unwrap();
        let zero = vec![FlowField::zeros(8, 10, FlowDirection::Backward); 2];
        let plain: f64 = (1..3).map(|t| content_loss_vsr(&frames[t], &frames[t - 1]).unwrap()).sum();
        assert!((warp_loss(&moving, &zero).unwrap() - plain).abs() < 1e-12);
        // frame t = frame t-1 moved left by 2 px, so sampling t-1 at x + 2 aligns it
        let shift = vec![FlowField::constant(8, 10, 2.0, 0.0, FlowDirection::Backward); 2];
        assert!(warp_loss_interior(&moving, &shift, 2).unwrap() <= 1e-6);
        let static_seq = Sequence::new(vec![frames[0].clone(); 3], 0).unwrap();
        assert_eq!(warp_loss(&static_seq, &zero).unwrap(), 0.0);
        assert!(warp_loss(&moving, &zero[..1]).is_err());
    }

    #[test]
    fn pp_loss_cases() {
        assert_eq!(pp_loss::<f64>(&[], &[]).unwrap(), 0.0);
        let a = vec![uniform(0.2), uniform(0.4)];
        assert_eq!(pp_loss(&a, &a).unwrap(), 0.0);
        assert!((pp_loss(&[uniform(0.2)], &[uniform(0.3)]).unwrap() - 0.01).abs() < 1e-12);
        assert!(pp_loss(&a, &a[..1]).is_err());
    }

    #[test]
    fn weighted_totals() {
        let all_ones = LossParts { warp: Some(1.0), pp: Some(1.0), adv: Some(1.0), phi: Some(1.0), content: Some(1.0) };
        let t = total_generator_loss(&all_ones, &LossWeights::preset(Preset::VsrTecoGan));
        assert!((t.total - 2.701).abs() < 1e-12);
        assert!(!t.has_missing());
        let only_content = LossParts { content: Some(0.1), ..Default::default() };
        let t = total_generator_loss(&only_content, &LossWeights::preset(Preset::UvtTecoGan));
        assert!((t.total - 1.0).abs() < 1e-12);
        assert_eq!(t.missing, vec!["warp", "pp", "adv", "phi"]);
        let zero = LossParts { warp: Some(0.0), pp: Some(0.0), adv: Some(0.0), phi: Some(0.0), content: Some(0.0) };
        assert_eq!(total_generator_loss(&zero, &LossWeights::preset(Preset::UvtTecoGan)).total, 0.0);
        assert!(LossWeights::new(1.0, -0.1, 0.0, 0.0, 0.0).is_err());
        assert_eq!("vsr-ds-only".parse::<Preset>().unwrap(), Preset::VsrDsOnly);
    }
}
