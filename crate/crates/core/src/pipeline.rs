//! Ping-pong sequences, discriminator triplets and the curriculum that
//! moves the discriminator from static to warped to original triplets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgseq::{ColorSpace, Frame, Sequence};
use crate::warp::{backward_warp, scale_flow, zero_border, FlowField};
use crate::Scalar;

/// Default boundary zeroed on warped triplets.
pub const TRIPLET_BORDER_RESET: usize = 16;

/// `a_1 … a_n … a_1`, length `2n - 1`.
pub fn make_pp_sequence<T: Scalar>(s: &Sequence<T>) -> Sequence<T> {
    let f = s.frames();
    let frames: Vec<_> = f.iter().chain(f.iter().rev().skip(1)).cloned().collect();
    Sequence::new(frames, s.start_index()).expect("same frames, same shapes")
}

/// Index map of a ping-pong sequence of `n` source frames (0-based).
pub fn pp_index_map(n: usize) -> Vec<usize> {
    (0..n).chain((0..n.saturating_sub(1)).rev()).collect()
}

/// Splits generated ping-pong output into `(g_1…g_{n-1}, g'_1…g'_{n-1})`;
/// the shared middle frame `g_n` belongs to neither leg.
pub fn split_pp_outputs<T: Scalar>(out: &[Frame<T>]) -> Result<(Vec<Frame<T>>, Vec<Frame<T>>)> {
    if out.len() % 2 == 0 {
        return Err(Error::InvalidArgument(format!("ping-pong output must have odd length, got {}", out.len())));
    }
    let n = out.len().div_ceil(2);
    let forward = out[..n - 1].to_vec();
    let backward = out[n..].iter().rev().cloned().collect();
    Ok((forward, backward))
}

/// Channel planes of equal size stacked in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ChannelStack<T> {
    pub fn concat<'a>(frames: impl IntoIterator<Item = &'a Frame<T>>) -> Result<Self> {
        let mut it = frames.into_iter().peekable();
        let first = it.peek().ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
        let (height, width) = (first.height(), first.width());
        let mut data = Vec::new();
        let mut channels = 0;
        for f in it {
            if f.height() != height || f.width() != width {
                return Err(Error::shape(format!("stacking {}x{} onto {width}x{height}", f.width(), f.height())));
            }
            data.extend_from_slice(f.data());
            channels += f.channels();
        }
        Ok(ChannelStack { height, width, channels, data })
    }

    fn concat_stacks(stacks: &[&ChannelStack<T>]) -> Result<Self> {
        let first = stacks[0];
        let mut data = Vec::new();
        let mut channels = 0;
        for s in stacks {
            if s.height != first.height || s.width != first.width {
                return Err(Error::shape(format!("stacking {}x{} onto {}x{}", s.width, s.height, first.width, first.height)));
            }
            data.extend_from_slice(&s.data);
            channels += s.channels;
        }
        Ok(ChannelStack { height: first.height, width: first.width, channels, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletKind {
    Original,
    Warped,
    Static,
}

/// Three frames `(t-1, t, t+1)` concatenated along channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet<T> {
    stack: ChannelStack<T>,
    colorspace: ColorSpace,
    kind: TripletKind,
    center_index: usize,
}

impl<T: Scalar> Triplet<T> {
    fn from_slots(slots: [&Frame<T>; 3], kind: TripletKind, center_index: usize) -> Result<Self> {
        for s in &slots[1..] {
            slots[0].check_same_shape(s, "triplet slots")?;
        }
        Ok(Triplet { stack: ChannelStack::concat(slots)?, colorspace: slots[0].colorspace(), kind, center_index })
    }

    pub fn kind(&self) -> TripletKind {
        self.kind
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn stack(&self) -> &ChannelStack<T> {
        &self.stack
    }

    pub fn channels(&self) -> usize {
        self.stack.channels
    }

    /// Slot 0, 1 or 2 as a frame.
    pub fn slot(&self, i: usize) -> Frame<T> {
        assert!(i < 3, "triplet slot {i} out of range");
        let c = self.colorspace.channels();
        let n = self.stack.height * self.stack.width * c;
        Frame::new(self.stack.height, self.stack.width, self.colorspace, self.stack.data[i * n..(i + 1) * n].to_vec())
            .expect("slot geometry")
    }

    fn blend(&self, other: &Triplet<T>, alpha: T, kind: TripletKind) -> Result<Triplet<T>> {
        if self.stack.channels != other.stack.channels || self.stack.height != other.stack.height || self.stack.width != other.stack.width {
            return Err(Error::shape("blending triplets of different shape"));
        }
        let keep = T::one() - alpha;
        let data = self.stack.data.iter().zip(&other.stack.data).map(|(&a, &b)| keep * a + alpha * b).collect();
        Ok(Triplet { stack: ChannelStack { data, ..self.stack.clone() }, kind, ..self.clone() })
    }
}

fn interior(s: &Sequence<impl Scalar>, t: usize) -> Result<()> {
    if t == 0 || t + 1 >= s.len() {
        return Err(Error::InvalidArgument(format!("triplet centre {t} needs neighbours in a sequence of {}", s.len())));
    }
    Ok(())
}

/// `{g_{t-1}, g_t, g_{t+1}}`
pub fn triplet_original<T: Scalar>(s: &Sequence<T>, t: usize) -> Result<Triplet<T>> {
    interior(s, t)?;
    let f = s.frames();
    Triplet::from_slots([&f[t - 1], &f[t], &f[t + 1]], TripletKind::Original, t)
}

/// `{W(g_{t-1}, v_t), g_t, W(g_{t+1}, v'_t)}` with `border_reset` pixels
/// zeroed on every slot. `fwd` aligns frame `t-1` onto `t`, `bwd` aligns
/// frame `t+1` onto `t`.
pub fn triplet_warped<T: Scalar>(
    s: &Sequence<T>,
    fwd: &FlowField<T>,
    bwd: &FlowField<T>,
    t: usize,
    border_reset: usize,
) -> Result<Triplet<T>> {
    interior(s, t)?;
    let f = s.frames();
    let prev = zero_border(&backward_warp(&f[t - 1], fwd)?, border_reset)?;
    let center = zero_border(&f[t], border_reset)?;
    let next = zero_border(&backward_warp(&f[t + 1], bwd)?, border_reset)?;
    Triplet::from_slots([&prev, &center, &next], TripletKind::Warped, t)
}

/// `{g_t, g_t, g_t}`
pub fn triplet_static<T: Scalar>(f: &Frame<T>, center_index: usize) -> Triplet<T> {
    Triplet::from_slots([f, f, f], TripletKind::Static, center_index).expect("identical slots")
}

/// Discriminator input `{original, warped, conditional}` stacked in that order.
pub fn vsr_disc_input<T: Scalar>(original: &Triplet<T>, warped: &Triplet<T>, conditional: &Triplet<T>) -> Result<ChannelStack<T>> {
    ChannelStack::concat_stacks(&[&original.stack, &warped.stack, &conditional.stack])
}

/// Timing of the two curriculum transitions as fractions of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub warped_window: (f64, f64),
    pub original_window: (f64, f64),
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig { warped_window: (0.0, 0.5), original_window: (0.5, 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub step: u64,
    pub total_steps: u64,
    /// Share of (static, warped-track, original-track) samples.
    pub fractions: (f64, f64, f64),
    /// Blend weight of warped-track samples toward the warped triplet.
    pub alpha_warped: f64,
    /// Blend weight of original-track samples toward the (flow-faded) original triplet.
    pub alpha_original: f64,
    /// Flow scale applied on the original track; fades 1 → 0.
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurriculumTrack {
    Warped,
    Original,
}

impl CurriculumState {
    pub fn alpha(&self, track: CurriculumTrack) -> f64 {
        match track {
            CurriculumTrack::Warped => self.alpha_warped,
            CurriculumTrack::Original => self.alpha_original,
        }
    }
}

fn ramp(p: f64, (lo, hi): (f64, f64)) -> f64 {
    if p <= lo {
        0.0
    } else if p >= hi {
        1.0
    } else {
        (p - lo) / (hi - lo)
    }
}

/// Linear schedule from 100% static triplets to a (50%, 25%, 25%) mix.
pub fn curriculum_schedule(step: u64, total_steps: u64) -> CurriculumState {
    curriculum_schedule_with(step, total_steps, &CurriculumConfig::default())
}

pub fn curriculum_schedule_with(step: u64, total_steps: u64, cfg: &CurriculumConfig) -> CurriculumState {
    let p = if total_steps == 0 { 1.0 } else { (step.min(total_steps)) as f64 / total_steps as f64 };
    let aw = ramp(p, cfg.warped_window);
    let ao = ramp(p, cfg.original_window);
    let warped = 0.25 * aw;
    let original = 0.25 * ao;
    CurriculumState {
        step,
        total_steps,
        fractions: (1.0 - warped - original, warped, original),
        alpha_warped: aw,
        alpha_original: ao,
        beta: 1.0 - ao,
    }
}

/// Source frames and flows of an original-track sample.
#[derive(Debug, Clone, Copy)]
pub struct OriginalParts<'a, T> {
    pub prev: &'a Frame<T>,
    pub center: &'a Frame<T>,
    pub next: &'a Frame<T>,
    /// Aligns `prev` onto `center`.
    pub flow_prev: &'a FlowField<T>,
    /// Aligns `next` onto `center`.
    pub flow_next: &'a FlowField<T>,
}

/// Warped track: `(1-α)·static + α·warped`. Original track:
/// `(1-α)·static + α·{W(g_{t-1}, β v_t), g_t, W(g_{t+1}, β v'_t)}`.
pub fn curriculum_mix<T: Scalar>(
    static_triplet: &Triplet<T>,
    warped: &Triplet<T>,
    original: &OriginalParts<'_, T>,
    state: &CurriculumState,
    track: CurriculumTrack,
) -> Result<Triplet<T>> {
    let alpha = T::lit(state.alpha(track));
    match track {
        CurriculumTrack::Warped => static_triplet.blend(warped, alpha, TripletKind::Warped),
        CurriculumTrack::Original => {
            let beta = T::lit(state.beta);
            let prev = backward_warp(original.prev, &scale_flow(original.flow_prev, beta))?;
            let next = backward_warp(original.next, &scale_flow(original.flow_next, beta))?;
            let faded = Triplet::from_slots([&prev, original.center, &next], TripletKind::Original, static_triplet.center_index)?;
            static_triplet.blend(&faded, alpha, TripletKind::Original)
        }
    }
}
