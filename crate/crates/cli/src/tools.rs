use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use teco_core::btmodel::{fit_bradley_terry, FitOptions, VoteMatrix};
use teco_core::flow::{estimate_backward_flow, estimate_flow, write_flo};
use teco_core::imgseq::{load_frame, load_sequence, save_frame, Frame, FramePattern, Sequence};
use teco_core::losses::{
    adv_g_uvt, adv_g_vsr, content_loss_vsr, cosine_feature_loss, d_loss_uvt, d_loss_vsr, gram_loss, pp_loss,
    total_generator_loss, warp_loss, FeatureMap, LossParts, LossWeights, Preset,
};
use teco_core::metrics::backward_flows;
use teco_core::pipeline::{make_pp_sequence, pp_index_map, split_pp_outputs, triplet_original, triplet_static, triplet_warped, Triplet};

use crate::{write_json, FlowOpts, Mode, Status};

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// First frame.
    a: PathBuf,
    /// Second frame; the flow satisfies a(x) ≈ b(x + flow(x)).
    b: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    flow: FlowOpts,
}

pub fn flow(a: FlowArgs) -> Result<Status> {
    let p = a.flow.params()?;
    let fa: Frame<f64> = load_frame(&a.a)?;
    let fb: Frame<f64> = load_frame(&a.b)?;
    let f = estimate_flow(&fa, &fb, &p)?;
    write_flo(&f, &a.out)?;
    let n = f.u().len() as f64;
    let max = f.u().iter().chain(f.v()).fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "{}x{} flow written to {}: mean u {:.4}, mean v {:.4}, max |component| {:.4}",
        f.width(),
        f.height(),
        a.out.display(),
        f.u().iter().sum::<f64>() / n,
        f.v().iter().sum::<f64>() / n,
        max
    );
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct PpArgs {
    /// Directory of source frames.
    input: PathBuf,
    /// Output directory (created if missing).
    out: PathBuf,
    #[arg(long, default_value = "%04d.png")]
    pattern: String,
    /// Also write original, warped and static discriminator triplets for every interior frame.
    #[arg(long)]
    triplets: bool,
    /// Pixels zeroed along each side of warped triplets.
    #[arg(long, default_value_t = teco_core::pipeline::TRIPLET_BORDER_RESET)]
    border_reset: usize,
    #[command(flatten)]
    flow: FlowOpts,
}

fn save_triplet(t: &Triplet<f64>, dir: &std::path::Path, name: &str) -> Result<Vec<String>> {
    (0..3)
        .map(|i| {
            let file = format!("{name}_{i}.png");
            save_frame(&t.slot(i), dir.join(&file))?;
            Ok(file)
        })
        .collect()
}

pub fn pp(a: PpArgs) -> Result<Status> {
    if !a.input.is_dir() {
        bail!("frame directory {} does not exist", a.input.display());
    }
    let pattern = FramePattern::parse(&a.pattern)?;
    let s: Sequence<f64> = load_sequence(&a.input, &pattern, None)?;
    let pp = make_pp_sequence(&s);
    let frames_dir = a.out.join("frames");
    std::fs::create_dir_all(&frames_dir).with_context(|| format!("creating {}", frames_dir.display()))?;
    let mut files = Vec::new();
    for (i, f) in pp.frames().iter().enumerate() {
        let name = pattern.format(i as i64);
        save_frame(f, frames_dir.join(&name))?;
        files.push(format!("frames/{name}"));
    }
    let source: Vec<i64> = pp_index_map(s.len()).iter().map(|&i| s.start_index() + i as i64).collect();

    let mut triplets = Vec::new();
    if a.triplets {
        let p = a.flow.params()?;
        let fr = s.frames();
        for t in 1..s.len().saturating_sub(1) {
            let dir = a.out.join("triplets").join(format!("{:04}", s.start_index() + t as i64));
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let fwd = estimate_backward_flow(&fr[t], &fr[t - 1], &p)?;
            let bwd = estimate_backward_flow(&fr[t], &fr[t + 1], &p)?;
            let rel = |v: Vec<String>, dir: &std::path::Path| -> Vec<String> {
                let base = dir.strip_prefix(&a.out).unwrap_or(dir).to_string_lossy().into_owned();
                v.into_iter().map(|f| format!("{base}/{f}")).collect()
            };
            triplets.push(json!({
                "center": s.start_index() + t as i64,
                "original": rel(save_triplet(&triplet_original(&s, t)?, &dir, "original")?, &dir),
                "warped": rel(save_triplet(&triplet_warped(&s, &fwd, &bwd, t, a.border_reset)?, &dir, "warped")?, &dir),
                "static": rel(save_triplet(&triplet_static(&fr[t], t), &dir, "static")?, &dir),
            }));
        }
    }

    let manifest = json!({
        "schema": 1,
        "source_dir": a.input.to_string_lossy(),
        "source_frames": s.len(),
        "length": pp.len(),
        "index_map": source,
        "frames": files,
        "slot_order": ["t-1", "t", "t+1"],
        "stack_order": ["original", "warped", "conditional"],
        "border_reset": a.border_reset,
        "triplets": triplets,
        "note": "training code should stop gradients through the flow used for warped triplets",
    });
    write_json(&Some(a.out.join("manifest.json")), &manifest)?;
    println!("{} frames in, {} frames written to {}", s.len(), pp.len(), frames_dir.display());
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Generated frames.
    #[arg(long)]
    gen: PathBuf,
    /// Target frames for the content and feature terms.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Treat --gen as ping-pong output (length 2n-1) and report the ping-pong term.
    #[arg(long)]
    pp: bool,
    /// Discriminator scores on generated samples, comma-separated.
    #[arg(long, value_delimiter = ',')]
    d_fake: Vec<f64>,
    /// Discriminator scores on real samples, comma-separated.
    #[arg(long, value_delimiter = ',')]
    d_real: Vec<f64>,
    #[arg(long, value_enum, default_value = "vsr")]
    mode: Mode,
    /// Weight preset for the total.
    #[arg(long, default_value = "vsr-teco-gan")]
    preset: String,
    #[arg(long, default_value = "%04d.png")]
    pattern: String,
    #[command(flatten)]
    flow: FlowOpts,
    /// Output path (stdout when omitted).
    #[arg(long)]
    json: Option<PathBuf>,
}

pub fn losses(a: LossArgs) -> Result<Status> {
    let preset: Preset = a.preset.parse()?;
    let weights = LossWeights::preset(preset);
    let p = a.flow.params()?;
    let pattern = FramePattern::parse(&a.pattern)?;
    if !a.gen.is_dir() {
        bail!("frame directory {} does not exist", a.gen.display());
    }
    let gen: Sequence<f64> = load_sequence(&a.gen, &pattern, None)?;

    let mut parts = LossParts::default();
    let forward = if a.pp {
        let (fwd, bwd) = split_pp_outputs(gen.frames())?;
        parts.pp = Some(pp_loss(&fwd, &bwd)?);
        let n = fwd.len() + 1;
        gen.slice(0, n)?
    } else {
        gen.clone()
    };
    if forward.len() > 1 {
        parts.warp = Some(warp_loss(&forward, &backward_flows(&forward, &p)?)?);
    }

    let mut gram = None;
    if let Some(dir) = &a.target {
        if !dir.is_dir() {
            bail!("frame directory {} does not exist", dir.display());
        }
        let target: Sequence<f64> = load_sequence(dir, &pattern, None)?;
        if target.len() != forward.len() {
            bail!("target has {} frames, generated sequence has {}", target.len(), forward.len());
        }
        let (mut content, mut phi, mut g) = (0.0, 0.0, 0.0);
        for (x, y) in forward.frames().iter().zip(target.frames()) {
            content += content_loss_vsr(x, y)?;
            let (fx, fy) = (FeatureMap::from_frame(x), FeatureMap::from_frame(y));
            phi += cosine_feature_loss(&fx, &fy)?;
            g += gram_loss(&fx, &fy)?;
        }
        parts.content = Some(content);
        parts.phi = Some(phi);
        gram = Some(g);
    }

    let mut d_loss = None;
    if !a.d_fake.is_empty() {
        parts.adv = Some(match a.mode {
            Mode::Vsr => adv_g_vsr(&a.d_fake)?,
            Mode::Uvt => adv_g_uvt(&a.d_fake)?,
        });
        if !a.d_real.is_empty() {
            d_loss = Some(match a.mode {
                Mode::Vsr => d_loss_vsr(&a.d_real, &a.d_fake)?,
                Mode::Uvt => d_loss_uvt(&a.d_real, &a.d_fake)?,
            });
        }
    } else if !a.d_real.is_empty() {
        bail!("--d-real needs --d-fake");
    }

    let total = total_generator_loss(&parts, &weights);
    let out = json!({
        "frames": forward.len(),
        "mode": match a.mode { Mode::Vsr => "vsr", Mode::Uvt => "uvt" },
        "parts": parts,
        "gram": gram,
        "d_loss": d_loss,
        "preset": preset.name(),
        "weights": weights,
        "total": total,
        "feature_space": "pixels",
    });
    write_json(&a.json, &out)?;
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct BtArgs {
    /// CSV of `winner,loser,count` rows (header optional).
    #[arg(long)]
    votes: PathBuf,
    /// Item pinned at score 0 (default: first item in the file).
    #[arg(long)]
    anchor: Option<String>,
    /// Add half a pseudo-win each way on every compared pair.
    #[arg(long)]
    smooth: bool,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bt(a: BtArgs) -> Result<Status> {
    let mut v = VoteMatrix::from_csv(&a.votes)?;
    if let Some(anchor) = &a.anchor {
        v = v.with_anchor(anchor)?;
    }
    let fit = fit_bradley_terry(&v, FitOptions { smoothing: a.smooth })?;
    let items: Vec<_> = fit
        .items
        .iter()
        .zip(&fit.scores)
        .zip(&fit.stderr)
        .map(|((name, s), e)| json!({ "name": name, "score": s, "stderr": e }))
        .collect();
    let out = json!({
        "anchor": fit.items[0],
        "items": items,
        "iterations": fit.iterations,
        "smoothed": fit.smoothed,
    });
    write_json(&a.out, &out)?;
    Ok(Status::Ok)
}
