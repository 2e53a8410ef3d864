use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use teco_core::imgseq::FramePattern;
use teco_core::metrics::{evaluate_scene, format_value, Metric, MetricReport, Protocol, RefMode, REPORT_SCHEMA};
use teco_core::perceptual::{external_table_backend, validate_table_backend, MsGradBackend, PerceptualBackend, MSGRAD_ID};

use crate::{parse_pair, write_json, FlowOpts, Mode, Status};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference (ground-truth) frame directory.
    #[arg(long, requires = "gen", conflicts_with = "root")]
    gt: Option<PathBuf>,
    /// Generated frame directory.
    #[arg(long)]
    gen: Option<PathBuf>,
    /// Scene name recorded in the report (defaults to the reference's parent directory).
    #[arg(long)]
    scene: Option<String>,
    /// Method name recorded in the report (defaults to the generated directory name).
    #[arg(long)]
    method: Option<String>,

    /// Batch mode: evaluate `<root>/<scene>/<method>` against `<root>/<scene>/<gt-name>`.
    #[arg(long, requires = "methods")]
    root: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value = "gt")]
    gt_name: String,
    /// Restrict batch mode to these scenes (default: every scene with a reference directory).
    #[arg(long, value_delimiter = ',')]
    scenes: Vec<String>,

    #[arg(long, value_enum, default_value = "vsr")]
    mode: Mode,
    /// Comma-separated metrics: psnr, lp, tdiff, tdiff_delta, tof, tlp.
    #[arg(long, value_delimiter = ',', default_value = "psnr,tdiff,tof,tlp")]
    metrics: Vec<String>,
    #[arg(long, default_value_t = 8)]
    border: usize,
    /// Cropped frame sides are reduced to multiples of this.
    #[arg(long, default_value_t = 8)]
    divisor: usize,
    /// Frames dropped at (start,end) for spatial metrics.
    #[arg(long, default_value = "2,2")]
    spatial_skip: String,
    /// Frames dropped at (start,end) for temporal metrics.
    #[arg(long, default_value = "3,2")]
    temporal_skip: String,
    #[arg(long, default_value = "%04d.png")]
    pattern: String,
    #[command(flatten)]
    flow: FlowOpts,

    /// Perceptual backend: `msgrad` (built in) or `table` (needs --backend-file).
    #[arg(long)]
    backend: Option<String>,
    /// CSV of `frameA,frameB,distance` rows for the table backend.
    #[arg(long)]
    backend_file: Option<PathBuf>,

    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the CSV summary here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Fail with exit code 1 unless every report satisfies e.g. `tof<=0.5` (unscaled means).
    #[arg(long = "assert")]
    asserts: Vec<String>,
}

struct Check {
    metric: Metric,
    op: &'static str,
    bound: f64,
}

impl Check {
    fn parse(s: &str) -> Result<Check> {
        for op in ["<=", ">=", "<", ">"] {
            if let Some((m, v)) = s.split_once(op) {
                let metric: Metric = m.trim().parse()?;
                let bound: f64 = v.trim().parse().with_context(|| format!("bad bound in assertion {s:?}"))?;
                return Ok(Check { metric, op, bound });
            }
        }
        bail!("assertion {s:?} must look like `metric<=value`");
    }

    fn holds(&self, v: f64) -> bool {
        match self.op {
            "<=" => v <= self.bound,
            ">=" => v >= self.bound,
            "<" => v < self.bound,
            _ => v > self.bound,
        }
    }
}

struct Job {
    scene: String,
    method: String,
    gt: PathBuf,
    gen: PathBuf,
}

fn dir_name(p: &Path) -> Option<String> {
    p.file_name().map(|s| s.to_string_lossy().into_owned())
}

fn jobs(a: &EvalArgs) -> Result<Vec<Job>> {
    if let Some(root) = &a.root {
        if !root.is_dir() {
            bail!("root directory {} does not exist", root.display());
        }
        let scenes = if a.scenes.is_empty() {
            let mut v: Vec<String> = std::fs::read_dir(root)
                .with_context(|| format!("listing {}", root.display()))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().join(&a.gt_name).is_dir())
                .filter_map(|e| dir_name(&e.path()))
                .collect();
            v.sort();
            v
        } else {
            a.scenes.clone()
        };
        if scenes.is_empty() {
            bail!("no scene under {} has a {:?} directory", root.display(), a.gt_name);
        }
        let mut out = Vec::new();
        for scene in &scenes {
            for method in &a.methods {
                out.push(Job {
                    scene: scene.clone(),
                    method: method.clone(),
                    gt: root.join(scene).join(&a.gt_name),
                    gen: root.join(scene).join(method),
                });
            }
        }
        return Ok(out);
    }
    let (Some(gt), Some(gen)) = (&a.gt, &a.gen) else {
        bail!("give --gt and --gen, or --root with --methods");
    };
    let scene = a
        .scene
        .clone()
        .or_else(|| gt.canonicalize().ok().and_then(|p| p.parent().and_then(dir_name)))
        .unwrap_or_else(|| "scene".into());
    let method = a.method.clone().or_else(|| dir_name(gen)).unwrap_or_else(|| "method".into());
    Ok(vec![Job { scene, method, gt: gt.clone(), gen: gen.clone() }])
}

fn backend(a: &EvalArgs) -> Result<Box<dyn PerceptualBackend<f64>>> {
    let kind = a.backend.clone().unwrap_or_else(|| if a.backend_file.is_some() { "table".into() } else { MSGRAD_ID.into() });
    match kind.as_str() {
        MSGRAD_ID => {
            if a.backend_file.is_some() {
                bail!("--backend-file is only used by the table backend");
            }
            Ok(Box::new(MsGradBackend))
        }
        "table" => {
            let path = a.backend_file.as_ref().context("the table backend needs --backend-file")?;
            let t = external_table_backend(path)?;
            validate_table_backend::<f64>(&t)?;
            Ok(Box::new(t))
        }
        other => bail!("unknown backend {other:?} (expected msgrad or table)"),
    }
}

fn protocol(a: &EvalArgs, backend_id: &str) -> Result<Protocol> {
    let metrics = a.metrics.iter().map(|m| m.parse::<Metric>()).collect::<Result<Vec<_>, _>>()?;
    let p = Protocol {
        mode: match a.mode {
            Mode::Vsr => RefMode::Vsr,
            Mode::Uvt => RefMode::Uvt,
        },
        border: a.border,
        divisor: a.divisor,
        spatial_skip: parse_pair(&a.spatial_skip)?,
        temporal_skip: parse_pair(&a.temporal_skip)?,
        flow: a.flow.params()?,
        backend: backend_id.to_string(),
        metrics,
    };
    p.validate()?;
    Ok(p)
}

fn label(m: Metric) -> String {
    let name = match m {
        Metric::Psnr => "PSNR",
        Metric::Lp => "LP",
        Metric::Tdiff => "T-diff",
        Metric::TdiffDelta => "dT-diff",
        Metric::Tof => "tOF",
        Metric::Tlp => "tLP",
    };
    let scale = m.display_scale();
    let arrow = if m.higher_is_better() { "↑" } else { "↓" };
    if scale == 1.0 {
        format!("{name}{arrow}")
    } else {
        format!("{name}x{scale}{arrow}")
    }
}

fn print_table(reports: &[MetricReport], metrics: &[Metric]) {
    let mut header = format!("{:<16} {:<16}", "scene", "method");
    for &m in metrics {
        header.push_str(&format!(" {:>12}", label(m)));
    }
    println!("{header}");
    for r in reports {
        let mut line = format!("{:<16} {:<16}", r.scene, r.method);
        for &m in metrics {
            let cell = match r.mean_of(m) {
                Some(v) if v.is_finite() => format!("{:.3}", v * m.display_scale()),
                Some(v) => format_value(v),
                None => "-".into(),
            };
            line.push_str(&format!(" {cell:>12}"));
        }
        println!("{line}");
    }
}

fn write_csv(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["scene", "method", "metric", "mean", "scale", "frames"])?;
    for r in reports {
        for (metric, mean) in &r.mean {
            let frames = r.per_frame.get(metric).map_or(0, Vec::len);
            w.write_record([
                r.scene.as_str(),
                r.method.as_str(),
                metric.as_str(),
                &format_value(*mean),
                &format_value(r.scaling[metric]),
                &frames.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(a: EvalArgs) -> Result<Status> {
    let checks = a.asserts.iter().map(|s| Check::parse(s)).collect::<Result<Vec<_>>>()?;
    let backend = backend(&a)?;
    let protocol = protocol(&a, backend.id())?;
    let pattern = FramePattern::parse(&a.pattern)?;
    let mut reports = Vec::new();
    for job in jobs(&a)? {
        for dir in [&job.gt, &job.gen] {
            if !dir.is_dir() {
                bail!("frame directory {} does not exist", dir.display());
            }
        }
        let r = evaluate_scene(&job.scene, &job.method, &job.gt, &job.gen, &pattern, &protocol, backend.as_ref())?;
        reports.push(r);
    }

    let to_stdout = a.json.as_ref().is_some_and(|p| p.as_os_str() == "-");
    if a.json.is_some() {
        write_json(&a.json, &json!({ "schema": REPORT_SCHEMA, "reports": reports }))?;
    }
    if let Some(p) = &a.csv {
        write_csv(p, &reports)?;
    }
    if !to_stdout {
        let mut shown = protocol.metrics.clone();
        shown.sort();
        shown.dedup();
        print_table(&reports, &shown);
        println!("backend: {}", protocol.backend);
    }

    let mut failed = false;
    for r in &reports {
        for c in &checks {
            match r.mean_of(c.metric) {
                Some(v) if c.holds(v) => {}
                Some(v) => {
                    failed = true;
                    eprintln!("assertion failed: {}/{}: {} = {} not {} {}", r.scene, r.method, c.metric, format_value(v), c.op, c.bound);
                }
                None => {
                    failed = true;
                    eprintln!("assertion failed: {}/{}: {} was not computed", r.scene, r.method, c.metric);
                }
            }
        }
    }
    Ok(if failed { Status::AssertionFailed } else { Status::Ok })
}
