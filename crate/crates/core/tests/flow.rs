mod common;

use std::time::Instant;

use common::{mean, roll, texture};
use teco_core::flow::{estimate_backward_flow, estimate_flow, read_flo, write_flo, FlowParams};
use teco_core::warp::{FlowDirection, FlowField};

fn central_stats(flow: &FlowField<f64>, frac: f64, du: f64, dv: f64) -> (f64, f64, f64) {
    let (h, w) = (flow.height(), flow.width());
    let mx = ((1.0 - frac) / 2.0 * w as f64) as usize;
    let my = ((1.0 - frac) / 2.0 * h as f64) as usize;
    let (mut su, mut sv, mut epe, mut n) = (0.0, 0.0, 0.0, 0.0);
    for y in my..h - my {
        for x in mx..w - mx {
            let (u, v) = flow.at(x, y);
            su += u;
            sv += v;
            epe += ((u - du).powi(2) + (v - dv).powi(2)).sqrt();
            n += 1.0;
        }
    }
    (su / n, sv / n, epe / n)
}

#[test]
fn shifted_texture_recovers_displacement() {
    let prev = texture(7, 256, 256, 2.0);
    let next = roll(&prev, 3, -2);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t = Instant::now();
    let flow = pool.install(|| estimate_flow(&prev, &next, &FlowParams::default())).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let (u, v, epe) = central_stats(&flow, 0.8, 3.0, -2.0);
    assert!((u - 3.0).abs() <= 0.3, "mean u {u}");
    assert!((v + 2.0).abs() <= 0.3, "mean v {v}");
    assert!(epe <= 0.5, "epe {epe}");
    assert!(elapsed <= 2.0, "took {elapsed}s");
}

#[test]
fn one_pixel_translation() {
    let prev = texture(11, 128, 128, 2.0);
    let next = roll(&prev, 1, 0);
    let flow = estimate_flow(&prev, &next, &FlowParams::default()).unwrap();
    let (u, v, _) = central_stats(&flow, 0.8, 1.0, 0.0);
    assert!((u - 1.0).abs() <= 0.2, "mean u {u}");
    assert!(v.abs() <= 0.2, "mean v {v}");
}

#[test]
fn swapping_inputs_negates_flow() {
    let a = texture(3, 128, 128, 2.0);
    let b = roll(&a, 2, 1);
    let p = FlowParams::default();
    let f = estimate_flow(&a, &b, &p).unwrap();
    let g = estimate_flow(&b, &a, &p).unwrap();
    let (fu, fv, _) = central_stats(&f, 0.8, 0.0, 0.0);
    let (gu, gv, _) = central_stats(&g, 0.8, 0.0, 0.0);
    assert!((fu + gu).abs() <= 0.3 && (fv + gv).abs() <= 0.3, "({fu},{fv}) vs ({gu},{gv})");
}

#[test]
fn backward_flow_points_to_previous_frame() {
    let previous = texture(5, 128, 128, 2.0);
    let current = roll(&previous, 2, 0);
    let f = estimate_backward_flow(&current, &previous, &FlowParams::default()).unwrap();
    assert_eq!(f.direction(), FlowDirection::Backward);
    let (u, _, _) = central_stats(&f, 0.8, 0.0, 0.0);
    assert!((u + 2.0).abs() <= 0.3, "mean u {u}");
}

#[test]
fn flow_ignores_global_intensity_offset() {
    let a = texture(9, 96, 96, 2.0);
    let b = roll(&a, 1, 1);
    let p = FlowParams::default();
    let f = estimate_flow(&a, &b, &p).unwrap();
    let g = estimate_flow(&a.map(|v| v + 0.05), &b.map(|v| v + 0.05), &p).unwrap();
    let max = f.u().iter().zip(g.u()).chain(f.v().iter().zip(g.v())).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(max <= 1e-3, "max change {max}");
}

#[test]
fn flow_is_deterministic_across_pools() {
    let a = texture(21, 80, 112, 2.0);
    let b = roll(&a, -1, 2);
    let p = FlowParams::default();
    let runs: Vec<FlowField<f64>> = [1, 3, 8]
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| estimate_flow(&a, &b, &p)).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn single_precision_agrees_with_double() {
    let a = texture(2, 64, 64, 2.0);
    let b = roll(&a, 1, 0);
    let p = FlowParams::default();
    let f64flow = estimate_flow(&a, &b, &p).unwrap();
    let f32flow = estimate_flow(&a.cast::<f32>(), &b.cast::<f32>(), &p).unwrap();
    let du = mean(&f64flow.u().iter().zip(f32flow.u()).map(|(x, &y)| (x - y as f64).abs()).collect::<Vec<_>>());
    assert!(du < 1e-2, "mean |du| {du}");
}

#[test]
fn flo_file_round_trip() {
    let a = texture(4, 40, 56, 2.0);
    let f = estimate_flow(&a, &roll(&a, 1, 0), &FlowParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.flo");
    write_flo(&f, &path).unwrap();
    let back: FlowField<f64> = read_flo(&path).unwrap();
    assert_eq!(back.width(), 56);
    assert_eq!(back.height(), 40);
    for (x, y) in f.u().iter().zip(back.u()) {
        assert_eq!(*x as f32 as f64, *y);
    }
}
