mod common;

use std::path::Path;

use common::{add_noise, panning, roll, stderr, stdout, teco, texture, write_seq};
use serde_json::Value;
use teco_core::flow::read_flo;
use teco_core::imgseq::{save_frame, ColorSpace, Sequence};
use teco_core::warp::FlowField;

fn scene(root: &Path) -> (String, String) {
    let gt = panning(1, 8, 48, 64, 1, 0);
    write_seq(&gt, &root.join("gt"));
    write_seq(&add_noise(&gt, 0.04, 3), &root.join("noisy"));
    (root.join("gt").to_string_lossy().into_owned(), root.join("noisy").to_string_lossy().into_owned())
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn eval_self_reports_zero_points_and_inf() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, _) = scene(dir.path());
    let json = dir.path().join("r.json");
    let o = teco(&["eval", "--gt", &gt, "--gen", &gt, "--metrics", "psnr,tof,tlp,tdiff_delta", "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("PSNR↑") && out.contains("tOFx10↓") && out.contains("tLPx100↓"), "{out}");
    let v = read_json(&json);
    assert_eq!(v["schema"], 1);
    let r = &v["reports"][0];
    assert_eq!(r["mean"]["psnr"], "inf");
    assert_eq!(r["mean"]["tof"], 0.0);
    assert_eq!(r["mean"]["tlp"], 0.0);
    assert_eq!(r["mean"]["tdiff_delta"], 0.0);
    assert_eq!(r["protocol"]["backend"], "msgrad");
    assert_eq!(r["scaling"]["tof"], 10.0);
}

#[test]
fn eval_csv_matches_json() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, gen) = scene(dir.path());
    let (json, csv) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let o = teco(&["eval", "--gt", &gt, "--gen", &gen, "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&json);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let mean = &v["reports"][0]["mean"][f[2]];
        assert_eq!(f[3].parse::<f64>().unwrap(), mean.as_f64().unwrap(), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 4);
    assert_eq!(v["reports"][0]["method"], "noisy");
}

#[test]
fn eval_missing_directory_exits_2_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, _) = scene(dir.path());
    let missing = dir.path().join("nowhere");
    let o = teco(&["eval", "--gt", &gt, "--gen", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn eval_rejects_psnr_in_uvt_mode_and_unknown_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, gen) = scene(dir.path());
    let o = teco(&["eval", "--gt", &gt, "--gen", &gen, "--mode", "uvt", "--metrics", "psnr"]);
    assert_eq!(o.status.code(), Some(2));
    let o = teco(&["eval", "--gt", &gt, "--gen", &gen, "--metrics", "ssim"]);
    assert_eq!(o.status.code(), Some(2));
    let o = teco(&["eval", "--gt", &gt, "--gen", &gen, "--mode", "uvt", "--metrics", "tof,tlp"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn eval_assertions_set_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, gen) = scene(dir.path());
    let ok = teco(&["eval", "--gt", &gt, "--gen", &gen, "--metrics", "psnr", "--assert", "psnr>=10"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let bad = teco(&["eval", "--gt", &gt, "--gen", &gen, "--metrics", "psnr", "--assert", "psnr>=80"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("psnr"));
    let missing = teco(&["eval", "--gt", &gt, "--gen", &gen, "--metrics", "psnr", "--assert", "tof<=1"]);
    assert_eq!(missing.status.code(), Some(1));
    let malformed = teco(&["eval", "--gt", &gt, "--gen", &gen, "--assert", "tof~1"]);
    assert_eq!(malformed.status.code(), Some(2));
}

#[test]
fn eval_batch_mode_covers_scenes_and_methods() {
    let root = tempfile::tempdir().unwrap();
    for (i, name) in ["calendar", "walk"].iter().enumerate() {
        let d = root.path().join(name);
        let gt = panning(10 + i as u64, 7, 40, 40, 1, 0);
        write_seq(&gt, &d.join("gt"));
        write_seq(&add_noise(&gt, 0.02, 1), &d.join("a"));
        write_seq(&add_noise(&gt, 0.08, 2), &d.join("b"));
    }
    let json = root.path().join("all.json");
    let o = teco(&[
        "eval",
        "--root",
        root.path().to_str().unwrap(),
        "--methods",
        "a,b",
        "--metrics",
        "psnr,tdiff",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&json);
    let names: Vec<(String, String)> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["scene"].as_str().unwrap().to_string(), r["method"].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(names, vec![("calendar".into(), "a".into()), ("calendar".into(), "b".into()), ("walk".into(), "a".into()), ("walk".into(), "b".into())]);
    let psnr = |i: usize| v["reports"][i]["mean"]["psnr"].as_f64().unwrap();
    assert!(psnr(0) > psnr(1));
}

#[test]
fn eval_table_backend_uses_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, gen) = scene(dir.path());
    let table = dir.path().join("lpips.csv");
    let mut rows = String::from("frameA,frameB,distance\n");
    for i in 0..7 {
        rows.push_str(&format!("gt/{i:04}.png,gt/{:04}.png,0.1\n", i + 1));
        rows.push_str(&format!("noisy/{i:04}.png,noisy/{:04}.png,0.3\n", i + 1));
    }
    std::fs::write(&table, rows).unwrap();
    let json = dir.path().join("r.json");
    let o = teco(&["eval", "--gt", &gt, "--gen", &gen, "--metrics", "tlp", "--backend-file", table.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&json);
    assert_eq!(v["reports"][0]["protocol"]["backend"], "table:lpips.csv");
    assert!((v["reports"][0]["mean"]["tlp"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn flow_command_writes_flo() {
    let dir = tempfile::tempdir().unwrap();
    let a = texture(4, 64, 64, ColorSpace::Rgb);
    let (pa, pb, out) = (dir.path().join("a.png"), dir.path().join("b.png"), dir.path().join("f.flo"));
    save_frame(&a, &pa).unwrap();
    save_frame(&a, &pb).unwrap();
    let o = teco(&["flow", pa.to_str().unwrap(), pb.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f: FlowField<f64> = read_flo(&out).unwrap();
    assert!(f.u().iter().chain(f.v()).all(|v| v.abs() <= 0.05));

    save_frame(&roll(&a, 2, 0), &pb).unwrap();
    let o = teco(&["flow", pa.to_str().unwrap(), pb.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let f: FlowField<f64> = read_flo(&out).unwrap();
    let mean = f.u().iter().sum::<f64>() / f.u().len() as f64;
    assert!((mean - 2.0).abs() < 0.3, "{mean}");

    std::fs::write(&pb, b"not a png").unwrap();
    let o = teco(&["flow", pa.to_str().unwrap(), pb.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pp_command_materializes_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    write_seq(&panning(2, 10, 48, 48, 1, 0), &src);
    let out = dir.path().join("out");
    let o = teco(&["pp", src.to_str().unwrap(), out.to_str().unwrap(), "--triplets"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["length"], 19);
    let map: Vec<i64> = m["index_map"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
    assert_eq!(map, (0..10).chain((0..9).rev()).collect::<Vec<i64>>());
    assert_eq!(std::fs::read_dir(out.join("frames")).unwrap().count(), 19);
    assert_eq!(m["triplets"].as_array().unwrap().len(), 8);
    let warped = m["triplets"][0]["warped"][1].as_str().unwrap();
    assert!(out.join(warped).is_file(), "{warped}");

    let one = dir.path().join("one");
    write_seq(&Sequence::new(vec![texture(1, 8, 8, ColorSpace::Luma)], 0).unwrap(), &one);
    let o = teco(&["pp", one.to_str().unwrap(), dir.path().join("o1").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("o1/manifest.json"))["length"], 1);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = teco(&["pp", empty.to_str().unwrap(), dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn losses_command_reports_parts() {
    let dir = tempfile::tempdir().unwrap();
    let s = panning(3, 4, 32, 32, 1, 0);
    let pp = teco_core::pipeline::make_pp_sequence(&s);
    write_seq(&pp, &dir.path().join("pp"));
    write_seq(&s, &dir.path().join("target"));
    let o = teco(&[
        "losses",
        "--gen",
        dir.path().join("pp").to_str().unwrap(),
        "--target",
        dir.path().join("target").to_str().unwrap(),
        "--pp",
        "--d-fake",
        "0.5,0.5",
        "--d-real",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["parts"]["pp"], 0.0);
    assert_eq!(v["parts"]["content"], 0.0);
    assert!((v["parts"]["adv"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!((v["d_loss"].as_f64().unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert_eq!(v["frames"], 4);
    let o = teco(&["losses", "--gen", dir.path().join("pp").to_str().unwrap(), "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bt_command_fits_and_flags_separation() {
    let dir = tempfile::tempdir().unwrap();
    let votes = dir.path().join("votes.csv");
    std::fs::write(&votes, "winner,loser,count\nbicubic,tecogan,5\ntecogan,bicubic,15\n").unwrap();
    let o = teco(&["bt", "--votes", votes.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["anchor"], "bicubic");
    assert!((v["items"][1]["score"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-6);
    let o = teco(&["bt", "--votes", votes.to_str().unwrap(), "--anchor", "tecogan"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["items"][1]["score"].as_f64().unwrap() + 3f64.ln()).abs() < 1e-6);

    std::fs::write(&votes, "a,b,12\n").unwrap();
    let o = teco(&["bt", "--votes", votes.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("separation"), "{}", stderr(&o));
    let o = teco(&["bt", "--votes", votes.to_str().unwrap(), "--smooth"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["smoothed"], true);
}
