mod common;

use common::{evnlos, path};

#[test]
fn kernel_writes_a_16_bit_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let v = evnlos(dir.path(), &["kernel"]).ok().json();
    assert_eq!(v["width"], 128);
    let bytes = std::fs::read(dir.path().join("kernel.pgm")).unwrap();
    let header = b"P5\n128 128\n65535\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 2 * 128 * 128);
    // peak at the center, scaled to full range
    let c = header.len() + 2 * (64 * 128 + 64);
    assert_eq!(&bytes[c..c + 2], &[0xFF, 0xFF]);
}

#[test]
fn render_simulate_featurize_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = out.join("cfg.json");
    std::fs::write(&cfg, r#"{"event_sim": {"contrast_threshold": 0.02}}"#).unwrap();
    let r = evnlos(out, &["render", "--duration-us", "40000", "--config", path(&cfg)])
        .ok()
        .json();
    assert_eq!(r["frames"], 5);
    let wall = out.join("wall");
    let s = evnlos(
        out,
        &["simulate", "--frames", path(&wall), "--csv", "--config", path(&cfg)],
    )
    .ok()
    .json();
    assert!(s["rate"].is_object());
    let nevt = std::fs::read(out.join("events.nevt")).unwrap();
    assert_eq!(&nevt[..4], b"NEVT");
    let n = u64::from_le_bytes(nevt[12..20].try_into().unwrap()) as usize;
    assert!(n > 0);
    assert_eq!(nevt.len(), 20 + 16 * n);
    let csv = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t_us,x,y,p"));
    assert_eq!(csv.lines().count(), n + 1);

    let f = evnlos(
        out,
        &[
            "featurize",
            "--events",
            path(&out.join("events.nevt")),
            "--bins",
            "3",
            "--count-maps",
        ],
    )
    .ok()
    .json();
    assert_eq!(f["n_bins"], 3);
    assert_eq!(f["events"], n);
    for k in 0..3 {
        assert!(out.join(format!("features/b{k}.pgm")).exists());
        assert!(out.join(format!("features/counts_b{k}.pgm")).exists());
    }
    let from_csv = tempfile::tempdir().unwrap();
    let csv_path = out.join("events.csv");
    let args = [
        "featurize",
        "--events",
        path(&csv_path),
        "--bins",
        "3",
        "--width",
        "128",
        "--height",
        "128",
    ];
    evnlos(from_csv.path(), &args).ok();
    assert_eq!(
        std::fs::read(from_csv.path().join("features/b2.pgm")).unwrap(),
        std::fs::read(out.join("features/b2.pgm")).unwrap()
    );
}

#[test]
fn smoke_pipeline_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let g = evnlos(&data, &["dataset", "gen", "--profile", "smoke", "--seed", "4"])
        .ok()
        .json();
    assert_eq!(g["counts"]["train"], 1);
    let manifest = data.join("manifest.json");

    let models = root.join("models");
    let t = evnlos(&models, &["train", "--manifest", path(&manifest), "--epochs", "3"])
        .ok()
        .json();
    assert_eq!(t["epochs"], 3);
    let model = models.join("model.nlrw");
    assert_eq!(&std::fs::read(&model).unwrap()[..4], b"NLRW");

    let ev = root.join("eval");
    let e = evnlos(&ev, &["eval", "--manifest", path(&manifest), "--model", path(&model)])
        .ok()
        .json();
    assert_eq!(e["overall"]["n"], 1);
    let csv = std::fs::read_to_string(ev.join("metrics.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("id,digit,variant,position,bin_end_us,psnr_db,ssim,cd_recon,cd_gt,cd_deviation,note")
    );

    let feature = std::fs::read_dir(data.join("samples/test-d0-v01-p00/features"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let rec = root.join("rec");
    evnlos(
        &rec,
        &["reconstruct", "--model", path(&model), "--input", path(&feature)],
    )
    .ok();
    assert!(rec.join("reconstruction.pgm").exists());
    let wall = data.join("samples/test-d0-v01-p00/wall/f0020.pgm");
    let w = evnlos(&rec, &["reconstruct", "--wiener", "--input", path(&wall)])
        .ok()
        .json();
    assert_eq!(w["method"], "wiener");

    let cmp = root.join("cmp");
    let c = evnlos(&cmp, &["compare-ef", "--manifest", path(&manifest), "--epochs", "2"])
        .ok()
        .json();
    assert!(c["data_volume"]["ratio"].as_f64().unwrap() < 1.0);
    let rep = evnlos(&cmp, &["report", "--input", path(&cmp.join("compare.json"))])
        .ok()
        .json();
    assert!(rep["markdown"].as_str().unwrap().contains("| all | E |"));
    let rep = evnlos(&cmp, &["report", "--input", path(&ev.join("summary.json"))])
        .ok()
        .json();
    assert!(rep["markdown"].as_str().unwrap().contains("LPIPS: not available"));
}

#[test]
fn dry_run_counts_full_profile() {
    let dir = tempfile::tempdir().unwrap();
    let v = evnlos(dir.path(), &["dataset", "gen", "--profile", "full", "--dry-run"])
        .ok()
        .json();
    assert_eq!(v["counts"]["train"], 3950);
    assert_eq!(v["counts"]["val"], 130);
    assert_eq!(v["counts"]["test"], 210);
    assert_eq!(std::fs::read_dir(dir.path()).map(|d| d.count()).unwrap_or(0), 0);
}

#[test]
fn failures_report_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let missing = out.join("nope/manifest.json");
    let r = evnlos(out, &["train", "--manifest", path(&missing)]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error()["kind"], "Io");
    assert!(r.stdout.is_empty());

    let r = evnlos(out, &["dataset", "gen", "--profile", "huge", "--dry-run"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error()["kind"], "InvalidConfig");

    let bad = out.join("bad.nevt");
    std::fs::write(&bad, b"NOPE0000000000000000").unwrap();
    let r = evnlos(out, &["featurize", "--events", path(&bad)]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error()["kind"], "BadMagic");

    let r = evnlos(out, &["frobnicate"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.error()["kind"], "Usage");

    let r = evnlos(out, &["reconstruct", "--input", "x.pgm"]);
    assert_eq!(r.code, 2);
}
