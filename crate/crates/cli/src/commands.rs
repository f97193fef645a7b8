use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use evnlos::event::{read_binary, read_csv, write_binary, write_csv};
use evnlos::features::{event_count_map, voxel_bin_edges, voxel_grid_features};
use evnlos::forward::{diffuse_kernel, render_video, Pose, Trajectory, WallFrame, WallRenderer};
use evnlos::pgm::Pgm;
use evnlos::pipeline::compare::{format_compare_report, format_eval_summary, run_compare_ef, CompareReport};
use evnlos::pipeline::dataset::{generate_dataset, Dataset, UNIT_SCALE};
use evnlos::pipeline::eval::{run_eval, EvalSummary};
use evnlos::pipeline::profile::{Profile, Split};
use evnlos::pipeline::train::{run_training, sidecar_modality, Modality};
use evnlos::pipeline::PipelineConfig;
use evnlos::recon::model::{model_input, LinearReconstructor};
use evnlos::recon::wiener::{wiener_deconvolve, Rect};
use evnlos::sim::{event_rate_report, simulate_events};
use evnlos::targets::{block_digit, TargetSource};
use evnlos::{Error, EventStream, Image, Result, SensorGeometry};

use crate::{Cli, Command, DatasetCommand};

/// Write `{"error": {"kind", "message"}}` to stderr.
pub fn emit_error(kind: &str, message: &str) {
    let v = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{v}");
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json {
        path: path.to_path_buf(),
        source,
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        mkdir(dir)?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Kernel => kernel(&cfg, out),
        Command::Render(a) => render(&cfg, out, a),
        Command::Simulate(a) => simulate(&cfg, out, a),
        Command::Featurize(a) => featurize(&cfg, out, a),
        Command::Dataset(DatasetCommand::Gen(a)) => dataset_gen(&cfg, out, a),
        Command::Train(a) => train(cli, &cfg, out, a),
        Command::Reconstruct(a) => reconstruct(&cfg, out, a),
        Command::Eval(a) => eval(out, a),
        Command::CompareEf(a) => compare(cli, out, a),
        Command::Report(a) => report(out, a),
    }
}

fn kernel(cfg: &PipelineConfig, out: &Path) -> Result<Value> {
    let k = diffuse_kernel(&cfg.geometry)?;
    let peak = k.max();
    let scale = 65535.0 / peak;
    let path = out.join("kernel.pgm");
    write(&path, Pgm::from_image_u16(&k, scale).encode())?;
    let n = cfg.geometry.wall_res;
    Ok(json!({
        "kernel": path,
        "width": n,
        "height": n,
        "center_value": k.get(n / 2, n / 2),
        "sum": k.sum(),
        "scale": scale,
    }))
}

fn parse_target(spec: &str, seed: u64) -> Result<Image> {
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let mut parts = rest.split(':');
        let bad = || Error::InvalidConfig(format!("bad target {spec:?}, want builtin:<digit>[:<variant>]"));
        let digit = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad)?;
        let variant = match parts.next() {
            Some(v) => v.parse().map_err(|_| bad())?,
            None => 0,
        };
        return block_digit(digit, variant, seed);
    }
    Ok(Pgm::read(Path::new(spec))?.to_unit_image())
}

fn render(cfg: &PipelineConfig, out: &Path, a: &crate::RenderArgs) -> Result<Value> {
    let target = parse_target(&a.target, cfg.seed)?;
    let duration = a.duration_us.unwrap_or(cfg.motion.duration_us);
    let fps = a.fps.unwrap_or(cfg.motion.frame_rate_hz);
    let traj = Trajectory::linear(0, Pose::new(a.from_x, a.y), duration, Pose::new(a.to_x, a.y))?;
    let renderer = WallRenderer::new(cfg.geometry)?;
    let frames = render_video(&target, &traj, fps, &renderer)?;
    let peak = frames.iter().map(|f| f.image.max()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 1.0 };
    let dir = out.join("wall");
    mkdir(&dir)?;
    let mut names = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        let name = format!("f{k:04}.pgm");
        write(&dir.join(&name), Pgm::from_image_u16(&f.image, scale).encode())?;
        names.push(name);
    }
    let times: Vec<u64> = frames.iter().map(|f| f.t_us).collect();
    write(&dir.join("times.json"), serde_json::to_string(&times).expect("list"))?;
    let meta = json!({ "frames": names, "scale": scale, "trajectory": traj });
    write(
        &dir.join("render.json"),
        serde_json::to_string_pretty(&meta).expect("json"),
    )?;
    Ok(json!({ "dir": dir, "frames": frames.len(), "scale": scale }))
}

fn simulate(cfg: &PipelineConfig, out: &Path, a: &crate::SimulateArgs) -> Result<Value> {
    let times: Vec<u64> = read_json(&a.frames.join("times.json"))?;
    let meta_path = a.frames.join("render.json");
    let (names, scale): (Vec<String>, f64) = if meta_path.exists() {
        let meta: Value = read_json(&meta_path)?;
        let names = serde_json::from_value(meta["frames"].clone()).map_err(json_err(&meta_path))?;
        (names, meta["scale"].as_f64().unwrap_or(1.0))
    } else {
        let mut names: Vec<String> = std::fs::read_dir(&a.frames)
            .map_err(io_err(&a.frames))?
            .filter_map(|e| e.ok()?.file_name().into_string().ok())
            .filter(|n| n.ends_with(".pgm"))
            .collect();
        names.sort();
        (names, 1.0)
    };
    if names.len() != times.len() {
        return Err(Error::InvalidConfig(format!(
            "{} frames but {} timestamps",
            names.len(),
            times.len()
        )));
    }
    let frames = names
        .iter()
        .zip(&times)
        .map(|(n, &t_us)| {
            Ok(WallFrame {
                t_us,
                image: Pgm::read(&a.frames.join(n))?.to_image(scale),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stream = simulate_events(&frames, &cfg.event_sim)?;
    let path = out.join("events.nevt");
    write(&path, write_binary(&stream))?;
    if a.csv {
        write(&out.join("events.csv"), write_csv(&stream))?;
    }
    let duration_s = (times[times.len() - 1] - times[0]) as f64 / 1e6;
    let rate = event_rate_report(&stream, duration_s.max(1e-6))?;
    Ok(json!({ "events": path, "rate": rate }))
}

fn read_events(path: &Path, width: Option<u16>, height: Option<u16>) -> Result<EventStream> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let (Some(w), Some(h)) = (width, height) else {
            return Err(Error::InvalidConfig("CSV events need --width and --height".into()));
        };
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        read_csv(&text, SensorGeometry::new(w, h)?)
    } else {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        read_binary(&bytes)
    }
}

fn featurize(cfg: &PipelineConfig, out: &Path, a: &crate::FeaturizeArgs) -> Result<Value> {
    let stream = read_events(&a.events, a.width, a.height)?;
    let n_bins = a.bins.unwrap_or(cfg.features.n_bins);
    let mut ts = cfg.features.time_surface;
    if a.tau_us.is_some() {
        ts.tau_us = a.tau_us;
    }
    let frames = voxel_grid_features(&stream, n_bins, &ts)?;
    let (t0, t1) = (stream.first_time().unwrap_or(0), stream.last_time().unwrap_or(0));
    let edges = voxel_bin_edges(t0, t1, n_bins);
    let tau = ts.resolve_tau((t1 - t0) as f64 / n_bins as f64);
    let dir = out.join("features");
    let g = stream.geometry();
    let mut bins = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        let mut files = Vec::new();
        for (c, ch) in f.channels.iter().enumerate() {
            let name = if f.channels.len() == 1 {
                format!("b{k}.pgm")
            } else {
                format!("b{k}_c{c}.pgm")
            };
            write(&dir.join(&name), Pgm::from_image_u16(ch, UNIT_SCALE).encode())?;
            files.push(name);
        }
        if a.count_maps {
            // last bin is closed: include events at its end
            let end = if k + 1 == n_bins {
                edges[k + 1] + 1
            } else {
                edges[k + 1]
            };
            let counts = event_count_map(&stream, edges[k], end, false)?.remove(0);
            let img = Image::from_vec(
                g.width as usize,
                g.height as usize,
                counts.iter().map(|&c| c as f64).collect(),
            )?;
            let name = format!("counts_b{k}.pgm");
            write(&dir.join(&name), Pgm::from_image_u16(&img, 1.0).encode())?;
            files.push(name);
        }
        bins.push(json!({ "t_start_us": edges[k], "t_end_us": edges[k + 1], "files": files }));
    }
    let meta = json!({ "n_bins": n_bins, "tau_us": tau, "scale": UNIT_SCALE, "bins": bins });
    write(
        &dir.join("features.json"),
        serde_json::to_string_pretty(&meta).expect("json"),
    )?;
    Ok(json!({ "dir": dir, "n_bins": n_bins, "tau_us": tau, "events": stream.len() }))
}

fn dataset_gen(cfg: &PipelineConfig, out: &Path, a: &crate::GenArgs) -> Result<Value> {
    let profile = Profile::by_name(&a.profile)?;
    let counts = profile.counts()?;
    if a.dry_run {
        return Ok(json!({ "profile": profile.name, "dry_run": true, "counts": counts }));
    }
    let source = TargetSource::parse(&a.source)?;
    let ds = generate_dataset(&source, &profile, cfg, out)?;
    Ok(json!({
        "profile": profile.name,
        "manifest": out.join(evnlos::pipeline::MANIFEST_FILE),
        "counts": counts,
        "totals": ds.manifest.totals,
    }))
}

/// Training config: `--config` if given, else the dataset's snapshot.
fn train_config(cli: &Cli, ds: &Dataset, epochs: Option<usize>) -> Result<evnlos::recon::TrainConfig> {
    let mut tc = match &cli.config {
        Some(p) => PipelineConfig::load(p)?.train,
        None => ds.manifest.config.train,
    };
    if let Some(seed) = cli.seed {
        tc.seed = seed;
    }
    if let Some(e) = epochs {
        tc.epochs = e;
    }
    tc.validate()?;
    Ok(tc)
}

fn train(cli: &Cli, _cfg: &PipelineConfig, out: &Path, a: &crate::TrainArgs) -> Result<Value> {
    let ds = Dataset::open(&a.manifest)?;
    let tc = train_config(cli, &ds, a.epochs)?;
    let modality = Modality::parse(&a.modality)?;
    let run = run_training(&ds, &tc, modality, out, &a.name)?;
    Ok(json!({
        "model": run.model_path,
        "sidecar": run.sidecar_path,
        "modality": modality,
        "epochs": run.sidecar.loss_trace.len(),
        "initial_loss": run.sidecar.loss_trace.first(),
        "final_loss": run.sidecar.final_loss,
        "val_loss": run.sidecar.val_loss,
    }))
}

fn reconstruct(cfg: &PipelineConfig, out: &Path, a: &crate::ReconstructArgs) -> Result<Value> {
    let input = Pgm::read(&a.input)?;
    let path = out.join("reconstruction.pgm");
    if a.wiener {
        let g = cfg.geometry;
        let wall = input.to_unit_image();
        let kernel = diffuse_kernel(&g)?;
        let lambda = a.lambda.unwrap_or(cfg.wiener_lambda);
        let side = ((g.target_extent_m / g.wall_pitch()).ceil() as usize).clamp(1, g.wall_res);
        let c = g.wall_center_index();
        let x0 = c.saturating_sub(side / 2).min(g.wall_res - side);
        let crop = Rect {
            x: x0,
            y: x0,
            width: side,
            height: side,
        };
        let est = wiener_deconvolve(&wall, &kernel, lambda, Some(crop))?;
        let peak = est.max();
        let scaled = if peak > 0.0 { est.scaled(1.0 / peak) } else { est };
        write(&path, Pgm::from_image_u16(&scaled, UNIT_SCALE).encode())?;
        return Ok(json!({ "reconstruction": path, "method": "wiener", "lambda": lambda, "peak": peak }));
    }
    let model_path = a.model.as_ref().expect("clap requires --model without --wiener");
    let model = LinearReconstructor::load(model_path)?;
    let img = model_input(&input.to_unit_image(), model.in_dims());
    let recon = model.predict_image(&img)?;
    write(&path, Pgm::from_image_u16(&recon, UNIT_SCALE).encode())?;
    Ok(json!({ "reconstruction": path, "method": "linear", "model": model_path }))
}

fn eval(out: &Path, a: &crate::EvalArgs) -> Result<Value> {
    let ds = Dataset::open(&a.manifest)?;
    let model = LinearReconstructor::load(&a.model)?;
    let modality = match &a.modality {
        Some(m) => Modality::parse(m)?,
        None => sidecar_modality(&a.model).unwrap_or(Modality::E),
    };
    let split = Split::parse(&a.split)?;
    let report = run_eval(&ds, &model, modality, split, out)?;
    Ok(json!({
        "metrics": out.join("metrics.csv"),
        "summary": out.join("summary.json"),
        "overall": report.summary.overall,
    }))
}

fn compare(cli: &Cli, out: &Path, a: &crate::CompareArgs) -> Result<Value> {
    let ds = Dataset::open(&a.manifest)?;
    let tc = train_config(cli, &ds, a.epochs)?;
    let r = run_compare_ef(&ds, &tc, out)?;
    Ok(json!({
        "report": out.join("compare.json"),
        "table": out.join("compare.csv"),
        "e": r.e.overall,
        "f": r.f.overall,
        "data_volume": r.data_volume,
    }))
}

fn report(out: &Path, a: &crate::ReportArgs) -> Result<Value> {
    let v: Value = read_json(&a.input)?;
    let text = if v.get("per_digit").is_some() && v.get("e").is_some() {
        let r: CompareReport = serde_json::from_value(v).map_err(json_err(&a.input))?;
        format_compare_report(&r)
    } else {
        let s: EvalSummary = serde_json::from_value(v).map_err(json_err(&a.input))?;
        format_eval_summary(&s)
    };
    let path: PathBuf = out.join("report.md");
    write(&path, &text)?;
    Ok(json!({ "report": path, "markdown": text }))
}
