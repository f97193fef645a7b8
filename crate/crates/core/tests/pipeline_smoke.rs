use std::path::Path;

use evnlos::pipeline::{
    generate_dataset, run_eval, run_training, Dataset, Modality, PipelineConfig, Profile, Split, MANIFEST_FILE,
};
use evnlos::recon::{Dims, InitMode, LinearReconstructor, TrainConfig};
use evnlos::targets::TargetSource;
use evnlos::Error;

fn smoke(dir: &Path, seed: u64) -> Dataset {
    let cfg = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    generate_dataset(&TargetSource::BuiltinBlockDigits, &Profile::smoke(), &cfg, dir).unwrap()
}

fn quick(epochs: usize, init: InitMode) -> TrainConfig {
    TrainConfig {
        epochs,
        init,
        ..TrainConfig::default()
    }
}

#[test]
fn smoke_dataset_verifies_and_reopens() {
    let dir = tempfile::tempdir().unwrap();
    let ds = smoke(dir.path(), 3);
    assert_eq!(ds.samples(Split::Train).len(), 1);
    assert_eq!(ds.samples(Split::Val).len(), 0);
    assert_eq!(ds.samples(Split::Test).len(), 1);
    ds.verify().unwrap();
    let reopened = Dataset::open(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(reopened.manifest, ds.manifest);
    let s = &ds.samples(Split::Train)[0];
    let events = ds.read_events(s).unwrap();
    assert_eq!(events.len(), s.event_count);
    assert!(ds.manifest.totals.events < ds.manifest.totals.wall_frames);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (da, db) = (smoke(a.path(), 9), smoke(b.path(), 9));
    for (sa, sb) in da.samples(Split::Train).iter().zip(db.samples(Split::Train)) {
        let ea = std::fs::read(da.resolve(&sa.events)).unwrap();
        let eb = std::fs::read(db.resolve(&sb.events)).unwrap();
        assert_eq!(ea, eb);
    }
    let cfg = quick(3, InitMode::Ridge);
    let ra = run_training(&da, &cfg, Modality::E, &a.path().join("m"), "model").unwrap();
    let rb = run_training(&db, &cfg, Modality::E, &b.path().join("m"), "model").unwrap();
    assert_eq!(
        std::fs::read(ra.model_path).unwrap(),
        std::fs::read(rb.model_path).unwrap()
    );
}

#[test]
fn training_trace_and_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let ds = smoke(dir.path(), 1);
    let ridge = run_training(&ds, &quick(5, InitMode::Ridge), Modality::E, &dir.path().join("r"), "m").unwrap();
    let zeros = run_training(&ds, &quick(5, InitMode::Zeros), Modality::E, &dir.path().join("z"), "m").unwrap();
    assert_eq!(ridge.sidecar.loss_trace.len(), 5);
    assert_eq!(zeros.sidecar.loss_trace.len(), 5);
    assert!(ridge.sidecar.loss_trace[0] <= zeros.sidecar.loss_trace[0]);
    assert!(ridge.sidecar_path.exists());
    let f = run_training(&ds, &quick(2, InitMode::Ridge), Modality::F, &dir.path().join("f"), "m").unwrap();
    assert_eq!(f.sidecar.modality, Modality::F);
}

#[test]
fn missing_model_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = LinearReconstructor::load(&dir.path().join("absent.nlrw")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}

#[test]
fn exact_reconstruction_scores_infinite_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let ds = smoke(dir.path(), 5);
    let sample = &ds.samples(Split::Test)[0];
    let gt = ds.read_unit_image(&sample.bins.last().unwrap().ground_truth).unwrap();
    let res = ds.manifest.config.model_input_res;
    let (din, dout) = (Dims::new(res, res), Dims::new(gt.width(), gt.height()));
    let model =
        LinearReconstructor::from_parts(din, dout, vec![0.0; din.len() * dout.len()], gt.data().to_vec()).unwrap();
    let report = run_eval(&ds, &model, Modality::E, Split::Test, &dir.path().join("eval")).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.rows[0].psnr_db.is_infinite());
    assert!((report.rows[0].ssim - 1.0).abs() < 1e-12);
    assert_eq!(report.rows[0].cd_deviation, Some(0.0));
    assert_eq!(report.summary.overall.psnr_infinite, 1);
    let csv = std::fs::read_to_string(dir.path().join("eval/metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",inf,"));
}
