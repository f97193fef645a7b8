//! Dataset synthesis, training, evaluation and E-vs-F comparison.

pub mod compare;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod profile;
pub mod train;

pub use compare::{format_compare_report, format_eval_summary, run_compare_ef, CompareReport};
pub use config::{BinSelection, FeatureConfig, MotionConfig, PipelineConfig};
pub use dataset::{generate_dataset, Dataset, DatasetManifest, SampleRecord, MANIFEST_FILE};
pub use eval::{run_eval, Aggregate, EvalReport, EvalSummary, SampleMetrics};
pub use profile::{Profile, Split, SplitCounts};
pub use train::{run_training, Modality, TrainingRun};
