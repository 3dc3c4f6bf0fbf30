//! Network presets, optimizer, data pipeline and training loop.

mod adam;
mod data;
mod network;
mod spec;
mod train;

pub use adam::{Adam, AdamConfig, LrSchedule};
pub use data::{
    load_dataset, load_sample_file, prepare_sample, sample_rng, split_train_test, write_synthetic_dataset, Dataset,
    PipelineConfig, Sample, SampleData,
};
pub use network::Network;
pub use spec::{ModelSpec, PRESETS};
pub use train::{evaluate, for_each_batch, measure_stats, predict, train, EpochMetrics, TrainConfig, TrainReport};
