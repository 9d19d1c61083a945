//! Two-layer ReLU networks trained by full-batch gradient descent on noisy
//! 2-XOR cluster data, with diagnostics for the feature-learning analysis.

pub mod diagnostics;
pub mod distribution;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod trainer;

pub use distribution::{make_spec, sample_dataset, Cluster, Dataset, DistributionSpec, MeanMode, NoiseMode};
pub use error::{Error, Result};
pub use network::{init_network, NetworkParams};
pub use trainer::{gd_step, theorem_schedule, train, train_from, SnapshotPolicy, TrainConfig, TrainTrace};
