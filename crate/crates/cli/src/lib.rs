//! Experiment harness: scenario configs, training runs, evaluation and
//! report files.
//!
//! Output layout of a training run:
//!
//! ```text
//! <run_dir>/
//!   config.toml                  input config, verbatim
//!   manifest.json                RunManifest
//!   learning_curve.csv           env_steps,seed,mean_return,unique_captures,failures,entropy,clip_fraction
//!   metrics_seed<S>.jsonl        one IterationMetrics object per line
//!   checkpoints/seed<S>/actor_<i>.bin, critic_<j>.bin
//!   eval/seed<S>_ep<N>/          written by `satmarl eval`
//! ```

pub mod config;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod report;
pub mod scenarios;
pub mod train;

pub use config::{ExperimentConfig, OUTPUT_ROOT_ENV};
pub use error::{CliError, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK};
pub use eval::{cmd_eval, EvalOptions};
pub use manifest::RunManifest;
pub use report::cmd_report;
pub use train::{cmd_train, run_experiment, TrainOptions};
