//! Multi-satellite Earth-observation simulator and actor-critic MARL stack.
//!
//! - [`astro`]: circular-orbit geometry, eclipse, visibility, constellations
//! - [`satmodel`]: battery, storage and reaction-wheel dynamics per action
//! - [`env`]: the cooperative Dec-POMDP with a shared unique-capture reward
//! - [`nn`]: dense networks, reverse-mode gradients, Adam, checkpoints
//! - [`marl`]: rollouts, GAE, PPO losses and the five trainers

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod astro;
pub mod nn;
pub mod env;
pub mod marl;
pub mod rng;
pub mod satmodel;

pub use astro::{ConstellationKind, ConstellationSpec, GroundPoint, OrbitalElements};
pub use env::{EnvConfig, EnvError, EoEnv, Observation, Randomization, StepResult};
pub use marl::{AgentSet, Algorithm, EvalMetrics, IterationMetrics, JointPolicy, MarlError, RandomPolicy, TrainConfig, TrainOutput, Trainer};
pub use nn::{MlpSpec, NnError, ParamVector};
pub use satmodel::{ActionKind, ResourceState, SatelliteParams};
