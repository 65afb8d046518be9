//! Multi-city tourist trip planning as a three-objective clustered routing
//! problem, solved by dynamically decomposed cooperative coevolution.
//!
//! The core types are generic over the floating-point scalar; the aliases
//! below fix it to `f64`.

pub mod dgcc;
pub mod encoding;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod instance;
pub mod objectives;
pub mod pareto;
pub mod scalar;
pub mod stream;

pub use dgcc::{run_dgcc, run_global_nsga2, Ablation, Ablations, RunResult, RunSummary};
pub use encoding::{initial_decomposition, validate, DecompositionPlan, Genome, EMPTY};
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentOutput, Variant};
pub use instance::{check_weak_decomposability, generate_instance, load_instance, save_instance, Channel};
pub use objectives::{EvalMode, ObjectiveVector};
pub use pareto::{hypervolume, ParetoArchive, ReferencePoint};
pub use scalar::Scalar;
pub use stream::Streams;

pub type Instance = instance::ClusteredInstance<f64>;
pub type Poi = instance::Poi<f64>;
pub type GeneratorSpec = instance::GeneratorSpec<f64>;
pub type Objectives = objectives::ObjectiveVector<f64>;
pub type EvalConfig = objectives::EvalConfig<f64>;
pub type RunConfig = dgcc::RunConfig<f64>;
pub type Archive = pareto::ParetoArchive<f64>;
pub type ExperimentSpec = harness::ExperimentSpec<f64>;

pub type InstanceF32 = instance::ClusteredInstance<f32>;
pub type RunConfigF32 = dgcc::RunConfig<f32>;
