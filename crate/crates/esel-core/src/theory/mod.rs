//! The numerical lab: binary skill-set embeddings, the min-norm linear
//! regression predictor, closed-form expected losses for the two analyzed
//! demonstration distributions, and Monte Carlo simulation of selection
//! quality (prediction loss and coverage).

pub mod binary;
pub mod closed_form;
pub mod mc;
pub mod minnorm;
pub mod sim;

pub use binary::{build_ground_set, coverage_ratio, sample_demo, BinaryExample, DemoDistribution};
pub use closed_form::{
    closed_form_example2, closed_form_l_ab, example2_case2_candidates, Example2Case,
};
pub use mc::{run_fixed_config_mc, McEstimate};
pub use minnorm::{min_norm_predict, prediction_loss, MinNormModel};
pub use sim::{
    run_simulation, DistributionKind, MethodStats, SeedReport, SimConfig, SimMethod, SimReport,
};
