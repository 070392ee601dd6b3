//! Simulation designs, accuracy metrics, Monte-Carlo campaigns and
//! leave-one-out scoring.

mod campaign;
mod design;
mod loo;
mod metrics;

pub use campaign::{
    cca_feasible, fit_method, paired_t_test, run_campaign, CampaignOptions, Method, MethodFit,
    MethodRun, MethodSummary, PairedTest, RunRecord, SimulationReport, SCHEMA_VERSION,
};
pub use design::{
    build_design, design, sample_dataset, sample_rows, true_canonical_vectors, DesignName,
    DesignSpec, TRUTH_ZERO_THRESHOLD,
};
pub use loo::{loo_cv_score, LooSettings};
pub use metrics::{sparsity_metrics, SparsityRates};
