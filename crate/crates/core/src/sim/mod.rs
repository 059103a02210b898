//! Data generators, cross-validation and the simulation studies.

mod cv;
mod generate;
mod study;

pub use cv::{fold_assignment, kfold_cv, CvPlan, CvResult, CvRow};
pub use generate::{
    baseline_cov, baseline_model, default_beta, gen_baseline, gen_envelope_model, haar_orthogonal,
    CovKind, EnvelopeModel, EnvelopeSimConfig, SimModel,
};
pub use study::{
    format_sig17, run_point, run_study, GridPoint, StudyConfig, StudyKind, StudyMethod, StudyResult,
    StudyRow, TuningConfig,
};
