//! Stratified test set, paired evaluation and reporting.

pub mod eval;
pub mod report;
pub mod stats;
pub mod testset;

pub use eval::{evaluate, evaluate_cases, CaseOutcome, EvalOptions, MethodOutcome, BASELINE_STEPS};
pub use report::EvalReport;
pub use testset::{gen_testset, TestCase, TestSet};
