//! Cross-validation, ablation, cross-domain transfer and significance tests.

mod cv;
mod report;
mod split;
pub mod stats;

pub use cv::{ablate_features, cross_domain_eval, run_cv, transfer_eval, EvalOptions};
pub use report::{ablation_csv, AblationRow, EvalReport, Prediction};
pub use split::{kfold_split, subject_split, FoldSplit};
pub use stats::{anova_oneway, ttest_welch, tukey_hsd, Anova, TTest, TukeyPair};
