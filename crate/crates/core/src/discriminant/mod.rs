//! Two-class LDA on fused scores, confusion matrices and the nested grouped
//! cross-validation that picks the number of latent variables.

mod confusion;
mod cv;
mod lda;

pub use confusion::{confusion, format_tenths, ConfusionMatrix, ConfusionReport, Rounding};
pub use cv::{fold_errors, nested_cv, CvPlan, CvReport, OuterFold};
pub use lda::{fit_lda, fit_lda_with, LdaModel, DEFAULT_SHRINKAGE};
