//! Joint spatial/spectral analysis of hyperspectral images.
//!
//! A cube is cut into odd-width square patches. Each patch is described along
//! two branches: texture descriptors computed on PCA-reduced monochrome
//! sub-images, and spectral signatures computed on the unfolded patch. The
//! resulting feature blocks are fused either without supervision (MB-PCA) or
//! with a class response (ROSA-PLS followed by LDA), with the number of latent
//! variables chosen by nested grouped cross-validation.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block;
pub mod cube_io;
pub mod discriminant;
pub mod error;
pub mod export;
pub mod fusion;
pub mod linalg;
pub mod patching;
pub mod pipeline;
pub mod preprocess;
pub mod reduction;
pub mod signatures;
pub mod synth;
pub mod texture;

pub use block::{BlockKind, FeatureBlock};
pub use cube_io::{CalibrationRefs, HyperCube, SpectralAxis, Unit};
pub use discriminant::{ConfusionMatrix, CvPlan, LdaModel};
pub use error::{Error, Result};
pub use fusion::{BlockCollection, MbpcaModel, RosaModel};
pub use patching::{PatchSet, ZoneSpec};
pub use preprocess::{SavGolSpec, ScalingParams};
pub use reduction::{ComponentSelector, PcaModel};
