//! Multiblock fusion of scaled feature blocks: MB-PCA (unsupervised) and
//! ROSA-PLS (supervised, one winning block per latent variable).

mod collection;
mod mbpca;
mod rosa;

pub use collection::{assemble, BlockCollection, BlockMeta};
pub use mbpca::{fit_mbpca, MbpcaModel};
pub use rosa::{fit_rosa, rosa_scores, RosaModel, SelectionStep};
