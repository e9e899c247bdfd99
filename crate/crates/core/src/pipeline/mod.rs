//! End-to-end orchestration of both case-study flows from a JSON config,
//! with every intermediate written to a run directory.

mod config;
mod stages;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{CvSettings, FusionConfig, ImageInput, InputConfig, PipelineConfig, Role};
pub use stages::{
    confusions, export_synthetic, extract_features, features_with, fit_final, fuse_mbpca, group_id,
    ingest, predict_test, prepare, read_features, read_json, read_loadings, read_rows, rosa_a_max,
    run_cv, scene_seed, selection_trace, synthetic_scenes, write_census, write_cv, write_features,
    write_json, write_mbpca, write_report, write_rosa, write_rows, FeatureSet, Features,
    MbpcaOutcome, Prediction, Prepared, RawScene, RosaOutcome, SampleRow, Scene, SceneInfo,
    TraceRow,
};

use crate::discriminant::{ConfusionMatrix, CvReport};
use crate::error::{Error, Result};
use crate::export::Manifest;
use crate::texture::SpatialMethod;

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub features: Features,
    pub mbpca: Option<MbpcaOutcome>,
    pub cv: Option<CvReport>,
    pub rosa: Option<RosaOutcome>,
    pub test_confusion: Option<ConfusionMatrix>,
    pub manifest: Manifest,
}

/// Execute every stage and write all artifacts plus a manifest under `out`.
pub fn run(cfg: &PipelineConfig, out: impl AsRef<Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = out.as_ref().to_path_buf();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.json"), cfg.to_json()? + "\n")?;
    let scenes = ingest(cfg).map_err(|e| e.in_stage("cube_io"))?;
    let prepared = prepare(cfg, &scenes)?;
    let features = features_with(&prepared, &cfg.spatial)?;
    write_census(dir.join("census.csv"), &prepared)?;
    write_features(&dir, &features)?;

    let (mut mbpca, mut cv, mut rosa, mut test_confusion) = (None, None, None, None);
    if cfg.is_supervised() {
        let report = run_cv(cfg, &features.train)?;
        write_cv(&dir, &report)?;
        let outcome = fit_final(cfg, &features, report.optimal_a)?;
        write_rosa(&dir, &outcome, Some(&report))?;
        test_confusion = write_report(&dir)?.map(|(all, _)| all);
        cv = Some(report);
        rosa = Some(outcome);
    } else {
        let outcome = fuse_mbpca(cfg, &features)?;
        write_mbpca(&dir, &outcome)?;
        mbpca = Some(outcome);
    }
    let manifest = Manifest::scan(&dir, cfg.seed)?;
    manifest.write(&dir)?;
    Ok(RunSummary {
        dir,
        features,
        mbpca,
        cv,
        rosa,
        test_confusion,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub levels: usize,
    pub min_error: f64,
    pub argmin_a: usize,
}

/// Re-run texture extraction and nested CV for each number of gray levels.
pub fn sweep_gray_levels(cfg: &PipelineConfig, levels: &[usize]) -> Result<Vec<SweepRow>> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("empty gray-level range".into()));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let (distance, orientations) = match &cfg.spatial {
        SpatialMethod::Haralick {
            distance,
            orientations,
            ..
        } => (*distance, orientations.clone()),
        SpatialMethod::Tensor => (1, vec![0, 45, 90, 135]),
    };
    let scenes = ingest(cfg).map_err(|e| e.in_stage("cube_io"))?;
    let prepared = prepare(cfg, &scenes)?;
    sorted
        .into_iter()
        .map(|ng| {
            let method = SpatialMethod::Haralick {
                levels: ng,
                distance,
                orientations: orientations.clone(),
            };
            let f = features_with(&prepared, &method)?;
            let report = run_cv(cfg, &f.train)?;
            log::info!(
                "gray levels {ng}: min CV error {:.4} at A = {}",
                report.min_error(),
                report.optimal_a
            );
            Ok(SweepRow {
                levels: ng,
                min_error: report.min_error(),
                argmin_a: report.optimal_a,
            })
        })
        .collect()
}
