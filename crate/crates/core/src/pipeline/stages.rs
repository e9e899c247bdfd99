use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, Array4, Axis};
use serde::{Deserialize, Serialize};

use super::config::{FusionConfig, ImageInput, InputConfig, PipelineConfig, Role};
use crate::block::FeatureBlock;
use crate::cube_io::{
    apply_mask, load_envi, to_absorbance, to_reflectance, write_envi, ByteOrder, CalibrationRefs,
    DataType, HyperCube, Interleave, Unit,
};
use crate::discriminant::{
    confusion, fit_lda_with, nested_cv, ConfusionMatrix, CvReport, LdaModel,
};
use crate::error::{Error, Result, StageExt};
use crate::export::{read_matrix_csv, write_matrix_csv, write_pgm16};
use crate::fusion::{assemble, fit_mbpca, fit_rosa, MbpcaModel, RosaModel};
use crate::patching::{
    extract_patches, read_mask_png, read_zones_csv, write_mask_png, write_zones_csv, PatchSet,
    Region, ZoneSpec, CONTROL, INFECTED,
};
use crate::preprocess::savgol_cube;
use crate::reduction::{fit_pca, project_patches, PcaModel};
use crate::signatures::spectral_block;
use crate::synth::{synth, SyntheticScene};
use crate::texture::{component_ranges, spatial_block, SpatialMethod};

/// A preprocessed (absorbance, optionally filtered) acquisition.
#[derive(Debug, Clone)]
pub struct Scene {
    pub info: SceneInfo,
    pub cube: Arc<HyperCube>,
    pub zones: Vec<ZoneSpec>,
    pub mask: Option<Array2<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub name: String,
    pub date: u32,
    pub role: Role,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    /// Reflectance values raised to the absorbance floor.
    pub floored: usize,
}

/// Seed of the synthetic scene for a date and role.
pub fn scene_seed(seed: u64, date: u32, role: Role) -> u64 {
    let salt = 2 * date as u64 + u64::from(role == Role::Test);
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(salt.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

fn preprocess(cfg: &PipelineConfig, cube: HyperCube) -> Result<(HyperCube, usize)> {
    let (cube, floored) = match cube.unit() {
        Unit::Absorbance => (cube, 0),
        Unit::Reflectance => to_absorbance(&cube, cfg.absorbance_floor)?,
        Unit::RawCounts => {
            return Err(Error::Unit {
                expected: Unit::Reflectance,
                found: Unit::RawCounts,
            })
        }
    };
    let cube = match &cfg.savgol {
        Some(sg) => savgol_cube(&cube, sg, cfg.trim)?,
        None => cube,
    };
    Ok((cube, floored))
}

fn load_image(cfg: &PipelineConfig, img: &ImageInput) -> Result<Scene> {
    let mut cube = load_envi(&img.header)?;
    if cube.unit() == Unit::RawCounts {
        let (Some(white), Some(dark)) = (&img.white, &img.dark) else {
            return Err(Error::InvalidArgument(format!(
                "{} holds raw counts but no references were given",
                img.header.display()
            )));
        };
        let refs = CalibrationRefs::full(
            load_envi(white)?.values().clone(),
            load_envi(dark)?.values().clone(),
        );
        cube = to_reflectance(&cube, &refs)?;
    }
    let mask = img.mask.as_ref().map(read_mask_png).transpose()?;
    if let Some(m) = &mask {
        cube = apply_mask(&cube, m)?;
    }
    let zones = img
        .zones
        .as_ref()
        .map(read_zones_csv)
        .transpose()?
        .unwrap_or_default();
    let (cube, floored) = preprocess(cfg, cube)?;
    let name = img
        .header
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    Ok(Scene {
        info: SceneInfo {
            name,
            date: img.date,
            role: img.role,
            height: cube.height(),
            width: cube.width(),
            bands: cube.bands(),
            floored,
        },
        cube: Arc::new(cube),
        zones,
        mask,
    })
}

/// A generated scene before absorbance conversion.
#[derive(Debug, Clone)]
pub struct RawScene {
    pub name: String,
    pub date: u32,
    pub role: Role,
    pub scene: SyntheticScene,
}

/// Every synthetic scene a config describes, one per date and role.
pub fn synthetic_scenes(cfg: &PipelineConfig) -> Result<Vec<RawScene>> {
    let InputConfig::Synthetic {
        spec,
        dates,
        test_scenes,
    } = &cfg.input
    else {
        return Err(Error::InvalidArgument(
            "config input is not synthetic".into(),
        ));
    };
    let mut roles = vec![Role::Train];
    if *test_scenes {
        roles.push(Role::Test);
    }
    let mut out = Vec::new();
    for &role in &roles {
        for date in 1..=*dates {
            let mut s = spec.clone();
            s.seed = scene_seed(cfg.seed ^ spec.seed, date, role);
            let role_name = if role == Role::Train { "train" } else { "test" };
            out.push(RawScene {
                name: format!("{role_name}_d{date:02}"),
                date,
                role,
                scene: synth(&s)?,
            });
        }
    }
    Ok(out)
}

/// Write synthetic scenes as ENVI reflectance cubes with zone CSVs or mask
/// PNGs, and return the equivalent ENVI-input config.
pub fn export_synthetic(cfg: &PipelineConfig, dir: impl AsRef<Path>) -> Result<PipelineConfig> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut images = Vec::new();
    for raw in synthetic_scenes(cfg)? {
        let header = dir.join(format!("{}.hdr", raw.name));
        write_envi(
            &raw.scene.cube,
            &header,
            Interleave::Bil,
            DataType::F32,
            ByteOrder::Little,
        )?;
        let mut img = ImageInput {
            header,
            white: None,
            dark: None,
            mask: None,
            zones: None,
            date: raw.date,
            role: raw.role,
        };
        if let Some(m) = &raw.scene.mask {
            let path = dir.join(format!("{}_mask.png", raw.name));
            write_mask_png(m, &path)?;
            img.mask = Some(path);
        }
        if !raw.scene.zones.is_empty() {
            let path = dir.join(format!("{}_zones.csv", raw.name));
            write_zones_csv(&raw.scene.zones, &path)?;
            img.zones = Some(path);
        }
        images.push(img);
    }
    let mut out = cfg.clone();
    out.input = InputConfig::Envi { images };
    Ok(out)
}

/// Load or generate every scene, convert to absorbance and filter.
pub fn ingest(cfg: &PipelineConfig) -> Result<Vec<Scene>> {
    let scenes = match &cfg.input {
        InputConfig::Synthetic { .. } => synthetic_scenes(cfg)?
            .into_iter()
            .map(|raw| {
                let (cube, floored) = preprocess(cfg, raw.scene.cube)?;
                Ok(Scene {
                    info: SceneInfo {
                        name: raw.name,
                        date: raw.date,
                        role: raw.role,
                        height: cube.height(),
                        width: cube.width(),
                        bands: cube.bands(),
                        floored,
                    },
                    cube: Arc::new(cube),
                    zones: raw.scene.zones,
                    mask: raw.scene.mask,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        InputConfig::Envi { images } => images
            .iter()
            .map(|img| load_image(cfg, img))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(scenes)
}

/// One patch and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub scene: String,
    pub date: u32,
    /// Cross-validation group: date and zone.
    pub group: u32,
    pub zone: u32,
    pub class: Option<u8>,
    pub row: usize,
    pub col: usize,
}

pub fn group_id(date: u32, zone: u32) -> u32 {
    date * 1000 + zone
}

#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub blocks: Vec<FeatureBlock>,
    pub samples: Vec<SampleRow>,
}

impl FeatureSet {
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.samples
            .iter()
            .map(|s| {
                s.class.ok_or_else(|| {
                    Error::InvalidArgument(format!("unlabelled patch in {}", s.scene))
                })
            })
            .collect()
    }

    pub fn groups(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.group).collect()
    }
}

/// Everything upstream of the texture step, shared by gray-level sweeps.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenes: Vec<SceneInfo>,
    pub patches: Vec<PatchSet>,
    pub pca: PcaModel,
    /// Score images `[patch, component, r, c]` per scene.
    pub images: Vec<Array4<f64>>,
    pub spectral: Vec<Vec<FeatureBlock>>,
}

#[derive(Debug, Clone)]
pub struct Features {
    pub scenes: Vec<SceneInfo>,
    pub train: FeatureSet,
    pub test: Option<FeatureSet>,
    pub pca: PcaModel,
    /// Frozen quantization ranges of the reduction components.
    pub ranges: Vec<(f64, f64)>,
}

/// Patches, reduction and spectral signatures for every scene.
pub fn prepare(cfg: &PipelineConfig, scenes: &[Scene]) -> Result<Prepared> {
    let patches: Vec<PatchSet> = scenes
        .iter()
        .map(|s| {
            let region = match &s.mask {
                Some(m) if s.zones.is_empty() => Region::Mask(m),
                _ => Region::Zones(&s.zones),
            };
            extract_patches(s.cube.clone(), region, cfg.patch_width)
        })
        .collect::<Result<_>>()
        .stage("patching")?;
    let train_total: usize = scenes
        .iter()
        .zip(&patches)
        .filter(|(s, _)| s.info.role == Role::Train)
        .map(|(_, p)| p.len())
        .sum();
    if train_total == 0 {
        return Err(
            Error::Degenerate("no training patch fits inside the region".into())
                .in_stage("patching"),
        );
    }
    if let Some(expected) = cfg.expected_patches {
        if expected != train_total {
            return Err(Error::Shape(format!(
                "{train_total} training patches, expected {expected}"
            ))
            .in_stage("patching"));
        }
    }
    let centers: Vec<Array2<f64>> = scenes
        .iter()
        .zip(&patches)
        .filter(|(s, _)| s.info.role == Role::Train)
        .map(|(_, p)| p.center_spectra())
        .collect();
    let views: Vec<_> = centers.iter().map(|c| c.view()).collect();
    let training =
        ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?;
    let pca = fit_pca(training.view(), cfg.reduction).stage("spectral_reduction")?;
    let images = patches
        .iter()
        .map(|p| project_patches(p, &pca))
        .collect::<Result<Vec<_>>>()
        .stage("spectral_reduction")?;
    let spectral = patches
        .iter()
        .map(|p| spectral_block(p, cfg.spectral))
        .collect::<Result<Vec<_>>>()
        .stage("spectral_features")?;
    Ok(Prepared {
        scenes: scenes.iter().map(|s| s.info.clone()).collect(),
        patches,
        pca,
        images,
        spectral,
    })
}

fn samples_of(info: &SceneInfo, p: &PatchSet) -> Vec<SampleRow> {
    (0..p.len())
        .map(|i| {
            let (row, col) = p.centers()[i];
            let zone = p.zone_ids()[i];
            SampleRow {
                scene: info.name.clone(),
                date: info.date,
                group: group_id(info.date, zone),
                zone,
                class: p.class_labels().map(|l| l[i]),
                row,
                col,
            }
        })
        .collect()
}

fn stack(per_scene: &[&Vec<FeatureBlock>]) -> Result<Vec<FeatureBlock>> {
    let n_blocks = per_scene.first().map_or(0, |b| b.len());
    (0..n_blocks)
        .map(|j| {
            let parts: Vec<FeatureBlock> = per_scene.iter().map(|b| b[j].clone()).collect();
            FeatureBlock::vstack(&parts)
        })
        .collect()
}

/// Texture blocks for `method` on top of the shared preparation. Ranges are
/// taken from the training images and reused for test scenes.
pub fn features_with(prepared: &Prepared, method: &SpatialMethod) -> Result<Features> {
    let train_idx: Vec<usize> = (0..prepared.scenes.len())
        .filter(|&i| prepared.scenes[i].role == Role::Train)
        .collect();
    let test_idx: Vec<usize> = (0..prepared.scenes.len())
        .filter(|&i| prepared.scenes[i].role == Role::Test)
        .collect();
    let mut ranges: Vec<(f64, f64)> = Vec::new();
    for &i in &train_idx {
        for (j, (lo, hi)) in component_ranges(prepared.images[i].view())
            .into_iter()
            .enumerate()
        {
            if j == ranges.len() {
                ranges.push((lo, hi));
            } else {
                ranges[j] = (ranges[j].0.min(lo), ranges[j].1.max(hi));
            }
        }
    }
    let spatial: Vec<Vec<FeatureBlock>> = prepared
        .images
        .iter()
        .map(|img| spatial_block(img.view(), method, Some(&ranges)).map(|(b, _)| b))
        .collect::<Result<_>>()
        .stage("spatial_features")?;
    let set = |idx: &[usize]| -> Result<FeatureSet> {
        let sp: Vec<&Vec<FeatureBlock>> = idx.iter().map(|&i| &spatial[i]).collect();
        let se: Vec<&Vec<FeatureBlock>> = idx.iter().map(|&i| &prepared.spectral[i]).collect();
        let mut blocks = stack(&sp)?;
        blocks.extend(stack(&se)?);
        let samples = idx
            .iter()
            .flat_map(|&i| samples_of(&prepared.scenes[i], &prepared.patches[i]))
            .collect();
        Ok(FeatureSet { blocks, samples })
    };
    let train = set(&train_idx)?;
    let test = if test_idx.is_empty() {
        None
    } else {
        Some(set(&test_idx)?)
    };
    Ok(Features {
        scenes: prepared.scenes.clone(),
        train,
        test,
        pca: prepared.pca.clone(),
        ranges,
    })
}

pub fn extract_features(cfg: &PipelineConfig, scenes: &[Scene]) -> Result<Features> {
    features_with(&prepare(cfg, scenes)?, &cfg.spatial)
}

/// Unsupervised fusion with super-score images per scene.
#[derive(Debug, Clone)]
pub struct MbpcaOutcome {
    pub model: MbpcaModel,
    /// `(scene, component, image)` for every scene.
    pub images: Vec<(String, usize, Array2<Option<f64>>)>,
}

pub fn fuse_mbpca(cfg: &PipelineConfig, f: &Features) -> Result<MbpcaOutcome> {
    let FusionConfig::Mbpca { components } = cfg.fusion else {
        return Err(Error::InvalidArgument(
            "config does not request mbpca".into(),
        ));
    };
    let c = assemble(&f.train.blocks).stage("fusion")?;
    let model = fit_mbpca(&c, components).stage("fusion")?;
    let mut sets = vec![(&f.train, model.super_scores.clone())];
    if let Some(test) = &f.test {
        let tc = c.transform(&test.blocks).stage("fusion")?;
        sets.push((test, model.scores(&tc)?));
    }
    let mut images = Vec::new();
    for info in &f.scenes {
        for a in 0..components {
            let mut img = Array2::from_elem((info.height, info.width), None);
            for (set, scores) in &sets {
                for (i, s) in set.samples.iter().enumerate() {
                    if s.scene == info.name {
                        img[[s.row, s.col]] = Some(scores[[i, a]]);
                    }
                }
            }
            if img.iter().any(Option::is_some) {
                images.push((info.name.clone(), a + 1, img));
            }
        }
    }
    Ok(MbpcaOutcome { model, images })
}

pub fn rosa_a_max(cfg: &PipelineConfig) -> Result<usize> {
    match cfg.fusion {
        FusionConfig::Rosa { max_components, .. } => Ok(max_components),
        _ => Err(Error::InvalidArgument(
            "config does not request rosa".into(),
        )),
    }
}

pub fn run_cv(cfg: &PipelineConfig, train: &FeatureSet) -> Result<CvReport> {
    let FusionConfig::Rosa { max_components, cv } = &cfg.fusion else {
        return Err(Error::InvalidArgument(
            "config does not request rosa".into(),
        ));
    };
    let plan = cv.plan(train.groups(), *max_components, cfg.seed);
    nested_cv(&train.blocks, &train.labels()?, &plan).stage("discriminant")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene: String,
    pub date: u32,
    pub group: u32,
    pub row: usize,
    pub col: usize,
    pub actual: Option<u8>,
    pub predicted: u8,
    pub p_infected: f64,
}

/// Final supervised model at the chosen number of latent variables.
#[derive(Debug, Clone)]
pub struct RosaOutcome {
    /// ROSA fitted at the largest candidate; truncations give smaller A.
    pub model: RosaModel,
    pub a: usize,
    pub lda: LdaModel,
    pub predictions: Vec<Prediction>,
}

pub fn fit_final(cfg: &PipelineConfig, f: &Features, a: usize) -> Result<RosaOutcome> {
    let FusionConfig::Rosa { max_components, cv } = &cfg.fusion else {
        return Err(Error::InvalidArgument(
            "config does not request rosa".into(),
        ));
    };
    let labels = f.train.labels()?;
    let c = assemble(&f.train.blocks).stage("fusion")?;
    let y = Array1::from_iter(labels.iter().map(|&l| l as f64));
    let model = fit_rosa(&c, y.view(), (*max_components).max(a)).stage("fusion")?;
    let a = a.min(model.n_components());
    let lda = fit_lda_with(
        model.scores.slice(ndarray::s![.., ..a]),
        &labels,
        cv.shrinkage,
    )
    .stage("discriminant")?;
    let predictions = predict_test(f, &model, &lda)?;
    Ok(RosaOutcome {
        model,
        a,
        lda,
        predictions,
    })
}

/// Apply a fitted ROSA + LDA pair to the test set, if any. The number of
/// latent variables is the LDA dimension.
pub fn predict_test(f: &Features, model: &RosaModel, lda: &LdaModel) -> Result<Vec<Prediction>> {
    let Some(test) = &f.test else {
        return Ok(Vec::new());
    };
    let c = assemble(&f.train.blocks).stage("fusion")?;
    let tc = c.transform(&test.blocks).stage("fusion")?;
    let scores = model.scores_of(tc.concat().view(), lda.dim())?;
    let (pred, post) = lda.predict(scores.view())?;
    Ok(test
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| Prediction {
            scene: s.scene.clone(),
            date: s.date,
            group: s.group,
            row: s.row,
            col: s.col,
            actual: s.class,
            predicted: pred[i],
            p_infected: post[[i, 1]],
        })
        .collect())
}

/// Global and per-date confusion matrices of labelled predictions.
pub fn confusions(
    pred: &[Prediction],
) -> Result<(ConfusionMatrix, BTreeMap<u32, ConfusionMatrix>)> {
    let labelled: Vec<&Prediction> = pred.iter().filter(|p| p.actual.is_some()).collect();
    let all = confusion(
        &labelled.iter().map(|p| p.predicted).collect::<Vec<_>>(),
        &labelled
            .iter()
            .map(|p| p.actual.unwrap_or(CONTROL))
            .collect::<Vec<_>>(),
    )?;
    let mut by_date: BTreeMap<u32, ConfusionMatrix> = BTreeMap::new();
    for p in labelled {
        let m = confusion(&[p.predicted], &[p.actual.unwrap_or(CONTROL)])?;
        let e = by_date.entry(p.date).or_default();
        *e = e.merge(&m);
    }
    Ok((all, by_date))
}

// ---------------------------------------------------------------------------
// run-directory IO

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_rows<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

fn block_file(i: usize, b: &FeatureBlock) -> String {
    format!("{i:02}_{}_{}.csv", b.kind, b.source)
}

fn write_set(dir: &Path, role: &str, set: &FeatureSet) -> Result<()> {
    let bdir = dir.join("blocks").join(role);
    fs::create_dir_all(&bdir)?;
    for (i, b) in set.blocks.iter().enumerate() {
        b.write_csv(bdir.join(block_file(i, b)))?;
    }
    write_rows(dir.join(format!("samples_{role}.csv")), &set.samples)
}

fn read_set(dir: &Path, role: &str) -> Result<Option<FeatureSet>> {
    let bdir = dir.join("blocks").join(role);
    if !bdir.is_dir() {
        return Ok(None);
    }
    let mut files: Vec<_> = fs::read_dir(&bdir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.sort();
    let blocks = files
        .iter()
        .map(FeatureBlock::read_csv)
        .collect::<Result<Vec<_>>>()?;
    let samples = read_rows(dir.join(format!("samples_{role}.csv")))?;
    Ok(Some(FeatureSet { blocks, samples }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CensusLine {
    scene: String,
    zone: u32,
    infected: usize,
    control: usize,
    unlabelled: usize,
}

/// Patch counts per scene and zone.
pub fn write_census(path: impl AsRef<Path>, prepared: &Prepared) -> Result<()> {
    let mut lines = Vec::new();
    for (info, p) in prepared.scenes.iter().zip(&prepared.patches) {
        let mut by_zone: BTreeMap<u32, CensusLine> = BTreeMap::new();
        for row in p.census() {
            let e = by_zone.entry(row.zone_id).or_insert_with(|| CensusLine {
                scene: info.name.clone(),
                zone: row.zone_id,
                infected: 0,
                control: 0,
                unlabelled: 0,
            });
            match row.class_label {
                Some(INFECTED) => e.infected += row.patches,
                Some(CONTROL) => e.control += row.patches,
                _ => e.unlabelled += row.patches,
            }
        }
        lines.extend(by_zone.into_values());
    }
    write_rows(path, &lines)
}

pub fn write_features(dir: impl AsRef<Path>, f: &Features) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("models"))?;
    write_json(dir.join("scenes.json"), &f.scenes)?;
    write_json(dir.join("models/pca.json"), &f.pca)?;
    write_json(dir.join("models/ranges.json"), &f.ranges)?;
    write_set(dir, "train", &f.train)?;
    if let Some(t) = &f.test {
        write_set(dir, "test", t)?;
    }
    Ok(())
}

pub fn read_features(dir: impl AsRef<Path>) -> Result<Features> {
    let dir = dir.as_ref();
    Ok(Features {
        scenes: read_json(dir.join("scenes.json"))?,
        train: read_set(dir, "train")?.ok_or_else(|| {
            Error::InvalidArgument(format!("no training blocks under {}", dir.display()))
        })?,
        test: read_set(dir, "test")?,
        pca: read_json(dir.join("models/pca.json"))?,
        ranges: read_json(dir.join("models/ranges.json"))?,
    })
}

fn block_stem(kind: crate::block::BlockKind, source: usize) -> String {
    format!("{kind}_{source}")
}

pub fn write_mbpca(dir: impl AsRef<Path>, out: &MbpcaOutcome) -> Result<()> {
    let dir = dir.as_ref();
    for sub in ["models", "scores", "loadings"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let m = &out.model;
    write_json(dir.join("models/mbpca.json"), m)?;
    for (scene, a, img) in &out.images {
        write_pgm16(dir.join(format!("scores/{scene}_c{a}.pgm")), img)?;
    }
    let comps: Vec<String> = (1..=m.n_components()).map(|a| format!("c{a}")).collect();
    for (b, meta) in m.blocks.iter().enumerate() {
        let mut header = vec!["feature".to_string()];
        header.extend(comps.iter().cloned());
        write_matrix_csv(
            dir.join(format!(
                "loadings/{b:02}_{}.csv",
                block_stem(meta.kind, meta.source)
            )),
            &header,
            Some(&meta.columns),
            m.block_loadings(b).view(),
        )?;
    }
    let ev = Array2::from_shape_fn((m.n_components(), 1), |(a, _)| m.explained_variance[a]);
    write_matrix_csv(
        dir.join("explained_variance.csv"),
        &["component".to_string(), "explained_variance".to_string()],
        Some(&comps),
        ev.view(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub component: usize,
    pub block_type: String,
    pub block_number: usize,
    pub block_index: usize,
    pub residual_norm: f64,
    /// Mean inner CV error at this number of latent variables, when known.
    pub cv_error: Option<f64>,
}

pub fn selection_trace(model: &RosaModel, cv: Option<&CvReport>) -> Vec<TraceRow> {
    model
        .trace
        .iter()
        .map(|s| TraceRow {
            component: s.component,
            block_type: s.kind.to_string(),
            block_number: s.source,
            block_index: s.block,
            residual_norm: s.residual_norm,
            cv_error: cv.and_then(|r| {
                r.a_values
                    .iter()
                    .position(|&a| a == s.component)
                    .map(|i| r.mean_curve[i])
            }),
        })
        .collect()
}

pub fn write_cv(dir: impl AsRef<Path>, report: &CvReport) -> Result<()> {
    let dir = dir.as_ref();
    report.write_curve_csv(dir.join("cv_curve.csv"))?;
    write_json(dir.join("cv_summary.json"), report)?;
    let merged = report
        .folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| {
            acc.merge(&f.outer_confusion)
        });
    merged.write_csv(dir.join("confusion_cv.csv"), Default::default())
}

pub fn write_rosa(dir: impl AsRef<Path>, out: &RosaOutcome, cv: Option<&CvReport>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("models"))?;
    write_json(dir.join("models/rosa.json"), &out.model)?;
    write_json(dir.join("models/lda.json"), &out.lda)?;
    write_rows(
        dir.join("selection_trace.csv"),
        &selection_trace(&out.model, cv),
    )?;
    if !out.predictions.is_empty() {
        write_rows(dir.join("predictions_test.csv"), &out.predictions)?;
    }
    Ok(())
}

/// Confusion tables from a predictions file; returns the global matrix.
pub fn write_report(
    dir: impl AsRef<Path>,
) -> Result<Option<(ConfusionMatrix, BTreeMap<u32, ConfusionMatrix>)>> {
    let dir = dir.as_ref();
    let path = dir.join("predictions_test.csv");
    if !path.exists() {
        return Ok(None);
    }
    let pred: Vec<Prediction> = read_rows(path)?;
    let (all, by_date) = confusions(&pred)?;
    all.write_csv(dir.join("confusion_test.csv"), Default::default())?;
    for (d, m) in &by_date {
        m.write_csv(
            dir.join(format!("confusion_date_{d:02}.csv")),
            Default::default(),
        )?;
    }
    Ok(Some((all, by_date)))
}

/// Loadings matrix written by [`write_mbpca`].
pub fn read_loadings(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    Ok(read_matrix_csv(path, 1)?.1)
}
