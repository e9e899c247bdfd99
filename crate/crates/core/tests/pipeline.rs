mod common;

use std::fs;
use std::path::Path;

use common::*;
use ndarray::{Array2, Array3};
use rand::Rng;
use serde_json::json;
use spatspec::cube_io::{
    write_envi, ByteOrder, DataType, HyperCube, Interleave, SpectralAxis, Unit,
};
use spatspec::discriminant::{ConfusionMatrix, CvReport};
use spatspec::patching::{write_zones_csv, ZoneSpec};
use spatspec::pipeline::{
    self, read_features, read_loadings, read_rows, sweep_gray_levels, PipelineConfig, Prediction,
    SampleRow, TraceRow,
};

/// Zone rectangles whose 3×3 patch counts are 28, 144, 19, 5, 5, 1, 2 and 4.
fn census_zones() -> Vec<ZoneSpec> {
    let rects = [
        (0, 0, 6, 9),
        (0, 10, 14, 14),
        (15, 0, 3, 21),
        (19, 0, 3, 7),
        (19, 8, 3, 7),
        (19, 16, 3, 3),
        (19, 20, 3, 4),
        (23, 0, 4, 4),
    ];
    rects
        .iter()
        .enumerate()
        .map(|(i, &(r, c, h, w))| ZoneSpec::rect(i as u32 + 1, Some((i % 2) as u8), r, c, h, w))
        .collect()
}

fn write_mask_png(path: &Path, mask: &Array2<bool>) {
    let (h, w) = mask.dim();
    let file = fs::File::create(path).unwrap();
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let data: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    enc.write_header().unwrap().write_image_data(&data).unwrap();
}

/// Raw-count cube plus white and dark references, a zone CSV and a mask.
fn write_envi_scene(dir: &Path, seed: u64) -> serde_json::Value {
    let (h, w, b) = (28, 30, 24);
    let zones = census_zones();
    let mut class = Array2::from_elem((h, w), None);
    for z in &zones {
        for &(r, c) in &z.pixels {
            class[[r, c]] = z.class_label;
        }
    }
    let axis = SpectralAxis::uniform(1000.0, 20.0, b).unwrap();
    let mut rng = rng(seed);
    let raw = Array3::from_shape_fn((h, w, b), |(r, c, j)| {
        let bump = if class[[r, c]] == Some(1) && (8..12).contains(&j) {
            0.15
        } else {
            0.0
        };
        10.0 + 990.0 * (0.5 - bump + 0.05 * rng.random::<f64>())
    });
    let save = |name: &str, v: Array3<f64>| {
        let cube = HyperCube::new(v, axis.clone(), Unit::RawCounts).unwrap();
        write_envi(
            &cube,
            dir.join(format!("{name}.hdr")),
            Interleave::Bil,
            DataType::F32,
            ByteOrder::Little,
        )
        .unwrap();
    };
    save("leaf", raw);
    save("white", Array3::from_elem((h, w, b), 1000.0));
    save("dark", Array3::from_elem((h, w, b), 10.0));
    write_zones_csv(&zones, dir.join("zones.csv")).unwrap();
    write_mask_png(&dir.join("mask.png"), &class.mapv(|c| c.is_some()));
    json!({
        "input": {
            "source": "envi",
            "images": [{
                "header": dir.join("leaf.hdr"),
                "white": dir.join("white.hdr"),
                "dark": dir.join("dark.hdr"),
                "mask": dir.join("mask.png"),
                "zones": dir.join("zones.csv"),
                "date": 1
            }]
        },
        "patch_width": 3,
        "savgol": { "window": 5, "degree": 2, "deriv_order": 0 },
        "trim": 2,
        "reduction": { "count": 2 },
        "spatial": { "method": "tensor" },
        "spectral": { "method": "mean" },
        "fusion": {
            "mode": "rosa",
            "max_components": 3,
            "cv": { "outer_subsets": 2, "outer_subset_size": 2, "a_min": 1 }
        },
        "seed": 3
    })
}

fn small_synthetic(seed: u64) -> PipelineConfig {
    serde_json::from_value(json!({
        "input": {
            "source": "synthetic",
            "spec": {
                "layout": { "kind": "zones", "zones_per_class": 4, "zone_size": 6, "gap": 2, "columns": 4 },
                "bands": 64,
                "contrast": "both",
                "magnitude": 0.6,
                "seed": seed
            },
            "dates": 2,
            "test_scenes": true
        },
        "patch_width": 3,
        "savgol": { "window": 7, "degree": 2, "deriv_order": 1 },
        "trim": 3,
        "reduction": { "count": 2 },
        "spatial": { "method": "haralick", "levels": 8, "distance": 1, "orientations": [0, 45, 90, 135] },
        "spectral": { "method": "svd", "signatures": 2 },
        "fusion": {
            "mode": "rosa",
            "max_components": 5,
            "cv": { "outer_subsets": 2, "outer_subset_size": 4, "a_min": 1 }
        },
        "seed": seed
    }))
    .unwrap()
}

#[derive(serde::Deserialize)]
struct CensusLine {
    zone: u32,
    infected: usize,
    control: usize,
    unlabelled: usize,
}

#[test]
fn envi_input_runs_end_to_end_with_the_expected_census() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: PipelineConfig = serde_json::from_value(write_envi_scene(dir.path(), 4)).unwrap();
    let out = dir.path().join("run");
    let summary = pipeline::run(&cfg, &out).unwrap();

    let census: Vec<CensusLine> = read_rows(out.join("census.csv")).unwrap();
    let counts: Vec<usize> = census
        .iter()
        .map(|l| l.infected + l.control + l.unlabelled)
        .collect();
    assert_eq!(counts, [28, 144, 19, 5, 5, 1, 2, 4]);
    assert_eq!(counts.iter().sum::<usize>(), 208);
    assert_eq!(
        census.iter().map(|l| l.zone).collect::<Vec<_>>(),
        (1..=8).collect::<Vec<_>>()
    );
    assert!(census.iter().all(|l| l.unlabelled == 0));
    assert_eq!(summary.features.train.samples.len(), 208);
    let bands = summary.features.train.blocks.last().unwrap().data.ncols();
    assert_eq!(bands, 24 - 2 * 2);
    assert!(summary.manifest.verify(&out).unwrap().is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small_synthetic(5);
    let dir = tempfile::tempdir().unwrap();
    let a = pipeline::run(&cfg, dir.path().join("a")).unwrap();
    let b = pipeline::run(&cfg, dir.path().join("b")).unwrap();
    assert!(a.manifest.files.iter().any(|f| f.path.ends_with(".csv")));
    assert_eq!(a.manifest, b.manifest);
    let other = pipeline::run(&small_synthetic(6), dir.path().join("c")).unwrap();
    assert_ne!(a.manifest.files, other.manifest.files);
}

#[test]
fn written_tables_read_back() {
    let cfg = small_synthetic(9);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let s = pipeline::run(&cfg, out).unwrap();

    let f = read_features(out).unwrap();
    assert_eq!(f.scenes, s.features.scenes);
    assert_eq!(f.train.samples, s.features.train.samples);
    for (x, y) in f.train.blocks.iter().zip(&s.features.train.blocks) {
        assert_eq!(x.kind, y.kind);
        assert_eq!(x.source, y.source);
        assert_eq!(x.data, y.data);
    }
    let samples: Vec<SampleRow> = read_rows(out.join("samples_test.csv")).unwrap();
    assert_eq!(samples, s.features.test.as_ref().unwrap().samples);

    let cv = s.cv.as_ref().unwrap();
    let curve = CvReport::read_mean_curve(out.join("cv_curve.csv")).unwrap();
    assert_eq!(curve.iter().map(|c| c.0).collect::<Vec<_>>(), cv.a_values);
    assert_eq!(curve.iter().map(|c| c.1).collect::<Vec<_>>(), cv.mean_curve);

    let rosa = s.rosa.as_ref().unwrap();
    let trace: Vec<TraceRow> = read_rows(out.join("selection_trace.csv")).unwrap();
    assert_eq!(trace, pipeline::selection_trace(&rosa.model, Some(cv)));
    let pred: Vec<Prediction> = read_rows(out.join("predictions_test.csv")).unwrap();
    assert_eq!(pred, rosa.predictions);

    let test = ConfusionMatrix::read_csv(out.join("confusion_test.csv")).unwrap();
    assert_eq!(Some(test), s.test_confusion);
    for d in 1..=2 {
        assert!(
            ConfusionMatrix::read_csv(out.join(format!("confusion_date_{d:02}.csv")))
                .unwrap()
                .total()
                > 0
        );
    }
    ConfusionMatrix::read_csv(out.join("confusion_cv.csv")).unwrap();
}

#[test]
fn mbpca_loadings_read_back() {
    let mut cfg: PipelineConfig = serde_json::from_str(
        &fs::read_to_string(workspace_file("configs/case1_wood.json")).unwrap(),
    )
    .unwrap();
    if let pipeline::InputConfig::Synthetic { spec, .. } = &mut cfg.input {
        spec.layout = spatspec::synth::Layout::Disk {
            radius: 12,
            margin: 3,
            ring_period: 6.0,
        };
        spec.bands = 64;
    }
    cfg.trim = 6;
    let dir = tempfile::tempdir().unwrap();
    let s = pipeline::run(&cfg, dir.path()).unwrap();
    let m = &s.mbpca.as_ref().unwrap().model;
    for (b, meta) in m.blocks.iter().enumerate() {
        let path = dir
            .path()
            .join(format!("loadings/{b:02}_{}_{}.csv", meta.kind, meta.source));
        let l = read_loadings(path).unwrap();
        let expect = m.block_loadings(b);
        assert_eq!(l.dim(), expect.dim());
        assert!(l
            .iter()
            .zip(expect.iter())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs().max(1.0)));
    }
}

#[test]
fn sweep_over_one_level_gives_one_row() {
    let rows = sweep_gray_levels(&small_synthetic(2), &[2]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].levels, 2);
    assert!((0.0..=1.0).contains(&rows[0].min_error));
    assert!(sweep_gray_levels(&small_synthetic(2), &[]).is_err());
}

#[test]
fn binary_quantization_loses_to_a_mid_range_level_count() {
    let cfg: PipelineConfig = serde_json::from_value(json!({
        "input": {
            "source": "synthetic",
            "spec": {
                "layout": { "kind": "zones", "zones_per_class": 6, "zone_size": 7, "gap": 2, "columns": 4 },
                "bands": 64,
                "contrast": "texture_only",
                "magnitude": 0.8,
                "seed": 1
            },
            "dates": 2
        },
        "patch_width": 3,
        "reduction": { "count": 2 },
        "spatial": { "method": "haralick", "levels": 8, "distance": 1, "orientations": [0, 45, 90, 135] },
        "spectral": { "method": "mean" },
        "fusion": {
            "mode": "rosa",
            "max_components": 5,
            "cv": { "outer_subsets": 2, "outer_subset_size": 6, "a_min": 1 }
        },
        "seed": 1
    }))
    .unwrap();
    let rows = sweep_gray_levels(&cfg, &[8, 2, 8]).unwrap();
    assert_eq!(rows.iter().map(|r| r.levels).collect::<Vec<_>>(), [2, 8]);
    assert!(rows[1].min_error <= rows[0].min_error, "{rows:?}");
}
