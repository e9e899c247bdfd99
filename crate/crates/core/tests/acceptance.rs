//! The ten acceptance criteria. Each test prints one `PASS`/`FAIL` line.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::*;
use ndarray::{s, Array1, Array2, ArrayView1};
use rand::Rng;
use spatspec::block::BlockKind;
use spatspec::discriminant::{fold_errors, nested_cv, ConfusionMatrix, CvPlan, Rounding};
use spatspec::fusion::{assemble, fit_mbpca, fit_rosa};
use spatspec::pipeline::{
    extract_features, ingest, read_loadings, read_rows, run, PipelineConfig, TraceRow,
};
use spatspec::preprocess::{savgol, SavGolSpec};
use spatspec::reduction::{fit_pca, ComponentSelector};
use spatspec::synth::{ContrastKind, SyntheticSpec};
use spatspec::texture::{
    glcm, haralick, quantize, structure_tensor, Glcm, HaralickVector, Orientation,
};

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

#[test]
fn c01_confusion_arithmetic() {
    let (outcome, took) = timed(|| -> Result<String, String> {
        let tables = [
            ((573, 86, 51, 538), ["13.0", "8.6", "8.1", "13.7", "10.9"]),
            ((188, 33, 20, 175), ["14.9", "10.2", "9.6", "15.8", "12.7"]),
            ((177, 15, 31, 193), ["7.8", "13.8", "14.9", "7.2", "11.0"]),
            ((208, 38, 0, 170), ["15.4", "0.0", "0.0", "18.2", "9.1"]),
        ];
        for ((ii, ic, ci, cc), printed) in tables {
            let m = ConfusionMatrix::from_table(ii, ic, ci, cc);
            let got = m.report(Rounding::default()).formatted();
            ensure(got == printed.map(String::from), || {
                format!("({ii},{ic},{ci},{cc}) gave {got:?}, expected {printed:?}")
            })?;
        }
        let dates = [(188, 33, 20, 175), (177, 15, 31, 193), (208, 38, 0, 170)]
            .map(|(a, b, c, d)| ConfusionMatrix::from_table(a, b, c, d));
        let pooled = dates[0].merge(&dates[1]).merge(&dates[2]);
        ensure(pooled.table() == [573, 86, 51, 538], || {
            format!("pooled dates {:?}", pooled.table())
        })?;
        Ok("4 tables, 20 percentages".into())
    });
    let outcome = outcome.and_then(|d| {
        ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
        Ok(format!("{d} in {took:?}"))
    });
    verdict("c01", "confusion arithmetic", outcome);
}

#[test]
fn c02_savitzky_golay() {
    let (outcome, took) = timed(|| -> Result<String, String> {
        let spec = SavGolSpec::new(13, 3, 2).unwrap();
        let mut rng = rng(2);
        let bands = 256;
        // Cubic polynomials: exact second derivative away from the edges.
        let mut worst_poly = 0.0f64;
        for _ in 0..50 {
            let c = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1e-2..1e-2),
                rng.random_range(-1e-4..1e-4),
                rng.random_range(-1e-6..1e-6),
            ];
            let x = Array2::from_shape_fn((1, bands), |(_, i)| {
                let t = i as f64;
                c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t
            });
            let d2 = savgol(x.view(), &spec).unwrap();
            for i in 6..bands - 6 {
                let exact = 2.0 * c[2] + 6.0 * c[3] * i as f64;
                worst_poly = worst_poly.max((d2[[0, i]] - exact).abs());
            }
        }
        ensure(worst_poly < 1e-10, || {
            format!("polynomial error {worst_poly:e}")
        })?;

        let x = normal_matrix(&mut rng, 1000, bands);
        let got = savgol(x.view(), &spec).unwrap();
        let mut worst = 0.0f64;
        for r in 0..x.nrows() {
            let oracle = savgol_oracle(x.row(r).as_slice().unwrap(), 13, 3, 2);
            for (a, b) in got.row(r).iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
        }
        ensure(worst < 1e-10, || format!("oracle error {worst:e}"))?;
        Ok(format!(
            "cubic error {worst_poly:.1e}, oracle error {worst:.1e} over 1000 spectra"
        ))
    });
    let outcome = outcome.and_then(|d| {
        ensure(took < Duration::from_secs(5), || format!("took {took:?}"))?;
        Ok(format!("{d} in {took:?}"))
    });
    verdict("c02", "Savitzky-Golay", outcome);
}

#[test]
fn c03_haralick_glcm() {
    let (outcome, took) = timed(|| -> Result<String, String> {
        let mut rng = rng(3);
        let mut worst = 0.0f64;
        for k in 0..500 {
            let levels = rng.random_range(2..=12);
            let p = random_glcm(&mut rng, levels, k % 2 == 0);
            let got = haralick(&Glcm::from_probabilities(p.clone()).unwrap()).to_array();
            let oracle = haralick_oracle(&p);
            for (f, (a, b)) in got.iter().zip(&oracle).enumerate() {
                let err = (a - b).abs();
                ensure(err < 1e-9, || {
                    format!("GLCM {k}: {} {a} vs {b}", HaralickVector::NAMES[f])
                })?;
                worst = worst.max(err);
            }
        }

        let img = ndarray::array![[0usize, 0, 1], [0, 0, 1], [0, 1, 1]];
        let g = glcm(img.view(), 2, 1, &Orientation::ALL).unwrap();
        let hand = ndarray::array![[0.4, 0.2], [0.2, 0.2]];
        ensure(g.p == hand, || format!("hand-enumerated GLCM {:?}", g.p))?;

        let flat = Array2::from_elem((3, 3), 0.7);
        let q = quantize(flat.view(), 8, 0.0, 1.0).unwrap();
        let h = haralick(&glcm(q.view(), 8, 1, &Orientation::ALL).unwrap());
        let level = (q[[0, 0]] + 1) as f64;
        let expect = [
            ("angular_second_moment", h.angular_second_moment, 1.0),
            ("contrast", h.contrast, 0.0),
            ("correlation", h.correlation, 0.0),
            ("entropy", h.entropy, 0.0),
            (
                "info_measure_correlation_1",
                h.info_measure_correlation_1,
                0.0,
            ),
            (
                "info_measure_correlation_2",
                h.info_measure_correlation_2,
                0.0,
            ),
            (
                "maximal_correlation_coefficient",
                h.maximal_correlation_coefficient,
                0.0,
            ),
            ("sum_average", h.sum_average, 2.0 * level),
            ("sum_variance", h.sum_variance, 0.0),
        ];
        for (name, got, want) in expect {
            ensure(got == want, || {
                format!("constant patch {name} = {got}, expected {want}")
            })?;
        }
        Ok(format!("max deviation {worst:.1e} over 500 matrices"))
    });
    let outcome = outcome.and_then(|d| {
        ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
        Ok(format!("{d} in {took:?}"))
    });
    verdict("c03", "Haralick/GLCM", outcome);
}

fn rot90(a: &Array2<f64>) -> Array2<f64> {
    let (h, w) = a.dim();
    Array2::from_shape_fn((w, h), |(r, c)| a[[c, w - 1 - r]])
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[test]
fn c04_structure_tensor() {
    let outcome = (|| -> Result<String, String> {
        let mut rng = rng(4);
        for k in 0..10_000 {
            let size = [3usize, 5, 7][k % 3];
            let scale = 10f64.powi(rng.random_range(-3..4));
            let p = normal_matrix(&mut rng, size, size) * scale;
            let f = structure_tensor(p.view());
            ensure((0.0..=1.0).contains(&f.coherence), || {
                format!("coherence {} on patch {k}", f.coherence)
            })?;
        }

        let ramp = Array2::from_shape_fn((7, 7), |(_, c)| 0.5 * c as f64 - 1.0);
        let f = structure_tensor(ramp.view());
        ensure(f.coherence > 0.999, || {
            format!("ramp coherence {}", f.coherence)
        })?;
        ensure(angle_gap(f.phase, 0.0) < 1e-6, || {
            format!("ramp phase {}", f.phase)
        })?;

        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let p = normal_matrix(&mut rng, 7, 7);
            let a = structure_tensor(p.view());
            let b = structure_tensor(rot90(&p).view());
            let errs = [
                (a.magnitude - b.magnitude).abs() / a.magnitude.max(1.0),
                (a.coherence - b.coherence).abs(),
                angle_gap(b.phase, a.phase + PI / 2.0),
            ];
            worst = errs.iter().copied().fold(worst, f64::max);
        }
        ensure(worst < 1e-10, || format!("rotation deviation {worst:e}"))?;
        Ok(format!(
            "10^4 patches in [0,1], ramp coherence {:.6}, rotation deviation {worst:.1e}",
            f.coherence
        ))
    })();
    verdict("c04", "structure tensor", outcome);
}

#[test]
fn c05_mbpca_matches_concatenated_pca() {
    let outcome = (|| -> Result<String, String> {
        let mut worst = 0.0f64;
        for seed in 0..5 {
            let mut rng = rng(50 + seed);
            let widths = [4usize, 9, 6];
            let raw: Vec<_> = widths
                .iter()
                .enumerate()
                .map(|(b, &w)| {
                    let scales = Array1::from_shape_fn(w, |_| rng.random_range(0.5..3.0));
                    let data = normal_matrix(&mut rng, 200, w) * &scales + 2.0;
                    block(BlockKind::Spectral, b + 1, data)
                })
                .collect();
            let c = assemble(&raw).unwrap();
            let x = c.concat();
            let a = 6;
            let model = fit_mbpca(&c, a).unwrap();
            let (vals, vecs) = gram_eigen(&x);
            let total: f64 = vals.iter().sum();
            for k in 0..a {
                let v = Array1::from_shape_fn(x.ncols(), |r| vecs[(r, k)]);
                let mine = model.loadings.column(k);
                let sign = mine.dot(&v).signum();
                let t = x.dot(&v) * sign;
                let dev = [
                    (&mine - &(&v * sign))
                        .iter()
                        .fold(0.0f64, |m, e| m.max(e.abs())),
                    (&model.super_scores.column(k) - &t)
                        .iter()
                        .fold(0.0f64, |m, e| m.max(e.abs())),
                    (model.explained_variance[k] - vals[k] / total).abs(),
                ];
                worst = dev.iter().copied().fold(worst, f64::max);
                let tt = t.dot(&t);
                for (b, xb) in c.blocks().iter().enumerate() {
                    let pb = xb.data.t().dot(&t) / tt;
                    let got = model.block_loadings(b);
                    let d = (&got.column(k) - &pb)
                        .iter()
                        .fold(0.0f64, |m, e| m.max(e.abs()));
                    worst = worst.max(d);
                }
            }
        }
        ensure(worst < 1e-8, || format!("multi-block deviation {worst:e}"))?;

        // One block: same subspace as ordinary PCA, component by component.
        let mut rng = rng(59);
        let raw = vec![block(
            BlockKind::Spectral,
            1,
            normal_matrix(&mut rng, 200, 12),
        )];
        let c = assemble(&raw).unwrap();
        let model = fit_mbpca(&c, 5).unwrap();
        let pca = fit_pca(c.concat().view(), ComponentSelector::Count(5)).unwrap();
        let mut single = 0.0f64;
        for k in 0..5 {
            let a = model.loadings.column(k);
            let b = pca.loadings.column(k);
            let sign = a.dot(&b).signum();
            single = single.max((&a - &(&b * sign)).iter().fold(0.0, |m, e| m.max(e.abs())));
        }
        ensure(single < 1e-8, || {
            format!("single-block deviation {single:e}")
        })?;
        Ok(format!(
            "3-block deviation {worst:.1e}, single-block deviation {single:.1e}"
        ))
    })();
    verdict("c05", "MB-PCA", outcome);
}

#[test]
fn c06_rosa() {
    let outcome = (|| -> Result<String, String> {
        // One block: ROSA is PLS1.
        let mut worst_pls = 0.0f64;
        for seed in 0..10 {
            let mut rng = rng(60 + seed);
            let n = 80;
            let x = normal_matrix(&mut rng, n, 15);
            let y =
                Array1::from_shape_fn(n, |i| x[[i, 0]] - 0.5 * x[[i, 3]] + 0.3 * normal(&mut rng));
            let c = assemble(&[block(BlockKind::Spectral, 1, x)]).unwrap();
            let xs = c.concat();
            let a = 6;
            let model = fit_rosa(&c, y.view(), a).unwrap();
            let yc = &y - y.mean().unwrap();
            let betas = pls1_nipals(&xs, &yc, a);
            for (k, beta) in betas.iter().enumerate() {
                let ours = xs.dot(&model.beta_at(k + 1));
                let theirs = xs.dot(beta);
                worst_pls =
                    worst_pls.max((&ours - &theirs).iter().fold(0.0, |m, e| m.max(e.abs())));
            }
            let full = model.predict(&c).unwrap();
            let oracle = xs.dot(&betas[a - 1]) + y.mean().unwrap();
            worst_pls = worst_pls.max((&full - &oracle).iter().fold(0.0, |m, e| m.max(e.abs())));
        }
        ensure(worst_pls < 1e-8, || {
            format!("PLS1 prediction deviation {worst_pls:e}")
        })?;

        // Three blocks: winners, orthonormality, monotone residual.
        let mut worst_gram = 0.0f64;
        for seed in 0..100 {
            let mut rng = rng(1000 + seed);
            let n = rng.random_range(30..60);
            let raw: Vec<_> = (0..3)
                .map(|b| {
                    let width = rng.random_range(2..10);
                    block(
                        BlockKind::Spectral,
                        b + 1,
                        normal_matrix(&mut rng, n, width),
                    )
                })
                .collect();
            let c = assemble(&raw).unwrap();
            let mix: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = Array1::from_shape_fn(n, |i| {
                (0..3)
                    .map(|b| mix[b] * c.blocks()[b].data[[i, 0]])
                    .sum::<f64>()
                    + 0.5 * normal(&mut rng)
            });
            let a = 5;
            let model = fit_rosa(&c, y.view(), a).unwrap();
            let scaled: Vec<Array2<f64>> = c.blocks().iter().map(|b| b.data.clone()).collect();
            let oracle = rosa_bruteforce(&scaled, &y, model.n_components());
            ensure(model.winners() == oracle, || {
                format!(
                    "problem {seed}: winners {:?}, oracle {oracle:?}",
                    model.winners()
                )
            })?;
            let gram = model.scores.t().dot(&model.scores);
            let eye = Array2::<f64>::eye(gram.nrows());
            worst_gram = worst_gram.max((&gram - &eye).iter().fold(0.0, |m, e| m.max(e.abs())));
            let r: Vec<f64> = model.trace.iter().map(|s| s.residual_norm).collect();
            let y_norm = (&y - y.mean().unwrap()).mapv(|v| v * v).sum().sqrt();
            ensure(r[0] <= y_norm + 1e-12, || {
                format!("problem {seed}: first residual above ‖y‖")
            })?;
            ensure(r.windows(2).all(|w| w[1] <= w[0] + 1e-12), || {
                format!("problem {seed}: residuals {r:?}")
            })?;
        }
        ensure(worst_gram < 1e-8, || {
            format!("TᵀT deviation {worst_gram:e}")
        })?;
        Ok(format!(
            "PLS1 deviation {worst_pls:.1e}, 100/100 winner sequences, TᵀT deviation {worst_gram:.1e}"
        ))
    })();
    verdict("c06", "ROSA", outcome);
}

#[test]
fn c07_nested_cv_leakage() {
    let outcome = (|| -> Result<String, String> {
        // Sentinel: a y-copy only in the held-out rows of each fold.
        let (mut blocks, y, groups) = two_class_blocks(71, 20, 6, &[12, 8], 1.5);
        let n = y.len();
        let mut rng = rng(72);
        let noise_train: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let noise_test: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let a_values: Vec<usize> = (1..=5).collect();
        let (mut with, mut base, mut copy_everywhere) =
            (vec![0u64; 5], vec![0u64; 5], vec![0u64; 5]);
        blocks.push(block(BlockKind::Spectral, 9, Array2::zeros((n, 1))));
        let sentinel_at = blocks.len() - 1;
        for g in 0..20u32 {
            let train: Vec<usize> = (0..n).filter(|&i| groups[i] != g).collect();
            let test: Vec<usize> = (0..n).filter(|&i| groups[i] == g).collect();
            let mut run_arm = |held: &dyn Fn(usize) -> f64,
                               tr: &dyn Fn(usize) -> f64,
                               acc: &mut Vec<u64>| {
                let col =
                    Array2::from_shape_fn(
                        (n, 1),
                        |(i, _)| if groups[i] == g { held(i) } else { tr(i) },
                    );
                blocks[sentinel_at].data = col;
                let (errs, _) = fold_errors(&blocks, &y, &train, &test, &a_values, 1e-6).unwrap();
                for (a, e) in acc.iter_mut().zip(errs) {
                    *a += e;
                }
            };
            run_arm(&|i| y[i] as f64, &|i| noise_train[i], &mut with);
            run_arm(&|i| noise_test[i], &|i| noise_train[i], &mut base);
            run_arm(&|i| y[i] as f64, &|i| y[i] as f64, &mut copy_everywhere);
        }
        let mut detail = Vec::new();
        for k in 0..5 {
            let (pw, pb) = (with[k] as f64 / n as f64, base[k] as f64 / n as f64);
            let p = pb.clamp(1.0 / n as f64, 0.5);
            let band = 2.576 * (2.0 * p * (1.0 - p) / n as f64).sqrt();
            ensure(pw >= pb - band, || {
                format!(
                    "A={}: sentinel error {pw:.3} below {pb:.3} - {band:.3}",
                    k + 1
                )
            })?;
            detail.push(format!("{pw:.3}/{pb:.3}"));
        }
        ensure(copy_everywhere.iter().all(|&e| e == 0), || {
            format!("positive control: a y-copy in training rows left errors {copy_everywhere:?}")
        })?;

        // Separable classes: perfect nested CV with at most two components.
        let (blocks, y, groups) = two_class_blocks(73, 24, 5, &[6, 10], 40.0);
        let mut plan = CvPlan::new(groups, 8, 74);
        plan.outer_subsets = 2;
        plan.outer_subset_size = 6;
        let report = nested_cv(&blocks, &y, &plan).unwrap();
        ensure(report.mean_outer_error == 0.0, || {
            format!("separable outer error {}", report.mean_outer_error)
        })?;
        ensure(report.optimal_a <= 2, || {
            format!("separable optimal A {}", report.optimal_a)
        })?;
        ensure(report.folds.iter().all(|f| f.selected_a <= 2), || {
            "a fold selected A > 2".into()
        })?;
        Ok(format!(
            "sentinel/baseline error by A {}; separable: 0% at A={}",
            detail.join(" "),
            report.optimal_a
        ))
    })();
    verdict("c07", "nested CV leakage", outcome);
}

fn selection_config(kind: ContrastKind, seed: u64) -> PipelineConfig {
    let spec = SyntheticSpec {
        contrast: kind,
        ..SyntheticSpec::default()
    };
    let json = serde_json::json!({
        "input": {"source": "synthetic", "spec": spec, "dates": 5},
        "patch_width": 3,
        "reduction": {"count": 3},
        "spatial": {"method": "haralick", "levels": 8, "distance": 1, "orientations": [0, 45, 90, 135]},
        "spectral": {"method": "svd", "signatures": 3},
        "fusion": {"mode": "rosa", "max_components": 10},
        "seed": seed,
    });
    PipelineConfig::from_json(&json.to_string()).unwrap()
}

fn first_block(kind: ContrastKind, seed: u64) -> (BlockKind, usize, Duration) {
    let t = Instant::now();
    let cfg = selection_config(kind, seed);
    let scenes = ingest(&cfg).unwrap();
    let f = extract_features(&cfg, &scenes).unwrap();
    let y: Vec<f64> = f
        .train
        .labels()
        .unwrap()
        .iter()
        .map(|&v| v as f64)
        .collect();
    let c = assemble(&f.train.blocks).unwrap();
    let model = fit_rosa(&c, ArrayView1::from(&y[..]), 1).unwrap();
    (model.trace[0].kind, y.len(), t.elapsed())
}

#[test]
fn c08_block_selection() {
    let outcome = (|| -> Result<String, String> {
        let mut summary = Vec::new();
        for (kind, want) in [
            (ContrastKind::TextureOnly, BlockKind::Spatial),
            (ContrastKind::SpectrumOnly, BlockKind::Spectral),
        ] {
            let mut agree = 0;
            let mut slowest = Duration::ZERO;
            let mut n = 0;
            for seed in 0..10 {
                let (got, rows, took) = first_block(kind, seed);
                n = rows;
                slowest = slowest.max(took);
                ensure(took < Duration::from_secs(60), || {
                    format!("{kind:?} seed {seed} took {took:?}")
                })?;
                agree += usize::from(got == want);
            }
            ensure(agree >= 9, || {
                format!("{kind:?}: {agree}/10 runs chose a {want} block first")
            })?;
            summary.push(format!(
                "{kind:?} {agree}/10 {want} (N={n}, slowest {slowest:.1?})"
            ));
        }
        Ok(summary.join(", "))
    })();
    verdict("c08", "block selection", outcome);
}

#[test]
fn c09_case_shapes() {
    let outcome = (|| -> Result<String, String> {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::load(workspace_file("configs/case1_wood.json")).unwrap();
        let out = run(&cfg, dir.path().join("case1")).unwrap();
        let blocks = &out.features.train.blocks;
        let n = blocks[0].nrows();
        let dims: Vec<(BlockKind, usize, usize)> = blocks
            .iter()
            .map(|b| (b.kind, b.nrows(), b.ncols()))
            .collect();
        ensure(
            dims == [(BlockKind::Spatial, n, 3), (BlockKind::Spectral, n, 226)],
            || format!("case 1 blocks {dims:?}"),
        )?;
        let pgm = std::fs::read_dir(out.dir.join("scores"))
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == "pgm")
            })
            .count();
        ensure(pgm == 7, || format!("case 1 wrote {pgm} score images"))?;
        let mut shapes: Vec<(usize, usize)> = std::fs::read_dir(out.dir.join("loadings"))
            .unwrap()
            .map(|e| read_loadings(e.unwrap().path()).unwrap().dim())
            .collect();
        shapes.sort();
        ensure(shapes == [(3, 7), (226, 7)], || {
            format!("case 1 loadings {shapes:?}")
        })?;
        let case1 = format!("case 1: N={n}, 3+226 features, 7 images");

        let cfg = PipelineConfig::load(workspace_file("configs/case2_leaf.json")).unwrap();
        let out = run(&cfg, dir.path().join("case2")).unwrap();
        let blocks = &out.features.train.blocks;
        let n = blocks[0].nrows();
        let dims: Vec<(BlockKind, usize, usize)> = blocks
            .iter()
            .map(|b| (b.kind, b.nrows(), b.ncols()))
            .collect();
        let want: Vec<(BlockKind, usize, usize)> = [(BlockKind::Spatial, 14); 3]
            .into_iter()
            .chain([(BlockKind::Spectral, 256); 3])
            .map(|(k, w)| (k, n, w))
            .collect();
        ensure(dims == want, || format!("case 2 blocks {dims:?}"))?;
        let trace: Vec<TraceRow> = read_rows(out.dir.join("selection_trace.csv")).unwrap();
        let model = &out.rosa.as_ref().unwrap().model;
        ensure(trace.len() == model.n_components(), || {
            format!("{} trace rows", trace.len())
        })?;
        for (k, row) in trace.iter().enumerate() {
            ensure(row.component == k + 1, || {
                format!("trace row {k} is component {}", row.component)
            })?;
            ensure(row.block_index < 6, || {
                format!("trace row {k} names block {}", row.block_index)
            })?;
            let w = model.weights.column(k);
            let ranges: Vec<usize> = std::iter::once(0)
                .chain(model.blocks.iter().scan(0, |acc, m| {
                    *acc += m.columns.len();
                    Some(*acc)
                }))
                .collect();
            let live: Vec<usize> = (0..6)
                .filter(|&b| {
                    w.slice(s![ranges[b]..ranges[b + 1]])
                        .iter()
                        .any(|v| *v != 0.0)
                })
                .collect();
            ensure(live == [row.block_index], || {
                format!("component {} has weight in blocks {live:?}", k + 1)
            })?;
        }
        Ok(format!(
            "{case1}; case 2: N={n}, 3x14 + 3x256, {} single-block latent variables",
            trace.len()
        ))
    })();
    verdict("c09", "case shapes", outcome);
}

#[test]
fn c10_error_curve_shape() {
    let outcome = (|| -> Result<String, String> {
        let mut interior = 0;
        let mut picks = Vec::new();
        for seed in 0..10 {
            let (blocks, y, groups) = structured_blocks(seed);
            let mut plan = CvPlan::new(groups, 15, seed);
            plan.outer_subsets = 4;
            plan.outer_subset_size = 6;
            let report = nested_cv(&blocks, &y, &plan).unwrap();
            let curve = &report.mean_curve;
            let best = curve.iter().copied().fold(f64::INFINITY, f64::min);
            let first = curve.iter().position(|&v| v == best).unwrap();
            if first > 0
                && first + 1 < curve.len()
                && curve[0] > best
                && curve[curve.len() - 1] > best
            {
                interior += 1;
            }
            picks.push(report.a_values[first]);
        }
        ensure(interior >= 8, || {
            format!("interior minimum in {interior}/10 seeds, argmins {picks:?}")
        })?;
        Ok(format!(
            "interior minimum in {interior}/10 seeds, argmin A {picks:?} of 1..=15"
        ))
    })();
    verdict("c10", "error curve shape", outcome);
}
