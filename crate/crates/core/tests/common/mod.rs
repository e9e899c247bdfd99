//! Independent reference implementations and data generators shared by the
//! integration suites.
#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spatspec::block::{BlockKind, FeatureBlock};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| normal(rng))
}

pub fn to_dm(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn workspace_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

/// Print a verdict line straight to stdout (bypassing the test harness
/// capture) and fail the test on `Err`.
pub fn verdict(id: &str, title: &str, outcome: Result<String, String>) {
    let line = match &outcome {
        Ok(detail) => format!("PASS {id} {title}: {detail}"),
        Err(why) => format!("FAIL {id} {title}: {why}"),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    if let Err(why) = outcome {
        panic!("{id} failed: {why}");
    }
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn block(kind: BlockKind, source: usize, data: Array2<f64>) -> FeatureBlock {
    let names = (0..data.ncols()).map(|j| format!("f{j}")).collect();
    FeatureBlock::new(kind, source, "test", names, data).unwrap()
}

// ---------------------------------------------------------------- Savitzky-Golay

/// Local least-squares polynomial derivative at each channel, solved through
/// the normal equations on integer offsets, with mirrored edges.
pub fn savgol_oracle(x: &[f64], window: usize, degree: usize, deriv: usize) -> Vec<f64> {
    let m = (window / 2) as i64;
    let v = DMatrix::from_fn(window, degree + 1, |i, q| {
        ((i as i64 - m) as f64).powi(q as i32)
    });
    let normal = (v.transpose() * &v)
        .try_inverse()
        .expect("full-rank Vandermonde");
    let proj = normal * v.transpose();
    let fact: f64 = (1..=deriv).map(|k| k as f64).product();
    let n = x.len() as i64;
    let at = |i: i64| {
        let j = if i < 0 {
            -i
        } else if i >= n {
            2 * (n - 1) - i
        } else {
            i
        };
        x[j as usize]
    };
    (0..n)
        .map(|i| {
            let w = DVector::from_fn(window, |k, _| at(i + k as i64 - m));
            (proj.row(deriv) * w)[(0, 0)] * fact
        })
        .collect()
}

// ---------------------------------------------------------------- Haralick

/// The fourteen statistics in the crate's order, straight from their sums.
pub fn haralick_oracle(p: &Array2<f64>) -> [f64; 14] {
    let n = p.nrows();
    let g = |i: usize| (i + 1) as f64;
    let px: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[[i, j]]).sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[[i, j]]).sum()).collect();
    let mx: f64 = (0..n).map(|i| g(i) * px[i]).sum();
    let my: f64 = (0..n).map(|j| g(j) * py[j]).sum();
    let sx = (0..n)
        .map(|i| (g(i) - mx).powi(2) * px[i])
        .sum::<f64>()
        .sqrt();
    let sy = (0..n)
        .map(|j| (g(j) - my).powi(2) * py[j])
        .sum::<f64>()
        .sqrt();
    let all = || (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)));
    let log2 = |v: f64| if v > 0.0 { v.log2() } else { 0.0 };

    let asm: f64 = all().map(|(i, j)| p[[i, j]].powi(2)).sum();
    let contrast: f64 = (0..n)
        .map(|k| {
            let s: f64 = all()
                .filter(|&(i, j)| i.abs_diff(j) == k)
                .map(|(i, j)| p[[i, j]])
                .sum();
            (k * k) as f64 * s
        })
        .sum();
    let correlation = if sx > 0.0 && sy > 0.0 {
        (all().map(|(i, j)| g(i) * g(j) * p[[i, j]]).sum::<f64>() - mx * my) / (sx * sy)
    } else {
        0.0
    };
    let sos: f64 = all().map(|(i, j)| (g(i) - mx).powi(2) * p[[i, j]]).sum();
    let idm: f64 = all()
        .map(|(i, j)| p[[i, j]] / (1.0 + (g(i) - g(j)).powi(2)))
        .sum();
    let psum: Vec<f64> = (0..=2 * n)
        .map(|k| {
            all()
                .filter(|&(i, j)| i + j + 2 == k)
                .map(|(i, j)| p[[i, j]])
                .sum()
        })
        .collect();
    let pdiff: Vec<f64> = (0..n)
        .map(|k| {
            all()
                .filter(|&(i, j)| i.abs_diff(j) == k)
                .map(|(i, j)| p[[i, j]])
                .sum()
        })
        .collect();
    let sa: f64 = (2..=2 * n).map(|k| k as f64 * psum[k]).sum();
    let sv: f64 = (2..=2 * n).map(|k| (k as f64 - sa).powi(2) * psum[k]).sum();
    let se: f64 = -(2..=2 * n).map(|k| psum[k] * log2(psum[k])).sum::<f64>();
    let ent: f64 = -all().map(|(i, j)| p[[i, j]] * log2(p[[i, j]])).sum::<f64>();
    let dmean: f64 = (0..n).map(|k| k as f64 * pdiff[k]).sum();
    let dv: f64 = (0..n).map(|k| (k as f64 - dmean).powi(2) * pdiff[k]).sum();
    let de: f64 = -(0..n).map(|k| pdiff[k] * log2(pdiff[k])).sum::<f64>();

    let hx: f64 = -px.iter().map(|&v| v * log2(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| v * log2(v)).sum::<f64>();
    let hxy1: f64 = -all()
        .map(|(i, j)| p[[i, j]] * log2(px[i] * py[j]))
        .sum::<f64>();
    let hxy2: f64 = -all()
        .map(|(i, j)| px[i] * py[j] * log2(px[i] * py[j]))
        .sum::<f64>();
    let (imc1, imc2) = if hx > 0.0 && hy > 0.0 {
        let nats = (hxy2 - ent) * std::f64::consts::LN_2;
        (
            (ent - hxy1) / hx.max(hy),
            (1.0 - (-2.0 * nats).exp()).max(0.0).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };

    // Q over occupied levels; its second largest eigenvalue.
    let rows: Vec<usize> = (0..n).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&k| py[k] > 0.0).collect();
    let mcc = if rows.len() < 2 || cols.len() < 2 {
        0.0
    } else {
        let q = DMatrix::from_fn(rows.len(), rows.len(), |a, b| {
            let (i, j) = (rows[a], rows[b]);
            cols.iter()
                .map(|&k| p[[i, k]] * p[[j, k]] / (px[i] * py[k]))
                .sum::<f64>()
        });
        let mut ev: Vec<f64> = q.complex_eigenvalues().iter().map(|c| c.re).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev[1].max(0.0).sqrt().min(1.0)
    };
    [
        asm,
        contrast,
        correlation,
        sos,
        idm,
        sa,
        sv,
        se,
        ent,
        dv,
        de,
        imc1,
        imc2,
        mcc,
    ]
}

/// Random normalized co-occurrence matrix, symmetric when asked, with some
/// empty cells and occasionally whole empty levels.
pub fn random_glcm(rng: &mut ChaCha8Rng, levels: usize, symmetric: bool) -> Array2<f64> {
    let empty_level = if levels > 2 && rng.random::<f64>() < 0.3 {
        Some(rng.random_range(0..levels))
    } else {
        None
    };
    let mut p = Array2::from_shape_fn((levels, levels), |(i, j)| {
        if Some(i) == empty_level || Some(j) == empty_level || rng.random::<f64>() < 0.25 {
            0.0
        } else {
            rng.random::<f64>()
        }
    });
    if symmetric {
        p = &p + &p.t();
    }
    if p.sum() == 0.0 {
        p[[0, 0]] = 1.0;
    }
    let s = p.sum();
    p / s
}

// ---------------------------------------------------------------- PCA / PLS

/// Eigen-decomposition of `XᵀX`, eigenpairs sorted by decreasing eigenvalue.
pub fn gram_eigen(x: &Array2<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = to_dm(x);
    let eig = (m.transpose() * &m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.ncols(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// NIPALS PLS1 with X deflation on already centred data. Returns the
/// regression coefficients for every number of components `1..=a`.
pub fn pls1_nipals(x: &Array2<f64>, y: &Array1<f64>, a: usize) -> Vec<Array1<f64>> {
    let x0 = to_dm(x);
    let mut xk = x0.clone();
    let mut yk = DVector::from_iterator(y.len(), y.iter().copied());
    let p_dim = x0.ncols();
    let (mut w_all, mut p_all, mut q_all) = (Vec::new(), Vec::new(), Vec::new());
    let mut betas = Vec::new();
    for _ in 0..a {
        let mut w = xk.transpose() * &yk;
        let wn = w.norm();
        w /= wn;
        let t = &xk * &w;
        let tt = t.dot(&t);
        let p = xk.transpose() * &t / tt;
        let q = yk.dot(&t) / tt;
        xk -= &t * p.transpose();
        yk -= &t * q;
        w_all.push(w);
        p_all.push(p);
        q_all.push(q);
        let k = w_all.len();
        let w_m = DMatrix::from_fn(p_dim, k, |r, c| w_all[c][r]);
        let p_m = DMatrix::from_fn(p_dim, k, |r, c| p_all[c][r]);
        let q_v = DVector::from_iterator(k, q_all.iter().copied());
        let beta = &w_m
            * (p_m.transpose() * &w_m)
                .try_inverse()
                .expect("PᵀW invertible")
            * q_v;
        betas.push(Array1::from_iter(beta.iter().copied()));
    }
    betas
}

/// Block chosen at each step by refitting `y` on the span of all raw
/// candidate scores chosen so far plus the new one, by least squares.
pub fn rosa_bruteforce(blocks: &[Array2<f64>], y: &Array1<f64>, a: usize) -> Vec<usize> {
    let n = y.len();
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y.mean().unwrap()));
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    let mut resid = yc.clone();
    let mut winners = Vec::new();
    for _ in 0..a {
        let mut best: Option<(usize, f64, DVector<f64>, DVector<f64>)> = None;
        for (b, xb) in blocks.iter().enumerate() {
            let xb = to_dm(xb);
            let w = xb.transpose() * &resid;
            if w.norm() == 0.0 {
                continue;
            }
            let z = &xb * (&w / w.norm());
            let mut cols = chosen.clone();
            cols.push(z.clone());
            let z_m = DMatrix::from_columns(&cols);
            let svd = z_m.clone().svd(true, true);
            let coef = svd.solve(&yc, 1e-12).expect("least squares");
            let r = &yc - &z_m * coef;
            let norm = r.norm();
            if best.as_ref().is_none_or(|(_, bn, _, _)| norm < *bn) {
                best = Some((b, norm, z, r));
            }
        }
        match best {
            Some((b, _, z, r)) => {
                winners.push(b);
                chosen.push(z);
                resid = r;
            }
            None => break,
        }
    }
    winners
}

// ---------------------------------------------------------------- synthetic blocks

/// Class signal split across the first three of four 50-feature blocks, with
/// group-level random effects, 24 single-class groups of 10 samples.
pub fn structured_blocks(seed: u64) -> (Vec<FeatureBlock>, Vec<u8>, Vec<u32>) {
    let mut rng = rng(seed);
    let (groups, per, nb, p) = (24usize, 10usize, 4usize, 50usize);
    let (signal, tau) = (2.0, 0.5);
    let n = groups * per;
    let y: Vec<u8> = (0..n).map(|i| ((i / per) % 2) as u8).collect();
    let g: Vec<u32> = (0..n).map(|i| (i / per) as u32).collect();
    let mut blocks = Vec::new();
    for b in 0..nb {
        let u: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let effects = normal_matrix(&mut rng, groups, p) * tau;
        let s = if b < 3 { signal } else { 0.0 };
        let data = Array2::from_shape_fn((n, p), |(i, j)| {
            (y[i] as f64 - 0.5) * s * u[j] / norm + effects[[i / per, j]] + normal(&mut rng)
        });
        blocks.push(block(BlockKind::Spectral, b + 1, data));
    }
    (blocks, y, g)
}

/// `groups` groups holding `per_class` samples of each class, with a class
/// mean shift of `shift` along a random direction of the first block.
pub fn two_class_blocks(
    seed: u64,
    groups: usize,
    per_class: usize,
    widths: &[usize],
    shift: f64,
) -> (Vec<FeatureBlock>, Vec<u8>, Vec<u32>) {
    let mut rng = rng(seed);
    let n = groups * 2 * per_class;
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let g: Vec<u32> = (0..n).map(|i| (i / (2 * per_class)) as u32).collect();
    let blocks = widths
        .iter()
        .enumerate()
        .map(|(b, &p)| {
            let u: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = if b == 0 { shift } else { 0.0 };
            let data = Array2::from_shape_fn((n, p), |(i, j)| {
                (y[i] as f64 - 0.5) * s * u[j] / norm + normal(&mut rng)
            });
            block(BlockKind::Spatial, b + 1, data)
        })
        .collect();
    (blocks, y, g)
}
