//! The fourteen Haralick statistics of a co-occurrence matrix.
//!
//! Gray levels are indexed from 1 (so the sum average ranges over
//! `2..=2·NG`), entropies are in bits with `0·log 0 = 0`, and the sum variance
//! is taken around the sum average. Degenerate distributions follow fixed
//! conventions: correlation is 0 when a marginal variance vanishes, both
//! information measures are 0 when a marginal entropy vanishes, and the
//! maximal correlation coefficient is 0 when fewer than two levels occur.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::glcm::Glcm;
use crate::linalg::thin_svd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaralickVector {
    pub angular_second_moment: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub sum_of_squares_variance: f64,
    pub inverse_difference_moment: f64,
    pub sum_average: f64,
    pub sum_variance: f64,
    pub sum_entropy: f64,
    pub entropy: f64,
    pub difference_variance: f64,
    pub difference_entropy: f64,
    pub info_measure_correlation_1: f64,
    pub info_measure_correlation_2: f64,
    pub maximal_correlation_coefficient: f64,
}

impl HaralickVector {
    pub const NAMES: [&'static str; 14] = [
        "angular_second_moment",
        "contrast",
        "correlation",
        "sum_of_squares_variance",
        "inverse_difference_moment",
        "sum_average",
        "sum_variance",
        "sum_entropy",
        "entropy",
        "difference_variance",
        "difference_entropy",
        "info_measure_correlation_1",
        "info_measure_correlation_2",
        "maximal_correlation_coefficient",
    ];

    pub fn to_array(&self) -> [f64; 14] {
        [
            self.angular_second_moment,
            self.contrast,
            self.correlation,
            self.sum_of_squares_variance,
            self.inverse_difference_moment,
            self.sum_average,
            self.sum_variance,
            self.sum_entropy,
            self.entropy,
            self.difference_variance,
            self.difference_entropy,
            self.info_measure_correlation_1,
            self.info_measure_correlation_2,
            self.maximal_correlation_coefficient,
        ]
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

fn entropy_of(ps: impl IntoIterator<Item = f64>) -> f64 {
    -ps.into_iter().map(plogp).sum::<f64>()
}

pub fn haralick(g: &Glcm) -> HaralickVector {
    let n = g.levels;
    let p = &g.p;
    let px: Vec<f64> = (0..n).map(|i| p.row(i).sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| p.column(j).sum()).collect();
    let level = |i: usize| (i + 1) as f64;

    let mu_x: f64 = (0..n).map(|i| level(i) * px[i]).sum();
    let mu_y: f64 = (0..n).map(|j| level(j) * py[j]).sum();
    let var_x: f64 = (0..n).map(|i| (level(i) - mu_x).powi(2) * px[i]).sum();
    let var_y: f64 = (0..n).map(|j| (level(j) - mu_y).powi(2) * py[j]).sum();

    let mut p_sum = vec![0.0; 2 * n + 1];
    let mut p_diff = vec![0.0; n];
    let mut asm = 0.0;
    let mut contrast = 0.0;
    let mut cross = 0.0;
    let mut idm = 0.0;
    let mut sos = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = p[[i, j]];
            if v == 0.0 {
                continue;
            }
            let d = i.abs_diff(j);
            asm += v * v;
            contrast += (d * d) as f64 * v;
            cross += level(i) * level(j) * v;
            idm += v / (1.0 + (d * d) as f64);
            sos += (level(i) - mu_x).powi(2) * v;
            p_sum[i + j + 2] += v;
            p_diff[d] += v;
        }
    }
    let correlation = if var_x > 0.0 && var_y > 0.0 {
        (cross - mu_x * mu_y) / (var_x * var_y).sqrt()
    } else {
        0.0
    };
    let sum_average: f64 = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sum_variance: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - sum_average).powi(2) * v)
        .sum();
    let sum_entropy = entropy_of(p_sum.iter().copied());
    let entropy = entropy_of(p.iter().copied());
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let difference_variance: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - diff_mean).powi(2) * v)
        .sum();
    let difference_entropy = entropy_of(p_diff.iter().copied());

    let hx = entropy_of(px.iter().copied());
    let hy = entropy_of(py.iter().copied());
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= p[[i, j]] * q.log2();
                hxy2 -= q * q.log2();
            }
        }
    }
    let (imc1, imc2) = if hx > 0.0 && hy > 0.0 {
        let imc1 = (entropy - hxy1) / hx.max(hy);
        // The exponent is the mutual-information gap in nats.
        let gap = (hxy2 - entropy).max(0.0) * std::f64::consts::LN_2;
        (imc1, (1.0 - (-2.0 * gap).exp()).max(0.0).sqrt())
    } else {
        (0.0, 0.0)
    };

    HaralickVector {
        angular_second_moment: asm,
        contrast,
        correlation,
        sum_of_squares_variance: sos,
        inverse_difference_moment: idm,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        difference_variance,
        difference_entropy,
        info_measure_correlation_1: imc1,
        info_measure_correlation_2: imc2,
        maximal_correlation_coefficient: maximal_correlation(p, &px, &py),
    }
}

/// Square root of the second largest eigenvalue of
/// `Q(i,j) = Σ_k p(i,k) p(j,k) / (px(i) py(k))`, obtained as the second
/// singular value of `Dx^{-1/2} P Dy^{-1/2}` restricted to occupied levels.
fn maximal_correlation(p: &Array2<f64>, px: &[f64], py: &[f64]) -> f64 {
    let rows: Vec<usize> = (0..px.len()).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..py.len()).filter(|&j| py[j] > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return 0.0;
    }
    let m = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| {
        let (i, j) = (rows[a], cols[b]);
        p[[i, j]] / (px[i] * py[j]).sqrt()
    });
    match thin_svd(m.view()) {
        Ok(svd) if svd.singular_values.len() >= 2 => svd.singular_values[1].clamp(0.0, 1.0),
        _ => 0.0,
    }
}
