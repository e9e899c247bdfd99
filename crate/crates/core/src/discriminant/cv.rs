use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{s, Array1};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::confusion::{confusion, ConfusionMatrix};
use super::lda::{fit_lda_with, DEFAULT_SHRINKAGE};
use crate::block::FeatureBlock;
use crate::error::{Error, Result};
use crate::fusion::{assemble, fit_rosa};

/// Grouped double cross-validation layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    /// Group of every sample; samples of a group are always held out together.
    pub groups: Vec<u32>,
    /// Number of outer held-out subsets.
    pub outer_subsets: usize,
    /// Groups per outer held-out subset.
    pub outer_subset_size: usize,
    pub a_min: usize,
    pub a_max: usize,
    pub seed: u64,
    pub shrinkage: f64,
}

impl CvPlan {
    /// Two disjoint outer subsets of 20 groups and candidate A in `1..=a_max`.
    pub fn new(groups: Vec<u32>, a_max: usize, seed: u64) -> Self {
        Self {
            groups,
            outer_subsets: 2,
            outer_subset_size: 20,
            a_min: 1,
            a_max,
            seed,
            shrinkage: DEFAULT_SHRINKAGE,
        }
    }

    pub fn a_values(&self) -> Vec<usize> {
        (self.a_min..=self.a_max).collect()
    }

    pub fn unique_groups(&self) -> Vec<u32> {
        self.groups
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.groups.len() != n {
            return Err(Error::Shape(format!(
                "{} group labels for {n} samples",
                self.groups.len()
            )));
        }
        if self.a_min == 0 || self.a_min > self.a_max {
            return Err(Error::InvalidArgument(format!(
                "candidate range {}..={} is empty or starts at 0",
                self.a_min, self.a_max
            )));
        }
        let g = self.unique_groups().len();
        if self.outer_subsets == 0 {
            return Err(Error::InvalidArgument(
                "at least one outer subset is required".into(),
            ));
        }
        if self.outer_subset_size == 0 || self.outer_subset_size + 2 > g {
            return Err(Error::InvalidArgument(format!(
                "outer subsets of {} groups leave fewer than 2 of {g} groups for the inner loop",
                self.outer_subset_size
            )));
        }
        Ok(())
    }

    /// Held-out group sets of the outer loop. Disjoint when they fit, drawn
    /// independently otherwise.
    pub fn outer_folds(&self) -> Vec<Vec<u32>> {
        let mut groups = self.unique_groups();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let size = self.outer_subset_size;
        if self.outer_subsets * size <= groups.len() {
            groups.shuffle(&mut rng);
            (0..self.outer_subsets)
                .map(|i| {
                    let mut f = groups[i * size..(i + 1) * size].to_vec();
                    f.sort_unstable();
                    f
                })
                .collect()
        } else {
            (0..self.outer_subsets)
                .map(|_| {
                    let mut f: Vec<u32> = groups.choose_multiple(&mut rng, size).copied().collect();
                    f.sort_unstable();
                    f
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub index: usize,
    pub test_groups: Vec<u32>,
    /// Pooled inner leave-one-group-out error per candidate A.
    pub inner_curve: Vec<f64>,
    pub selected_a: usize,
    pub outer_error: f64,
    pub outer_confusion: ConfusionMatrix,
    pub skipped_inner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub a_values: Vec<usize>,
    pub folds: Vec<OuterFold>,
    /// Fold indices skipped because a class was missing, with the reason.
    pub skipped: Vec<(usize, String)>,
    /// Mean of the inner curves of the evaluated folds.
    pub mean_curve: Vec<f64>,
    pub optimal_a: usize,
    pub mean_outer_error: f64,
}

fn has_both(y: &[u8], rows: &[usize]) -> bool {
    let mut seen = [false; 2];
    for &r in rows {
        seen[y[r] as usize] = true;
    }
    seen[0] && seen[1]
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Misclassification counts on `test` for each A in `a_values`, with block
/// scaling, ROSA and LDA fitted on `train` only. Returns the predictions at
/// the last A as well.
pub fn fold_errors(
    blocks: &[FeatureBlock],
    y: &[u8],
    train: &[usize],
    test: &[usize],
    a_values: &[usize],
    shrinkage: f64,
) -> Result<(Vec<u64>, Vec<u8>)> {
    let a_max = *a_values
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("no candidate A".into()))?;
    let train_blocks: Vec<FeatureBlock> = blocks.iter().map(|b| b.select_rows(train)).collect();
    let test_blocks: Vec<FeatureBlock> = blocks.iter().map(|b| b.select_rows(test)).collect();
    let c = assemble(&train_blocks)?;
    let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
    let ys: Vec<u8> = test.iter().map(|&i| y[i]).collect();
    let yf = Array1::from_iter(yt.iter().map(|&v| v as f64));
    let model = fit_rosa(&c, yf.view(), a_max)?;
    let achieved = model.n_components();
    let test_scores = model.scores_of(c.transform(&test_blocks)?.concat().view(), achieved)?;
    let mut errors = Vec::with_capacity(a_values.len());
    let mut last = Vec::new();
    for &a in a_values {
        let a_eff = a.min(achieved);
        let lda = fit_lda_with(model.scores.slice(s![.., ..a_eff]), &yt, shrinkage)?;
        let pred = lda.predict_labels(test_scores.slice(s![.., ..a_eff]))?;
        errors.push(pred.iter().zip(&ys).filter(|(p, t)| p != t).count() as u64);
        last = pred;
    }
    Ok((errors, last))
}

fn rows_where(groups: &[u32], pred: impl Fn(u32) -> bool) -> Vec<usize> {
    groups
        .iter()
        .enumerate()
        .filter(|(_, &g)| pred(g))
        .map(|(i, _)| i)
        .collect()
}

/// Nested grouped CV over raw (unscaled) blocks; scaling is refitted inside
/// every fold.
pub fn nested_cv(blocks: &[FeatureBlock], y: &[u8], plan: &CvPlan) -> Result<CvReport> {
    let n = blocks
        .first()
        .ok_or_else(|| Error::InvalidArgument("no blocks".into()))?
        .nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} samples", y.len())));
    }
    if let Some(v) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {v} is not 0 or 1")));
    }
    plan.validate(n)?;
    let a_values = plan.a_values();
    let outer = plan.outer_folds();

    let results: Vec<std::result::Result<OuterFold, String>> = outer
        .par_iter()
        .enumerate()
        .map(
            |(index, test_groups)| -> Result<std::result::Result<OuterFold, String>> {
                let held: BTreeSet<u32> = test_groups.iter().copied().collect();
                let train = rows_where(&plan.groups, |g| !held.contains(&g));
                let test = rows_where(&plan.groups, |g| held.contains(&g));
                if !has_both(y, &train) || !has_both(y, &test) {
                    return Ok(Err(
                        "a class is missing from the training or held-out rows".into()
                    ));
                }
                let inner_groups: Vec<u32> = plan
                    .unique_groups()
                    .into_iter()
                    .filter(|g| !held.contains(g))
                    .collect();
                let inner: Vec<Option<(Vec<u64>, usize)>> = inner_groups
                    .par_iter()
                    .map(|&g| -> Result<Option<(Vec<u64>, usize)>> {
                        let itrain = rows_where(&plan.groups, |h| !held.contains(&h) && h != g);
                        let itest = rows_where(&plan.groups, |h| h == g);
                        if !has_both(y, &itrain) {
                            return Ok(None);
                        }
                        let (errs, _) =
                            fold_errors(blocks, y, &itrain, &itest, &a_values, plan.shrinkage)?;
                        Ok(Some((errs, itest.len())))
                    })
                    .collect::<Result<_>>()?;
                let skipped_inner = inner.iter().filter(|r| r.is_none()).count();
                let mut wrong = vec![0u64; a_values.len()];
                let mut total = 0usize;
                for (errs, m) in inner.into_iter().flatten() {
                    for (w, e) in wrong.iter_mut().zip(errs) {
                        *w += e;
                    }
                    total += m;
                }
                if total == 0 {
                    return Ok(Err("no usable inner fold".into()));
                }
                let inner_curve: Vec<f64> =
                    wrong.iter().map(|&w| w as f64 / total as f64).collect();
                let selected_a = a_values[argmin_first(&inner_curve)];
                let (errs, pred) =
                    fold_errors(blocks, y, &train, &test, &[selected_a], plan.shrinkage)?;
                let actual: Vec<u8> = test.iter().map(|&i| y[i]).collect();
                Ok(Ok(OuterFold {
                    index,
                    test_groups: test_groups.clone(),
                    inner_curve,
                    selected_a,
                    outer_error: errs[0] as f64 / test.len() as f64,
                    outer_confusion: confusion(&pred, &actual)?,
                    skipped_inner,
                }))
            },
        )
        .collect::<Result<_>>()?;

    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(f) => folds.push(f),
            Err(reason) => {
                log::warn!("outer fold {i} skipped: {reason}");
                skipped.push((i, reason));
            }
        }
    }
    if folds.is_empty() {
        return Err(Error::Degenerate("every outer fold was skipped".into()));
    }
    let mean_curve: Vec<f64> = (0..a_values.len())
        .map(|j| folds.iter().map(|f| f.inner_curve[j]).sum::<f64>() / folds.len() as f64)
        .collect();
    let optimal_a = a_values[argmin_first(&mean_curve)];
    let mean_outer_error = folds.iter().map(|f| f.outer_error).sum::<f64>() / folds.len() as f64;
    Ok(CvReport {
        a_values,
        folds,
        skipped,
        mean_curve,
        optimal_a,
        mean_outer_error,
    })
}

impl CvReport {
    pub fn min_error(&self) -> f64 {
        self.mean_curve
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Long-format curve: one row per (fold, A), plus `mean` rows.
    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["fold", "a", "error"])?;
        for f in &self.folds {
            for (a, e) in self.a_values.iter().zip(&f.inner_curve) {
                w.write_record([f.index.to_string(), a.to_string(), e.to_string()])?;
            }
        }
        for (a, e) in self.a_values.iter().zip(&self.mean_curve) {
            w.write_record(["mean".to_string(), a.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean curve back from a file written by [`CvReport::write_curve_csv`].
    pub fn read_mean_curve(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if &rec[0] == "mean" {
                let a = rec[1]
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("bad A {:?}: {e}", &rec[1])))?;
                let e = rec[2]
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("bad error {:?}: {e}", &rec[2])))?;
                out.push((a, e));
            }
        }
        Ok(out)
    }
}
