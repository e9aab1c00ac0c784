use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::solver::Columns;
use super::{check_trainable, fit_columns, predict_scores, LinearModel, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::features::FeatureMatrix;
use crate::rng::XorShift64Star;

const FOLD_STREAM: u64 = 4;

/// Fold index per row. Each class is shuffled separately and dealt round
/// robin, the positives continuing where the negatives stopped, so fold
/// sizes and class mixes differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = XorShift64Star::stream(seed, FOLD_STREAM);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut idx);
        for i in idx {
            folds[i] = next % k;
            next += 1;
        }
    }
    folds
}

/// `n` penalties spaced geometrically from λ_max down to λ_max·`min_ratio`.
pub fn lambda_grid(matrix: &FeatureMatrix, n: usize, min_ratio: f64, standardize: bool) -> Result<Vec<f64>> {
    if n == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::validation("lambda grid needs n >= 1 and 0 < min_ratio < 1"));
    }
    let lmax = super::lambda_max(matrix, standardize)?;
    if n == 1 {
        return Ok(vec![lmax]);
    }
    Ok((0..n)
        .map(|i| lmax * min_ratio.powf(i as f64 / (n - 1) as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Descending.
    pub lambda_grid: Vec<f64>,
    /// `fold_auc[l][f]`: held-out AUC of fold `f` at `lambda_grid[l]`;
    /// `None` when that fold could not be scored.
    pub fold_auc: Vec<Vec<Option<f64>>>,
    pub mean_auc: Vec<Option<f64>>,
    pub best_lambda: f64,
    pub undefined_folds: usize,
}

/// k-fold cross-validation of the L1 penalty. Each fold walks the grid from
/// the largest λ down, warm-starting from the previous solution. A fold
/// whose held-out part has a single class (or whose training part does) is
/// left out of the mean. Ties in mean AUC go to the larger λ.
pub fn cross_validate(
    matrix: &FeatureMatrix,
    grid: &[f64],
    k: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<CvResult> {
    config.validate()?;
    check_trainable(matrix)?;
    if k < 2 || k > matrix.n_rows() {
        return Err(Error::validation(format!(
            "k = {k} folds needs 2 <= k <= {} rows",
            matrix.n_rows()
        )));
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::validation("lambda grid must be non-empty finite values >= 0"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();

    let folds = stratified_folds(matrix.labels(), k, seed);
    let per_fold: Vec<Vec<Option<f64>>> = (0..k)
        .into_par_iter()
        .map(|f| fold_path(matrix, &folds, f, &grid, config))
        .collect::<Result<_>>()?;

    let mut undefined_folds = 0;
    let fold_auc: Vec<Vec<Option<f64>>> = (0..grid.len())
        .map(|l| per_fold.iter().map(|fold| fold[l]).collect())
        .collect();
    for (f, fold) in per_fold.iter().enumerate() {
        if fold.iter().all(Option::is_none) {
            undefined_folds += 1;
            warn!(fold = f, "fold has a single class on one side; excluded from the mean AUC");
        }
    }
    let mean_auc: Vec<Option<f64>> = fold_auc
        .iter()
        .map(|row| {
            let vals: Vec<f64> = row.iter().flatten().copied().collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (l, m) in mean_auc.iter().enumerate() {
        if let Some(m) = *m {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((l, m));
            }
        }
    }
    let (best_idx, _) = best.ok_or_else(|| Error::validation("no fold could be scored"))?;
    Ok(CvResult {
        best_lambda: grid[best_idx],
        lambda_grid: grid,
        fold_auc,
        mean_auc,
        undefined_folds,
    })
}

fn fold_path(
    matrix: &FeatureMatrix,
    folds: &[usize],
    f: usize,
    grid: &[f64],
    config: &TrainConfig,
) -> Result<Vec<Option<f64>>> {
    let train_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != f).collect();
    let held_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == f).collect();
    let train = matrix.select(&train_idx);
    let held = matrix.select(&held_idx);
    let (neg, pos) = train.class_counts();
    let (hneg, hpos) = held.class_counts();
    if neg == 0 || pos == 0 || hneg == 0 || hpos == 0 {
        return Ok(vec![None; grid.len()]);
    }
    let data = Columns::new(&train, config.standardize);
    let mut warm: Option<LinearModel> = None;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = TrainConfig {
            l1_lambda: lambda,
            ..*config
        };
        let model = fit_columns(&data, &cfg, warm.as_ref())?.model;
        let scores = predict_scores(&model, &held)?;
        out.push(auc(&scores, held.labels())?);
        warm = Some(model);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let f = stratified_folds(&labels, 5, 1);
        assert_eq!(f, stratified_folds(&labels, 5, 1));
        for fold in 0..5 {
            let size = f.iter().filter(|&&x| x == fold).count();
            assert!((4..=5).contains(&size));
            let pos = (0..23).filter(|&i| f[i] == fold && labels[i] == 1).count();
            assert!((1..=2).contains(&pos));
        }
    }

    #[test]
    fn grid_is_descending_from_lambda_max() {
        let m = FeatureMatrix::from_dense(vec![vec![1.0], vec![-1.0], vec![0.5]], vec![1, 0, 1]).unwrap();
        let g = lambda_grid(&m, 4, 1e-3, false).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], super::super::lambda_max(&m, false).unwrap());
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        assert!((g[3] / g[0] - 1e-3).abs() < 1e-12);
    }
}
