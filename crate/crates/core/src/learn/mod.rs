//! Linear classifiers: logistic, L1-penalized logistic and hinge loss, with
//! k-fold cross-validation of the L1 penalty.

mod cv;
mod gradcheck;
mod solver;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, lambda_grid, stratified_folds, CvResult};
pub use gradcheck::{analytic_gradient, gradient_check, numeric_gradient, GradientBatch};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use solver::{Columns, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Hinge,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossKind::Logistic),
            "hinge" => Ok(LossKind::Hinge),
            _ => Err(Error::validation(format!("unknown loss {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// L1 penalty weight; 0 gives the unpenalized model.
    pub l1_lambda: f64,
    pub max_iters: usize,
    /// Stop when the relative objective change per iteration falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Scale each column to unit root mean square before fitting. Weights are
    /// always reported on the original scale.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Logistic,
            l1_lambda: 0.0,
            max_iters: 10_000,
            tolerance: 1e-6,
            seed: 0,
            standardize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1_lambda >= 0.0 && self.l1_lambda.is_finite()) {
            return Err(Error::validation("l1_lambda must be a finite value >= 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters must be positive"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::validation("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub seed: u64,
    pub standardized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: LossKind,
    pub l1_lambda: f64,
    pub meta: TrainingMeta,
}

impl LinearModel {
    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Header line, extra `# key=value` lines, then `column<TAB>weight` for
    /// each nonzero weight.
    pub fn write<W: Write>(&self, mut w: W, extra_header: &[(&str, String)]) -> std::io::Result<()> {
        writeln!(
            w,
            "# model loss={} lambda={} dims={} bias={} seed={} objective={} iterations={} converged={} standardized={}",
            self.loss,
            self.l1_lambda,
            self.dims(),
            self.bias,
            self.meta.seed,
            self.meta.objective,
            self.meta.iterations,
            self.meta.converged,
            self.meta.standardized
        )?;
        for (k, v) in extra_header {
            writeln!(w, "# {k}={v}")?;
        }
        for (j, wj) in self.weights.iter().enumerate() {
            if *wj != 0.0 {
                writeln!(w, "{j}\t{wj}")?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::validation(format!("{source_name}: empty model file")))?;
        let header = header?;
        let fields: HashMap<&str, &str> = header
            .strip_prefix("# model ")
            .ok_or_else(|| Error::row(source_name, 1, "missing model header"))?
            .split(' ')
            .filter_map(|kv| kv.split_once('='))
            .collect();
        fn field<T: FromStr>(fields: &HashMap<&str, &str>, k: &str, source_name: &str) -> Result<T> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::row(source_name, 1, format!("missing or bad {k}")))
        }
        let dims: usize = field(&fields, "dims", source_name)?;
        let mut weights = vec![0.0; dims];
        for (idx, line) in lines {
            let line = line?;
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let bad = || Error::row(source_name, idx + 1, "expected column<TAB>weight");
            let (c, v) = line.split_once('\t').ok_or_else(bad)?;
            let c: usize = c.parse().map_err(|_| bad())?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            if c >= dims {
                return Err(Error::row(source_name, idx + 1, "column out of range"));
            }
            weights[c] = v;
        }
        Ok(Self {
            weights,
            bias: field(&fields, "bias", source_name)?,
            loss: field(&fields, "loss", source_name)?,
            l1_lambda: field(&fields, "lambda", source_name)?,
            meta: TrainingMeta {
                iterations: field(&fields, "iterations", source_name)?,
                objective: field(&fields, "objective", source_name)?,
                converged: field(&fields, "converged", source_name)?,
                seed: field(&fields, "seed", source_name)?,
                standardized: field(&fields, "standardized", source_name)?,
            },
        })
    }
}

/// A fitted model plus the objective after each solver iteration.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: LinearModel,
    pub trace: Vec<f64>,
}

fn check_trainable(matrix: &FeatureMatrix) -> Result<()> {
    let (neg, pos) = matrix.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::validation(format!(
            "training needs both classes ({pos} positive, {neg} negative rows)"
        )));
    }
    if !matrix.all_finite() {
        return Err(Error::validation("feature matrix contains non-finite values"));
    }
    Ok(())
}

pub fn train(matrix: &FeatureMatrix, config: &TrainConfig) -> Result<LinearModel> {
    fit(matrix, config, None).map(|f| f.model)
}

/// Trains from `warm` (a model on the same columns) when given, else from
/// the intercept-only start.
pub fn fit(matrix: &FeatureMatrix, config: &TrainConfig, warm: Option<&LinearModel>) -> Result<Fit> {
    config.validate()?;
    check_trainable(matrix)?;
    let data = Columns::new(matrix, config.standardize);
    fit_columns(&data, config, warm)
}

fn fit_columns(data: &Columns, config: &TrainConfig, warm: Option<&LinearModel>) -> Result<Fit> {
    if let Some(m) = warm {
        if m.dims() != data.dims() {
            return Err(Error::validation("warm-start model has different dims"));
        }
    }
    // warm weights are on the original scale
    let warm_scaled = warm.map(|m| {
        let w: Vec<f64> = m.weights.iter().zip(&data.scale).map(|(w, s)| w * s).collect();
        (w, m.bias)
    });
    let warm_ref = warm_scaled.as_ref().map(|(w, b)| (w.as_slice(), *b));
    let params = SolverParams {
        lambda: config.l1_lambda,
        max_iters: config.max_iters,
        tolerance: config.tolerance,
    };
    let sol = match config.loss {
        LossKind::Logistic => solver::logistic_cd(data, &params, warm_ref),
        LossKind::Hinge => solver::hinge_subgradient(data, &params, warm_ref),
    };
    let weights = sol.w.iter().zip(&data.scale).map(|(w, s)| w / s).collect();
    Ok(Fit {
        model: LinearModel {
            weights,
            bias: sol.b,
            loss: config.loss,
            l1_lambda: config.l1_lambda,
            meta: TrainingMeta {
                iterations: sol.iterations,
                objective: sol.objective,
                converged: sol.converged,
                seed: config.seed,
                standardized: config.standardize,
            },
        },
        trace: sol.trace,
    })
}

/// Smallest L1 penalty at which every logistic weight is exactly zero.
pub fn lambda_max(matrix: &FeatureMatrix, standardize: bool) -> Result<f64> {
    check_trainable(matrix)?;
    Ok(Columns::new(matrix, standardize).lambda_max())
}

/// Decision scores `w·x + b`, one per row.
pub fn predict_scores(model: &LinearModel, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    if model.dims() != matrix.dims() {
        return Err(Error::validation(format!(
            "model has {} weights but features have {} columns",
            model.dims(),
            matrix.dims()
        )));
    }
    Ok((0..matrix.n_rows())
        .map(|i| matrix.row_dot(i, &model.weights) + model.bias)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FeatureMatrix {
        FeatureMatrix::from_dense(
            vec![
                vec![1.0, 0.0],
                vec![2.0, 1.0],
                vec![0.5, 3.0],
                vec![-1.0, 2.0],
                vec![-2.0, 0.5],
                vec![0.0, -1.0],
            ],
            vec![1, 1, 0, 0, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn huge_lambda_gives_zero_weights_and_prior_bias() {
        let m = toy();
        let cfg = TrainConfig {
            l1_lambda: 1e6,
            ..Default::default()
        };
        let model = train(&m, &cfg).unwrap();
        assert!(model.weights.iter().all(|w| *w == 0.0));
        assert_eq!(model.bias, 0.0); // three of six positive
    }

    #[test]
    fn lambda_max_is_the_zero_threshold() {
        let m = toy();
        let lmax = lambda_max(&m, false).unwrap();
        let at = train(&m, &TrainConfig { l1_lambda: lmax, ..Default::default() }).unwrap();
        assert_eq!(at.nonzero(), 0);
        let below = train(&m, &TrainConfig { l1_lambda: lmax * 0.9, ..Default::default() }).unwrap();
        assert!(below.nonzero() > 0);
    }

    #[test]
    fn single_class_is_rejected() {
        let m = FeatureMatrix::from_dense(vec![vec![1.0], vec![2.0]], vec![1, 1]).unwrap();
        assert!(train(&m, &TrainConfig::default()).is_err());
    }

    #[test]
    fn predict_checks_dims() {
        let model = train(&toy(), &TrainConfig::default()).unwrap();
        let narrow = FeatureMatrix::from_dense(vec![vec![1.0]], vec![0]).unwrap();
        assert!(predict_scores(&model, &narrow).is_err());
        assert_eq!(predict_scores(&model, &toy()).unwrap().len(), 6);
    }

    #[test]
    fn model_file_round_trip() {
        let model = train(&toy(), &TrainConfig { l1_lambda: 0.01, seed: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        model.write(&mut buf, &[("config", "abc".into())]).unwrap();
        assert_eq!(LinearModel::read(buf.as_slice(), "m").unwrap(), model);
    }

    /// Every point appears under both labels, so the optimum is finite.
    fn overlapping() -> FeatureMatrix {
        let pts = [[1.0, 0.0], [2.0, 10.0], [0.5, 30.0], [-1.0, 20.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, p) in pts.iter().enumerate() {
            for copy in 0..=k + 1 {
                rows.push(p.to_vec());
                labels.push(u8::from(copy % 2 == 0));
            }
        }
        FeatureMatrix::from_dense(rows, labels).unwrap()
    }

    #[test]
    fn standardized_weights_reported_on_original_scale() {
        let m = overlapping();
        let plain = train(&m, &TrainConfig { tolerance: 1e-12, ..Default::default() }).unwrap();
        let std = train(&m, &TrainConfig { tolerance: 1e-12, standardize: true, ..Default::default() }).unwrap();
        // unpenalized optimum is scale-invariant
        for (a, b) in plain.weights.iter().zip(&std.weights) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn hinge_separates_separable_data() {
        let m = FeatureMatrix::from_dense(
            vec![vec![2.0], vec![3.0], vec![-2.0], vec![-3.0]],
            vec![1, 1, 0, 0],
        )
        .unwrap();
        let model = train(&m, &TrainConfig { loss: LossKind::Hinge, ..Default::default() }).unwrap();
        let s = predict_scores(&model, &m).unwrap();
        assert!(s[0] > 0.0 && s[1] > 0.0 && s[2] < 0.0 && s[3] < 0.0, "{s:?}");
    }
}
