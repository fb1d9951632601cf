//! Metrics, repeated random-split evaluation, k-fold tuning and
//! feature-subset search.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::baselines::{RidgeModel, TreeModel};
use crate::dataset::Dataset;
use crate::error::{EbmError, Result};
use crate::model::Regressor;
use crate::rng::derive_seed;
use crate::scalar::{mean, sample_sd, Scalar};
use crate::trainer::{train, TrainConfig};

fn check_lengths<T>(y: &[T], yhat: &[T], min: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(EbmError::Size(format!("{} targets vs {} predictions", y.len(), yhat.len())));
    }
    if y.len() < min {
        return Err(EbmError::Size(format!("need at least {min} values, got {}", y.len())));
    }
    Ok(())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check_lengths(y, yhat, 2)?;
    let ybar = mean(y);
    let ss_tot: T = y.iter().map(|&v| (v - ybar) * (v - ybar)).sum();
    if ss_tot == T::zero() {
        return Err(EbmError::Undefined("R² of a constant target".into()));
    }
    let ss_res: T = y.iter().zip(yhat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(T::one() - ss_res / ss_tot)
}

/// `Σ|ŷ − y| / Σ|y|` in percent.
pub fn relative_error<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check_lengths(y, yhat, 1)?;
    let denom: T = y.iter().map(|v| v.abs()).sum();
    if denom == T::zero() {
        return Err(EbmError::Undefined("relative error with all-zero targets".into()));
    }
    let num: T = y.iter().zip(yhat).map(|(&a, &b)| (b - a).abs()).sum();
    Ok(num / denom * T::lit(100.0))
}

/// Mean predicted-to-actual ratio `(1/m) Σ ŷ/y`; above 1 means overestimation.
pub fn prediction_accuracy<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check_lengths(y, yhat, 1)?;
    if y.iter().any(|&v| v == T::zero()) {
        return Err(EbmError::Undefined("prediction accuracy with a zero target".into()));
    }
    if yhat.iter().any(|v| !v.is_finite()) {
        return Err(EbmError::Undefined("non-finite prediction".into()));
    }
    let ratios: Vec<T> = y.iter().zip(yhat).map(|(&a, &b)| b / a).collect();
    Ok(mean(&ratios))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSet<T> {
    pub r2: T,
    pub re_percent: T,
    pub pa: T,
}

impl<T: Scalar> MetricSet<T> {
    pub fn compute(y: &[T], yhat: &[T]) -> Result<Self> {
        Ok(MetricSet { r2: r2(y, yhat)?, re_percent: relative_error(y, yhat)?, pa: prediction_accuracy(y, yhat)? })
    }
}

/// A model family plus its hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Learner {
    Ebm(TrainConfig),
    Ridge { lambda: f64, standardize: bool },
    Tree { max_depth: usize, min_leaf_size: usize },
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Ebm(_) => "EBM",
            Learner::Ridge { .. } => "RLR",
            Learner::Tree { .. } => "DT",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Learner::Ebm(c) => format!(
                "learning_rate={} max_leaves={} num_bags={} max_rounds={} early_stop_rounds={} inner_val_fraction={} num_interactions={} max_bins={}",
                c.learning_rate,
                c.max_leaves,
                c.num_bags,
                c.max_rounds,
                c.early_stop_rounds,
                c.inner_val_fraction,
                c.num_interactions,
                c.max_bins
            ),
            Learner::Ridge { lambda, standardize } => format!("lambda={lambda} standardize={standardize}"),
            Learner::Tree { max_depth, min_leaf_size } => format!("max_depth={max_depth} min_leaf_size={min_leaf_size}"),
        }
    }

    /// Fits on `train` and predicts `test`; `seed` feeds the EBM's bagging.
    pub fn fit_predict<T: Scalar>(&self, train_ds: &Dataset<T>, test: &Dataset<T>, seed: u64) -> Result<Vec<T>> {
        match self {
            Learner::Ebm(config) => {
                let config = TrainConfig { seed, ..config.clone() };
                train(train_ds, &config)?.predict_dataset(test)
            }
            Learner::Ridge { lambda, standardize } => RidgeModel::fit(train_ds, *lambda, *standardize)?.predict_dataset(test),
            Learner::Tree { max_depth, min_leaf_size } => TreeModel::fit(train_ds, *max_depth, *min_leaf_size)?.predict_dataset(test),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult<T> {
    pub index: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricSet<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport<T> {
    pub learner: String,
    pub config: String,
    pub base_seed: u64,
    pub test_fraction: f64,
    pub splits: Vec<SplitResult<T>>,
    pub mean: MetricSet<T>,
    pub sd: MetricSet<T>,
}

fn aggregate<T: Scalar>(splits: &[SplitResult<T>]) -> (MetricSet<T>, MetricSet<T>) {
    let pick = |f: fn(&MetricSet<T>) -> T| splits.iter().map(|s| f(&s.metrics)).collect::<Vec<_>>();
    let (r, e, p) = (pick(|m| m.r2), pick(|m| m.re_percent), pick(|m| m.pa));
    (
        MetricSet { r2: mean(&r), re_percent: mean(&e), pa: mean(&p) },
        MetricSet { r2: sample_sd(&r), re_percent: sample_sd(&e), pa: sample_sd(&p) },
    )
}

impl<T: Scalar> EvalReport<T> {
    /// Mean and sample SD recomputed from the per-split list.
    pub fn recompute(&self) -> (MetricSet<T>, MetricSet<T>) {
        aggregate(&self.splits)
    }

    pub fn csv_header() -> &'static str {
        "learner,split,seed,n_train,n_test,r2,re_percent,pa"
    }

    /// Per-split rows followed by `mean` and `sd` rows.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for s in &self.splits {
            let m = &s.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.learner, s.index, s.seed, s.n_train, s.n_test, m.r2, m.re_percent, m.pa
            );
        }
        for (tag, m) in [("mean", &self.mean), ("sd", &self.sd)] {
            let _ = writeln!(out, "{},{tag},,,,{},{},{}", self.learner, m.r2, m.re_percent, m.pa);
        }
        out
    }
}

pub fn reports_to_csv<T: Scalar>(reports: &[EvalReport<T>]) -> String {
    let mut out = format!("{}\n", EvalReport::<T>::csv_header());
    reports.iter().for_each(|r| out.push_str(&r.csv_rows()));
    out
}

/// Side-by-side `mean ± sd` table, one line per learner.
pub fn summary_table<T: Scalar>(reports: &[EvalReport<T>]) -> String {
    let mut out = format!("{:<8} {:>8} {:>20} {:>20} {:>20}\n", "model", "splits", "R2", "RE (%)", "PA");
    for r in reports {
        let cell = |m: T, s: T| format!("{:.4} ± {:.4}", m.as_f64(), s.as_f64());
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>20} {:>20} {:>20}",
            r.learner,
            r.splits.len(),
            cell(r.mean.r2, r.sd.r2),
            cell(r.mean.re_percent, r.sd.re_percent),
            cell(r.mean.pa, r.sd.pa)
        );
    }
    out
}

/// Trains the EBM on `n_splits` random train/test splits and scores each
/// test side.
pub fn evaluate_repeated<T: Scalar>(
    ds: &Dataset<T>,
    config: &TrainConfig,
    n_splits: usize,
    test_fraction: f64,
    base_seed: u64,
) -> Result<EvalReport<T>> {
    let mut reports = evaluate_learners(ds, &[Learner::Ebm(config.clone())], n_splits, test_fraction, base_seed)?;
    Ok(reports.remove(0))
}

/// Evaluates several learners on the same sequence of splits.
pub fn evaluate_learners<T: Scalar>(
    ds: &Dataset<T>,
    learners: &[Learner],
    n_splits: usize,
    test_fraction: f64,
    base_seed: u64,
) -> Result<Vec<EvalReport<T>>> {
    if n_splits < 1 {
        return Err(EbmError::Config("n_splits must be >= 1".into()));
    }
    let splits: Vec<(u64, Dataset<T>, Dataset<T>)> = (0..n_splits)
        .map(|s| {
            let seed = derive_seed(base_seed, "split", s as u64);
            let idx = ds.split_random(test_fraction, seed).map_err(|e| in_split(s, e))?;
            Ok((seed, ds.select_rows(&idx.train), ds.select_rows(&idx.test)))
        })
        .collect::<Result<_>>()?;

    learners
        .iter()
        .map(|learner| {
            let results = splits
                .par_iter()
                .enumerate()
                .map(|(s, (seed, tr, te))| {
                    let train_seed = derive_seed(base_seed, "train", s as u64);
                    let yhat = learner.fit_predict(tr, te, train_seed).map_err(|e| in_split(s, e))?;
                    let metrics = MetricSet::compute(te.target(), &yhat).map_err(|e| in_split(s, e))?;
                    Ok(SplitResult { index: s, seed: *seed, n_train: tr.n_rows(), n_test: te.n_rows(), metrics })
                })
                .collect::<Result<Vec<_>>>()?;
            let (mean, sd) = aggregate(&results);
            Ok(EvalReport {
                learner: learner.name().to_string(),
                config: learner.describe(),
                base_seed,
                test_fraction,
                splits: results,
                mean,
                sd,
            })
        })
        .collect()
}

fn in_split(split: usize, e: EbmError) -> EbmError {
    EbmError::InSplit { split, source: Box::new(e) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvScore<T> {
    pub index: usize,
    pub fold_r2: Vec<T>,
    pub mean_r2: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome<T> {
    pub best_index: usize,
    pub best: Learner,
    pub scores: Vec<CvScore<T>>,
}

fn cv_scores<T: Scalar>(ds: &Dataset<T>, learners: &[Learner], k: usize, seed: u64) -> Result<Vec<CvScore<T>>> {
    if learners.is_empty() {
        return Err(EbmError::Config("empty tuning grid".into()));
    }
    let folds = ds.kfold(k, seed)?;
    let parts: Vec<(Dataset<T>, Dataset<T>)> =
        folds.iter().map(|f| (ds.select_rows(&f.train), ds.select_rows(&f.test))).collect();
    learners
        .iter()
        .enumerate()
        .map(|(index, learner)| {
            let fold_r2 = parts
                .par_iter()
                .enumerate()
                .map(|(f, (tr, te))| {
                    let yhat = learner.fit_predict(tr, te, derive_seed(seed, "cv-train", f as u64))?;
                    r2(te.target(), &yhat).map_err(|e| in_split(f, e))
                })
                .collect::<Result<Vec<T>>>()?;
            let mean_r2 = mean(&fold_r2);
            Ok(CvScore { index, fold_r2, mean_r2 })
        })
        .collect()
}

fn pick_best<T: Scalar>(scores: &[CvScore<T>], tie_key: impl Fn(usize) -> (usize, usize, usize)) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].mean_r2
            .partial_cmp(&scores[a].mean_r2)
            .unwrap_or(Ordering::Equal)
            .then_with(|| tie_key(a).cmp(&tie_key(b)))
            .then_with(|| a.cmp(&b))
    });
    order[0]
}

/// k-fold grid search over EBM configurations by mean fold R².
///
/// Ties prefer smaller `(max_rounds, max_leaves, num_interactions)`, then
/// grid order.
pub fn cv_tune<T: Scalar>(ds: &Dataset<T>, grid: &[TrainConfig], k: usize, seed: u64) -> Result<(TrainConfig, CvOutcome<T>)> {
    let learners: Vec<Learner> = grid.iter().cloned().map(Learner::Ebm).collect();
    let scores = cv_scores(ds, &learners, k, seed)?;
    let best_index = pick_best(&scores, |i| (grid[i].max_rounds, grid[i].max_leaves, grid[i].num_interactions));
    let best = grid[best_index].clone();
    Ok((best, CvOutcome { best_index, best: learners[best_index].clone(), scores }))
}

/// k-fold selection over arbitrary learners (ties by grid order).
pub fn cv_select<T: Scalar>(ds: &Dataset<T>, learners: &[Learner], k: usize, seed: u64) -> Result<CvOutcome<T>> {
    let scores = cv_scores(ds, learners, k, seed)?;
    let best_index = pick_best(&scores, |_| (0, 0, 0));
    Ok(CvOutcome { best_index, best: learners[best_index].clone(), scores })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsetResult<T> {
    pub features: Vec<String>,
    pub mean_r2: T,
    pub mean_pa: T,
    pub report: EvalReport<T>,
}

/// Repeated-split evaluation of each feature subset, ranked by mean R²
/// (stable for ties).
pub fn subset_search<T: Scalar>(
    ds: &Dataset<T>,
    subsets: &[Vec<String>],
    config: &TrainConfig,
    n_splits: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<SubsetResult<T>>> {
    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        if subset.is_empty() {
            return Err(EbmError::Schema("empty feature subset".into()));
        }
        let projected = ds.project(subset)?;
        let report = evaluate_repeated(&projected, config, n_splits, test_fraction, seed)?;
        out.push(SubsetResult { features: subset.clone(), mean_r2: report.mean.r2, mean_pa: report.mean.pa, report });
    }
    out.sort_by(|a, b| b.mean_r2.partial_cmp(&a.mean_r2).unwrap_or(Ordering::Equal));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, SyntheticSpec};
    use proptest::prelude::*;

    #[test]
    fn r2_hand_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2(&[0.0, 2.0], &[2.0, 0.0]).unwrap(), -3.0);
        assert!(matches!(r2(&[1.0, 1.0], &[1.0, 2.0]), Err(EbmError::Undefined(_))));
        assert!(matches!(r2(&[1.0], &[1.0]), Err(EbmError::Size(_))));
        assert!(r2(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn relative_error_hand_examples() {
        assert_eq!(relative_error(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(relative_error(&[2.0, 2.0], &[1.0, 3.0]).unwrap(), 50.0);
        assert!(relative_error(&[0.0, 0.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn prediction_accuracy_hand_examples() {
        assert_eq!(prediction_accuracy(&[3.0, 5.0], &[3.0, 5.0]).unwrap(), 1.0);
        assert_eq!(prediction_accuracy(&[1.0, 2.0], &[2.0, 2.0]).unwrap(), 1.5);
        assert!(prediction_accuracy(&[0.0, 2.0], &[2.0, 2.0]).is_err());
        // over-prediction reads as PA > 1
        assert!(prediction_accuracy(&[10.0, 20.0], &[12.1, 24.2]).unwrap() > 1.0);
    }

    proptest! {
        #[test]
        fn metric_invariances(
            pairs in prop::collection::vec((0.5f64..50.0, 0.5f64..50.0), 2..40),
            scale in 0.1f64..10.0,
            shift in -20.0f64..20.0,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yhat: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(y.iter().any(|&v| v != y[0]));
            prop_assert_eq!(r2(&y, &y).unwrap(), 1.0);
            prop_assert_eq!(relative_error(&y, &y).unwrap(), 0.0);
            prop_assert_eq!(prediction_accuracy(&y, &y).unwrap(), 1.0);

            let tol = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
            let ya: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
            let ha: Vec<f64> = yhat.iter().map(|v| scale * v + shift).collect();
            prop_assert!(tol(r2(&y, &yhat).unwrap(), r2(&ya, &ha).unwrap()));
            let ys: Vec<f64> = y.iter().map(|v| scale * v).collect();
            let hs: Vec<f64> = yhat.iter().map(|v| scale * v).collect();
            prop_assert!(tol(relative_error(&y, &yhat).unwrap(), relative_error(&ys, &hs).unwrap()));
            prop_assert!(tol(prediction_accuracy(&y, &yhat).unwrap(), prediction_accuracy(&ys, &hs).unwrap()));
        }
    }

    fn quick() -> TrainConfig {
        TrainConfig { learning_rate: 0.1, num_bags: 2, num_interactions: 0, ..TrainConfig::default() }
    }

    #[test]
    fn single_split_has_zero_sd() {
        let d = make_synthetic::<f64>(120, &SyntheticSpec::additive(), 0.0, 1).unwrap().dataset;
        let rep = evaluate_repeated(&d, &quick(), 1, 0.2, 3).unwrap();
        assert_eq!(rep.splits.len(), 1);
        assert_eq!(rep.mean, rep.splits[0].metrics);
        assert_eq!(rep.sd, MetricSet { r2: 0.0, re_percent: 0.0, pa: 0.0 });
    }

    #[test]
    fn repeated_evaluation_is_deterministic_and_recomputable() {
        let d = make_synthetic::<f64>(150, &SyntheticSpec::additive(), 0.05, 2).unwrap().dataset;
        let a = evaluate_repeated(&d, &quick(), 3, 0.2, 11).unwrap();
        let b = evaluate_repeated(&d, &quick(), 3, 0.2, 11).unwrap();
        assert_eq!(a, b);
        let (m, s) = a.recompute();
        assert!((m.r2 - a.mean.r2).abs() <= 1e-12 && (s.pa - a.sd.pa).abs() <= 1e-12);
        let csv = reports_to_csv(&[a]);
        assert_eq!(csv.lines().count(), 1 + 3 + 2);
    }

    #[test]
    fn errors_carry_split_index() {
        let d = make_synthetic::<f64>(20, &SyntheticSpec::additive(), 0.0, 2).unwrap().dataset;
        // 10% test of 20 rows leaves 18 train rows; 0.5 of 20 leaves 10 train rows, fine; force failure with zero targets
        let zeros = Dataset::new(d.schema().clone(), d.columns().to_vec(), vec![0.0; 20]).unwrap();
        let err = evaluate_repeated(&zeros, &quick(), 2, 0.5, 1).unwrap_err();
        assert!(matches!(err, EbmError::InSplit { split: 0, .. }));
    }

    #[test]
    fn single_config_grid_returns_it() {
        let d = make_synthetic::<f64>(100, &SyntheticSpec::additive(), 0.0, 4).unwrap().dataset;
        let (best, out) = cv_tune(&d, &[quick()], 3, 5).unwrap();
        assert_eq!(best, quick());
        assert_eq!(out.scores.len(), 1);
        assert_eq!(out.scores[0].fold_r2.len(), 3);
        assert!(cv_tune(&d, &[], 3, 5).is_err());
    }

    #[test]
    fn tie_break_prefers_smaller_configs() {
        let scores = vec![
            CvScore { index: 0, fold_r2: vec![], mean_r2: 0.5 },
            CvScore { index: 1, fold_r2: vec![], mean_r2: 0.5 },
            CvScore { index: 2, fold_r2: vec![], mean_r2: 0.4 },
        ];
        assert_eq!(pick_best(&scores, |i| [(100, 3, 2), (100, 2, 2), (1, 1, 1)][i]), 1);
        assert_eq!(pick_best(&scores, |_| (0, 0, 0)), 0);
    }

    #[test]
    fn subset_search_rejects_unknown_features() {
        let d = make_synthetic::<f64>(60, &SyntheticSpec::additive(), 0.0, 4).unwrap().dataset;
        let err = subset_search(&d, &[vec!["x1".into(), "nope".into()]], &quick(), 1, 0.2, 0).unwrap_err();
        assert!(matches!(err, EbmError::Schema(_)));
    }
}
