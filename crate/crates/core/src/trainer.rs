//! Cyclic gradient boosting of the additive model.
//!
//! Each bag boosts every feature in schema order once per round with a
//! shallow tree over that feature's bins, until the bag's inner validation
//! slice stops improving. Bags are averaged into the final shape functions
//! and their spread becomes the per-bin error bars. Pair terms are boosted
//! afterwards on the residuals of the frozen main effects.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{fit_bins, BinMap, DEFAULT_MAX_BINS};
use crate::dataset::{Column, Dataset, FeatureKind};
use crate::error::{EbmError, Result};
use crate::fast::{all_pairs, rank_interactions, BinnedFeature, InteractionScore, PairHistogram};
use crate::model::{EbmModel, TrainMeta};
use crate::rng;
use crate::scalar::{mean, sample_sd, Scalar};

/// Boosting hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub num_bags: usize,
    pub max_rounds: usize,
    /// Rounds without inner-validation improvement before stopping; 0 disables.
    pub early_stop_rounds: usize,
    pub inner_val_fraction: f64,
    pub num_interactions: usize,
    pub max_bins: usize,
    pub seed: u64,
    /// Restricts pair detection to these feature-name pairs when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_candidates: Option<Vec<(String, String)>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_leaves: 3,
            num_bags: 8,
            max_rounds: 5000,
            early_stop_rounds: 50,
            inner_val_fraction: 0.15,
            num_interactions: 2,
            max_bins: DEFAULT_MAX_BINS,
            seed: 0,
            interaction_candidates: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EbmError::Config(m));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.max_leaves < 2 {
            return bad(format!("max_leaves {} must be >= 2", self.max_leaves));
        }
        if self.num_bags < 1 {
            return bad("num_bags must be >= 1".into());
        }
        if !(self.inner_val_fraction > 0.0 && self.inner_val_fraction < 1.0) {
            return bad(format!("inner_val_fraction {} outside (0, 1)", self.inner_val_fraction));
        }
        if self.max_bins < 2 {
            return bad(format!("max_bins {} must be >= 2", self.max_bins));
        }
        Ok(())
    }
}

/// Per-bin shape function of one feature.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeTerm<T> {
    pub feature: usize,
    pub scores: Vec<T>,
    pub stderr: Vec<T>,
}

/// Pair term stored row-major: cell `(a, b)` is `grid[a * cols + b]`, with
/// rows indexing the bins of `features.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTerm<T> {
    pub features: (usize, usize),
    pub rows: usize,
    pub cols: usize,
    pub grid: Vec<T>,
    pub stderr: Vec<T>,
}

impl<T: Scalar> PairTerm<T> {
    pub fn at(&self, a: usize, b: usize) -> T {
        self.grid[a * self.cols + b]
    }
}

/// Diagnostics collected while training.
#[derive(Clone, Debug, Default)]
pub struct TrainReport<T> {
    /// Bag-training RMSE after each main-effect round, per bag.
    pub main_loss: Vec<Vec<T>>,
    /// Round whose scores were kept (best inner validation), per bag.
    pub main_best_round: Vec<usize>,
    pub interactions: Vec<InteractionScore<T>>,
    pub pair_loss: Vec<Vec<T>>,
}

/// Greedy single-axis regression tree over bins.
///
/// Splits are only placed on bin boundaries with samples on both sides;
/// the leaf with the largest SSE reduction is split first (leftmost on
/// ties) until `max_leaves` leaves exist or nothing improves. Returns the
/// leaf mean for every bin, empty bins taking their covering leaf's value.
pub fn fit_feature_tree<T: Scalar>(
    residuals: &[T],
    bin_index: &[usize],
    bin_count: usize,
    max_leaves: usize,
) -> Result<Vec<T>> {
    if residuals.len() != bin_index.len() {
        return Err(EbmError::Size(format!(
            "{} residuals for {} bin indices",
            residuals.len(),
            bin_index.len()
        )));
    }
    if bin_count == 0 || bin_index.iter().any(|&b| b >= bin_count) {
        return Err(EbmError::Domain("bin index outside bin_count".into()));
    }
    Ok(tree_from_cells(residuals, bin_index, bin_count, max_leaves))
}

struct Leaf<T> {
    lo: usize,
    hi: usize,
    best: Option<(T, usize)>,
}

fn tree_from_histogram<T: Scalar>(counts: &[usize], sums: &[T], max_leaves: usize) -> Vec<T> {
    let nb = counts.len();
    let mut cc = vec![0usize; nb + 1];
    let mut cs = vec![T::zero(); nb + 1];
    for b in 0..nb {
        cc[b + 1] = cc[b] + counts[b];
        cs[b + 1] = cs[b] + sums[b];
    }
    let score = |lo: usize, hi: usize| -> T {
        let n = cc[hi] - cc[lo];
        if n == 0 {
            T::zero()
        } else {
            let s = cs[hi] - cs[lo];
            s * s / T::from_usize_lossy(n)
        }
    };
    let best_split = |lo: usize, hi: usize| -> Option<(T, usize)> {
        let parent = score(lo, hi);
        let mut best: Option<(T, usize)> = None;
        for s in lo + 1..hi {
            if cc[s] == cc[lo] || cc[hi] == cc[s] {
                continue;
            }
            let gain = score(lo, s) + score(s, hi) - parent;
            if gain > T::zero() && best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, s));
            }
        }
        best
    };

    let mut leaves = vec![Leaf { lo: 0, hi: nb, best: best_split(0, nb) }];
    while leaves.len() < max_leaves {
        let mut pick: Option<(usize, T)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some((g, _)) = leaf.best {
                if pick.map_or(true, |(_, bg)| g > bg) {
                    pick = Some((i, g));
                }
            }
        }
        let Some((i, _)) = pick else { break };
        let Leaf { lo, hi, best } = leaves.remove(i);
        let s = best.expect("picked leaf has a split").1;
        leaves.insert(i, Leaf { lo: s, hi, best: best_split(s, hi) });
        leaves.insert(i, Leaf { lo, hi: s, best: best_split(lo, s) });
    }

    let mut out = vec![T::zero(); nb];
    for leaf in &leaves {
        let n = cc[leaf.hi] - cc[leaf.lo];
        let v = if n == 0 { T::zero() } else { (cs[leaf.hi] - cs[leaf.lo]) / T::from_usize_lossy(n) };
        out[leaf.lo..leaf.hi].iter_mut().for_each(|o| *o = v);
    }
    out
}

/// Two-axis quadrant tree: one cut per axis, quadrant means per cell.
pub fn fit_pair_tree<T: Scalar>(
    residuals: &[T],
    bins_a: &[usize],
    bins_b: &[usize],
    rows: usize,
    cols: usize,
) -> Vec<T> {
    let hist = PairHistogram::build(
        residuals.iter().zip(bins_a).zip(bins_b).map(|((&r, &a), &b)| (r, a, b)),
        rows,
        cols,
    );
    let cut = hist.best_cut();
    hist.quadrant_grid(&cut)
}

/// Per-position sample standard deviation across bags (n−1 denominator,
/// 0 for a single bag).
pub fn compute_error_bars<T: Scalar>(per_bag: &[Vec<T>]) -> Vec<T> {
    let Some(first) = per_bag.first() else { return Vec::new() };
    let mut column = Vec::with_capacity(per_bag.len());
    (0..first.len())
        .map(|k| {
            column.clear();
            column.extend(per_bag.iter().map(|bag| bag[k]));
            sample_sd(&column)
        })
        .collect()
}

fn mean_across<T: Scalar>(per_bag: &[Vec<T>]) -> Vec<T> {
    let n = T::from_usize_lossy(per_bag.len());
    let mut acc = vec![T::zero(); per_bag[0].len()];
    for bag in per_bag {
        for (a, &v) in acc.iter_mut().zip(bag) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Subtracts the count-weighted mean so the term averages to zero over the
/// training rows.
fn center<T: Scalar>(scores: &mut [T], counts: &[usize], n_rows: usize) {
    let mut occupied = scores.iter().zip(counts).filter(|(_, &c)| c > 0).map(|(&s, _)| s);
    let first = occupied.next().unwrap_or_else(T::zero);
    // A term that is flat over the data centers to exactly zero there.
    let m = if occupied.all(|s| s == first) {
        first
    } else {
        let weighted: T = scores.iter().zip(counts).map(|(&s, &c)| s * T::from_usize_lossy(c)).sum();
        weighted / T::from_usize_lossy(n_rows)
    };
    scores.iter_mut().for_each(|s| *s -= m);
}

fn rmse<T: Scalar>(sq_sum: T, n: usize) -> T {
    (sq_sum / T::from_usize_lossy(n.max(1))).sqrt()
}

struct Bag {
    train: Vec<usize>,
    val: Vec<usize>,
}

fn make_bag(n: usize, config: &TrainConfig, index: usize) -> Bag {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(config.seed, "inner-val", index as u64));
    let n_val = ((n as f64 * config.inner_val_fraction).ceil() as usize).clamp(1, n - 1);
    let val = order[..n_val].to_vec();
    let pool = &order[n_val..];
    let mut boot = rng::stream(config.seed, "bag", index as u64);
    let train = (0..pool.len()).map(|_| pool[boot.random_range(0..pool.len())]).collect();
    Bag { train, val }
}

/// Cyclic boosting loop shared by main and pair stages. `fit_term` fits
/// one increment for term `t` on the given residuals over the bag-train
/// rows, and `lookup` maps a row to its cell within term `t`.
struct Booster<'a, T> {
    config: &'a TrainConfig,
    bag: &'a Bag,
    target: &'a [T],
}

struct BoostOutcome<T> {
    terms: Vec<Vec<T>>,
    loss: Vec<T>,
    best_round: usize,
}

impl<T: Scalar> Booster<'_, T> {
    fn run(
        &self,
        term_sizes: &[usize],
        cell_of: &(dyn Fn(usize, usize) -> usize + Sync),
        fit_term: &(dyn Fn(usize, &[T], &[usize]) -> Vec<T> + Sync),
        init: T,
    ) -> BoostOutcome<T> {
        let lr = T::lit(self.config.learning_rate);
        let bag = self.bag;
        let mut terms: Vec<Vec<T>> = term_sizes.iter().map(|&s| vec![T::zero(); s]).collect();
        let mut best_terms = terms.clone();
        let mut pred_train = vec![init; bag.train.len()];
        let mut pred_val = vec![init; bag.val.len()];
        let val_sq = |p: &[T]| -> T {
            bag.val.iter().zip(p).map(|(&r, &v)| (self.target[r] - v) * (self.target[r] - v)).sum()
        };
        let mut best_val = rmse(val_sq(&pred_val), bag.val.len());
        let mut best_round = 0;
        let mut stale = 0;
        let mut loss = Vec::new();
        let mut residuals = vec![T::zero(); bag.train.len()];
        let cells: Vec<Vec<usize>> =
            (0..term_sizes.len()).map(|t| bag.train.iter().map(|&r| cell_of(t, r)).collect()).collect();
        let val_cells: Vec<Vec<usize>> =
            (0..term_sizes.len()).map(|t| bag.val.iter().map(|&r| cell_of(t, r)).collect()).collect();

        if term_sizes.is_empty() {
            return BoostOutcome { terms, loss, best_round };
        }
        for round in 1..=self.config.max_rounds {
            for t in 0..term_sizes.len() {
                for (k, &r) in bag.train.iter().enumerate() {
                    residuals[k] = self.target[r] - pred_train[k];
                }
                let inc = fit_term(t, &residuals, &cells[t]);
                for (s, &d) in terms[t].iter_mut().zip(&inc) {
                    *s += lr * d;
                }
                for (p, &c) in pred_train.iter_mut().zip(&cells[t]) {
                    *p += lr * inc[c];
                }
                for (p, &c) in pred_val.iter_mut().zip(&val_cells[t]) {
                    *p += lr * inc[c];
                }
            }
            let train_sq: T = bag
                .train
                .iter()
                .zip(&pred_train)
                .map(|(&r, &p)| (self.target[r] - p) * (self.target[r] - p))
                .sum();
            loss.push(rmse(train_sq, bag.train.len()));
            let v = rmse(val_sq(&pred_val), bag.val.len());
            if v < best_val {
                best_val = v;
                best_round = round;
                best_terms.clone_from(&terms);
                stale = 0;
            } else {
                stale += 1;
                if self.config.early_stop_rounds > 0 && stale >= self.config.early_stop_rounds {
                    break;
                }
            }
        }
        if self.config.early_stop_rounds == 0 {
            best_terms = terms;
            best_round = loss.len();
        }
        BoostOutcome { terms: best_terms, loss, best_round }
    }
}

fn resolve_candidates<T: Scalar>(ds: &Dataset<T>, config: &TrainConfig) -> Result<Vec<(usize, usize)>> {
    let Some(list) = &config.interaction_candidates else {
        return Ok(all_pairs(ds.n_features()));
    };
    let schema = ds.schema();
    let mut out = Vec::with_capacity(list.len());
    for (a, b) in list {
        let ia = schema.index_of(a).ok_or_else(|| EbmError::Schema(format!("unknown feature `{a}`")))?;
        let ib = schema.index_of(b).ok_or_else(|| EbmError::Schema(format!("unknown feature `{b}`")))?;
        if ia == ib {
            return Err(EbmError::Config(format!("pair ({a}, {b}) repeats a feature")));
        }
        let p = (ia.min(ib), ia.max(ib));
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn train<T: Scalar>(ds: &Dataset<T>, config: &TrainConfig) -> Result<EbmModel<T>> {
    train_with_report(ds, config).map(|(m, _)| m)
}

pub fn train_with_report<T: Scalar>(ds: &Dataset<T>, config: &TrainConfig) -> Result<(EbmModel<T>, TrainReport<T>)> {
    config.validate()?;
    let n = ds.n_rows();
    if n < 10 {
        return Err(EbmError::Size(format!("need at least 10 rows to train, got {n}")));
    }
    let candidates = resolve_candidates(ds, config)?;
    let target = ds.target();

    let bin_maps: Vec<BinMap<T>> = ds
        .schema()
        .features()
        .iter()
        .zip(ds.columns())
        .map(|(f, col)| match (&f.kind, col) {
            (FeatureKind::Categorical { cardinality }, _) => BinMap::categorical(*cardinality),
            (FeatureKind::Numeric, Column::Numeric(v)) => fit_bins(v, config.max_bins),
            _ => unreachable!("dataset validated column kinds"),
        })
        .collect::<Result<_>>()?;
    let binned: Vec<Vec<usize>> =
        bin_maps.iter().zip(ds.columns()).map(|(m, c)| m.apply_column(c)).collect::<Result<_>>()?;
    let sizes: Vec<usize> = bin_maps.iter().map(BinMap::bin_count).collect();
    let counts: Vec<Vec<usize>> = binned
        .iter()
        .zip(&sizes)
        .map(|(b, &s)| {
            let mut c = vec![0usize; s];
            b.iter().for_each(|&k| c[k] += 1);
            c
        })
        .collect();

    let intercept = mean(target);
    let meta = TrainMeta::new(config.clone(), ds.content_hash(), n);
    let mut report = TrainReport::default();

    let constant = target.iter().all(|&y| y == target[0]);
    if constant {
        let shapes = sizes
            .iter()
            .enumerate()
            .map(|(f, &s)| ShapeTerm { feature: f, scores: vec![T::zero(); s], stderr: vec![T::zero(); s] })
            .collect();
        let model = EbmModel::new(ds.schema().clone(), bin_maps, intercept, shapes, Vec::new(), meta)?;
        return Ok((model, report));
    }

    let bags: Vec<Bag> = (0..config.num_bags).map(|b| make_bag(n, config, b)).collect();

    // Main effects.
    let main_fits: Vec<BoostOutcome<T>> = bags
        .par_iter()
        .map(|bag| {
            let booster = Booster { config, bag, target };
            let init = mean(&bag.train.iter().map(|&r| target[r]).collect::<Vec<_>>());
            booster.run(
                &sizes,
                &|t, r| binned[t][r],
                &|t, res, cells| tree_from_cells(res, cells, sizes[t], config.max_leaves),
                init,
            )
        })
        .collect();

    let mut shapes = Vec::with_capacity(sizes.len());
    for f in 0..sizes.len() {
        let mut per_bag: Vec<Vec<T>> = main_fits.iter().map(|o| o.terms[f].clone()).collect();
        per_bag.iter_mut().for_each(|s| center(s, &counts[f], n));
        shapes.push(ShapeTerm { feature: f, scores: mean_across(&per_bag), stderr: compute_error_bars(&per_bag) });
    }
    for fit in &main_fits {
        report.main_loss.push(fit.loss.clone());
        report.main_best_round.push(fit.best_round);
    }

    // Pair terms on the frozen main-effect residuals.
    let mut pairs = Vec::new();
    if config.num_interactions > 0 && !candidates.is_empty() {
        let residuals: Vec<T> = (0..n)
            .map(|r| {
                let mut p = intercept;
                for s in &shapes {
                    p += s.scores[binned[s.feature][r]];
                }
                target[r] - p
            })
            .collect();
        let features: Vec<BinnedFeature> = binned
            .iter()
            .zip(&sizes)
            .map(|(b, &s)| BinnedFeature { bins: b.clone(), bin_count: s })
            .collect();
        let ranked = rank_interactions(&residuals, &features, &candidates)?;
        let chosen: Vec<(usize, usize)> = ranked.iter().take(config.num_interactions).map(|s| s.pair).collect();
        report.interactions = ranked;

        let pair_sizes: Vec<usize> = chosen.iter().map(|&(a, b)| sizes[a] * sizes[b]).collect();
        let pair_fits: Vec<BoostOutcome<T>> = bags
            .par_iter()
            .map(|bag| {
                let booster = Booster { config, bag, target: &residuals };
                booster.run(
                    &pair_sizes,
                    &|t, r| {
                        let (a, b) = chosen[t];
                        binned[a][r] * sizes[b] + binned[b][r]
                    },
                    &|t, res, cells| {
                        let (a, b) = chosen[t];
                        let cols = sizes[b];
                        let ia: Vec<usize> = cells.iter().map(|c| c / cols).collect();
                        let ib: Vec<usize> = cells.iter().map(|c| c % cols).collect();
                        fit_pair_tree(res, &ia, &ib, sizes[a], cols)
                    },
                    T::zero(),
                )
            })
            .collect();
        for (t, &(a, b)) in chosen.iter().enumerate() {
            let mut cell_counts = vec![0usize; pair_sizes[t]];
            for r in 0..n {
                cell_counts[binned[a][r] * sizes[b] + binned[b][r]] += 1;
            }
            let mut per_bag: Vec<Vec<T>> = pair_fits.iter().map(|o| o.terms[t].clone()).collect();
            per_bag.iter_mut().for_each(|g| center(g, &cell_counts, n));
            pairs.push(PairTerm {
                features: (a, b),
                rows: sizes[a],
                cols: sizes[b],
                grid: mean_across(&per_bag),
                stderr: compute_error_bars(&per_bag),
            });
        }
        report.pair_loss = pair_fits.into_iter().map(|o| o.loss).collect();
    }

    let model = EbmModel::new(ds.schema().clone(), bin_maps, intercept, shapes, pairs, meta)?;
    Ok((model, report))
}

fn tree_from_cells<T: Scalar>(residuals: &[T], cells: &[usize], bin_count: usize, max_leaves: usize) -> Vec<T> {
    let mut counts = vec![0usize; bin_count];
    let mut sums = vec![T::zero(); bin_count];
    for (&r, &b) in residuals.iter().zip(cells) {
        counts[b] += 1;
        sums[b] += r;
    }
    tree_from_histogram(&counts, &sums, max_leaves)
}
