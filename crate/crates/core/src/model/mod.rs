//! The trained additive model: lookup-table inference, explanations,
//! importance, shape export and the on-disk format.

mod export;
mod file;

use std::cmp::Ordering;

use crate::binning::BinMap;
use crate::dataset::{Dataset, FeatureValue, Schema};
use crate::error::{EbmError, Result};
use crate::fast::{all_pairs, rank_interactions, BinnedFeature, InteractionScore};
use crate::scalar::Scalar;
use crate::trainer::{PairTerm, ShapeTerm, TrainConfig};

pub use export::{PairGrid, ShapeExport, StepRow, StepTable};
pub use file::FORMAT_VERSION;

pub const DEFAULT_UNIT: &str = "mm";

/// Anything that maps a feature row to a real prediction.
pub trait Regressor<T: Scalar> {
    fn predict_row(&self, row: &[FeatureValue<T>]) -> Result<T>;

    fn predict_dataset(&self, ds: &Dataset<T>) -> Result<Vec<T>> {
        (0..ds.n_rows()).map(|r| self.predict_row(&ds.row(r))).collect()
    }
}

/// Provenance recorded alongside the model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainMeta {
    pub config: TrainConfig,
    pub data_hash: String,
    pub n_train: usize,
    /// Free-text unit of the target.
    pub unit: String,
}

impl TrainMeta {
    pub fn new(config: TrainConfig, data_hash: String, n_train: usize) -> Self {
        TrainMeta { config, data_hash, n_train, unit: DEFAULT_UNIT.to_string() }
    }
}

/// One term's share of a prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Contribution<T> {
    pub label: String,
    /// Position of the term in the model (shape terms first, then pairs).
    pub term_index: usize,
    pub value: T,
}

/// Per-row breakdown, contributions sorted by magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation<T> {
    pub prediction: T,
    pub intercept: T,
    pub contributions: Vec<Contribution<T>>,
}

impl<T: Scalar> Explanation<T> {
    /// Intercept plus contributions, accumulated in model term order; equals
    /// `prediction` bit for bit.
    pub fn total(&self) -> T {
        let mut by_term: Vec<&Contribution<T>> = self.contributions.iter().collect();
        by_term.sort_by_key(|c| c.term_index);
        let mut acc = self.intercept;
        for c in by_term {
            acc += c.value;
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EbmModel<T> {
    schema: Schema,
    bin_maps: Vec<BinMap<T>>,
    intercept: T,
    shape_terms: Vec<ShapeTerm<T>>,
    pair_terms: Vec<PairTerm<T>>,
    meta: TrainMeta,
}

impl<T: Scalar> EbmModel<T> {
    pub fn new(
        schema: Schema,
        bin_maps: Vec<BinMap<T>>,
        intercept: T,
        shape_terms: Vec<ShapeTerm<T>>,
        pair_terms: Vec<PairTerm<T>>,
        meta: TrainMeta,
    ) -> Result<Self> {
        let nf = schema.n_features();
        if bin_maps.len() != nf {
            return Err(EbmError::Malformed(format!("{} bin maps for {nf} features", bin_maps.len())));
        }
        for (f, m) in schema.features().iter().zip(&bin_maps) {
            if &f.kind != m.kind() {
                return Err(EbmError::Malformed(format!("bin map kind differs from schema for `{}`", f.name)));
            }
        }
        if !intercept.is_finite() {
            return Err(EbmError::Malformed("intercept is not finite".into()));
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        for t in &shape_terms {
            let ok = t.feature < nf
                && t.scores.len() == bin_maps[t.feature].bin_count()
                && t.stderr.len() == t.scores.len()
                && finite(&t.scores)
                && finite(&t.stderr);
            if !ok {
                return Err(EbmError::Malformed(format!("shape term for feature {} is inconsistent", t.feature)));
            }
        }
        for p in &pair_terms {
            let (a, b) = p.features;
            let ok = a < b
                && b < nf
                && p.rows == bin_maps[a].bin_count()
                && p.cols == bin_maps[b].bin_count()
                && p.grid.len() == p.rows * p.cols
                && p.stderr.len() == p.grid.len()
                && finite(&p.grid)
                && finite(&p.stderr);
            if !ok {
                return Err(EbmError::Malformed(format!("pair term ({a}, {b}) is inconsistent")));
            }
        }
        Ok(EbmModel { schema, bin_maps, intercept, shape_terms, pair_terms, meta })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn bin_maps(&self) -> &[BinMap<T>] {
        &self.bin_maps
    }

    pub fn intercept(&self) -> T {
        self.intercept
    }

    pub fn shape_terms(&self) -> &[ShapeTerm<T>] {
        &self.shape_terms
    }

    pub fn pair_terms(&self) -> &[PairTerm<T>] {
        &self.pair_terms
    }

    pub fn meta(&self) -> &TrainMeta {
        &self.meta
    }

    pub fn unit(&self) -> &str {
        &self.meta.unit
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.meta.unit = unit.into();
        self
    }

    pub fn n_terms(&self) -> usize {
        self.shape_terms.len() + self.pair_terms.len()
    }

    /// Term labels in model order: feature names, then `"a × b"` for pairs.
    pub fn term_labels(&self) -> Vec<String> {
        let names = self.schema.feature_names();
        self.shape_terms
            .iter()
            .map(|t| names[t.feature].to_string())
            .chain(self.pair_terms.iter().map(|p| format!("{} × {}", names[p.features.0], names[p.features.1])))
            .collect()
    }

    pub fn term_index(&self, label: &str) -> Result<usize> {
        self.term_labels().iter().position(|l| l == label).ok_or_else(|| EbmError::Lookup(label.to_string()))
    }

    fn bins_for_row(&self, row: &[FeatureValue<T>]) -> Result<Vec<usize>> {
        if row.len() != self.schema.n_features() {
            return Err(EbmError::Input(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.schema.n_features()
            )));
        }
        row.iter().zip(&self.bin_maps).map(|(&v, m)| m.apply(v)).collect()
    }

    /// Term scores for a row, in model term order.
    fn term_values<'a>(&'a self, bins: &'a [usize]) -> impl Iterator<Item = T> + 'a {
        let mains = self.shape_terms.iter().map(move |t| t.scores[bins[t.feature]]);
        let pairs = self.pair_terms.iter().map(move |p| p.at(bins[p.features.0], bins[p.features.1]));
        mains.chain(pairs)
    }

    /// Intercept plus every term's lookup, summed in term order.
    pub fn predict(&self, row: &[FeatureValue<T>]) -> Result<T> {
        let bins = self.bins_for_row(row)?;
        let mut acc = self.intercept;
        for v in self.term_values(&bins) {
            acc += v;
        }
        Ok(acc)
    }

    pub fn local_explain(&self, row: &[FeatureValue<T>]) -> Result<Explanation<T>> {
        let bins = self.bins_for_row(row)?;
        let labels = self.term_labels();
        let mut prediction = self.intercept;
        let mut contributions: Vec<Contribution<T>> = self
            .term_values(&bins)
            .zip(labels)
            .enumerate()
            .map(|(term_index, (value, label))| {
                prediction += value;
                Contribution { label, term_index, value }
            })
            .collect();
        contributions.sort_by(|a, b| {
            b.value.abs().partial_cmp(&a.value.abs()).unwrap_or(Ordering::Equal).then_with(|| a.label.cmp(&b.label))
        });
        Ok(Explanation { prediction, intercept: self.intercept, contributions })
    }

    fn check_conforms(&self, ds: &Dataset<T>) -> Result<()> {
        let same = ds.schema().n_features() == self.schema.n_features()
            && ds.schema().features().iter().zip(self.schema.features()).all(|(a, b)| a.name == b.name && a.kind == b.kind);
        if same {
            Ok(())
        } else {
            Err(EbmError::Schema("dataset features differ from the model's".into()))
        }
    }

    /// Mean absolute term score over the rows of `ds`, sorted descending
    /// (ties by label).
    pub fn global_importance(&self, ds: &Dataset<T>) -> Result<Vec<(String, T)>> {
        self.check_conforms(ds)?;
        let n = ds.n_rows();
        if n == 0 {
            return Err(EbmError::Size("importance needs at least one row".into()));
        }
        let binned: Vec<Vec<usize>> =
            self.bin_maps.iter().zip(ds.columns()).map(|(m, c)| m.apply_column(c)).collect::<Result<_>>()?;
        let nt = T::from_usize_lossy(n);
        let mut out: Vec<(String, T)> = self
            .term_labels()
            .into_iter()
            .enumerate()
            .map(|(t, label)| {
                let total: T = if t < self.shape_terms.len() {
                    let term = &self.shape_terms[t];
                    binned[term.feature].iter().map(|&b| term.scores[b].abs()).sum()
                } else {
                    let p = &self.pair_terms[t - self.shape_terms.len()];
                    binned[p.features.0].iter().zip(&binned[p.features.1]).map(|(&a, &b)| p.at(a, b).abs()).sum()
                };
                (label, total / nt)
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    /// Ranks every feature pair on the residuals of the intercept plus main
    /// effects over `ds`, using the model's bins.
    pub fn rank_residual_interactions(&self, ds: &Dataset<T>) -> Result<Vec<InteractionScore<T>>> {
        self.check_conforms(ds)?;
        let binned: Vec<Vec<usize>> =
            self.bin_maps.iter().zip(ds.columns()).map(|(m, c)| m.apply_column(c)).collect::<Result<_>>()?;
        let residuals: Vec<T> = ds
            .target()
            .iter()
            .enumerate()
            .map(|(r, &y)| {
                let mut p = self.intercept;
                for t in &self.shape_terms {
                    p += t.scores[binned[t.feature][r]];
                }
                y - p
            })
            .collect();
        let features: Vec<BinnedFeature> = binned
            .into_iter()
            .zip(&self.bin_maps)
            .map(|(bins, m)| BinnedFeature { bins, bin_count: m.bin_count() })
            .collect();
        rank_interactions(&residuals, &features, &all_pairs(features.len()))
    }
}

impl<T: Scalar> Regressor<T> for EbmModel<T> {
    fn predict_row(&self, row: &[FeatureValue<T>]) -> Result<T> {
        self.predict(row)
    }
}
