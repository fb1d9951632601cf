//! Tabular regression datasets: schema, typed columns, CSV I/O, splits and
//! synthetic generators.

mod csv_io;
mod split;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EbmError, Result};
use crate::scalar::Scalar;

pub use csv_io::{
    load_csv, load_feature_rows, load_inputs, read_csv, read_feature_rows, read_inputs, save_csv, write_csv,
};
pub use split::{kfold, split_random, SplitIndices};
pub use synth::{make_synthetic, InputDist, MainEffect, PairEffect, SynthFeature, SyntheticData, SyntheticSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical { cardinality: usize },
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }
}

/// One input column of a [`Schema`].
///
/// For categorical features `levels` lists the known labels in code order;
/// it may be shorter than the cardinality, in which case unseen labels are
/// appended on first appearance while loading.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Feature { name: name.into(), kind: FeatureKind::Numeric, levels: Vec::new() }
    }

    pub fn categorical(name: impl Into<String>, cardinality: usize) -> Self {
        Feature { name: name.into(), kind: FeatureKind::Categorical { cardinality }, levels: Vec::new() }
    }

    pub fn with_levels<S: Into<String>>(mut self, levels: impl IntoIterator<Item = S>) -> Self {
        self.levels = levels.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<Feature>,
    target_name: String,
}

impl Schema {
    pub fn new(features: Vec<Feature>, target_name: impl Into<String>) -> Result<Self> {
        let target_name = target_name.into();
        if features.is_empty() {
            return Err(EbmError::Schema("schema needs at least one feature".into()));
        }
        if target_name.trim().is_empty() {
            return Err(EbmError::Schema("target name is empty".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.trim().is_empty() {
                return Err(EbmError::Schema("feature name is empty".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(EbmError::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            if f.name == target_name {
                return Err(EbmError::Schema(format!("`{}` is both a feature and the target", f.name)));
            }
            match f.kind {
                FeatureKind::Numeric if !f.levels.is_empty() => {
                    return Err(EbmError::Schema(format!("numeric feature `{}` declares levels", f.name)));
                }
                FeatureKind::Categorical { cardinality } => {
                    if cardinality < 2 {
                        return Err(EbmError::Schema(format!(
                            "categorical feature `{}` needs cardinality >= 2, got {cardinality}",
                            f.name
                        )));
                    }
                    if f.levels.len() > cardinality {
                        return Err(EbmError::Schema(format!(
                            "feature `{}` declares {} levels for cardinality {cardinality}",
                            f.name,
                            f.levels.len()
                        )));
                    }
                    let distinct: HashSet<_> = f.levels.iter().collect();
                    if distinct.len() != f.levels.len() {
                        return Err(EbmError::Schema(format!("feature `{}` repeats a level", f.name)));
                    }
                }
                FeatureKind::Numeric => {}
            }
        }
        Ok(Schema { features, target_name })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &Feature {
        &self.features[index]
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub(crate) fn features_mut(&mut self) -> &mut [Feature] {
        &mut self.features
    }

    /// Parses the flat `key = value` sidecar format:
    ///
    /// ```text
    /// target = y
    /// feature.x1 = numeric
    /// feature.shape = categorical 3
    /// levels.shape = rectangular,barbell,flanged
    /// ```
    ///
    /// Feature order follows the file. Blank lines and `#` comments are
    /// skipped; unrecognised keys are returned for the caller to interpret.
    pub fn from_kv_text(text: &str) -> Result<(Schema, Vec<(String, String)>)> {
        let mut target = None;
        let mut features: Vec<Feature> = Vec::new();
        let mut levels: Vec<(String, Vec<String>)> = Vec::new();
        let mut extra = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                EbmError::Schema(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "target" {
                target = Some(value.to_string());
            } else if let Some(name) = key.strip_prefix("feature.") {
                let mut parts = value.split_whitespace();
                let kind = match parts.next() {
                    Some("numeric") => FeatureKind::Numeric,
                    Some("categorical") => {
                        let card = parts
                            .next()
                            .and_then(|c| c.parse::<usize>().ok())
                            .ok_or_else(|| {
                                EbmError::Schema(format!("line {}: categorical needs a cardinality", lineno + 1))
                            })?;
                        FeatureKind::Categorical { cardinality: card }
                    }
                    other => {
                        return Err(EbmError::Schema(format!(
                            "line {}: unknown feature kind {:?}",
                            lineno + 1,
                            other.unwrap_or("")
                        )))
                    }
                };
                features.push(Feature { name: name.to_string(), kind, levels: Vec::new() });
            } else if let Some(name) = key.strip_prefix("levels.") {
                let list = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                levels.push((name.to_string(), list));
            } else {
                extra.push((key.to_string(), value.to_string()));
            }
        }
        for (name, list) in levels {
            let f = features
                .iter_mut()
                .find(|f| f.name == name)
                .ok_or_else(|| EbmError::Schema(format!("levels given for unknown feature `{name}`")))?;
            f.levels = list;
        }
        let target = target.ok_or_else(|| EbmError::Schema("missing `target` key".into()))?;
        Ok((Schema::new(features, target)?, extra))
    }

    pub fn to_kv_text(&self) -> String {
        let mut out = format!("target = {}\n", self.target_name);
        for f in &self.features {
            match f.kind {
                FeatureKind::Numeric => out.push_str(&format!("feature.{} = numeric\n", f.name)),
                FeatureKind::Categorical { cardinality } => {
                    out.push_str(&format!("feature.{} = categorical {cardinality}\n", f.name));
                    if !f.levels.is_empty() {
                        out.push_str(&format!("levels.{} = {}\n", f.name, f.levels.join(",")));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column<T> {
    Numeric(Vec<T>),
    Categorical(Vec<usize>),
}

impl<T> Column<T> {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A single cell: a numeric value or a category code.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureValue<T> {
    Numeric(T),
    Code(usize),
}

/// Immutable columnar regression table.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    schema: Schema,
    columns: Vec<Column<T>>,
    target: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(schema: Schema, columns: Vec<Column<T>>, target: Vec<T>) -> Result<Self> {
        if columns.len() != schema.n_features() {
            return Err(EbmError::Schema(format!(
                "{} columns for {} schema features",
                columns.len(),
                schema.n_features()
            )));
        }
        let n = target.len();
        if let Some(i) = target.iter().position(|t| !t.is_finite()) {
            return Err(EbmError::Domain(format!("target row {i} is not finite")));
        }
        for (f, col) in schema.features().iter().zip(&columns) {
            if col.len() != n {
                return Err(EbmError::Size(format!(
                    "column `{}` has {} rows, target has {n}",
                    f.name,
                    col.len()
                )));
            }
            match (&f.kind, col) {
                (FeatureKind::Numeric, Column::Numeric(v)) => {
                    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                        return Err(EbmError::Domain(format!("`{}` row {i} is not finite", f.name)));
                    }
                }
                (FeatureKind::Categorical { cardinality }, Column::Categorical(codes)) => {
                    if let Some(&c) = codes.iter().find(|&&c| c >= *cardinality) {
                        return Err(EbmError::Domain(format!(
                            "`{}` code {c} outside cardinality {cardinality}",
                            f.name
                        )));
                    }
                }
                _ => {
                    return Err(EbmError::Schema(format!("column kind mismatch for `{}`", f.name)));
                }
            }
        }
        Ok(Dataset { schema, columns, target })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column<T>] {
        &self.columns
    }

    pub fn column(&self, feature: usize) -> &Column<T> {
        &self.columns[feature]
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn value(&self, row: usize, feature: usize) -> FeatureValue<T> {
        match &self.columns[feature] {
            Column::Numeric(v) => FeatureValue::Numeric(v[row]),
            Column::Categorical(c) => FeatureValue::Code(c[row]),
        }
    }

    pub fn row(&self, row: usize) -> Vec<FeatureValue<T>> {
        (0..self.n_features()).map(|f| self.value(row, f)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<FeatureValue<T>>> + '_ {
        (0..self.n_rows()).map(move |r| self.row(r))
    }

    /// Numeric view of a column (category codes widened to scalars).
    pub fn numeric_column(&self, feature: usize) -> Vec<T> {
        match &self.columns[feature] {
            Column::Numeric(v) => v.clone(),
            Column::Categorical(c) => c.iter().map(|&k| T::from_usize_lossy(k)).collect(),
        }
    }

    /// Rows `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset<T> {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                Column::Numeric(v) => Column::Numeric(indices.iter().map(|&i| v[i]).collect()),
                Column::Categorical(c) => Column::Categorical(indices.iter().map(|&i| c[i]).collect()),
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            columns,
            target: indices.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// Keeps only the named features, in the order given.
    pub fn project<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset<T>> {
        let mut features = Vec::with_capacity(names.len());
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            let idx = self
                .schema
                .index_of(name)
                .ok_or_else(|| EbmError::Schema(format!("unknown feature `{name}`")))?;
            features.push(self.schema.feature(idx).clone());
            columns.push(self.columns[idx].clone());
        }
        let schema = Schema::new(features, self.schema.target_name())?;
        Dataset::new(schema, columns, self.target.clone())
    }

    pub fn split_random(&self, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
        split_random(self.n_rows(), test_fraction, seed)
    }

    pub fn kfold(&self, k: usize, seed: u64) -> Result<Vec<SplitIndices>> {
        kfold(self.n_rows(), k, seed)
    }

    /// SHA-256 over the schema and the exact bits of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.schema).expect("schema serializes"));
        for col in &self.columns {
            match col {
                Column::Numeric(v) => v.iter().for_each(|x| h.update(x.to_bits_u64().to_le_bytes())),
                Column::Categorical(c) => c.iter().for_each(|&k| h.update((k as u64).to_le_bytes())),
            }
        }
        self.target.iter().for_each(|x| h.update(x.to_bits_u64().to_le_bytes()));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
