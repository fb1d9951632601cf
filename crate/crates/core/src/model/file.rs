//! Versioned text model file.
//!
//! ```text
//! ebm-model 1
//! sha256 <hex digest of everything after this line>
//! { ...JSON body... }
//! ```
//!
//! Every real number in the body is written as its shortest round-trip
//! decimal and parsed back with the standard library, so a saved model
//! predicts bit-identically after loading.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EbmModel, TrainMeta};
use crate::binning::BinMap;
use crate::dataset::{FeatureKind, Schema};
use crate::error::{EbmError, Result};
use crate::scalar::{parse_scalar, Scalar};
use crate::trainer::{PairTerm, ShapeTerm, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "ebm-model";

#[derive(Serialize, Deserialize)]
struct Body {
    scalar: String,
    unit: String,
    schema: Schema,
    intercept: String,
    bins: Vec<BinsDto>,
    shapes: Vec<ShapeDto>,
    pairs: Vec<PairDto>,
    meta: MetaDto,
}

#[derive(Serialize, Deserialize)]
struct BinsDto {
    kind: FeatureKind,
    cuts: String,
}

#[derive(Serialize, Deserialize)]
struct ShapeDto {
    feature: usize,
    scores: String,
    stderr: String,
}

#[derive(Serialize, Deserialize)]
struct PairDto {
    features: (usize, usize),
    rows: usize,
    cols: usize,
    grid: String,
    stderr: String,
}

#[derive(Serialize, Deserialize)]
struct MetaDto {
    config: TrainConfig,
    data_hash: String,
    n_train: usize,
}

fn join<T: Scalar>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn split<T: Scalar>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|s| parse_scalar(s).ok_or_else(|| EbmError::Malformed(format!("bad number `{s}` in {what}"))))
        .collect()
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl<T: Scalar> EbmModel<T> {
    pub fn to_text(&self) -> String {
        let body = Body {
            scalar: T::NAME.to_string(),
            unit: self.meta.unit.clone(),
            schema: self.schema.clone(),
            intercept: self.intercept.to_string(),
            bins: self.bin_maps.iter().map(|m| BinsDto { kind: m.kind().clone(), cuts: join(m.cuts()) }).collect(),
            shapes: self
                .shape_terms
                .iter()
                .map(|t| ShapeDto { feature: t.feature, scores: join(&t.scores), stderr: join(&t.stderr) })
                .collect(),
            pairs: self
                .pair_terms
                .iter()
                .map(|p| PairDto {
                    features: p.features,
                    rows: p.rows,
                    cols: p.cols,
                    grid: join(&p.grid),
                    stderr: join(&p.stderr),
                })
                .collect(),
            meta: MetaDto {
                config: self.meta.config.clone(),
                data_hash: self.meta.data_hash.clone(),
                n_train: self.meta.n_train,
            },
        };
        let mut json = serde_json::to_string_pretty(&body).expect("model body serializes");
        json.push('\n');
        format!("{MAGIC} {FORMAT_VERSION}\nsha256 {}\n{json}", digest(json.as_bytes()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, rest) = text.split_once('\n').ok_or_else(|| EbmError::Malformed("missing header".into()))?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| EbmError::Malformed("not an ebm model file".into()))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(EbmError::Version(version.to_string()));
        }
        let (sum_line, json) = rest.split_once('\n').ok_or_else(|| EbmError::Malformed("missing checksum".into()))?;
        let expected = sum_line
            .strip_prefix("sha256 ")
            .map(str::trim)
            .ok_or_else(|| EbmError::Malformed("missing checksum".into()))?;
        let body: Body = serde_json::from_str(json).map_err(|e| EbmError::Malformed(e.to_string()))?;
        let found = digest(json.as_bytes());
        if found != expected {
            return Err(EbmError::Checksum { expected: expected.to_string(), found });
        }
        if body.scalar != T::NAME {
            return Err(EbmError::Malformed(format!("file holds {} scores, expected {}", body.scalar, T::NAME)));
        }

        let bin_maps = body
            .bins
            .iter()
            .map(|b| match b.kind {
                FeatureKind::Numeric => BinMap::numeric(split(&b.cuts, "cuts")?),
                FeatureKind::Categorical { cardinality } => BinMap::categorical(cardinality),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| EbmError::Malformed(e.to_string()))?;
        let shape_terms = body
            .shapes
            .iter()
            .map(|s| {
                Ok(ShapeTerm { feature: s.feature, scores: split(&s.scores, "scores")?, stderr: split(&s.stderr, "stderr")? })
            })
            .collect::<Result<Vec<_>>>()?;
        let pair_terms = body
            .pairs
            .iter()
            .map(|p| {
                Ok(PairTerm {
                    features: p.features,
                    rows: p.rows,
                    cols: p.cols,
                    grid: split(&p.grid, "grid")?,
                    stderr: split(&p.stderr, "stderr")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let intercept =
            parse_scalar(&body.intercept).ok_or_else(|| EbmError::Malformed("bad intercept".into()))?;
        let meta = TrainMeta {
            config: body.meta.config,
            data_hash: body.meta.data_hash,
            n_train: body.meta.n_train,
            unit: body.unit,
        };
        EbmModel::new(body.schema, bin_maps, intercept, shape_terms, pair_terms, meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}
