//! Reinforced-concrete shear walls: input schema, the drift-limit code rule
//! and a comparator between model and code predictions.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset, Feature, FeatureValue, Schema};
use crate::error::{EbmError, Result};
use crate::model::{EbmModel, Regressor};
use crate::rng::stream;
use crate::scalar::{mean, sample_sd, Scalar};

pub const TARGET: &str = "ultimate_displacement";

/// Numeric inputs, in schema order. `l_w` is carried on [`WallRecord`] but
/// not used as a model input; it enters through `shear_span_ratio`.
pub const NUMERIC_FEATURES: [&str; 10] = [
    "t_w",
    "h_w",
    "shear_span_ratio",
    "f_c",
    "web_long_ratio",
    "web_trans_ratio",
    "be_long_ratio",
    "be_trans_ratio",
    "axial_load_ratio",
    "v_max",
];
pub const CROSS_SECTIONS: [&str; 3] = ["rectangular", "barbell", "flanged"];
pub const CURVATURES: [&str; 2] = ["single", "double"];

/// The fixed twelve-input wall schema.
pub fn wall_schema() -> Schema {
    let mut features: Vec<Feature> = NUMERIC_FEATURES.iter().map(|n| Feature::numeric(*n)).collect();
    features.push(Feature::categorical("cross_section", 3).with_levels(CROSS_SECTIONS));
    features.push(Feature::categorical("curvature", 2).with_levels(CURVATURES));
    Schema::new(features, TARGET).expect("wall schema is valid")
}

/// The compact four-input configuration.
pub fn proposed_feature_set() -> Vec<String> {
    ["shear_span_ratio", "axial_load_ratio", "t_w", "v_max"].iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossSection {
    Rectangular,
    Barbell,
    Flanged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Single,
    Double,
}

/// One tested wall. Lengths in mm, `f_c` in MPa, `v_max` in kN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallRecord {
    pub t_w: f64,
    pub l_w: f64,
    pub h_w: f64,
    pub shear_span_ratio: f64,
    pub f_c: f64,
    pub web_long_ratio: f64,
    pub web_trans_ratio: f64,
    pub be_long_ratio: f64,
    pub be_trans_ratio: f64,
    pub axial_load_ratio: f64,
    pub v_max: f64,
    pub cross_section: CrossSection,
    pub curvature: Curvature,
    pub ultimate_displacement: Option<f64>,
}

impl WallRecord {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_w", self.t_w),
            ("l_w", self.l_w),
            ("h_w", self.h_w),
            ("shear_span_ratio", self.shear_span_ratio),
            ("f_c", self.f_c),
            ("v_max", self.v_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EbmError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        let ratios = [
            ("web_long_ratio", self.web_long_ratio),
            ("web_trans_ratio", self.web_trans_ratio),
            ("be_long_ratio", self.be_long_ratio),
            ("be_trans_ratio", self.be_trans_ratio),
        ];
        for (name, v) in ratios {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EbmError::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.axial_load_ratio) {
            return Err(EbmError::Domain(format!("axial_load_ratio must lie in [0, 1], got {}", self.axial_load_ratio)));
        }
        Ok(())
    }

    /// Values in [`wall_schema`] order.
    pub fn features<T: Scalar>(&self) -> Vec<FeatureValue<T>> {
        let nums = [
            self.t_w,
            self.h_w,
            self.shear_span_ratio,
            self.f_c,
            self.web_long_ratio,
            self.web_trans_ratio,
            self.be_long_ratio,
            self.be_trans_ratio,
            self.axial_load_ratio,
            self.v_max,
        ];
        let mut row: Vec<FeatureValue<T>> = nums.iter().map(|&v| FeatureValue::Numeric(T::lit(v))).collect();
        row.push(FeatureValue::Code(self.cross_section as usize));
        row.push(FeatureValue::Code(self.curvature as usize));
        row
    }

    pub fn code_capacity(&self, rule: &CodeRule) -> Result<f64> {
        code_provision_capacity(self.h_w, self.axial_load_ratio, rule)
    }
}

/// Builds a wall-schema dataset; every record needs a target.
pub fn records_to_dataset<T: Scalar>(records: &[WallRecord]) -> Result<Dataset<T>> {
    let schema = wall_schema();
    let mut columns: Vec<Column<T>> = (0..NUMERIC_FEATURES.len()).map(|_| Column::Numeric(Vec::new())).collect();
    columns.push(Column::Categorical(Vec::new()));
    columns.push(Column::Categorical(Vec::new()));
    let mut target = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        rec.validate()?;
        let y = rec.ultimate_displacement.ok_or_else(|| EbmError::Input(format!("record {i} has no target")))?;
        target.push(T::lit(y));
        for (col, v) in columns.iter_mut().zip(rec.features::<T>()) {
            match (col, v) {
                (Column::Numeric(c), FeatureValue::Numeric(x)) => c.push(x),
                (Column::Categorical(c), FeatureValue::Code(k)) => c.push(k),
                _ => unreachable!("record layout follows the schema"),
            }
        }
    }
    Dataset::new(schema, columns, target)
}

/// Drift-limit rule: capacity is `drift · h_w`, with a lower drift above the
/// axial-load threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeRule {
    pub axial_threshold: f64,
    /// Drift when `axial_load_ratio > axial_threshold`.
    pub drift_high_axial: f64,
    pub drift_low_axial: f64,
    /// Drifts are percentages of `h_w` when true, plain ratios otherwise.
    pub percent: bool,
}

impl Default for CodeRule {
    fn default() -> Self {
        CodeRule { axial_threshold: 0.5, drift_high_axial: 1.0, drift_low_axial: 2.0, percent: true }
    }
}

impl CodeRule {
    pub fn with_threshold(threshold: f64) -> Self {
        CodeRule { axial_threshold: threshold, ..Self::default() }
    }
}

/// Code-rule displacement capacity, in the length unit of `h_w`.
pub fn code_provision_capacity<T: Scalar>(h_w: T, axial_load_ratio: T, rule: &CodeRule) -> Result<T> {
    if !(h_w > T::zero()) || !h_w.is_finite() {
        return Err(EbmError::Domain(format!("h_w must be positive, got {h_w}")));
    }
    let drift = if axial_load_ratio > T::lit(rule.axial_threshold) { rule.drift_high_axial } else { rule.drift_low_axial };
    let drift = if rule.percent { T::lit(drift) / T::lit(100.0) } else { T::lit(drift) };
    Ok(drift * h_w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow<T> {
    /// Row index in the input dataset.
    pub row: usize,
    pub ebm_pred: T,
    pub code_pred: T,
    pub actual: T,
    pub ebm_ratio: T,
    pub code_ratio: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeComparison<T> {
    pub rows: Vec<ComparisonRow<T>>,
    /// Rows skipped because the measured displacement is zero.
    pub excluded: usize,
    pub ebm_ratio_mean: T,
    pub ebm_ratio_sd: T,
    pub code_ratio_mean: T,
    pub code_ratio_sd: T,
}

impl<T: Scalar> CodeComparison<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,ebm_pred,code_pred,actual,ebm_ratio,code_ratio\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.row, r.ebm_pred, r.code_pred, r.actual, r.ebm_ratio, r.code_ratio));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "specimens {} (excluded {})\nEBM  predicted/actual {:.4} ± {:.4}\nCode predicted/actual {:.4} ± {:.4}\n",
            self.rows.len(),
            self.excluded,
            self.ebm_ratio_mean.as_f64(),
            self.ebm_ratio_sd.as_f64(),
            self.code_ratio_mean.as_f64(),
            self.code_ratio_sd.as_f64()
        )
    }
}

/// Ratio statistics from aligned prediction vectors.
pub fn compare_predictions<T: Scalar>(ebm: &[T], code: &[T], actual: &[T]) -> Result<CodeComparison<T>> {
    if ebm.len() != actual.len() || code.len() != actual.len() {
        return Err(EbmError::Size("prediction and target lengths differ".into()));
    }
    let mut rows = Vec::with_capacity(actual.len());
    let mut excluded = 0;
    for (i, ((&e, &c), &a)) in ebm.iter().zip(code).zip(actual).enumerate() {
        if a == T::zero() {
            excluded += 1;
            continue;
        }
        rows.push(ComparisonRow { row: i, ebm_pred: e, code_pred: c, actual: a, ebm_ratio: e / a, code_ratio: c / a });
    }
    if excluded > 0 {
        warn!("{excluded} specimen(s) with zero measured displacement excluded");
    }
    if rows.is_empty() {
        return Err(EbmError::Size("no specimens left to compare".into()));
    }
    let er: Vec<T> = rows.iter().map(|r| r.ebm_ratio).collect();
    let cr: Vec<T> = rows.iter().map(|r| r.code_ratio).collect();
    Ok(CodeComparison {
        ebm_ratio_mean: mean(&er),
        ebm_ratio_sd: sample_sd(&er),
        code_ratio_mean: mean(&cr),
        code_ratio_sd: sample_sd(&cr),
        rows,
        excluded,
    })
}

/// Scores `model` and the code rule against the measured targets of `ds`.
/// The model may use any subset of the dataset's columns.
pub fn compare_code<T: Scalar>(model: &EbmModel<T>, ds: &Dataset<T>, rule: &CodeRule) -> Result<CodeComparison<T>> {
    let col = |name: &str| -> Result<Vec<T>> {
        let i = ds.schema().index_of(name).ok_or_else(|| EbmError::Schema(format!("dataset lacks column `{name}`")))?;
        match ds.column(i) {
            Column::Numeric(v) => Ok(v.clone()),
            Column::Categorical(_) => Err(EbmError::Schema(format!("`{name}` must be numeric"))),
        }
    };
    let h_w = col("h_w")?;
    let axial = col("axial_load_ratio")?;
    let code = h_w.iter().zip(&axial).map(|(&h, &a)| code_provision_capacity(h, a, rule)).collect::<Result<Vec<T>>>()?;
    let projected = ds.project(&model.schema().feature_names())?;
    let ebm = model.predict_dataset(&projected)?;
    compare_predictions(&ebm, &code, ds.target())
}

/// Synthetic stand-in for a wall test database. Inputs are drawn over
/// typical laboratory ranges and the displacement follows a smooth drift
/// model with multiplicative noise.
pub fn synthetic_walls<T: Scalar>(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(EbmError::Size("need at least one wall".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(EbmError::Config("noise_sd must be >= 0".into()));
    }
    let mut rng = stream(seed, "walls", 0);
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("valid normal");
    let records: Vec<WallRecord> = (0..n)
        .map(|_| {
            let cross_section = [CrossSection::Rectangular, CrossSection::Barbell, CrossSection::Flanged][rng.random_range(0..3)];
            let curvature = if rng.random_bool(0.8) { Curvature::Single } else { Curvature::Double };
            let t_w = rng.random_range(60.0..300.0f64).round();
            let l_w = rng.random_range(600.0..3000.0f64).round();
            let shear_span_ratio = rng.random_range(0.3..3.0f64);
            let h_w = match curvature {
                Curvature::Single => shear_span_ratio * l_w,
                Curvature::Double => 2.0 * shear_span_ratio * l_w,
            }
            .round();
            let f_c = rng.random_range(20.0..90.0f64);
            let web_long_ratio = rng.random_range(0.002..0.03f64);
            let web_trans_ratio = rng.random_range(0.002..0.015f64);
            let boundary = cross_section != CrossSection::Rectangular || rng.random_bool(0.5);
            let (be_long_ratio, be_trans_ratio) =
                if boundary { (rng.random_range(0.01..0.06f64), rng.random_range(0.003..0.03f64)) } else { (0.0, 0.0) };
            let axial_load_ratio = if rng.random_bool(0.15) { rng.random_range(0.3..0.6f64) } else { rng.random_range(0.0..0.3f64) };
            let strength = 0.3 * f_c.sqrt() * t_w * l_w / 1000.0;
            let v_max = strength * rng.random_range(0.6..1.4f64) * (1.0 + 0.8 * axial_load_ratio) / shear_span_ratio.sqrt();

            let drift_percent = 0.35
                + 0.6 * shear_span_ratio.powf(0.7)
                + 0.003 * t_w
                - 1.8 * axial_load_ratio
                - 0.35 * (v_max / 1500.0).tanh()
                + 12.0 * be_trans_ratio
                + if curvature == Curvature::Double { 0.15 } else { 0.0 };
            let factor = if noise_sd > 0.0 { (1.0 + noise.sample(&mut rng)).max(0.2) } else { 1.0 };
            let ultimate = (drift_percent.max(0.2) / 100.0 * h_w * factor).max(0.5);
            WallRecord {
                t_w,
                l_w,
                h_w,
                shear_span_ratio,
                f_c,
                web_long_ratio,
                web_trans_ratio,
                be_long_ratio,
                be_trans_ratio,
                axial_load_ratio,
                v_max,
                cross_section,
                curvature,
                ultimate_displacement: Some(ultimate),
            }
        })
        .collect();
    records_to_dataset(&records)
}
