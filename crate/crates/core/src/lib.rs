//! Explainable boosting machines: additive models with pairwise
//! interactions, trained by cyclic gradient boosting over binned features.
//!
//! A fitted [`EbmModel`] is an intercept plus one lookup table per feature
//! and per selected feature pair, so every prediction decomposes exactly into
//! per-term contributions.
//!
//! ```
//! use ebm_core::{make_synthetic, train, SyntheticSpec, TrainConfig};
//!
//! let data = make_synthetic::<f64>(300, &SyntheticSpec::additive(), 0.0, 7).unwrap().dataset;
//! let config = TrainConfig { learning_rate: 0.1, num_bags: 2, num_interactions: 0, ..TrainConfig::default() };
//! let model = train(&data, &config).unwrap();
//! let row = data.row(0);
//! let explanation = model.local_explain(&row).unwrap();
//! assert_eq!(explanation.total(), model.predict(&row).unwrap());
//! ```

pub mod baselines;
pub mod binning;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fast;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod trainer;
pub mod wallcap;

pub use baselines::{RidgeModel, TreeModel};
pub use binning::{fit_bins, BinMap};
pub use dataset::{
    load_csv, make_synthetic, save_csv, Column, Dataset, Feature, FeatureKind, FeatureValue, Schema, SyntheticSpec,
};
pub use error::{EbmError, Result};
pub use eval::{evaluate_learners, evaluate_repeated, EvalReport, Learner, MetricSet};
pub use fast::{rank_interactions, InteractionScore};
pub use model::{EbmModel, Explanation, Regressor};
pub use scalar::Scalar;
pub use trainer::{train, train_with_report, TrainConfig};

pub type Model = EbmModel<f64>;
pub type Model32 = EbmModel<f32>;
pub type Data = Dataset<f64>;
pub type Data32 = Dataset<f32>;
pub type Ridge = RidgeModel<f64>;
pub type Tree = TreeModel<f64>;
