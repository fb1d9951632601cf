//! Synthetic regression data with known additive structure, used as ground
//! truth for recovery and detection tests.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Column, Dataset, Feature, Schema};
use crate::error::{EbmError, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub enum InputDist {
    Uniform { lo: f64, hi: f64 },
    Categorical { cardinality: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthFeature {
    pub name: String,
    pub dist: InputDist,
}

/// Ground-truth univariate shape.
#[derive(Clone, Debug, PartialEq)]
pub enum MainEffect {
    Linear { coef: f64 },
    Quadratic { coef: f64 },
    /// `height · 1[x > threshold]`
    Step { threshold: f64, height: f64 },
    Sine { amplitude: f64, frequency: f64 },
    /// One value per category code.
    Levels(Vec<f64>),
}

impl MainEffect {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MainEffect::Linear { coef } => coef * x,
            MainEffect::Quadratic { coef } => coef * x * x,
            MainEffect::Step { threshold, height } => {
                if x > *threshold {
                    *height
                } else {
                    0.0
                }
            }
            MainEffect::Sine { amplitude, frequency } => amplitude * (std::f64::consts::TAU * frequency * x).sin(),
            MainEffect::Levels(v) => v.get(x as usize).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairEffect {
    Product { coef: f64 },
}

impl PairEffect {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match self {
            PairEffect::Product { coef } => coef * a * b,
        }
    }
}

/// Generator description: input distributions plus the target formula
/// `intercept + Σ main + Σ pair`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub features: Vec<SynthFeature>,
    pub target_name: String,
    pub intercept: f64,
    pub main: Vec<(usize, MainEffect)>,
    pub pairs: Vec<(usize, usize, PairEffect)>,
}

fn unit_features(n: usize) -> Vec<SynthFeature> {
    (1..=n)
        .map(|i| SynthFeature { name: format!("x{i}"), dist: InputDist::Uniform { lo: 0.0, hi: 1.0 } })
        .collect()
}

impl SyntheticSpec {
    /// `y = 2·x1`
    pub fn linear() -> Self {
        SyntheticSpec {
            features: unit_features(1),
            target_name: "y".into(),
            intercept: 0.0,
            main: vec![(0, MainEffect::Linear { coef: 2.0 })],
            pairs: Vec::new(),
        }
    }

    /// `y = 3·x1 − 2·x2² + 1[x3 > 0.5]`
    pub fn additive() -> Self {
        SyntheticSpec {
            features: unit_features(3),
            target_name: "y".into(),
            intercept: 0.0,
            main: vec![
                (0, MainEffect::Linear { coef: 3.0 }),
                (1, MainEffect::Quadratic { coef: -2.0 }),
                (2, MainEffect::Step { threshold: 0.5, height: 1.0 }),
            ],
            pairs: Vec::new(),
        }
    }

    /// `y = x1·x2 + x3`
    pub fn interaction() -> Self {
        SyntheticSpec {
            features: unit_features(3),
            target_name: "y".into(),
            intercept: 0.0,
            main: vec![(2, MainEffect::Linear { coef: 1.0 })],
            pairs: vec![(0, 1, PairEffect::Product { coef: 1.0 })],
        }
    }

    /// `y = 3·x1 − 2·x2² + x3·x4`
    pub fn additive_with_pair() -> Self {
        SyntheticSpec {
            features: unit_features(4),
            target_name: "y".into(),
            intercept: 0.0,
            main: vec![(0, MainEffect::Linear { coef: 3.0 }), (1, MainEffect::Quadratic { coef: -2.0 })],
            pairs: vec![(2, 3, PairEffect::Product { coef: 1.0 })],
        }
    }

    pub fn schema(&self) -> Result<Schema> {
        let features = self
            .features
            .iter()
            .map(|f| match f.dist {
                InputDist::Uniform { .. } => Feature::numeric(&f.name),
                InputDist::Categorical { cardinality } => Feature::categorical(&f.name, cardinality)
                    .with_levels((0..cardinality).map(|c| c.to_string())),
            })
            .collect();
        Schema::new(features, &self.target_name)
    }

    /// Sum of the main effects attached to `feature` at `x`.
    pub fn partial(&self, feature: usize, x: f64) -> f64 {
        self.main.iter().filter(|(f, _)| *f == feature).map(|(_, e)| e.eval(x)).sum()
    }

    /// Noise-free target for one row of raw inputs.
    pub fn formula(&self, x: &[f64]) -> f64 {
        let mut y = self.intercept;
        for (f, e) in &self.main {
            y += e.eval(x[*f]);
        }
        for (a, b, e) in &self.pairs {
            y += e.eval(x[*a], x[*b]);
        }
        y
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.len();
        for f in &self.features {
            match f.dist {
                InputDist::Uniform { lo, hi } if !(lo < hi) || !lo.is_finite() || !hi.is_finite() => {
                    return Err(EbmError::Config(format!("`{}`: uniform range [{lo}, {hi}) is empty", f.name)))
                }
                InputDist::Categorical { cardinality } if cardinality < 2 => {
                    return Err(EbmError::Config(format!("`{}`: cardinality {cardinality} < 2", f.name)))
                }
                _ => {}
            }
        }
        if self.main.iter().any(|(f, _)| *f >= n) || self.pairs.iter().any(|(a, b, _)| *a >= n || *b >= n) {
            return Err(EbmError::Config("effect references a missing feature".into()));
        }
        Ok(())
    }
}

/// A generated dataset together with the generator that produced it.
#[derive(Clone, Debug)]
pub struct SyntheticData<T> {
    pub dataset: Dataset<T>,
    pub spec: SyntheticSpec,
}

pub fn make_synthetic<T: Scalar>(n: usize, spec: &SyntheticSpec, noise_sd: f64, seed: u64) -> Result<SyntheticData<T>> {
    spec.validate()?;
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(EbmError::Config(format!("noise_sd {noise_sd} must be finite and >= 0")));
    }
    let schema = spec.schema()?;
    let mut inputs = rng::stream(seed, "synth-inputs", 0);
    let mut noise_rng = rng::stream(seed, "synth-noise", 0);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| EbmError::Config(e.to_string()))?;

    let mut raw: Vec<Vec<f64>> = vec![Vec::with_capacity(n); spec.features.len()];
    for _ in 0..n {
        for (f, feature) in spec.features.iter().enumerate() {
            let v = match feature.dist {
                InputDist::Uniform { lo, hi } => inputs.random_range(lo..hi),
                InputDist::Categorical { cardinality } => inputs.random_range(0..cardinality) as f64,
            };
            raw[f].push(v);
        }
    }
    let mut row = vec![0.0; spec.features.len()];
    let target = (0..n)
        .map(|r| {
            for (f, col) in raw.iter().enumerate() {
                row[f] = col[r];
            }
            let eps = if noise_sd > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
            T::lit(spec.formula(&row) + eps)
        })
        .collect();
    let columns = spec
        .features
        .iter()
        .zip(raw)
        .map(|(f, col)| match f.dist {
            InputDist::Uniform { .. } => Column::Numeric(col.into_iter().map(T::lit).collect()),
            InputDist::Categorical { .. } => Column::Categorical(col.into_iter().map(|c| c as usize).collect()),
        })
        .collect();
    Ok(SyntheticData { dataset: Dataset::new(schema, columns, target)?, spec: spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureValue;

    #[test]
    fn noiseless_linear_is_exact() {
        let d = make_synthetic::<f64>(100, &SyntheticSpec::linear(), 0.0, 4).unwrap();
        for r in 0..100 {
            let FeatureValue::Numeric(x) = d.dataset.value(r, 0) else { panic!() };
            assert_eq!(d.dataset.target()[r], 2.0 * x);
        }
    }

    #[test]
    fn noiseless_target_matches_formula() {
        let spec = SyntheticSpec::additive_with_pair();
        let d = make_synthetic::<f64>(2000, &spec, 0.0, 11).unwrap();
        for r in 0..d.dataset.n_rows() {
            let x: Vec<f64> = (0..4).map(|f| d.dataset.numeric_column(f)[r]).collect();
            let direct = 3.0 * x[0] - 2.0 * x[1] * x[1] + x[2] * x[3];
            assert!((d.dataset.target()[r] - direct).abs() <= 1e-15 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_synthetic::<f64>(50, &SyntheticSpec::additive(), 0.0, 5).unwrap();
        let b = make_synthetic::<f64>(50, &SyntheticSpec::additive(), 0.0, 5).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = make_synthetic::<f64>(50, &SyntheticSpec::additive(), 0.3, 5).unwrap();
        assert_eq!(a.dataset.columns(), c.dataset.columns());
        assert_ne!(a.dataset.target(), c.dataset.target());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_synthetic::<f64>(10, &SyntheticSpec::linear(), -1.0, 0).is_err());
        let mut spec = SyntheticSpec::linear();
        spec.main.push((5, MainEffect::Linear { coef: 1.0 }));
        assert!(make_synthetic::<f64>(10, &spec, 0.0, 0).is_err());
    }

    #[test]
    fn categorical_inputs_use_levels() {
        let spec = SyntheticSpec {
            features: vec![SynthFeature { name: "c".into(), dist: InputDist::Categorical { cardinality: 3 } }],
            target_name: "y".into(),
            intercept: 1.0,
            main: vec![(0, MainEffect::Levels(vec![0.0, 10.0, 20.0]))],
            pairs: vec![],
        };
        let d = make_synthetic::<f32>(30, &spec, 0.0, 2).unwrap();
        for r in 0..30 {
            let FeatureValue::Code(c) = d.dataset.value(r, 0) else { panic!() };
            assert_eq!(d.dataset.target()[r], 1.0 + 10.0 * c as f32);
        }
    }
}
