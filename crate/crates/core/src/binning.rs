//! Per-feature discretization. Shape functions are stored per bin, so a
//! [`BinMap`] is what turns a raw value into a lookup-table index.

use crate::dataset::{Column, FeatureKind, FeatureValue};
use crate::error::{EbmError, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_BINS: usize = 256;

/// Numeric: value `v` falls in bin `i` when `cuts[i-1] < v <= cuts[i]`,
/// clamping to the edge bins. Categorical: the code is the bin.
#[derive(Clone, Debug, PartialEq)]
pub struct BinMap<T> {
    kind: FeatureKind,
    cuts: Vec<T>,
}

impl<T: Scalar> BinMap<T> {
    pub fn numeric(cuts: Vec<T>) -> Result<Self> {
        if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EbmError::Domain("bin cuts must be finite and strictly ascending".into()));
        }
        Ok(BinMap { kind: FeatureKind::Numeric, cuts })
    }

    pub fn categorical(cardinality: usize) -> Result<Self> {
        if cardinality < 2 {
            return Err(EbmError::Domain(format!("categorical cardinality {cardinality} < 2")));
        }
        Ok(BinMap { kind: FeatureKind::Categorical { cardinality }, cuts: Vec::new() })
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    pub fn cuts(&self) -> &[T] {
        &self.cuts
    }

    pub fn bin_count(&self) -> usize {
        match self.kind {
            FeatureKind::Numeric => self.cuts.len() + 1,
            FeatureKind::Categorical { cardinality } => cardinality,
        }
    }

    pub fn bin_numeric(&self, value: T) -> usize {
        self.cuts.partition_point(|c| *c < value)
    }

    pub fn apply(&self, value: FeatureValue<T>) -> Result<usize> {
        match (&self.kind, value) {
            (FeatureKind::Numeric, FeatureValue::Numeric(v)) => Ok(self.bin_numeric(v)),
            (FeatureKind::Categorical { cardinality }, FeatureValue::Code(c)) => {
                if c < *cardinality {
                    Ok(c)
                } else {
                    Err(EbmError::Domain(format!("category code {c} outside cardinality {cardinality}")))
                }
            }
            _ => Err(EbmError::Input("feature value kind does not match bin map".into())),
        }
    }

    pub fn apply_column(&self, column: &Column<T>) -> Result<Vec<usize>> {
        match column {
            Column::Numeric(v) => match self.kind {
                FeatureKind::Numeric => Ok(v.iter().map(|&x| self.bin_numeric(x)).collect()),
                _ => Err(EbmError::Input("numeric column against categorical bin map".into())),
            },
            Column::Categorical(c) => c.iter().map(|&k| self.apply(FeatureValue::Code(k))).collect(),
        }
    }

    /// `(lower, upper]` edges of a numeric bin, infinite at the ends. For
    /// categorical maps the edges are `code ± 0.5`.
    pub fn edges(&self, bin: usize) -> (T, T) {
        match self.kind {
            FeatureKind::Numeric => {
                let lo = if bin == 0 { T::neg_infinity() } else { self.cuts[bin - 1] };
                let hi = self.cuts.get(bin).copied().unwrap_or_else(T::infinity);
                (lo, hi)
            }
            FeatureKind::Categorical { .. } => {
                let c = T::from_usize_lossy(bin);
                let half = T::lit(0.5);
                (c - half, c + half)
            }
        }
    }
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Equal-frequency bins: candidate cuts at the `k / max_bins` quantiles,
/// keeping only those that leave at least one training value on each side
/// of the previous kept cut, so every bin is occupied.
pub fn fit_bins<T: Scalar>(column: &[T], max_bins: usize) -> Result<BinMap<T>> {
    if column.is_empty() {
        return Err(EbmError::Size("cannot bin an empty column".into()));
    }
    if max_bins < 2 {
        return Err(EbmError::Config(format!("max_bins {max_bins} < 2")));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(EbmError::Domain("cannot bin non-finite values".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let mut cuts: Vec<T> = Vec::new();
    let max = sorted[sorted.len() - 1];
    for k in 1..max_bins {
        let c = quantile_sorted(&sorted, k as f64 / max_bins as f64);
        if c >= max {
            break;
        }
        let lower_ok = match cuts.last() {
            // some value in (prev, c]
            Some(&prev) => {
                let first_above_prev = sorted.partition_point(|v| *v <= prev);
                first_above_prev < sorted.len() && sorted[first_above_prev] <= c
            }
            None => sorted[0] <= c,
        };
        if lower_ok {
            cuts.push(c);
        }
    }
    BinMap::numeric(cuts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn median_cut_for_two_bins() {
        let col: Vec<f64> = (1..=10).map(f64::from).collect();
        let m = fit_bins(&col, 2).unwrap();
        assert_eq!(m.cuts(), &[5.5]);
        assert_eq!(m.bin_count(), 2);
    }

    #[test]
    fn constant_column_has_one_bin() {
        let m = fit_bins(&[4.0_f64; 17], 256).unwrap();
        assert_eq!(m.bin_count(), 1);
        assert!(m.cuts().is_empty());
    }

    #[test]
    fn three_distinct_values_give_three_bins() {
        let col: Vec<f64> = (0..90).map(|i| f64::from(i % 3)).collect();
        let m = fit_bins(&col, 256).unwrap();
        assert_eq!(m.bin_count(), 3);
        let bins = m.apply_column(&Column::Numeric(col)).unwrap();
        let mut counts = [0; 3];
        bins.iter().for_each(|&b| counts[b] += 1);
        assert_eq!(counts, [30, 30, 30]);
    }

    #[test]
    fn apply_rule_and_clamping() {
        let m = BinMap::numeric(vec![5.5_f64]).unwrap();
        assert_eq!(m.apply(FeatureValue::Numeric(3.0)).unwrap(), 0);
        assert_eq!(m.apply(FeatureValue::Numeric(5.5)).unwrap(), 0);
        assert_eq!(m.apply(FeatureValue::Numeric(1000.0)).unwrap(), 1);
        assert_eq!(m.apply(FeatureValue::Numeric(-1e300)).unwrap(), 0);
    }

    #[test]
    fn categorical_identity_and_range() {
        let m = BinMap::<f64>::categorical(2).unwrap();
        assert_eq!(m.apply(FeatureValue::Code(1)).unwrap(), 1);
        assert!(matches!(m.apply(FeatureValue::Code(2)), Err(EbmError::Domain(_))));
        assert!(m.apply(FeatureValue::Numeric(1.0)).is_err());
    }

    #[test]
    fn rejects_empty_and_bad_cuts() {
        assert!(matches!(fit_bins::<f64>(&[], 4), Err(EbmError::Size(_))));
        assert!(BinMap::numeric(vec![2.0_f64, 1.0]).is_err());
        assert!(BinMap::numeric(vec![1.0_f64, 1.0]).is_err());
    }

    #[test]
    fn edges_cover_the_line() {
        let m = BinMap::numeric(vec![1.0_f64, 2.0]).unwrap();
        assert_eq!(m.edges(0), (f64::NEG_INFINITY, 1.0));
        assert_eq!(m.edges(1), (1.0, 2.0));
        assert_eq!(m.edges(2), (2.0, f64::INFINITY));
    }

    proptest! {
        #[test]
        fn bins_are_occupied_and_monotone(
            col in prop::collection::vec(-50i32..50, 1..300),
            max_bins in 2usize..64,
        ) {
            let col: Vec<f64> = col.into_iter().map(|v| f64::from(v) * 0.25).collect();
            let m = fit_bins(&col, max_bins).unwrap();
            prop_assert!(m.bin_count() <= max_bins);
            prop_assert_eq!(&m, &fit_bins(&col, max_bins).unwrap());
            let bins = m.apply_column(&Column::Numeric(col.clone())).unwrap();
            let mut counts = vec![0usize; m.bin_count()];
            bins.iter().for_each(|&b| counts[b] += 1);
            prop_assert!(counts.iter().all(|&c| c > 0), "empty bin: {:?}", counts);
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in sorted.windows(2) {
                prop_assert!(m.bin_numeric(w[0]) <= m.bin_numeric(w[1]));
            }
        }
    }
}
