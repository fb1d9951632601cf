use rand::seq::SliceRandom;

use crate::error::{EbmError, Result};
use crate::rng;

/// Disjoint train/test row indices covering `0..n_rows`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn permutation(n: usize, seed: u64, stream: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, stream, 0));
    idx
}

/// Random train/test split with `|train| = floor(n·(1−test_fraction))`.
pub fn split_random(n_rows: usize, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if n_rows < 2 {
        return Err(EbmError::Size(format!("cannot split {n_rows} rows")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EbmError::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    // The epsilon absorbs representation error such as 10 × 0.9 = 8.999….
    let n_train = ((n_rows as f64) * (1.0 - test_fraction) + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n_rows {
        return Err(EbmError::Size(format!(
            "test fraction {test_fraction} leaves an empty side for {n_rows} rows"
        )));
    }
    let perm = permutation(n_rows, seed, "split");
    Ok(SplitIndices { train: perm[..n_train].to_vec(), test: perm[n_train..].to_vec() })
}

/// `k` folds over a seeded permutation; the first `n mod k` folds hold one
/// extra row.
pub fn kfold(n_rows: usize, k: usize, seed: u64) -> Result<Vec<SplitIndices>> {
    if k < 2 || k > n_rows {
        return Err(EbmError::Size(format!("k = {k} invalid for {n_rows} rows")));
    }
    let perm = permutation(n_rows, seed, "kfold");
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let test = perm[start..start + len].to_vec();
        let train = perm[..start].iter().chain(&perm[start + len..]).copied().collect();
        folds.push(SplitIndices { train, test });
        start += len;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ninety_ten_on_286_rows() {
        let s = split_random(286, 0.1, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (257, 29));
    }

    #[test]
    fn half_split_is_exact() {
        let s = split_random(10, 0.5, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (5, 5));
        assert_eq!(split_random(10, 0.1, 3).unwrap().train.len(), 9);
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(split_random(50, 0.2, 9).unwrap(), split_random(50, 0.2, 9).unwrap());
        assert_ne!(split_random(50, 0.2, 9).unwrap(), split_random(50, 0.2, 10).unwrap());
    }

    #[test]
    fn split_rejects_tiny_inputs() {
        assert!(matches!(split_random(1, 0.5, 0), Err(EbmError::Size(_))));
        assert!(split_random(10, 0.0, 0).is_err());
        assert!(split_random(10, 0.95, 0).is_err());
    }

    #[test]
    fn kfold_sizes() {
        let sizes: Vec<usize> = kfold(10, 5, 0).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![2; 5]);
        let sizes: Vec<usize> = kfold(7, 3, 0).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        assert!(kfold(7, 1, 0).is_err());
        assert!(kfold(7, 8, 0).is_err());
    }

    proptest! {
        #[test]
        fn kfold_partitions_rows(n in 2usize..200, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let k = 2 + ((n - 2) as f64 * k_frac) as usize;
            let folds = kfold(n, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            for f in &folds {
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                for &i in &f.test { seen[i] += 1; }
                let mut all: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let lens: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
            prop_assert_eq!(folds, kfold(n, k, seed).unwrap());
        }

        #[test]
        fn split_partitions_rows(n in 2usize..500, frac in 0.05f64..0.5, seed in any::<u64>()) {
            let s = split_random(n, frac, seed);
            if let Ok(s) = s {
                let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert!(!s.train.is_empty() && !s.test.is_empty());
            }
        }
    }
}
