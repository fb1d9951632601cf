//! Pairwise interaction detection on main-effect residuals.
//!
//! Each candidate pair is scored by how much a four-quadrant model (one cut
//! per axis, one mean per quadrant) reduces the residual sum of squares
//! relative to a single mean. Quadrant sums come from a cumulative 2-D
//! histogram, so every cut pair is scored in O(1) after an O(n + bins²) build.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{EbmError, Result};
use crate::scalar::Scalar;

/// Bin indices of one feature over the rows being scored.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedFeature {
    pub bins: Vec<usize>,
    pub bin_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionScore<T> {
    pub pair: (usize, usize),
    pub strength: T,
}

/// Cumulative (count, sum) table over the `ni × nj` bin grid of a pair.
pub(crate) struct PairHistogram<T> {
    ni: usize,
    nj: usize,
    cells_count: Vec<usize>,
    cells_sum: Vec<T>,
    cum_count: Vec<usize>,
    cum_sum: Vec<T>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct QuadrantCut<T> {
    /// Rows with bin `<= cut_i` fall on the low side of axis i.
    pub cut_i: usize,
    pub cut_j: usize,
    pub gain: T,
}

impl<T: Scalar> PairHistogram<T> {
    pub fn build<'a>(
        residuals: impl IntoIterator<Item = (T, usize, usize)> + 'a,
        ni: usize,
        nj: usize,
    ) -> Self {
        let mut cells_count = vec![0usize; ni * nj];
        let mut cells_sum = vec![T::zero(); ni * nj];
        for (r, a, b) in residuals {
            cells_count[a * nj + b] += 1;
            cells_sum[a * nj + b] += r;
        }
        let mut cum_count = vec![0usize; ni * nj];
        let mut cum_sum = vec![T::zero(); ni * nj];
        for a in 0..ni {
            let mut row_count = 0usize;
            let mut row_sum = T::zero();
            for b in 0..nj {
                row_count += cells_count[a * nj + b];
                row_sum += cells_sum[a * nj + b];
                let (up_c, up_s) = if a > 0 {
                    (cum_count[(a - 1) * nj + b], cum_sum[(a - 1) * nj + b])
                } else {
                    (0, T::zero())
                };
                cum_count[a * nj + b] = up_c + row_count;
                cum_sum[a * nj + b] = up_s + row_sum;
            }
        }
        PairHistogram { ni, nj, cells_count, cells_sum, cum_count, cum_sum }
    }

    fn cum(&self, a: usize, b: usize) -> (usize, T) {
        (self.cum_count[a * self.nj + b], self.cum_sum[a * self.nj + b])
    }

    fn total(&self) -> (usize, T) {
        self.cum(self.ni - 1, self.nj - 1)
    }

    /// `(count, sum)` of the four quadrants: low-low, low-high, high-low, high-high.
    fn quadrants(&self, ci: usize, cj: usize) -> [(usize, T); 4] {
        let (n, s) = self.total();
        let (n_ll, s_ll) = self.cum(ci, cj);
        let (n_l, s_l) = self.cum(ci, self.nj - 1);
        let (n_lo_j, s_lo_j) = self.cum(self.ni - 1, cj);
        let lh = (n_l - n_ll, s_l - s_ll);
        let hl = (n_lo_j - n_ll, s_lo_j - s_ll);
        let hh = (n + n_ll - n_l - n_lo_j, s - s_l - s_lo_j + s_ll);
        [(n_ll, s_ll), lh, hl, hh]
    }

    fn cut_candidates(bins: usize) -> std::ops::Range<usize> {
        // With a single bin the "cut" sits past the last bin: one slab.
        if bins >= 2 {
            0..bins - 1
        } else {
            0..1
        }
    }

    /// Best quadrant cut; ties keep the smallest `(cut_i, cut_j)`.
    pub fn best_cut(&self) -> QuadrantCut<T> {
        let (n, s) = self.total();
        let base = if n > 0 { s * s / T::from_usize_lossy(n) } else { T::zero() };
        let mut best = QuadrantCut { cut_i: self.ni - 1, cut_j: self.nj - 1, gain: T::zero() };
        let mut best_fit = None::<T>;
        for ci in Self::cut_candidates(self.ni) {
            for cj in Self::cut_candidates(self.nj) {
                let fit: T = self
                    .quadrants(ci, cj)
                    .iter()
                    .filter(|(c, _)| *c > 0)
                    .map(|&(c, s)| s * s / T::from_usize_lossy(c))
                    .sum();
                if best_fit.map_or(true, |b| fit > b) {
                    best_fit = Some(fit);
                    best = QuadrantCut { cut_i: ci, cut_j: cj, gain: fit - base };
                }
            }
        }
        best.gain = best.gain.max(T::zero());
        best
    }

    /// Quadrant-mean predictor over the full grid; empty quadrants take the
    /// overall mean.
    pub fn quadrant_grid(&self, cut: &QuadrantCut<T>) -> Vec<T> {
        let (n, s) = self.total();
        let overall = if n > 0 { s / T::from_usize_lossy(n) } else { T::zero() };
        let means = self.quadrants(cut.cut_i, cut.cut_j).map(|(c, s)| {
            if c > 0 {
                s / T::from_usize_lossy(c)
            } else {
                overall
            }
        });
        let mut grid = vec![T::zero(); self.ni * self.nj];
        for a in 0..self.ni {
            for b in 0..self.nj {
                let q = 2 * usize::from(a > cut.cut_i) + usize::from(b > cut.cut_j);
                grid[a * self.nj + b] = means[q];
            }
        }
        grid
    }

    #[allow(dead_code)]
    pub fn cell(&self, a: usize, b: usize) -> (usize, T) {
        (self.cells_count[a * self.nj + b], self.cells_sum[a * self.nj + b])
    }
}

/// All `(i, j)` with `i < j < n_features`.
pub fn all_pairs(n_features: usize) -> Vec<(usize, usize)> {
    (0..n_features).flat_map(|i| (i + 1..n_features).map(move |j| (i, j))).collect()
}

/// Scores every candidate pair and sorts by strength descending, ties by
/// `(i, j)` ascending.
pub fn rank_interactions<T: Scalar>(
    residuals: &[T],
    features: &[BinnedFeature],
    pairs: &[(usize, usize)],
) -> Result<Vec<InteractionScore<T>>> {
    for (f, bf) in features.iter().enumerate() {
        if bf.bins.len() != residuals.len() {
            return Err(EbmError::Size(format!(
                "feature {f} has {} rows, residuals have {}",
                bf.bins.len(),
                residuals.len()
            )));
        }
        if bf.bin_count == 0 || bf.bins.iter().any(|&b| b >= bf.bin_count) {
            return Err(EbmError::Domain(format!("feature {f} has a bin index out of range")));
        }
    }
    for &(i, j) in pairs {
        if i >= j || j >= features.len() {
            return Err(EbmError::Domain(format!("invalid candidate pair ({i}, {j})")));
        }
    }
    let mut scores: Vec<InteractionScore<T>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (fi, fj) = (&features[i], &features[j]);
            let hist = PairHistogram::build(
                residuals.iter().zip(&fi.bins).zip(&fj.bins).map(|((&r, &a), &b)| (r, a, b)),
                fi.bin_count,
                fj.bin_count,
            );
            InteractionScore { pair: (i, j), strength: hist.best_cut().gain }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.strength.partial_cmp(&a.strength).unwrap_or(Ordering::Equal).then_with(|| a.pair.cmp(&b.pair))
    });
    Ok(scores)
}
