//! Reference learners: ridge regression and a CART regression tree.

use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset, FeatureKind, FeatureValue};
use crate::error::{EbmError, Result};
use crate::model::Regressor;
use crate::scalar::Scalar;

fn check_row<T>(row: &[FeatureValue<T>], kinds: &[FeatureKind]) -> Result<()> {
    if row.len() != kinds.len() {
        return Err(EbmError::Input(format!("row has {} values, model expects {}", row.len(), kinds.len())));
    }
    for (i, (v, k)) in row.iter().zip(kinds).enumerate() {
        match (v, k) {
            (FeatureValue::Numeric(_), FeatureKind::Numeric) => {}
            (FeatureValue::Code(c), FeatureKind::Categorical { cardinality }) if c < cardinality => {}
            _ => return Err(EbmError::Input(format!("value {i} does not match the feature type"))),
        }
    }
    Ok(())
}

fn kinds_of<T: Scalar>(ds: &Dataset<T>) -> Vec<FeatureKind> {
    ds.schema().features().iter().map(|f| f.kind.clone()).collect()
}

/// One column of the ridge design matrix. Categorical features get one
/// dummy per level except the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignColumn {
    pub feature: usize,
    pub level: Option<usize>,
    pub name: String,
}

/// Linear model `b + Σ w_j x_j` fit by penalized least squares. The
/// intercept is not penalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel<T> {
    pub lambda: f64,
    pub standardize: bool,
    pub kinds: Vec<FeatureKind>,
    pub columns: Vec<DesignColumn>,
    pub weights: Vec<T>,
    pub intercept: T,
}

fn design_columns<T: Scalar>(ds: &Dataset<T>) -> Vec<DesignColumn> {
    let mut cols = Vec::new();
    for (f, feat) in ds.schema().features().iter().enumerate() {
        match feat.kind {
            FeatureKind::Numeric => cols.push(DesignColumn { feature: f, level: None, name: feat.name.clone() }),
            FeatureKind::Categorical { cardinality } => {
                for level in 1..cardinality {
                    let label = feat.levels.get(level).cloned().unwrap_or_else(|| level.to_string());
                    cols.push(DesignColumn { feature: f, level: Some(level), name: format!("{}={label}", feat.name) });
                }
            }
        }
    }
    cols
}

fn design_value<T: Scalar>(col: &DesignColumn, v: &FeatureValue<T>) -> T {
    match (col.level, v) {
        (None, FeatureValue::Numeric(x)) => *x,
        (Some(l), FeatureValue::Code(c)) => {
            if *c == l {
                T::one()
            } else {
                T::zero()
            }
        }
        _ => T::zero(),
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, p×p).
/// Returns `None` when a pivot collapses relative to the largest diagonal.
fn cholesky_solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, p: usize) -> Option<Vec<T>> {
    let max_diag = (0..p).map(|i| a[i * p + i]).fold(T::zero(), T::max);
    let tol = max_diag * T::epsilon() * T::from_usize_lossy(p.max(1) * 16);
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tol) {
            return None;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Some(b)
}

impl<T: Scalar> RidgeModel<T> {
    /// Fits on centered (and optionally unit-variance) design columns, then
    /// maps the weights back to raw units.
    pub fn fit(ds: &Dataset<T>, lambda: f64, standardize: bool) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(EbmError::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let n = ds.n_rows();
        if n < 2 {
            return Err(EbmError::Size(format!("ridge needs at least 2 rows, got {n}")));
        }
        let columns = design_columns(ds);
        let p = columns.len();
        let nt = T::from_usize_lossy(n);
        let x: Vec<Vec<T>> = columns
            .iter()
            .map(|c| match ds.column(c.feature) {
                Column::Numeric(v) => v.clone(),
                Column::Categorical(codes) => {
                    codes.iter().map(|&k| if Some(k) == c.level { T::one() } else { T::zero() }).collect()
                }
            })
            .collect();
        let means: Vec<T> = x.iter().map(|col| col.iter().copied().sum::<T>() / nt).collect();
        let scales: Vec<T> = x
            .iter()
            .zip(&means)
            .map(|(col, &m)| {
                if !standardize {
                    return T::one();
                }
                let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nt;
                if var > T::zero() {
                    var.sqrt()
                } else {
                    T::one()
                }
            })
            .collect();
        let z: Vec<Vec<T>> = x
            .iter()
            .zip(means.iter().zip(&scales))
            .map(|(col, (&m, &s))| col.iter().map(|&v| (v - m) / s).collect())
            .collect();
        let y = ds.target();
        let ybar = y.iter().copied().sum::<T>() / nt;
        let yc: Vec<T> = y.iter().map(|&v| v - ybar).collect();

        let mut gram = vec![T::zero(); p * p];
        for i in 0..p {
            for j in 0..=i {
                let s: T = z[i].iter().zip(&z[j]).map(|(&a, &b)| a * b).sum();
                gram[i * p + j] = s;
                gram[j * p + i] = s;
            }
            gram[i * p + i] += T::lit(lambda);
        }
        let rhs: Vec<T> = z.iter().map(|col| col.iter().zip(&yc).map(|(&a, &b)| a * b).sum()).collect();
        let beta = cholesky_solve(gram, rhs, p).ok_or_else(|| {
            EbmError::Singular(if lambda == 0.0 {
                "design matrix is rank deficient; use lambda > 0".into()
            } else {
                "regularized system is not positive definite".into()
            })
        })?;
        let weights: Vec<T> = beta.iter().zip(&scales).map(|(&b, &s)| b / s).collect();
        let intercept = ybar - weights.iter().zip(&means).map(|(&w, &m)| w * m).sum::<T>();
        Ok(RidgeModel { lambda, standardize, kinds: kinds_of(ds), columns, weights, intercept })
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("ridge model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(text).map_err(|e| EbmError::Malformed(e.to_string()))
    }
}

impl<T: Scalar> Regressor<T> for RidgeModel<T> {
    fn predict_row(&self, row: &[FeatureValue<T>]) -> Result<T> {
        check_row(row, &self.kinds)?;
        let mut acc = self.intercept;
        for (c, &w) in self.columns.iter().zip(&self.weights) {
            acc += w * design_value(c, &row[c.feature]);
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<T> {
    Leaf { value: T, n: usize },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: T, left: usize, right: usize },
}

/// CART regression tree on raw feature values; category codes are treated
/// as ordered numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel<T> {
    /// `usize::MAX` grows until leaves are pure or too small.
    pub max_depth: usize,
    pub min_leaf_size: usize,
    pub kinds: Vec<FeatureKind>,
    pub nodes: Vec<TreeNode<T>>,
}

struct TreeBuilder<'a, T> {
    x: &'a [Vec<T>],
    y: &'a [T],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    fn best_split(&self, rows: &[usize]) -> Option<(usize, T, T)> {
        let n = rows.len();
        let total: T = rows.iter().map(|&r| self.y[r]).sum();
        let base = total * total / T::from_usize_lossy(n);
        let mut best: Option<(usize, T, T)> = None;
        let mut order = rows.to_vec();
        for (f, col) in self.x.iter().enumerate() {
            order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
            let mut left = T::zero();
            for i in 0..n - 1 {
                left += self.y[order[i]];
                let (nl, nr) = (i + 1, n - i - 1);
                let (lo, hi) = (col[order[i]], col[order[i + 1]]);
                if lo == hi || nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let right = total - left;
                let gain =
                    left * left / T::from_usize_lossy(nl) + right * right / T::from_usize_lossy(nr) - base;
                if gain > T::zero() && best.is_none_or(|(_, _, g)| gain > g) {
                    let mid = lo + (hi - lo) / T::lit(2.0);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let value = rows.iter().map(|&r| self.y[r]).sum::<T>() / T::from_usize_lossy(rows.len());
        self.nodes.push(TreeNode::Leaf { value, n: rows.len() });
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[feature][i] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
        id
    }
}

impl<T: Scalar> TreeModel<T> {
    pub fn fit(ds: &Dataset<T>, max_depth: usize, min_leaf_size: usize) -> Result<Self> {
        if min_leaf_size < 1 {
            return Err(EbmError::Config("min_leaf_size must be >= 1".into()));
        }
        if ds.n_rows() == 0 {
            return Err(EbmError::Size("tree needs at least one row".into()));
        }
        let x: Vec<Vec<T>> = (0..ds.n_features()).map(|f| ds.numeric_column(f)).collect();
        let mut b = TreeBuilder { x: &x, y: ds.target(), max_depth, min_leaf: min_leaf_size, nodes: Vec::new() };
        b.grow((0..ds.n_rows()).collect(), 0);
        Ok(TreeModel { max_depth, min_leaf_size, kinds: kinds_of(ds), nodes: b.nodes })
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[TreeNode<T>], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl<T: Scalar> Regressor<T> for TreeModel<T> {
    fn predict_row(&self, row: &[FeatureValue<T>]) -> Result<T> {
        check_row(row, &self.kinds)?;
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value, .. } => return Ok(*value),
                TreeNode::Split { feature, threshold, left, right } => {
                    let v = match row[*feature] {
                        FeatureValue::Numeric(v) => v,
                        FeatureValue::Code(c) => T::from_usize_lossy(c),
                    };
                    i = if v <= *threshold { *left } else { *right };
                }
            }
        }
    }
}
