//! k-fold cross-validation over tuning grids.
//!
//! Folds depend only on the design, so their SVDs are computed once and
//! reused for every response. Within a fold each spectral method is a sum
//! of per-component contributions, so a whole `d` (or `u`) path costs one
//! pass over the components.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, RowDVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::generate::stream_rng;
use crate::error::{Error, Result};
use crate::estimators::{simpls, Design, Method, MethodSpec};
use crate::matrix::Dataset;

/// Validation row sets: a seeded shuffle cut into `k` contiguous blocks,
/// the first `n mod k` of them one row longer.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::Parameter(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut stream_rng(seed, u64::MAX));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(rows[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn column_means(m: &DMatrix<f64>) -> RowDVector<f64> {
    let n = m.nrows() as f64;
    RowDVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn rows_of(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn center_with(m: &DMatrix<f64>, mean: &RowDVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean;
    }
    out
}

struct Fold {
    train: Vec<usize>,
    val: Vec<usize>,
    design: Design,
    /// Validation predictors centered with the training means.
    x_val: DMatrix<f64>,
    /// `x_val V`: validation coordinates along the training PCs.
    z_val: DMatrix<f64>,
}

/// Fold designs for one predictor matrix.
pub struct CvPlan {
    n: usize,
    folds: Vec<Fold>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub spec: MethodSpec,
    /// Out-of-fold squared error summed over responses, divided by `n`.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: MethodSpec,
    pub table: Vec<CvRow>,
}

/// Per-fold response pieces.
struct FoldResponse {
    uty: DMatrix<f64>,
    y_train: DMatrix<f64>,
    y_val: DMatrix<f64>,
}

impl CvPlan {
    pub fn new(x: &DMatrix<f64>, k: usize, seed: u64) -> Result<Self> {
        let n = x.nrows();
        let mut folds = Vec::with_capacity(k);
        for val in fold_assignment(n, k, seed)? {
            let mut in_val = vec![false; n];
            for &i in &val {
                in_val[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_val[i]).collect();
            let xt = rows_of(x, &train);
            let mean = column_means(&xt);
            let design = Design::new(center_with(&xt, &mean))?;
            let x_val = center_with(&rows_of(x, &val), &mean);
            let z_val = &x_val * &design.svd().v;
            folds.push(Fold {
                train,
                val,
                design,
                x_val,
                z_val,
            });
        }
        Ok(CvPlan { n, folds })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Validation row sets in fold order.
    pub fn validation_rows(&self) -> impl Iterator<Item = &[usize]> {
        self.folds.iter().map(|f| f.val.as_slice())
    }

    fn split(&self, fold: &Fold, y: &DMatrix<f64>) -> FoldResponse {
        let yt = rows_of(y, &fold.train);
        let mean = column_means(&yt);
        let y_train = center_with(&yt, &mean);
        FoldResponse {
            uty: fold.design.project(&y_train),
            y_val: center_with(&rows_of(y, &fold.val), &mean),
            y_train,
        }
    }

    /// CV score of every spec in `grid` (all of the same method).
    pub fn scores(&self, y: &DMatrix<f64>, grid: &[MethodSpec]) -> Result<Vec<f64>> {
        if y.nrows() != self.n {
            return Err(Error::Shape(format!(
                "response has {} rows, plan was built for {}",
                y.nrows(),
                self.n
            )));
        }
        let Some(first) = grid.first() else {
            return Err(Error::Parameter("tuning grid is empty".into()));
        };
        let method = first.method();
        if grid.iter().any(|s| s.method() != method) {
            return Err(Error::Parameter("tuning grid mixes methods".into()));
        }
        validate_grid(grid)?;
        let mut total = vec![0.0; grid.len()];
        for fold in &self.folds {
            let resp = self.split(fold, y);
            let sse = fold_sse(fold, &resp, grid)?;
            for (t, s) in total.iter_mut().zip(sse) {
                *t += s;
            }
        }
        Ok(total.into_iter().map(|t| t / self.n as f64).collect())
    }

    pub fn select(&self, y: &DMatrix<f64>, grid: &[MethodSpec]) -> Result<CvResult> {
        let scores = self.scores(y, grid)?;
        let mut best = 0;
        for i in 1..grid.len() {
            let better = scores[i] < scores[best]
                || (scores[i] == scores[best] && tie_key(&grid[i]) < tie_key(&grid[best]));
            if better {
                best = i;
            }
        }
        Ok(CvResult {
            best: grid[best],
            table: grid
                .iter()
                .zip(scores)
                .map(|(spec, score)| CvRow { spec: *spec, score })
                .collect(),
        })
    }
}

fn validate_grid(grid: &[MethodSpec]) -> Result<()> {
    for spec in grid {
        let bad_int = |v: Option<usize>| v == Some(0);
        if bad_int(spec.d()) || bad_int(spec.u()) {
            return Err(Error::Parameter(format!("grid point {spec:?} has a zero dimension")));
        }
        if let Some(l) = spec.lambda() {
            let ok = match spec.method() {
                Method::Ridge => l > 0.0 && l.is_finite(),
                _ => l >= 0.0 && l.is_finite(),
            };
            if !ok {
                return Err(Error::Parameter(format!("grid point {spec:?} has an invalid lambda")));
            }
        }
        if let MethodSpec::Niece { u, d: Some(d) } = *spec {
            if u > d {
                return Err(Error::Parameter(format!("grid point {spec:?} has u > d")));
            }
        }
    }
    Ok(())
}

/// Smaller dimension first, then larger penalty. `None` means "all
/// components" and sorts last.
fn tie_key(spec: &MethodSpec) -> (usize, usize, std::cmp::Reverse<u64>) {
    let dim = |v: Option<usize>| v.unwrap_or(usize::MAX);
    let lam = spec.lambda().map_or(0, f64::to_bits);
    match *spec {
        MethodSpec::Niece { u, d } => (u, dim(d), std::cmp::Reverse(lam)),
        _ => (dim(spec.d()), 0, std::cmp::Reverse(lam)),
    }
}

/// Squared validation error after adding each component of `order` in
/// turn; `out[j]` uses the first `j` components.
fn prefix_sse(
    fold: &Fold,
    resp: &FoldResponse,
    order: &[usize],
    weight: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let mut resid = resp.y_val.clone();
    let mut out = Vec::with_capacity(order.len() + 1);
    out.push(resid.norm_squared());
    for &k in order {
        let w = weight(k);
        if w != 0.0 {
            let z = fold.z_val.column(k);
            for (c, mut col) in resid.column_iter_mut().enumerate() {
                col.axpy(-w * resp.uty[(k, c)], &z, 1.0);
            }
        }
        out.push(resid.norm_squared());
    }
    out
}

fn fold_sse(fold: &Fold, resp: &FoldResponse, grid: &[MethodSpec]) -> Result<Vec<f64>> {
    let design = &fold.design;
    let r = design.rank();
    let sigma = &design.svd().d;
    let clamp_d = |d: Option<usize>| d.map_or(r, |d| d.min(r));
    let variance_order: Vec<usize> = (0..r).collect();
    let mut out = Vec::with_capacity(grid.len());

    match grid[0].method() {
        Method::Pcr => {
            let path = prefix_sse(fold, resp, &variance_order, |k| 1.0 / sigma[k]);
            out.extend(grid.iter().map(|s| path[clamp_d(s.d())]));
        }
        Method::Ridge => {
            let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
            for s in grid {
                let lam = s.lambda().unwrap_or_default();
                let v = *cache.entry(lam.to_bits()).or_insert_with(|| {
                    let path = prefix_sse(fold, resp, &variance_order, |k| {
                        sigma[k] / (sigma[k] * sigma[k] + lam)
                    });
                    path[r]
                });
                out.push(v);
            }
        }
        Method::EgReg => {
            let scores = design.scores(&resp.uty, r);
            let mut cache: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for s in grid {
                let lam = s.lambda().unwrap_or_default();
                let path = cache.entry(lam.to_bits()).or_insert_with(|| {
                    prefix_sse(fold, resp, &variance_order, |k| {
                        let phi = scores.phi[k];
                        if phi + lam == 0.0 {
                            0.0
                        } else {
                            phi / (phi + lam) / sigma[k]
                        }
                    })
                });
                out.push(path[clamp_d(s.d())]);
            }
        }
        Method::Niece => {
            let mut cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for s in grid {
                let d = clamp_d(s.d());
                let u = s.u().unwrap_or(d).min(d);
                let path = cache.entry(d).or_insert_with(|| {
                    let order = design.scores(&resp.uty, d).order;
                    prefix_sse(fold, resp, &order, |k| 1.0 / sigma[k])
                });
                out.push(path[u]);
            }
        }
        Method::Simpls => {
            let max_d = grid.iter().filter_map(|s| s.d()).max().unwrap_or(1);
            let path = simpls(design.x(), &resp.y_train, max_d);
            let mut resid = resp.y_val.clone();
            let mut sse = vec![resid.norm_squared()];
            for a in 0..path.components() {
                let t = &fold.x_val * path.weights.column(a);
                resid -= t * path.y_loadings.column(a).transpose();
                sse.push(resid.norm_squared());
            }
            let last = sse.len() - 1;
            out.extend(grid.iter().map(|s| sse[s.d().unwrap_or(last).min(last)]));
        }
    }
    Ok(out)
}

/// Cross-validates `grid` on `data` and returns the best spec with the full
/// score table.
pub fn kfold_cv(
    data: &Dataset,
    method: Method,
    grid: &[MethodSpec],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Parameter("tuning grid is empty".into()));
    }
    if let Some(s) = grid.iter().find(|s| s.method() != method) {
        return Err(Error::Parameter(format!(
            "grid point {s:?} does not belong to method {method}"
        )));
    }
    let plan = CvPlan::new(data.x(), k, seed)?;
    plan.select(data.y(), grid)
}
