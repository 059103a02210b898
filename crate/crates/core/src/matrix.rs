//! Dense-matrix foundation: datasets with reversible centering and
//! standardization, a deterministic thin SVD, sample cross-covariances and
//! a projection distance between subspaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative cutoff for the numerical rank of a thin SVD.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const CENTER_TOL: f64 = 1e-10;
const ORTHO_TOL: f64 = 1e-8;

/// How a dataset was preprocessed on ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Raw,
    Center,
    Standardize,
}

/// Column-wise affine map `z = (x - mean) / scale` applied to predictors and
/// responses. Kept with every dataset and fitted model so predictions can be
/// made on the original scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub scaling: Scaling,
    pub x_mean: DVector<f64>,
    pub x_scale: DVector<f64>,
    pub y_mean: DVector<f64>,
    pub y_scale: DVector<f64>,
}

impl Transform {
    pub fn identity(p: usize, q: usize) -> Self {
        Transform {
            scaling: Scaling::Raw,
            x_mean: DVector::zeros(p),
            x_scale: DVector::from_element(p, 1.0),
            y_mean: DVector::zeros(q),
            y_scale: DVector::from_element(q, 1.0),
        }
    }

    pub fn p(&self) -> usize {
        self.x_mean.len()
    }

    pub fn q(&self) -> usize {
        self.y_mean.len()
    }

    /// Maps raw predictors onto the model scale.
    pub fn apply_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::Shape(format!(
                "expected {} predictor columns, got {}",
                self.p(),
                x.ncols()
            )));
        }
        Ok(affine(x, &self.x_mean, &self.x_scale))
    }

    /// Maps raw responses onto the model scale.
    pub fn apply_y(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.q() {
            return Err(Error::Shape(format!(
                "expected {} response columns, got {}",
                self.q(),
                y.ncols()
            )));
        }
        Ok(affine(y, &self.y_mean, &self.y_scale))
    }

    /// Maps model-scale responses back to the original scale.
    pub fn invert_y(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = y.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.y_mean[j], self.y_scale[j]);
            col.apply(|v| *v = *v * s + m);
        }
        out
    }

    /// `self` followed by `next`.
    fn then(&self, next: &Transform) -> Transform {
        let compose = |m0: &DVector<f64>, s0: &DVector<f64>, m1: &DVector<f64>, s1: &DVector<f64>| {
            let mean = m0 + s0.component_mul(m1);
            let scale = s0.component_mul(s1);
            (mean, scale)
        };
        let (x_mean, x_scale) = compose(&self.x_mean, &self.x_scale, &next.x_mean, &next.x_scale);
        let (y_mean, y_scale) = compose(&self.y_mean, &self.y_scale, &next.y_mean, &next.y_scale);
        let scaling = match (self.scaling, next.scaling) {
            (Scaling::Standardize, _) | (_, Scaling::Standardize) => Scaling::Standardize,
            (Scaling::Center, _) | (_, Scaling::Center) => Scaling::Center,
            _ => Scaling::Raw,
        };
        Transform {
            scaling,
            x_mean,
            x_scale,
            y_mean,
            y_scale,
        }
    }
}

fn affine(m: &DMatrix<f64>, mean: &DVector<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let (mu, s) = (mean[j], scale[j]);
        col.apply(|v| *v = (*v - mu) / s);
    }
    out
}

/// Predictor matrix `x` (n x p) and response matrix `y` (n x q), together
/// with the transform that produced them from the raw data.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    transform: Transform,
}

impl Dataset {
    /// Wraps raw data. Requires n >= 2, p >= 1, q >= 1, matching row counts
    /// and finite entries.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let (n, p, q) = (x.nrows(), x.ncols(), y.ncols());
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 rows, got {n}")));
        }
        if p == 0 || q == 0 {
            return Err(Error::Shape("X and Y need at least one column".into()));
        }
        if y.nrows() != n {
            return Err(Error::Shape(format!(
                "X has {n} rows but Y has {}",
                y.nrows()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("data contain non-finite values".into()));
        }
        Ok(Dataset {
            x,
            y,
            transform: Transform::identity(p, q),
        })
    }

    /// Wraps data that are already on a transformed scale.
    pub fn with_transform(x: DMatrix<f64>, y: DMatrix<f64>, transform: Transform) -> Result<Self> {
        let mut data = Dataset::new(x, y)?;
        if transform.p() != data.p() || transform.q() != data.q() {
            return Err(Error::Shape("transform does not match data dimensions".into()));
        }
        data.transform = transform;
        Ok(data)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn centered(&self) -> bool {
        self.transform.scaling != Scaling::Raw
    }

    pub fn standardized(&self) -> bool {
        self.transform.scaling == Scaling::Standardize
    }

    /// Replaces the response, keeping predictors and transform. The new
    /// response is taken to be on the dataset's current scale.
    pub fn with_response(&self, y: DMatrix<f64>) -> Result<Dataset> {
        if y.nrows() != self.n() || y.ncols() != self.q() {
            return Err(Error::Shape("replacement response has the wrong shape".into()));
        }
        Ok(Dataset {
            x: self.x.clone(),
            y,
            transform: self.transform.clone(),
        })
    }

    /// Centered copy; a no-op when the data already carry a centering
    /// transform.
    pub fn ensure_centered(&self) -> Result<Dataset> {
        if self.centered() {
            Ok(self.clone())
        } else {
            center_standardize(self, Scaling::Center)
        }
    }

    /// Row subset, keeping the transform.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            transform: self.transform.clone(),
        }
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn column_sds(m: &DMatrix<f64>, means: &DVector<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(
        m.ncols(),
        m.column_iter().zip(means.iter()).map(|(c, mu)| {
            let ss: f64 = c.iter().map(|v| (v - mu) * (v - mu)).sum();
            (ss / (n - 1.0)).sqrt()
        }),
    )
}

/// Centers (and optionally scales to unit sample standard deviation, divisor
/// n - 1) every column of X and Y. The transform is composed with whatever
/// transform the input already carries.
pub fn center_standardize(raw: &Dataset, mode: Scaling) -> Result<Dataset> {
    let (p, q) = (raw.p(), raw.q());
    let x_mean = column_means(&raw.x);
    let y_mean = column_means(&raw.y);
    let (x_scale, y_scale) = match mode {
        Scaling::Raw => return Ok(raw.clone()),
        Scaling::Center => (DVector::from_element(p, 1.0), DVector::from_element(q, 1.0)),
        Scaling::Standardize => {
            let xs = column_sds(&raw.x, &x_mean);
            let ys = column_sds(&raw.y, &y_mean);
            // columns are numbered x first, then y
            for (j, s) in xs.iter().chain(ys.iter()).enumerate() {
                if !(*s > 0.0) {
                    return Err(Error::DegenerateColumn { column: j });
                }
            }
            (xs, ys)
        }
    };
    let step = Transform {
        scaling: mode,
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    };
    let x = affine(&raw.x, &step.x_mean, &step.x_scale);
    let y = affine(&raw.y, &step.y_mean, &step.y_scale);
    Ok(Dataset {
        x,
        y,
        transform: raw.transform.then(&step),
    })
}

/// Thin SVD `X = U diag(D) V'` truncated to the numerical rank.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut ud = self.u.clone();
        for (j, mut col) in ud.column_iter_mut().enumerate() {
            col *= self.d[j];
        }
        ud * self.v.transpose()
    }
}

/// Thin SVD with singular values sorted descending, truncated at
/// `rel_tol * sigma_1`, and each column of V signed so that its
/// largest-magnitude entry is positive.
pub fn thin_svd(x: &DMatrix<f64>, rel_tol: f64) -> Result<SvdFactors> {
    if !(rel_tol > 0.0) {
        return Err(Error::Parameter("rank tolerance must be positive".into()));
    }
    if x.nrows() == 0 || x.ncols() == 0 || x.iter().all(|v| *v == 0.0) {
        return Err(Error::RankZero);
    }
    let svd = x.clone().svd(true, true);
    let u_full = svd.u.ok_or_else(|| Error::Numeric("SVD did not return U".into()))?;
    let vt_full = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not return V".into()))?;
    let sv = svd.singular_values;

    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let top = sv[idx[0]];
    if !(top > 0.0) {
        return Err(Error::RankZero);
    }
    let keep: Vec<usize> = idx.into_iter().filter(|&j| sv[j] > rel_tol * top).collect();
    let r = keep.len();

    let (n, p) = x.shape();
    let mut u = DMatrix::zeros(n, r);
    let mut v = DMatrix::zeros(p, r);
    let mut d = DVector::zeros(r);
    for (k, &j) in keep.iter().enumerate() {
        let vcol = vt_full.row(j).transpose();
        let mut lead = 0usize;
        for i in 1..p {
            if vcol[i].abs() > vcol[lead].abs() {
                lead = i;
            }
        }
        let sign = if vcol[lead] < 0.0 { -1.0 } else { 1.0 };
        v.set_column(k, &(vcol * sign));
        u.set_column(k, &(u_full.column(j) * sign));
        d[k] = sv[j];
    }
    Ok(SvdFactors { u, d, v })
}

/// Sample covariance `X'X / n` and cross-covariance `X'Y / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovPair {
    pub sx: DMatrix<f64>,
    pub sxy: DMatrix<f64>,
}

fn numerically_centered(m: &DMatrix<f64>) -> bool {
    let n = m.nrows() as f64;
    m.column_iter().all(|c| {
        let scale = (c.norm_squared() / n).sqrt().max(1.0);
        (c.sum() / n).abs() <= CENTER_TOL * scale
    })
}

pub fn cross_cov(data: &Dataset) -> Result<CovPair> {
    if !numerically_centered(&data.x) || !numerically_centered(&data.y) {
        return Err(Error::Contract("cross_cov requires centered data".into()));
    }
    let n = data.n() as f64;
    let xt = data.x.transpose();
    let mut sx = &xt * &data.x / n;
    // exact symmetry
    for i in 0..sx.nrows() {
        for j in 0..i {
            let avg = 0.5 * (sx[(i, j)] + sx[(j, i)]);
            sx[(i, j)] = avg;
            sx[(j, i)] = avg;
        }
    }
    let sxy = &xt * &data.y / n;
    Ok(CovPair { sx, sxy })
}

fn check_orthonormal(a: &DMatrix<f64>, what: &str) -> Result<()> {
    let gram = a.transpose() * a;
    let err = (gram - DMatrix::identity(a.ncols(), a.ncols())).amax();
    if err > ORTHO_TOL {
        return Err(Error::Contract(format!(
            "{what} is not orthonormal (max deviation {err:.3e})"
        )));
    }
    Ok(())
}

/// `||AA' - BB'||_F` for orthonormal bases of equal dimension.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "bases have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    check_orthonormal(a, "first basis")?;
    check_orthonormal(b, "second basis")?;
    let diff = a * a.transpose() - b * b.transpose();
    Ok(diff.norm())
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and the
/// same sign convention as [`thin_svd`].
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let p = m.nrows();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut vals = DVector::zeros(p);
    let mut vecs = DMatrix::zeros(p, p);
    for (k, &j) in idx.iter().enumerate() {
        vals[k] = eig.eigenvalues[j];
        let col = eig.eigenvectors.column(j);
        let lead = col.iamax();
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        vecs.set_column(k, &(col * sign));
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn center_and_standardize_small_column() {
        let raw = Dataset::new(col(&[1.0, 2.0, 3.0]), col(&[0.0, 1.0, 5.0])).unwrap();
        let c = center_standardize(&raw, Scaling::Center).unwrap();
        assert_eq!(c.x().as_slice(), &[-1.0, 0.0, 1.0]);
        assert!(c.centered() && !c.standardized());
        let s = center_standardize(&raw, Scaling::Standardize).unwrap();
        for (a, b) in s.x().iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let ys = s.y().column(0);
        let var = ys.norm_squared() / 2.0;
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let raw = Dataset::new(x, col(&[1.0, 2.0, 4.0])).unwrap();
        assert_eq!(
            center_standardize(&raw, Scaling::Standardize).unwrap_err(),
            Error::DegenerateColumn { column: 1 }
        );
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(col(&[1.0]), col(&[1.0])).is_err());
        assert!(Dataset::new(col(&[1.0, 2.0]), col(&[1.0, 2.0, 3.0])).is_err());
        assert!(Dataset::new(col(&[1.0, f64::NAN]), col(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn transforms_compose_and_invert() {
        let x = gaussian(10, 3, 1).map(|v| 5.0 + 2.0 * v);
        let y = gaussian(10, 2, 2).map(|v| -1.0 + 3.0 * v);
        let raw = Dataset::new(x.clone(), y.clone()).unwrap();
        let c = center_standardize(&raw, Scaling::Center).unwrap();
        let s = center_standardize(&c, Scaling::Standardize).unwrap();
        let direct = center_standardize(&raw, Scaling::Standardize).unwrap();
        assert!((s.x() - direct.x()).amax() < 1e-12);
        let t = s.transform();
        assert!((t.apply_x(&x).unwrap() - s.x()).amax() < 1e-12);
        assert!((t.invert_y(s.y()) - &y).amax() < 1e-12);
    }

    #[test]
    fn svd_identity_and_single_row() {
        let f = thin_svd(&DMatrix::identity(3, 3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(f.rank(), 3);
        assert!(f.d.iter().all(|s| (s - 1.0).abs() < 1e-15));

        let x = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = thin_svd(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.d[0] - 2.0).abs() < 1e-15);
        assert!((f.v[(0, 0)] - 1.0).abs() < 1e-15 && f.v[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn svd_zero_matrix_has_rank_zero() {
        assert_eq!(
            thin_svd(&DMatrix::zeros(4, 3), DEFAULT_RANK_TOL).unwrap_err(),
            Error::RankZero
        );
    }

    #[test]
    fn svd_gaussian_round_trip() {
        for (n, p) in [(50, 20), (20, 50), (30, 30)] {
            let x = gaussian(n, p, (n * p) as u64);
            let f = thin_svd(&x, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(f.rank(), n.min(p));
            let resid = (&x - f.reconstruct()).norm();
            assert!(resid <= 1e-8 * f.d[0], "residual {resid}");
            let r = f.rank();
            assert!((f.u.transpose() * &f.u - DMatrix::identity(r, r)).amax() < 1e-10);
            assert!((f.v.transpose() * &f.v - DMatrix::identity(r, r)).amax() < 1e-10);
            for w in f.d.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
            for c in f.v.column_iter() {
                assert!(c[c.iamax()] > 0.0);
            }
        }
    }

    #[test]
    fn squared_singular_values_match_scatter_eigenvalues() {
        let x = gaussian(40, 12, 9);
        let data = center_standardize(&Dataset::new(x, gaussian(40, 1, 3)).unwrap(), Scaling::Center)
            .unwrap();
        let cov = cross_cov(&data).unwrap();
        let f = thin_svd(data.x(), DEFAULT_RANK_TOL).unwrap();
        let (vals, _) = sorted_eigen(&(cov.sx * 40.0));
        for j in 0..12 {
            let rel = (f.d[j] * f.d[j] - vals[j]).abs() / vals[j];
            assert!(rel < 1e-8);
        }
    }

    #[test]
    fn cross_cov_examples() {
        // X = I_2 stacked on a zero row, which is not centered; build the
        // centered version by hand via the transform-free constructor.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let y = col(&[1.0, 0.0, 0.0]);
        let raw = Dataset::new(x.clone(), y.clone()).unwrap();
        assert!(matches!(cross_cov(&raw), Err(Error::Contract(_))));

        // the hand computation X'Y/n = (1/3, 0) is what cross_cov evaluates
        let sxy = x.transpose() * &y / 3.0;
        assert!((sxy[(0, 0)] - 1.0 / 3.0).abs() < 1e-15 && sxy[(1, 0)] == 0.0);

        // orthogonal columns of squared norm n give Sx = I
        let xo = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let data = Dataset::new(xo, DMatrix::zeros(4, 1)).unwrap();
        let cov = cross_cov(&data).unwrap();
        assert!((cov.sx - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!(cov.sxy.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn subspace_distance_examples() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(subspace_distance(&e1, &e1).unwrap(), 0.0);
        assert!((subspace_distance(&e1, &e2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(subspace_distance(&e1, &(-&e1)).unwrap(), 0.0);
        let bad = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(subspace_distance(&bad, &e1), Err(Error::Contract(_))));
    }
}
