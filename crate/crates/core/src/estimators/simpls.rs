//! SIMPLS partial least squares (de Jong's algorithm).
//!
//! Weight vectors are successive dominant left singular vectors of the
//! cross-product `S = X'Y`, with `S` deflated against the orthonormalized
//! loadings after every component.

use nalgebra::{DMatrix, DVector};

/// Relative size of `S` below which extraction stops.
pub const DEFLATION_TOL: f64 = 1e-12;

/// Weights `r_a` (scaled so that the scores `X r_a` have unit norm) and
/// response loadings `q_a` for every extracted component. The coefficient
/// matrix with `k` components is `R[:, ..k] Q[:, ..k]'`.
#[derive(Clone, Debug)]
pub struct SimplsPath {
    pub weights: DMatrix<f64>,
    pub y_loadings: DMatrix<f64>,
}

impl SimplsPath {
    pub fn components(&self) -> usize {
        self.weights.ncols()
    }

    /// Coefficients using the first `k` components (clamped to the number
    /// extracted).
    pub fn beta(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.components());
        let p = self.weights.nrows();
        let q = self.y_loadings.nrows();
        if k == 0 {
            return DMatrix::zeros(p, q);
        }
        self.weights.columns(0, k) * self.y_loadings.columns(0, k).transpose()
    }
}

fn dominant_direction(s: &DMatrix<f64>) -> DVector<f64> {
    if s.ncols() == 1 {
        return s.column(0).into_owned();
    }
    let sts = s.transpose() * s;
    let eig = sts.symmetric_eigen();
    let top = eig.eigenvalues.imax();
    s * eig.eigenvectors.column(top)
}

/// Runs up to `max_components` SIMPLS steps on centered `x` (n x p) and `y`
/// (n x q). Stops early when the deflated cross-product vanishes.
pub fn simpls(x: &DMatrix<f64>, y: &DMatrix<f64>, max_components: usize) -> SimplsPath {
    let (p, q) = (x.ncols(), y.ncols());
    let mut s = x.transpose() * y;
    let s0 = s.norm();
    let mut weights: Vec<DVector<f64>> = Vec::new();
    let mut y_loadings: Vec<DVector<f64>> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();

    for _ in 0..max_components {
        if s0 == 0.0 || s.norm() <= DEFLATION_TOL * s0 {
            break;
        }
        let mut r = dominant_direction(&s);
        let mut t = x * &r;
        let tn = t.norm();
        if !(tn > 0.0) {
            break;
        }
        t /= tn;
        r /= tn;
        let pl = x.transpose() * &t;
        let ql = y.transpose() * &t;

        let mut v = pl;
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let vn = v.norm();
        if !(vn > 0.0) {
            break;
        }
        v /= vn;
        let vts = v.transpose() * &s;
        s -= &v * vts;

        weights.push(r);
        y_loadings.push(ql);
        basis.push(v);
    }

    let k = weights.len();
    SimplsPath {
        weights: if k == 0 {
            DMatrix::zeros(p, 0)
        } else {
            DMatrix::from_columns(&weights)
        },
        y_loadings: if k == 0 {
            DMatrix::zeros(q, 0)
        } else {
            DMatrix::from_columns(&y_loadings)
        },
    }
}
