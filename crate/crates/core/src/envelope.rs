//! Envelope scores and NIECE subspace construction.
//!
//! The envelope score of a principal direction `v` is `v' B v` where `B` is
//! the (population or sample) `Sxy Syx`. Ranking directions by score instead
//! of by variance is what separates NIECE/EgReg from PCR/ridge.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sorted_eigen, SvdFactors};

const EIGEN_GAP_TOL: f64 = 1e-8;

/// Scores for the first `d` principal directions, in their original order,
/// plus the ranking permutation (0-based indices, highest score first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeScores {
    pub phi: DVector<f64>,
    pub order: Vec<usize>,
    /// Groups of directions whose scores were exactly equal; their relative
    /// order was settled by singular value and then by index.
    pub tie_breaks: Vec<Vec<usize>>,
}

impl EnvelopeScores {
    pub fn d(&self) -> usize {
        self.phi.len()
    }

    /// Scores in ranked order.
    pub fn ranked(&self) -> impl Iterator<Item = f64> + '_ {
        self.order.iter().map(move |&j| self.phi[j])
    }

    /// Builds scores from raw values, ranking them with the tie rule:
    /// higher score, then larger `sigma`, then smaller index.
    pub fn from_values(phi: DVector<f64>, sigma: &[f64]) -> Self {
        let phi = phi.map(|v| if v < 0.0 { 0.0 } else { v });
        let d = phi.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            phi[b]
                .total_cmp(&phi[a])
                .then(sigma[b].total_cmp(&sigma[a]))
                .then(a.cmp(&b))
        });
        let mut tie_breaks = Vec::new();
        let mut start = 0;
        while start < d {
            let mut end = start + 1;
            while end < d && phi[order[end]] == phi[order[start]] {
                end += 1;
            }
            if end - start > 1 {
                tie_breaks.push(order[start..end].to_vec());
            }
            start = end;
        }
        EnvelopeScores {
            phi,
            order,
            tie_breaks,
        }
    }

    /// Scores computed from `c = U'Y` for a training set of `n` rows:
    /// `phi_j = sigma_j^2 ||c_j||^2 / n^2`, identical to `||Sxy' v_j||^2`.
    pub fn from_projection(sigma: &DVector<f64>, uty: &DMatrix<f64>, n: usize, d: usize) -> Self {
        let n2 = (n as f64) * (n as f64);
        let phi = DVector::from_fn(d, |j, _| sigma[j] * sigma[j] * uty.row(j).norm_squared() / n2);
        EnvelopeScores::from_values(phi, &sigma.as_slice()[..d])
    }
}

/// `phi_j = ||Sxy' v_j||^2` for the first `d` right singular vectors.
pub fn envelope_scores(svd: &SvdFactors, sxy: &DMatrix<f64>, d: usize) -> Result<EnvelopeScores> {
    let r = svd.rank();
    if d == 0 || d > r {
        return Err(Error::Dimension(format!("need 1 <= d <= r = {r}, got d = {d}")));
    }
    if sxy.nrows() != svd.v.nrows() {
        return Err(Error::Shape(format!(
            "Sxy has {} rows, expected {}",
            sxy.nrows(),
            svd.v.nrows()
        )));
    }
    let syx_v = sxy.transpose() * svd.v.columns(0, d);
    let phi = DVector::from_iterator(d, syx_v.column_iter().map(|c| c.norm_squared()));
    Ok(EnvelopeScores::from_values(phi, &svd.d.as_slice()[..d]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisSource {
    Population,
    Sample,
}

/// Orthonormal basis of an estimated envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeBasis {
    pub basis: DMatrix<f64>,
    pub source: BasisSource,
    /// Indices (0-based, into the eigen/singular vectors) of the selected
    /// directions, in ranked order.
    pub selected: Vec<usize>,
    /// False when the eigenvalues of `M` were not distinct, in which case
    /// the eigenvectors and hence the result are not unique.
    pub unique: bool,
}

impl EnvelopeBasis {
    pub fn u(&self) -> usize {
        self.basis.ncols()
    }
}

fn gather_columns(v: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(v.nrows(), cols.len(), |i, k| v[(i, cols[k])])
}

/// Population NIECE: keeps the `u_star` eigenvectors of `m` (among the
/// leading `d`) with the largest `v' B v`.
pub fn population_niece(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: usize,
    u_star: usize,
) -> Result<EnvelopeBasis> {
    let p = m.nrows();
    if m.ncols() != p || b.shape() != (p, p) {
        return Err(Error::Shape("M and B must both be p x p".into()));
    }
    if u_star == 0 || u_star > d || d > p {
        return Err(Error::Dimension(format!(
            "need 0 < u* <= d <= p, got u* = {u_star}, d = {d}, p = {p}"
        )));
    }
    let (vals, vecs) = sorted_eigen(m);
    if !(vals[p - 1] > 0.0) {
        return Err(Error::Contract("M must be positive definite".into()));
    }
    let unique = (0..p - 1).all(|k| vals[k] - vals[k + 1] > EIGEN_GAP_TOL * vals[0]);

    let vd = vecs.columns(0, d);
    let bv = b * vd;
    let phi = DVector::from_fn(d, |j, _| vd.column(j).dot(&bv.column(j)));
    let sigma: Vec<f64> = vals.iter().take(d).copied().collect();
    let scores = EnvelopeScores::from_values(phi, &sigma);
    let selected = scores.order[..u_star].to_vec();
    Ok(EnvelopeBasis {
        basis: gather_columns(&vecs, &selected),
        source: BasisSource::Population,
        selected,
        unique,
    })
}

/// Sample NIECE basis: the right singular vectors at the top `u` ranks.
pub fn sample_niece_basis(
    svd: &SvdFactors,
    scores: &EnvelopeScores,
    u: usize,
) -> Result<EnvelopeBasis> {
    if u == 0 || u > scores.d() {
        return Err(Error::Dimension(format!(
            "need 1 <= u <= d = {}, got u = {u}",
            scores.d()
        )));
    }
    let selected = scores.order[..u].to_vec();
    Ok(EnvelopeBasis {
        basis: gather_columns(&svd.v, &selected),
        source: BasisSource::Sample,
        selected,
        unique: true,
    })
}
