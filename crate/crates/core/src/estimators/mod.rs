//! PCR, ridge, NIECE, EgReg and SIMPLS.
//!
//! The four principal-component methods are spectral filters: each one is
//! `beta = sum_k v_k w_k u_k' Y` over some subset of the right singular
//! vectors with a per-component weight `w_k`. They differ only in which
//! components are kept (by variance or by envelope score) and whether the
//! weight thresholds (`1/sigma`) or shrinks.
//!
//! | weight               | ranked by variance | ranked by envelope score |
//! |----------------------|--------------------|--------------------------|
//! | `1/sigma` (keep/drop)| PCR                | NIECE                    |
//! | shrinkage            | ridge              | EgReg                    |
//!
//! Every solver goes through the SVD, so all of them work for `p > n`.
//! Ridge and EgReg use the unscaled penalty `lambda ||.||_F^2`.

mod simpls;

pub use simpls::{simpls, SimplsPath, DEFLATION_TOL};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeScores;
use crate::error::{Error, Result};
use crate::matrix::{thin_svd, Dataset, SvdFactors, Transform, DEFAULT_RANK_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pcr,
    Ridge,
    Niece,
    EgReg,
    Simpls,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pcr,
        Method::Ridge,
        Method::Niece,
        Method::EgReg,
        Method::Simpls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pcr => "pcr",
            Method::Ridge => "ridge",
            Method::Niece => "niece",
            Method::EgReg => "egreg",
            Method::Simpls => "simpls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcr" => Ok(Method::Pcr),
            "ridge" => Ok(Method::Ridge),
            "niece" => Ok(Method::Niece),
            "egreg" => Ok(Method::EgReg),
            "simpls" | "pls" => Ok(Method::Simpls),
            other => Err(Error::Parameter(format!("unknown method '{other}'"))),
        }
    }
}

/// A method together with its tuning parameters. `d: None` means "use all
/// `r` components".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodSpec {
    Pcr { d: usize },
    Ridge { lambda: f64 },
    Niece { u: usize, d: Option<usize> },
    EgReg { d: Option<usize>, lambda: f64 },
    Simpls { d: usize },
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Pcr { .. } => Method::Pcr,
            MethodSpec::Ridge { .. } => Method::Ridge,
            MethodSpec::Niece { .. } => Method::Niece,
            MethodSpec::EgReg { .. } => Method::EgReg,
            MethodSpec::Simpls { .. } => Method::Simpls,
        }
    }

    pub fn d(&self) -> Option<usize> {
        match *self {
            MethodSpec::Pcr { d } | MethodSpec::Simpls { d } => Some(d),
            MethodSpec::Niece { d, .. } | MethodSpec::EgReg { d, .. } => d,
            MethodSpec::Ridge { .. } => None,
        }
    }

    pub fn u(&self) -> Option<usize> {
        match *self {
            MethodSpec::Niece { u, .. } => Some(u),
            _ => None,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            MethodSpec::Ridge { lambda } | MethodSpec::EgReg { lambda, .. } => Some(lambda),
            _ => None,
        }
    }
}

/// Result of fitting on model-scale (centered) data.
#[derive(Clone, Debug)]
pub struct Fit {
    pub beta: DMatrix<f64>,
    /// The spec with `d` resolved to a concrete value.
    pub spec: MethodSpec,
    /// EgReg's reduction matrix `V_(d) D_(d)^-1 Phi_(d)^(1/2)`.
    pub gamma_hat: Option<DMatrix<f64>>,
    pub scores: Option<EnvelopeScores>,
    /// SIMPLS: number of components actually extracted.
    pub components: Option<usize>,
    /// EgReg at `lambda = 0` with zero-score directions, which contribute
    /// nothing by the `0/0 := 0` convention.
    pub zero_score_limit: bool,
}

/// Centered predictors with their thin SVD; everything that does not depend
/// on the response. Reused across responses in cross-validation and
/// simulation replications.
#[derive(Clone, Debug)]
pub struct Design {
    x: DMatrix<f64>,
    svd: SvdFactors,
}

impl Design {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let svd = thin_svd(&x, DEFAULT_RANK_TOL)?;
        Ok(Design { x, svd })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn svd(&self) -> &SvdFactors {
        &self.svd
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    /// `U'Y`, the response coordinates along the normalized PCs.
    pub fn project(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.svd.u.transpose() * y
    }

    pub fn scores(&self, uty: &DMatrix<f64>, d: usize) -> EnvelopeScores {
        EnvelopeScores::from_projection(&self.svd.d, uty, self.n(), d)
    }

    fn check_d(&self, d: usize) -> Result<()> {
        let r = self.rank();
        if d == 0 || d > r {
            return Err(Error::Dimension(format!("need 1 <= d <= r = {r}, got d = {d}")));
        }
        Ok(())
    }

    /// Fits `spec` to the model-scale response `y`.
    pub fn fit(&self, y: &DMatrix<f64>, spec: &MethodSpec) -> Result<Fit> {
        if y.nrows() != self.n() {
            return Err(Error::Shape(format!(
                "response has {} rows, design has {}",
                y.nrows(),
                self.n()
            )));
        }
        let r = self.rank();
        let plain = |beta, spec| Fit {
            beta,
            spec,
            gamma_hat: None,
            scores: None,
            components: None,
            zero_score_limit: false,
        };
        match *spec {
            MethodSpec::Pcr { d } => {
                self.check_d(d)?;
                let uty = self.project(y);
                let terms = (0..d).map(|k| (k, 1.0 / self.svd.d[k]));
                Ok(plain(spectral_beta(&self.svd, &uty, terms), *spec))
            }
            MethodSpec::Ridge { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::Parameter(format!(
                        "ridge needs a positive finite lambda, got {lambda}"
                    )));
                }
                let uty = self.project(y);
                let terms = (0..r).map(|k| {
                    let s = self.svd.d[k];
                    (k, s / (s * s + lambda))
                });
                Ok(plain(spectral_beta(&self.svd, &uty, terms), *spec))
            }
            MethodSpec::Niece { u, d } => {
                let d = d.unwrap_or(r);
                self.check_d(d)?;
                if u == 0 || u > d {
                    return Err(Error::Dimension(format!(
                        "need 1 <= u <= d = {d}, got u = {u}"
                    )));
                }
                let uty = self.project(y);
                let scores = self.scores(&uty, d);
                let terms = scores.order[..u].iter().map(|&k| (k, 1.0 / self.svd.d[k]));
                let beta = spectral_beta(&self.svd, &uty, terms);
                Ok(Fit {
                    scores: Some(scores),
                    ..plain(beta, MethodSpec::Niece { u, d: Some(d) })
                })
            }
            MethodSpec::EgReg { d, lambda } => {
                let d = d.unwrap_or(r);
                self.check_d(d)?;
                if !(lambda >= 0.0) || !lambda.is_finite() {
                    return Err(Error::Parameter(format!(
                        "EgReg needs a nonnegative finite lambda, got {lambda}"
                    )));
                }
                let uty = self.project(y);
                let scores = self.scores(&uty, d);
                let mut zero_score_limit = false;
                let mut terms = Vec::with_capacity(d);
                for &k in &scores.order {
                    let phi = scores.phi[k];
                    let shrink = if phi + lambda > 0.0 {
                        phi / (phi + lambda)
                    } else {
                        zero_score_limit = true;
                        0.0
                    };
                    terms.push((k, shrink / self.svd.d[k]));
                }
                let beta = spectral_beta(&self.svd, &uty, terms.into_iter());
                let gamma_hat = reduction_matrix(&self.svd, &scores);
                Ok(Fit {
                    beta,
                    spec: MethodSpec::EgReg { d: Some(d), lambda },
                    gamma_hat: Some(gamma_hat),
                    scores: Some(scores),
                    components: None,
                    zero_score_limit,
                })
            }
            MethodSpec::Simpls { d } => {
                self.check_d(d)?;
                let path = simpls(&self.x, y, d);
                Ok(Fit {
                    components: Some(path.components()),
                    ..plain(path.beta(d), *spec)
                })
            }
        }
    }
}

/// `sum_k v_k w_k (U'Y)_k` over the given `(component, weight)` pairs.
pub fn spectral_beta(
    svd: &SvdFactors,
    uty: &DMatrix<f64>,
    terms: impl Iterator<Item = (usize, f64)>,
) -> DMatrix<f64> {
    let (p, q) = (svd.v.nrows(), uty.ncols());
    let mut beta = DMatrix::zeros(p, q);
    for (k, w) in terms {
        if w == 0.0 {
            continue;
        }
        let vk = svd.v.column(k);
        for j in 0..q {
            let c = w * uty[(k, j)];
            beta.column_mut(j).axpy(c, &vk, 1.0);
        }
    }
    beta
}

/// EgReg's `Gamma = V_(d) D_(d)^-1 Phi_(d)^(1/2)`, columns in ranked order.
pub fn reduction_matrix(svd: &SvdFactors, scores: &EnvelopeScores) -> DMatrix<f64> {
    let p = svd.v.nrows();
    let d = scores.d();
    let mut g = DMatrix::zeros(p, d);
    for (col, &k) in scores.order.iter().enumerate() {
        let scale = scores.phi[k].sqrt() / svd.d[k];
        g.set_column(col, &(svd.v.column(k) * scale));
    }
    g
}

/// A fitted regression: coefficients on the model scale plus everything
/// needed to predict from raw predictors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub beta: DMatrix<f64>,
    pub spec: MethodSpec,
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_hat: Option<DMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[serde(default)]
    pub zero_score_limit: bool,
    pub rank: usize,
}

impl FittedModel {
    pub fn method(&self) -> Method {
        self.spec.method()
    }

    pub fn p(&self) -> usize {
        self.beta.nrows()
    }

    pub fn q(&self) -> usize {
        self.beta.ncols()
    }

    fn from_fit(fit: Fit, transform: Transform, rank: usize) -> Self {
        FittedModel {
            beta: fit.beta,
            spec: fit.spec,
            transform,
            gamma_hat: fit.gamma_hat,
            components: fit.components,
            zero_score_limit: fit.zero_score_limit,
            rank,
        }
    }
}

/// Fits `spec` to `data`, centering first when the data carry no transform.
pub fn fit(data: &Dataset, spec: &MethodSpec) -> Result<FittedModel> {
    let data = data.ensure_centered()?;
    let design = Design::new(data.x().clone())?;
    let f = design.fit(data.y(), spec)?;
    Ok(FittedModel::from_fit(f, data.transform().clone(), design.rank()))
}

pub fn fit_pcr(data: &Dataset, d: usize) -> Result<FittedModel> {
    fit(data, &MethodSpec::Pcr { d })
}

pub fn fit_ridge(data: &Dataset, lambda: f64) -> Result<FittedModel> {
    fit(data, &MethodSpec::Ridge { lambda })
}

/// NIECE with `u` of the first `d` components (`None`: all `r`).
pub fn fit_niece(data: &Dataset, u: usize, d: Option<usize>) -> Result<FittedModel> {
    fit(data, &MethodSpec::Niece { u, d })
}

pub fn fit_egreg(data: &Dataset, d: Option<usize>, lambda: f64) -> Result<FittedModel> {
    fit(data, &MethodSpec::EgReg { d, lambda })
}

pub fn fit_simpls(data: &Dataset, d: usize) -> Result<FittedModel> {
    fit(data, &MethodSpec::Simpls { d })
}

/// Predictions on the original response scale for raw predictors `xnew`.
pub fn predict(model: &FittedModel, xnew: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xt = model.transform.apply_x(xnew)?;
    Ok(model.transform.invert_y(&(xt * &model.beta)))
}
