//! Finite-sample prediction risk, conditional on the design and on the
//! envelope scores.
//!
//! Risks are `E ||x_new'(beta_hat - target)||^2` with `x_new ~ (0, Sigma_x)`.
//! The reducible part measures error against `P_{V_d} beta*`, the
//! irreducible part is the error of that projection itself. Scores are
//! treated as fixed (estimated from an independent copy of the response),
//! so only the noise `E` is random.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeScores;
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::matrix::SvdFactors;

/// True model `y' = x' beta* + eps'` with `Var(x) = Sigma_x`,
/// `Var(eps) = Sigma_eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub beta_star: DMatrix<f64>,
    pub sigma_x: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
}

fn check_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{what} must be square")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(Error::Contract(format!("{what} is not symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::Contract(format!("{what} is not positive definite")));
    }
    Ok(())
}

impl TruthSpec {
    pub fn new(
        beta_star: DMatrix<f64>,
        sigma_x: DMatrix<f64>,
        sigma_eps: DMatrix<f64>,
    ) -> Result<Self> {
        check_pd(&sigma_x, "Sigma_x")?;
        check_pd(&sigma_eps, "Sigma_eps")?;
        if sigma_x.nrows() != beta_star.nrows() || sigma_eps.nrows() != beta_star.ncols() {
            return Err(Error::Shape(format!(
                "beta* is {:?} but Sigma_x is {:?} and Sigma_eps is {:?}",
                beta_star.shape(),
                sigma_x.shape(),
                sigma_eps.shape()
            )));
        }
        Ok(TruthSpec {
            beta_star,
            sigma_x,
            sigma_eps,
        })
    }

    /// Builds `Sigma_x = V diag(eigenvalues) V'` from an orthogonal `V`.
    /// Positive definiteness is checked on the eigenvalues themselves,
    /// which stays meaningful when they span many orders of magnitude and a
    /// numerical Cholesky of the product would fail.
    pub fn from_spectrum(
        beta_star: DMatrix<f64>,
        v: &DMatrix<f64>,
        eigenvalues: &nalgebra::DVector<f64>,
        sigma_eps: DMatrix<f64>,
    ) -> Result<Self> {
        let p = eigenvalues.len();
        if v.shape() != (p, p) {
            return Err(Error::Shape("V must be p x p".into()));
        }
        if (v.transpose() * v - DMatrix::identity(p, p)).amax() > 1e-8 {
            return Err(Error::Contract("V is not orthogonal".into()));
        }
        if eigenvalues.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Contract("Sigma_x eigenvalues must be positive".into()));
        }
        check_pd(&sigma_eps, "Sigma_eps")?;
        if beta_star.nrows() != p || sigma_eps.nrows() != beta_star.ncols() {
            return Err(Error::Shape("beta* does not match the covariances".into()));
        }
        let sigma_x = v * DMatrix::from_diagonal(eigenvalues) * v.transpose();
        let sigma_x = (&sigma_x + sigma_x.transpose()) * 0.5;
        Ok(TruthSpec {
            beta_star,
            sigma_x,
            sigma_eps,
        })
    }

    pub fn p(&self) -> usize {
        self.beta_star.nrows()
    }

    pub fn q(&self) -> usize {
        self.beta_star.ncols()
    }

    /// `tr{(b - beta*)' Sigma_x (b - beta*)}`: the prediction loss of one
    /// coefficient estimate.
    pub fn loss(&self, beta_hat: &DMatrix<f64>) -> f64 {
        quad_trace(&(beta_hat - &self.beta_star), &self.sigma_x)
    }
}

/// `tr(M' S M)`.
pub(crate) fn quad_trace(m: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    (s * m).component_mul(m).sum()
}

/// Bias-variance split of a conditional prediction risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub method: Method,
    pub bias_sq: f64,
    pub variance: f64,
    pub reducible: f64,
    pub irreducible: f64,
}

impl RiskReport {
    fn new(method: Method, bias_sq: f64, variance: f64, irreducible: f64) -> Self {
        let clamp = |v: f64| if v < 0.0 && v > -1e-12 { 0.0 } else { v };
        let (bias_sq, variance) = (clamp(bias_sq), clamp(variance));
        RiskReport {
            method,
            bias_sq,
            variance,
            reducible: bias_sq + variance,
            irreducible: clamp(irreducible),
        }
    }

    /// Reducible plus irreducible.
    pub fn total(&self) -> f64 {
        self.reducible + self.irreducible
    }
}

fn check_inputs(svd: &SvdFactors, scores: &EnvelopeScores, truth: &TruthSpec, d: usize) -> Result<()> {
    if svd.v.nrows() != truth.p() {
        return Err(Error::Shape(format!(
            "design has p = {} but truth has p = {}",
            svd.v.nrows(),
            truth.p()
        )));
    }
    if d == 0 || d > scores.d() || d > svd.rank() {
        return Err(Error::Dimension(format!(
            "need 1 <= d <= min(r, scored directions) = {}, got {d}",
            scores.d().min(svd.rank())
        )));
    }
    Ok(())
}

/// Ranking restricted to the first `d` principal directions.
fn ranked_within(scores: &EnvelopeScores, d: usize) -> Vec<usize> {
    scores.order.iter().copied().filter(|&k| k < d).collect()
}

/// `sum_k w_k^2 v_k' Sigma_x v_k` over the given components.
fn weighted_variance_trace(svd: &SvdFactors, sigma_x: &DMatrix<f64>, terms: &[(usize, f64)]) -> f64 {
    terms
        .iter()
        .map(|&(k, w)| {
            let v = svd.v.column(k);
            w * w * (sigma_x * v).dot(&v)
        })
        .sum()
}

/// `P beta*` for the projector onto the listed right singular vectors,
/// each scaled by a per-component factor.
fn scaled_projection(svd: &SvdFactors, beta: &DMatrix<f64>, terms: &[(usize, f64)]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(beta.nrows(), beta.ncols());
    for &(k, s) in terms {
        let v = svd.v.column(k);
        let coef = v.transpose() * beta;
        out += v * coef * s;
    }
    out
}

/// Irreducible risk `tr{(Q beta*)' Sigma_x (Q beta*)}` with
/// `Q = I - V_d V_d'`.
pub fn irreducible_risk(svd: &SvdFactors, truth: &TruthSpec, d: usize) -> Result<f64> {
    if svd.v.nrows() != truth.p() {
        return Err(Error::Shape("design and truth disagree on p".into()));
    }
    if d > svd.rank() {
        return Err(Error::Dimension(format!("d = {d} exceeds rank {}", svd.rank())));
    }
    let terms: Vec<(usize, f64)> = (0..d).map(|k| (k, 1.0)).collect();
    let resid = &truth.beta_star - scaled_projection(svd, &truth.beta_star, &terms);
    Ok(quad_trace(&resid, &truth.sigma_x).max(0.0))
}

/// Conditional reducible risk of EgReg with `d` components and penalty
/// `lambda > 0`.
pub fn reducible_risk_egreg(
    svd: &SvdFactors,
    scores: &EnvelopeScores,
    truth: &TruthSpec,
    d: usize,
    lambda: f64,
) -> Result<RiskReport> {
    check_inputs(svd, scores, truth, d)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!(
            "lambda must be positive (use the NIECE risk for the lambda -> 0 limit), got {lambda}"
        )));
    }
    let ranked = ranked_within(scores, d);
    let var_terms: Vec<(usize, f64)> = ranked
        .iter()
        .map(|&k| {
            let phi = scores.phi[k];
            (k, phi / (svd.d[k] * (phi + lambda)))
        })
        .collect();
    let variance = truth.sigma_eps.trace() * weighted_variance_trace(svd, &truth.sigma_x, &var_terms);

    let bias_terms: Vec<(usize, f64)> = ranked
        .iter()
        .map(|&k| (k, lambda / (scores.phi[k] + lambda)))
        .collect();
    let bias = scaled_projection(svd, &truth.beta_star, &bias_terms);
    let bias_sq = quad_trace(&bias, &truth.sigma_x);

    let irreducible = irreducible_risk(svd, truth, d)?;
    Ok(RiskReport::new(Method::EgReg, bias_sq, variance, irreducible))
}

/// Conditional reducible risk of NIECE keeping the top `u` of the first
/// `d` components.
pub fn reducible_risk_niece(
    svd: &SvdFactors,
    scores: &EnvelopeScores,
    truth: &TruthSpec,
    u: usize,
    d: usize,
) -> Result<RiskReport> {
    check_inputs(svd, scores, truth, d)?;
    if u == 0 || u > d {
        return Err(Error::Dimension(format!("need 1 <= u <= d = {d}, got {u}")));
    }
    let ranked = ranked_within(scores, d);
    let var_terms: Vec<(usize, f64)> = ranked[..u].iter().map(|&k| (k, 1.0 / svd.d[k])).collect();
    let variance = truth.sigma_eps.trace() * weighted_variance_trace(svd, &truth.sigma_x, &var_terms);

    let bias_sq = if u == d {
        0.0
    } else {
        let dropped: Vec<(usize, f64)> = ranked[u..].iter().map(|&k| (k, 1.0)).collect();
        quad_trace(&scaled_projection(svd, &truth.beta_star, &dropped), &truth.sigma_x)
    };
    let irreducible = irreducible_risk(svd, truth, d)?;
    Ok(RiskReport::new(Method::Niece, bias_sq, variance, irreducible))
}

/// Penalty bound below which EgReg(d, lambda) has strictly smaller
/// reducible risk than NIECE(u = d).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaThreshold {
    /// `tr{Sigma_eps} / (sigma_1(beta* beta*') sigma_1(Phi_d^-1 D_d^2))`;
    /// `f64::INFINITY` when `beta* = 0`.
    pub value: f64,
    /// Directions with zero score that were left out of the
    /// `Phi_d^-1 D_d^2` factor.
    pub excluded_zero_scores: Vec<usize>,
    pub null_beta: bool,
}

pub fn lambda_guarantee_threshold(
    svd: &SvdFactors,
    scores: &EnvelopeScores,
    truth: &TruthSpec,
    d: usize,
) -> Result<LambdaThreshold> {
    check_inputs(svd, scores, truth, d)?;
    let mut excluded = Vec::new();
    let mut ratio_max: f64 = 0.0;
    for k in 0..d {
        let phi = scores.phi[k];
        if phi > 0.0 {
            ratio_max = ratio_max.max(svd.d[k] * svd.d[k] / phi);
        } else {
            excluded.push(k);
        }
    }
    let bbt = &truth.beta_star * truth.beta_star.transpose();
    let top = spectral_radius_psd(&bbt);
    if top == 0.0 {
        return Ok(LambdaThreshold {
            value: f64::INFINITY,
            excluded_zero_scores: excluded,
            null_beta: true,
        });
    }
    if ratio_max == 0.0 {
        return Err(Error::Contract(
            "every envelope score among the first d directions is zero".into(),
        ));
    }
    Ok(LambdaThreshold {
        value: truth.sigma_eps.trace() / (top * ratio_max),
        excluded_zero_scores: excluded,
        null_beta: false,
    })
}

fn spectral_radius_psd(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(0.0, f64::max)
}

/// Monte Carlo risk estimate `(1/R) sum_i tr{(b_i - beta*)' Sigma_x (b_i - beta*)}`.
pub fn empirical_risk(beta_hats: &[DMatrix<f64>], truth: &TruthSpec) -> Result<f64> {
    if beta_hats.is_empty() {
        return Err(Error::Parameter("empirical risk needs at least one replication".into()));
    }
    let mut total = 0.0;
    for b in beta_hats {
        if b.shape() != truth.beta_star.shape() {
            return Err(Error::Shape(format!(
                "estimate is {:?}, truth is {:?}",
                b.shape(),
                truth.beta_star.shape()
            )));
        }
        total += truth.loss(b);
    }
    Ok(total / beta_hats.len() as f64)
}

/// Mean and Monte Carlo standard error of per-replication losses.
pub fn mean_and_se(losses: &[f64]) -> (f64, f64) {
    let r = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / r;
    if losses.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}
