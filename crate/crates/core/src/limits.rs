//! Limiting prediction risks when `u*/n -> gamma` with isotropic material
//! predictors (`Phi = D^2 = I`).
//!
//! In this regime the penalty is `n * lambda` (the per-observation scale),
//! unlike the finite-sample estimators which use the raw `lambda`.
//! Everything here is driven by the Marchenko-Pastur Stieltjes transform
//! `m(z) = lim (1/u) tr (S - zI)^-1`, evaluated on the negative real axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the band around `gamma = 1` where the NIECE limit is
/// treated as divergent.
pub const SINGULARITY_BAND: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConfig {
    pub gamma: f64,
    /// `c^2 = tr(Gamma' beta* beta*' Gamma)`, the signal strength.
    pub c_sq: f64,
    pub tr_sigma_eps: f64,
}

impl LimitConfig {
    pub fn new(gamma: f64, c_sq: f64, tr_sigma_eps: f64) -> Result<Self> {
        let cfg = LimitConfig { gamma, c_sq, tr_sigma_eps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("c_sq", self.c_sq),
            ("tr_sigma_eps", self.tr_sigma_eps),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        LimitConfig { gamma, ..*self }
    }
}

fn check_domain(z: f64, gamma: f64) -> Result<()> {
    if !(z < 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("need z < 0, got z = {z}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("need gamma > 0, got {gamma}")));
    }
    Ok(())
}

/// `(a, s)` with `a = 1 - gamma - z` and `s` the principal root of the
/// discriminant.
fn parts(z: f64, gamma: f64) -> (f64, f64) {
    let a = 1.0 - gamma - z;
    let mut disc = a * a - 4.0 * gamma * z;
    if disc < 0.0 && disc > -1e-14 {
        disc = 0.0;
    }
    (a, disc.sqrt())
}

fn m_from_parts(z: f64, gamma: f64, a: f64, s: f64) -> f64 {
    // (a - s) / (2 gamma z) cancels badly when a > 0; rationalize there.
    if a >= 0.0 {
        2.0 / (a + s)
    } else {
        (a - s) / (2.0 * gamma * z)
    }
}

/// Stieltjes transform of the Marchenko-Pastur law with ratio `gamma`.
pub fn stieltjes_m(z: f64, gamma: f64) -> Result<f64> {
    check_domain(z, gamma)?;
    let (a, s) = parts(z, gamma);
    Ok(m_from_parts(z, gamma, a, s))
}

/// `dm/dz`. Differentiating `gamma z m^2 + (z + gamma - 1) m + 1 = 0`
/// gives `m' = m (gamma m + 1) / s` on the branch we use.
pub fn stieltjes_m_prime(z: f64, gamma: f64) -> Result<f64> {
    check_domain(z, gamma)?;
    let (a, s) = parts(z, gamma);
    let m = m_from_parts(z, gamma, a, s);
    Ok(m * (gamma * m + 1.0) / s)
}

/// Residual of the self-consistency equation, for diagnostics.
pub fn mp_residual(z: f64, gamma: f64, m: f64) -> f64 {
    gamma * z * m * m + (z + gamma - 1.0) * m + 1.0
}

pub fn limiting_risk_niece(cfg: &LimitConfig) -> Result<f64> {
    cfg.validate()?;
    let LimitConfig { gamma, c_sq, tr_sigma_eps } = *cfg;
    if (gamma - 1.0).abs() <= SINGULARITY_BAND {
        return Err(Error::Singularity { gamma });
    }
    Ok(if gamma < 1.0 {
        tr_sigma_eps * gamma / (1.0 - gamma)
    } else {
        c_sq * (1.0 - 1.0 / gamma) + tr_sigma_eps / (gamma - 1.0)
    })
}

pub fn limiting_risk_egreg(cfg: &LimitConfig, lambda: f64) -> Result<f64> {
    cfg.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("need lambda > 0, got {lambda}")));
    }
    let m = stieltjes_m(-lambda, cfg.gamma)?;
    let mp = stieltjes_m_prime(-lambda, cfg.gamma)?;
    Ok(cfg.c_sq * lambda * lambda * mp + cfg.tr_sigma_eps * cfg.gamma * (m - lambda * mp))
}

pub fn optimal_lambda(cfg: &LimitConfig) -> f64 {
    cfg.tr_sigma_eps * cfg.gamma / cfg.c_sq
}

/// Limiting risks along a grid of aspect ratios, EgReg at its optimal
/// penalty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub gamma_grid: Vec<f64>,
    /// NaN inside the singularity band.
    pub niece_risk: Vec<f64>,
    pub egreg_risk_at_opt: Vec<f64>,
    pub lambda_star: Vec<f64>,
}

impl RiskCurve {
    pub fn len(&self) -> usize {
        self.gamma_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_grid.is_empty()
    }
}

pub fn risk_curve(base: &LimitConfig, gamma_grid: &[f64]) -> Result<RiskCurve> {
    base.with_gamma(1.0).validate()?;
    if gamma_grid.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::Parameter("gamma grid must be positive and finite".into()));
    }
    if gamma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("gamma grid must be strictly ascending".into()));
    }
    let eval = |g: f64| -> Result<(f64, f64, f64)> {
        let cfg = base.with_gamma(g);
        let niece = match limiting_risk_niece(&cfg) {
            Ok(v) => v,
            Err(Error::Singularity { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        let lam = optimal_lambda(&cfg);
        Ok((niece, limiting_risk_egreg(&cfg, lam)?, lam))
    };
    let rows = gamma_grid.iter().map(|&g| eval(g)).collect::<Result<Vec<_>>>()?;
    Ok(RiskCurve {
        gamma_grid: gamma_grid.to_vec(),
        niece_risk: rows.iter().map(|r| r.0).collect(),
        egreg_risk_at_opt: rows.iter().map(|r| r.1).collect(),
        lambda_star: rows.iter().map(|r| r.2).collect(),
    })
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}
