//! WebAssembly bindings for the static page in `www/`.
//!
//! Every exported function returns a flat `Float64Array` in row-major order
//! so the page can draw it without any glue beyond what wasm-bindgen emits.
//! The plain-Rust versions (`*_rows`) are what the native tests exercise.

use egreg_core::estimators::{Design, MethodSpec};
use egreg_core::limits::{log_grid, risk_curve, LimitConfig};
use egreg_core::matrix::{center_standardize, Dataset, Scaling};
use egreg_core::sim::{EnvelopeModel, EnvelopeSimConfig};
use egreg_core::Error;
use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, Error>;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Columns: gamma, NIECE risk, EgReg risk at the optimal penalty, that penalty.
/// Points within the singular band around gamma = 1 come back as NaN.
pub fn limit_curve_rows(c_sq: f64, tr_sigma_eps: f64, gamma_max: f64, count: usize) -> Result<Vec<[f64; 4]>> {
    if count < 2 || !(gamma_max > 0.0) {
        return Err(Error::Parameter("need count >= 2 and gamma_max > 0".into()));
    }
    let base = LimitConfig::new(1.0, c_sq, tr_sigma_eps)?;
    let step = gamma_max / count as f64;
    let grid: Vec<f64> = (1..=count).map(|i| step * i as f64).collect();
    let c = risk_curve(&base, &grid)?;
    Ok((0..c.len())
        .map(|i| [c.gamma_grid[i], c.niece_risk[i], c.egreg_risk_at_opt[i], c.lambda_star[i]])
        .collect())
}

#[wasm_bindgen]
pub fn limit_curve(c_sq: f64, tr_sigma_eps: f64, gamma_max: f64, count: usize) -> std::result::Result<Vec<f64>, JsError> {
    limit_curve_rows(c_sq, tr_sigma_eps, gamma_max, count)
        .map(|r| r.concat())
        .map_err(js)
}

/// A small planted-envelope problem: `u_star` envelope directions spread
/// over the spectrum, every other eigenvector starting at the second.
#[derive(Clone, Copy, Debug)]
pub struct Scenario {
    pub n: usize,
    pub p: usize,
    pub u_star: usize,
    pub decay: f64,
    pub seed: u64,
}

struct Prepared {
    design: Design,
    y: DMatrix<f64>,
    model: EnvelopeModel,
}

impl Scenario {
    fn config(&self) -> Result<EnvelopeSimConfig> {
        if self.u_star == 0 || 2 * self.u_star > self.p {
            return Err(Error::Parameter(format!(
                "need 1 <= u* <= p / 2, got u* = {}, p = {}",
                self.u_star, self.p
            )));
        }
        let alpha: Vec<f64> = (0..self.u_star).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Ok(EnvelopeSimConfig {
            n: self.n,
            p: self.p,
            q: 1,
            decay_gamma: self.decay,
            top_eigenvalue: 10.0,
            indices: (0..self.u_star).map(|j| 2 * j + 2).collect(),
            alpha: DMatrix::from_column_slice(self.u_star, 1, &alpha),
            sigma_eps: DMatrix::from_element(1, 1, 1.0),
            seed: self.seed,
            replications: 1,
        })
    }

    fn prepare(&self) -> Result<Prepared> {
        let model = EnvelopeModel::build(&self.config()?)?;
        let raw: Dataset = model.model.dataset(0)?;
        let data = center_standardize(&raw, Scaling::Center)?;
        Ok(Prepared {
            design: Design::new(data.x().clone())?,
            y: data.y().clone(),
            model,
        })
    }
}

/// Columns per principal component (variance order): sample variance
/// `sigma_j^2 / n`, envelope score `phi_j`, EgReg factor `phi/(phi+lambda)`
/// and the ridge factor `sigma^2/(sigma^2+lambda_r)` at comparable penalties
/// (`lambda` relative to the top score, `lambda_r` to the top `sigma^2`).
pub fn shrinkage_rows(s: Scenario, rel_lambda: f64) -> Result<Vec<[f64; 4]>> {
    if !(rel_lambda >= 0.0) {
        return Err(Error::Parameter("penalty must be non-negative".into()));
    }
    let pr = s.prepare()?;
    let svd = pr.design.svd();
    let r = svd.rank();
    let scores = pr.design.scores(&pr.design.project(&pr.y), r);
    let lambda = rel_lambda * scores.phi.max();
    let lambda_r = rel_lambda * svd.d[0] * svd.d[0];
    let n = s.n as f64;
    Ok((0..r)
        .map(|j| {
            let s2 = svd.d[j] * svd.d[j];
            let phi = scores.phi[j];
            let eg = if phi + lambda > 0.0 { phi / (phi + lambda) } else { 0.0 };
            [s2 / n, phi, eg, s2 / (s2 + lambda_r)]
        })
        .collect())
}

#[wasm_bindgen]
pub fn shrinkage_profile(n: usize, p: usize, u_star: usize, decay: f64, seed: u64, rel_lambda: f64) -> std::result::Result<Vec<f64>, JsError> {
    shrinkage_rows(Scenario { n, p, u_star, decay, seed }, rel_lambda)
        .map(|r| r.concat())
        .map_err(js)
}

/// Columns: relative penalty, EgReg prediction loss, ridge prediction loss,
/// for one draw of the scenario; the last row holds the NIECE loss at the
/// true `u*` in both loss columns (relative penalty NaN).
pub fn risk_path_rows(s: Scenario, count: usize) -> Result<Vec<[f64; 3]>> {
    if count < 2 {
        return Err(Error::Parameter("need at least two penalty values".into()));
    }
    let pr = s.prepare()?;
    let svd = pr.design.svd();
    let r = svd.rank();
    let top_phi = pr.design.scores(&pr.design.project(&pr.y), r).phi.max();
    let top_s2 = svd.d[0] * svd.d[0];
    let truth = &pr.model.model.truth;
    let loss = |spec: MethodSpec| -> Result<f64> { Ok(truth.loss(&pr.design.fit(&pr.y, &spec)?.beta)) };

    let mut rows = Vec::with_capacity(count + 1);
    for rel in log_grid(1e-4, 1e2, count) {
        rows.push([
            rel,
            loss(MethodSpec::EgReg { d: None, lambda: rel * top_phi })?,
            loss(MethodSpec::Ridge { lambda: rel * top_s2 })?,
        ]);
    }
    let niece = loss(MethodSpec::Niece { u: s.u_star.min(r), d: None })?;
    rows.push([f64::NAN, niece, niece]);
    Ok(rows)
}

#[wasm_bindgen]
pub fn risk_path(n: usize, p: usize, u_star: usize, decay: f64, seed: u64, count: usize) -> std::result::Result<Vec<f64>, JsError> {
    risk_path_rows(Scenario { n, p, u_star, decay, seed }, count)
        .map(|r| r.concat())
        .map_err(js)
}
