//! Gaussian data generators with a fixed design and redrawable noise.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Dataset;
use crate::risk::TruthSpec;

/// Stream 0 of the master seed draws the design; replication `i` draws its
/// noise from stream `i + 1`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive independent seeds for grid points.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn normals(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill order is part of the reproducibility contract
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let qr = normals(rng, p, p).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

fn lower_cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Contract(format!("{what} is not positive definite")))
}

/// A fixed design and true model from which responses are redrawn.
#[derive(Clone, Debug)]
pub struct SimModel {
    pub x: DMatrix<f64>,
    pub truth: TruthSpec,
    noise_chol: DMatrix<f64>,
    seed: u64,
}

impl SimModel {
    fn new(x: DMatrix<f64>, truth: TruthSpec, seed: u64) -> Result<Self> {
        let noise_chol = lower_cholesky(&truth.sigma_eps, "Sigma_eps")?;
        Ok(SimModel {
            x,
            truth,
            noise_chol,
            seed,
        })
    }

    /// `Y = X beta* + E` for replication `rep`.
    pub fn response(&self, rep: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(self.seed, rep + 1);
        let e = normals(&mut rng, self.x.nrows(), self.truth.q()) * self.noise_chol.transpose();
        &self.x * &self.truth.beta_star + e
    }

    pub fn dataset(&self, rep: u64) -> Result<Dataset> {
        Dataset::new(self.x.clone(), self.response(rep))
    }
}

/// Predictor envelope model `y' = x' Gamma alpha + eps'` with
/// `Sigma_x = V diag(sigma) V'` and `Gamma = V_P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSimConfig {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Eigenvalue decay rate: `sigma_i = top * exp(-decay (i - 1))`.
    pub decay_gamma: f64,
    /// Largest eigenvalue of `Sigma_x` (10 unless a flat spectrum is wanted).
    pub top_eigenvalue: f64,
    /// 1-based indices of the eigenvectors spanning the envelope.
    pub indices: Vec<usize>,
    pub alpha: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
    pub seed: u64,
    pub replications: usize,
}

impl EnvelopeSimConfig {
    pub fn u_star(&self) -> usize {
        self.indices.len()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        DVector::from_fn(self.p, |i, _| {
            self.top_eigenvalue * (-self.decay_gamma * i as f64).exp()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 || self.q == 0 {
            return Err(Error::Config(format!(
                "need n >= 2, p >= 1, q >= 1, got n = {}, p = {}, q = {}",
                self.n, self.p, self.q
            )));
        }
        if self.indices.is_empty() {
            return Err(Error::Config("envelope index set is empty".into()));
        }
        if let Some(&bad) = self.indices.iter().find(|&&i| i == 0 || i > self.p) {
            return Err(Error::Config(format!(
                "envelope index {bad} outside 1..={}",
                self.p
            )));
        }
        let mut sorted = self.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.indices.len() {
            return Err(Error::Config("envelope indices must be distinct".into()));
        }
        if self.alpha.shape() != (self.u_star(), self.q) {
            return Err(Error::Config(format!(
                "alpha is {:?}, expected ({}, {})",
                self.alpha.shape(),
                self.u_star(),
                self.q
            )));
        }
        if self.sigma_eps.shape() != (self.q, self.q) {
            return Err(Error::Config("Sigma_eps must be q x q".into()));
        }
        if !(self.decay_gamma >= 0.0) || !(self.top_eigenvalue > 0.0) {
            return Err(Error::Config("need decay >= 0 and a positive top eigenvalue".into()));
        }
        Ok(())
    }
}

/// An envelope model with its planted basis and eigen-decomposition.
#[derive(Clone, Debug)]
pub struct EnvelopeModel {
    pub model: SimModel,
    pub v: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl EnvelopeModel {
    pub fn build(cfg: &EnvelopeSimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, 0);
        let v = haar_orthogonal(cfg.p, &mut rng);
        let sigma = cfg.eigenvalues();
        let half = DMatrix::from_diagonal(&sigma.map(f64::sqrt)) * v.transpose();
        let x = normals(&mut rng, cfg.n, cfg.p) * half;

        let cols: Vec<_> = cfg.indices.iter().map(|&i| v.column(i - 1).into_owned()).collect();
        let basis = DMatrix::from_columns(&cols);
        let beta_star = &basis * &cfg.alpha;
        let truth = TruthSpec::from_spectrum(beta_star, &v, &sigma, cfg.sigma_eps.clone())?;
        Ok(EnvelopeModel {
            model: SimModel::new(x, truth, cfg.seed)?,
            v,
            eigenvalues: sigma,
            basis,
        })
    }
}

/// Draws the design, the truth and the first replication's response.
pub fn gen_envelope_model(cfg: &EnvelopeSimConfig) -> Result<(Dataset, TruthSpec, DMatrix<f64>)> {
    let m = EnvelopeModel::build(cfg)?;
    let data = m.model.dataset(0)?;
    Ok((data, m.model.truth, m.basis))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKind {
    Ar1,
    Cs,
}

pub fn baseline_cov(kind: CovKind, p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Parameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    Ok(match kind {
        CovKind::Ar1 => DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)),
        CovKind::Cs => DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho }),
    })
}

/// `(2, -2, 1, -1, 1/2, -1/2, 0, ..., 0)`.
pub fn default_beta(p: usize) -> Result<DMatrix<f64>> {
    const LEAD: [f64; 6] = [2.0, -2.0, 1.0, -1.0, 0.5, -0.5];
    if p < LEAD.len() {
        return Err(Error::Config(format!("default beta* needs p >= 6, got {p}")));
    }
    Ok(DMatrix::from_fn(p, 1, |i, _| LEAD.get(i).copied().unwrap_or(0.0)))
}

/// Sparse regression with AR1 or compound-symmetric predictors.
pub fn baseline_model(
    kind: CovKind,
    n: usize,
    p: usize,
    rho: f64,
    beta_star: Option<&DMatrix<f64>>,
    sigma_eps_sq: f64,
    seed: u64,
) -> Result<SimModel> {
    let sigma_x = baseline_cov(kind, p, rho)?;
    let beta = match beta_star {
        Some(b) => b.clone(),
        None => default_beta(p)?,
    };
    if !(sigma_eps_sq > 0.0) {
        return Err(Error::Parameter("noise variance must be positive".into()));
    }
    let l = lower_cholesky(&sigma_x, "Sigma_x")?;
    let mut rng = stream_rng(seed, 0);
    let x = normals(&mut rng, n, p) * l.transpose();
    let q = beta.ncols();
    let truth = TruthSpec::new(beta, sigma_x, DMatrix::identity(q, q) * sigma_eps_sq)?;
    SimModel::new(x, truth, seed)
}

pub fn gen_baseline(
    kind: CovKind,
    n: usize,
    p: usize,
    rho: f64,
    beta_star: Option<&DMatrix<f64>>,
    sigma_eps_sq: f64,
    seed: u64,
) -> Result<(Dataset, TruthSpec)> {
    let m = baseline_model(kind, n, p, rho, beta_star, sigma_eps_sq, seed)?;
    Ok((m.dataset(0)?, m.truth))
}
