//! The four simulation studies: replications share `X` and `beta*` and
//! redraw the noise; every tuned method is selected by k-fold CV on each
//! replication's response.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use super::cv::CvPlan;
use super::generate::{baseline_model, mix_seed, CovKind, EnvelopeModel, EnvelopeSimConfig, SimModel};
use crate::error::{Error, Result};
use crate::estimators::{Design, MethodSpec};
use crate::limits::log_grid;
use crate::risk::mean_and_se;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    P1,
    UStar,
    Baseline,
    DoubleDescent,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::P1 => "p1",
            StudyKind::UStar => "u_star",
            StudyKind::Baseline => "baseline",
            StudyKind::DoubleDescent => "double_descent",
        }
    }

    /// What the ratio grid measures: `p/n`, or `u*/n` for double descent.
    pub fn ratio_label(self) -> &'static str {
        match self {
            StudyKind::DoubleDescent => "u_star_over_n",
            _ => "p_over_n",
        }
    }

    fn default_ratios(self) -> Vec<f64> {
        match self {
            StudyKind::DoubleDescent => vec![0.2, 0.5, 0.8, 1.0, 1.25, 2.0, 3.0, 5.0],
            _ => vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }

    fn default_methods(self) -> Vec<StudyMethod> {
        match self {
            StudyKind::DoubleDescent => vec![StudyMethod::Niece, StudyMethod::EgReg, StudyMethod::EgRegR],
            _ => StudyMethod::ALL.to_vec(),
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Methods compared in the studies. `EgRegR` is EgReg with `d = r` and only
/// `lambda` tuned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethod {
    Pcr,
    Ridge,
    Niece,
    #[serde(rename = "egreg")]
    EgReg,
    #[serde(rename = "egreg_r")]
    EgRegR,
    Simpls,
}

impl StudyMethod {
    pub const ALL: [StudyMethod; 6] = [
        StudyMethod::Pcr,
        StudyMethod::Ridge,
        StudyMethod::Niece,
        StudyMethod::EgReg,
        StudyMethod::EgRegR,
        StudyMethod::Simpls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyMethod::Pcr => "pcr",
            StudyMethod::Ridge => "ridge",
            StudyMethod::Niece => "niece",
            StudyMethod::EgReg => "egreg",
            StudyMethod::EgRegR => "egreg_r",
            StudyMethod::Simpls => "simpls",
        }
    }
}

impl fmt::Display for StudyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parameter(format!("unknown study method '{s}'")))
    }
}

/// Cross-validation settings. Penalty grids are log-spaced between
/// `lambda_lo` and `lambda_hi` times an anchor: the top squared singular
/// value for ridge, the top sample envelope score for EgReg (whose
/// weights are `phi / (phi + lambda)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningConfig {
    pub folds: usize,
    pub lambda_count: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Spacing of the `d`/`u` grid `{step, 2 step, ..., r}`.
    pub dim_step: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            folds: 10,
            lambda_count: 50,
            lambda_lo: 1e-4,
            lambda_hi: 1e2,
            dim_step: 1,
        }
    }
}

impl TuningConfig {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("tuning.folds must be at least 2".into()));
        }
        if self.lambda_count == 0 || self.dim_step == 0 {
            return Err(Error::Config("tuning.lambda_count and tuning.dim_step must be positive".into()));
        }
        if !(self.lambda_lo > 0.0 && self.lambda_hi >= self.lambda_lo && self.lambda_hi.is_finite()) {
            return Err(Error::Config("tuning lambda range must satisfy 0 < lo <= hi < inf".into()));
        }
        Ok(())
    }

    fn dims(&self, r: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (self.dim_step..=r).step_by(self.dim_step).collect();
        if v.last() != Some(&r) {
            v.push(r);
        }
        v
    }

    fn lambdas(&self, anchor: f64) -> Vec<f64> {
        let a = if anchor > 0.0 && anchor.is_finite() { anchor } else { 1.0 };
        log_grid(self.lambda_lo * a, self.lambda_hi * a, self.lambda_count)
    }
}

fn default_n() -> usize {
    100
}
fn default_replications() -> usize {
    100
}
fn default_seed() -> u64 {
    20240101
}
fn default_sigma_eps() -> f64 {
    10.0
}
fn default_decay() -> f64 {
    1.0
}
fn default_p_first() -> usize {
    7
}
fn default_rho() -> f64 {
    0.5
}
fn default_cov() -> CovKind {
    CovKind::Cs
}

/// A study configuration. Only `study` is required; everything else
/// defaults to the standard setup for that study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    #[serde(default = "default_n")]
    pub n: usize,
    /// `p/n` values, or `u*/n` for double descent. Empty means the default.
    #[serde(default)]
    pub ratios: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Noise variance (single response).
    #[serde(default = "default_sigma_eps")]
    pub sigma_eps: f64,
    /// Eigenvalue decay for the envelope studies.
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// First envelope index `P(1)` (P1 and double-descent studies).
    #[serde(default = "default_p_first")]
    pub p_first: usize,
    /// Envelope dimension for the u* study; absent means `min(n, p) / 2`.
    #[serde(default)]
    pub u_star: Option<usize>,
    #[serde(default = "default_cov")]
    pub covariance: CovKind,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Empty means the study's default method list.
    #[serde(default)]
    pub methods: Vec<StudyMethod>,
    #[serde(default)]
    pub tuning: TuningConfig,
}

impl StudyConfig {
    pub fn new(study: StudyKind) -> Self {
        StudyConfig {
            study,
            n: default_n(),
            ratios: Vec::new(),
            replications: default_replications(),
            seed: default_seed(),
            sigma_eps: default_sigma_eps(),
            decay: default_decay(),
            p_first: default_p_first(),
            u_star: None,
            covariance: default_cov(),
            rho: default_rho(),
            methods: Vec::new(),
            tuning: TuningConfig::default(),
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        if self.ratios.is_empty() {
            self.study.default_ratios()
        } else {
            self.ratios.clone()
        }
    }

    pub fn methods(&self) -> Vec<StudyMethod> {
        if self.methods.is_empty() {
            self.study.default_methods()
        } else {
            self.methods.clone()
        }
    }

    /// Checks every grid point and returns the generated settings.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.n < 2 || self.replications == 0 {
            return Err(Error::Config("need n >= 2 and at least one replication".into()));
        }
        if !(self.sigma_eps > 0.0) {
            return Err(Error::Config("sigma_eps must be positive".into()));
        }
        if self.tuning.folds > self.n {
            return Err(Error::Config("more folds than observations".into()));
        }
        self.tuning.validate()?;
        if self.study == StudyKind::DoubleDescent
            && self.methods().iter().any(|m| !matches!(m, StudyMethod::Niece | StudyMethod::EgReg | StudyMethod::EgRegR))
        {
            return Err(Error::Config("double descent compares niece, egreg and egreg_r only".into()));
        }
        self.ratios()
            .iter()
            .enumerate()
            .map(|(i, &ratio)| self.point(i, ratio))
            .collect()
    }

    fn point(&self, index: usize, ratio: f64) -> Result<GridPoint> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::Config(format!("ratio {ratio} must be positive")));
        }
        let n = self.n;
        let scaled = (ratio * n as f64).round() as usize;
        let seed = mix_seed(self.seed, index as u64);
        let sig = DMatrix::from_element(1, 1, self.sigma_eps);
        let envelope = |p: usize, decay: f64, top: f64, indices: Vec<usize>, alpha: Vec<f64>| {
            let u = alpha.len();
            EnvelopeSimConfig {
                n,
                p,
                q: 1,
                decay_gamma: decay,
                top_eigenvalue: top,
                indices,
                alpha: DMatrix::from_vec(u, 1, alpha),
                sigma_eps: sig.clone(),
                seed,
                replications: self.replications,
            }
        };
        let alternating = |u: usize| (0..u).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<f64>>();

        let (p, u_star, source) = match self.study {
            StudyKind::P1 => {
                let p = scaled;
                if self.p_first == 0 || self.p_first + 9 > p {
                    return Err(Error::Config(format!(
                        "p_first + u* - 1 = {} exceeds p = {p}",
                        self.p_first + 9
                    )));
                }
                let cfg = envelope(p, self.decay, 10.0, (self.p_first..self.p_first + 10).collect(), alternating(10));
                (p, Some(10), PointSource::Envelope(cfg))
            }
            StudyKind::UStar => {
                let p = scaled;
                let u = self.u_star.unwrap_or(n.min(p) / 2);
                if u == 0 || 2 * u - 1 > p {
                    return Err(Error::Config(format!(
                        "u* = {u} needs p >= 2 u* - 1 = {}, got p = {p}",
                        (2 * u).saturating_sub(1)
                    )));
                }
                let alpha = if u == 1 {
                    vec![0.1]
                } else {
                    (0..u)
                        .map(|j| {
                            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                            sign * (0.1 + j as f64 * 0.9 / (u - 1) as f64)
                        })
                        .collect()
                };
                let cfg = envelope(p, self.decay, 10.0, (0..u).map(|j| 2 * j + 1).collect(), alpha);
                (p, Some(u), PointSource::Envelope(cfg))
            }
            StudyKind::Baseline => {
                if !(0.0..1.0).contains(&self.rho) {
                    return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
                }
                let p = scaled;
                if p < 6 {
                    return Err(Error::Config(format!("baseline needs p >= 6, got p = {p}")));
                }
                (p, None, PointSource::Baseline { seed })
            }
            StudyKind::DoubleDescent => {
                let u = scaled;
                // ties to even: u* = 11 gives p = 16, too small for indices 7..17
                let p = (1.5 * u as f64).round_ties_even() as usize;
                if u == 0 || self.p_first == 0 || self.p_first + u - 1 > p {
                    return Err(Error::Config(format!(
                        "p_first + u* - 1 = {} exceeds p = {p} (u* = {u}; needs u* >= 12 with p_first = 7)",
                        self.p_first + u.saturating_sub(1)
                    )));
                }
                let eta = alternating(u);
                let norm = (u as f64).sqrt();
                let alpha = eta.iter().map(|e| 10f64.sqrt() * e / norm).collect();
                let cfg = envelope(p, 0.0, 1.0, (self.p_first..self.p_first + u).collect(), alpha);
                (p, Some(u), PointSource::Envelope(cfg))
            }
        };
        Ok(GridPoint {
            index,
            ratio,
            n,
            p,
            u_star,
            source,
        })
    }
}

#[derive(Clone, Debug)]
enum PointSource {
    Envelope(EnvelopeSimConfig),
    Baseline { seed: u64 },
}

/// One setting of a study grid.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub index: usize,
    pub ratio: f64,
    pub n: usize,
    pub p: usize,
    pub u_star: Option<usize>,
    source: PointSource,
}

impl GridPoint {
    pub fn model(&self, cfg: &StudyConfig) -> Result<SimModel> {
        match &self.source {
            PointSource::Envelope(e) => Ok(EnvelopeModel::build(e)?.model),
            PointSource::Baseline { seed } => {
                baseline_model(cfg.covariance, self.n, self.p, cfg.rho, None, cfg.sigma_eps, *seed)
            }
        }
    }

    fn seed(&self) -> u64 {
        match &self.source {
            PointSource::Envelope(e) => e.seed,
            PointSource::Baseline { seed } => *seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub ratio: f64,
    pub n: usize,
    pub p: usize,
    pub u_star: Option<usize>,
    pub method: StudyMethod,
    /// Monte Carlo mean of `tr{(b - beta*)' Sigma_x (b - beta*)}`.
    pub risk: f64,
    pub se: f64,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn risk(&self, method: StudyMethod, ratio: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.ratio == ratio)
            .map(|r| r.risk)
    }

    /// Plot-ready CSV, one row per grid point and method.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "study,{},n,p,u_star,method,risk,se,replications\n",
            self.config.study.ratio_label()
        );
        for r in &self.rows {
            let u = r.u_star.map_or(String::new(), |u| u.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                self.config.study,
                format_sig17(r.ratio),
                r.n,
                r.p,
                u,
                r.method,
                format_sig17(r.risk),
                format_sig17(r.se),
                r.replications
            );
        }
        s
    }
}

/// Decimal with 17 significant digits: enough for every `f64` to parse
/// back to the same bits.
pub fn format_sig17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..=16).contains(&exp) {
        format!("{x:.*}", (16 - exp).max(0) as usize)
    } else {
        sci
    }
}

fn center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let mean = RowDVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n));
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= &mean;
    }
    out
}

/// Everything about one grid point that does not depend on the response.
struct PointContext<'a> {
    cfg: &'a StudyConfig,
    point: &'a GridPoint,
    model: SimModel,
    design: Design,
    plan: CvPlan,
    methods: Vec<StudyMethod>,
}

impl PointContext<'_> {
    fn spec_for(&self, method: StudyMethod, y: &DMatrix<f64>) -> Result<MethodSpec> {
        let t = &self.cfg.tuning;
        let r = self.design.rank();
        let dims = t.dims(r);
        let grid: Vec<MethodSpec> = match method {
            StudyMethod::Niece if self.cfg.study == StudyKind::DoubleDescent => {
                let u = self.point.u_star.unwrap_or(r).min(self.point.n - 1).min(r);
                return Ok(MethodSpec::Niece { u, d: None });
            }
            StudyMethod::Pcr => dims.iter().map(|&d| MethodSpec::Pcr { d }).collect(),
            StudyMethod::Simpls => dims.iter().map(|&d| MethodSpec::Simpls { d }).collect(),
            StudyMethod::Niece => dims.iter().map(|&u| MethodSpec::Niece { u, d: None }).collect(),
            StudyMethod::Ridge => {
                let s1 = self.design.svd().d[0];
                t.lambdas(s1 * s1).into_iter().map(|lambda| MethodSpec::Ridge { lambda }).collect()
            }
            StudyMethod::EgReg | StudyMethod::EgRegR => {
                let uty = self.design.project(y);
                let top = self.design.scores(&uty, r).phi.max();
                let lambdas = t.lambdas(top);
                if method == StudyMethod::EgRegR {
                    lambdas.into_iter().map(|lambda| MethodSpec::EgReg { d: None, lambda }).collect()
                } else {
                    dims.iter()
                        .flat_map(|&d| lambdas.iter().map(move |&lambda| MethodSpec::EgReg { d: Some(d), lambda }))
                        .collect()
                }
            }
        };
        Ok(self.plan.select(y, &grid)?.best)
    }

    fn replicate(&self, rep: u64) -> Result<Vec<f64>> {
        let y = center(&self.model.response(rep));
        self.methods
            .iter()
            .map(|&m| {
                let spec = self.spec_for(m, &y)?;
                let fit = self.design.fit(&y, &spec)?;
                Ok(self.model.truth.loss(&fit.beta))
            })
            .collect()
    }
}

#[cfg(feature = "parallel")]
fn map_reps<T: Send>(count: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..count as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_reps<T>(count: usize, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..count as u64).map(f).collect()
}

/// Runs one grid point and returns a row per method.
pub fn run_point(cfg: &StudyConfig, point: &GridPoint) -> Result<Vec<StudyRow>> {
    let model = point.model(cfg)?;
    let design = Design::new(center(&model.x))?;
    let plan = CvPlan::new(&model.x, cfg.tuning.folds, point.seed())?;
    let ctx = PointContext {
        cfg,
        point,
        model,
        design,
        plan,
        methods: cfg.methods(),
    };
    let losses = map_reps(cfg.replications, |rep| ctx.replicate(rep))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ctx
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let per_rep: Vec<f64> = losses.iter().map(|l| l[i]).collect();
            let (risk, se) = mean_and_se(&per_rep);
            StudyRow {
                ratio: point.ratio,
                n: point.n,
                p: point.p,
                u_star: point.u_star,
                method,
                risk,
                se,
                replications: cfg.replications,
            }
        })
        .collect())
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let points = cfg.points()?;
    let mut rows = Vec::new();
    for point in &points {
        rows.extend(run_point(cfg, point)?);
    }
    Ok(StudyResult {
        config: cfg.clone(),
        rows,
    })
}
