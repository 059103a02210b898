use std::path::{Path, PathBuf};

use egreg_core::estimators::{fit, predict, Design, FittedModel, Method, MethodSpec};
use egreg_core::limits::{log_grid, risk_curve, LimitConfig};
use egreg_core::matrix::{center_standardize, Scaling};
use egreg_core::sim::{format_sig17, kfold_cv, run_study, StudyConfig};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::io::{labeled, read_table, table_to_csv, write_file, LabeledData};
use crate::manifest::{sidecar, write_manifest, ManifestBuilder};

pub const MODEL_FORMAT: &str = "egreg-model";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model: the fitted coefficients plus column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub predictors: Vec<String>,
    pub responses: Vec<String>,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a model file: {e}", path.display())))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(CliError::Usage(format!(
                "{}: unsupported model format {} v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        Ok(m)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        write_file(path, &(json + "\n"))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second initialization only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let manifest = cli.manifest;
    match cli.command {
        Command::Fit(a) => cmd_fit(a, manifest),
        Command::Predict(a) => cmd_predict(a, manifest),
        Command::Cv(a) => cmd_cv(a, manifest),
        Command::EvaluateRpe(a) => cmd_evaluate_rpe(a, manifest),
        Command::Theory(a) => cmd_theory(a, manifest),
        Command::Simulate(a) => cmd_simulate(a, manifest),
    }
}

fn finish(builder: ManifestBuilder, explicit: Option<PathBuf>, main_output: &Path) -> Result<()> {
    let path = explicit.unwrap_or_else(|| sidecar(main_output));
    write_manifest(&path, &builder.finish())
}

fn load_data(a: &DataArgs, mb: &mut ManifestBuilder) -> Result<LabeledData> {
    mb.input_file("data", &a.data)?;
    mb.param("response", &a.response);
    mb.param("predictors", &a.predictors);
    let scaling: Scaling = a.scaling.into();
    mb.param("scaling", &scaling);
    let table = read_table(&a.data)?;
    let raw = labeled(&table, &a.response, Some(&a.predictors))?;
    Ok(LabeledData {
        data: center_standardize(&raw.data, scaling)?,
        ..raw
    })
}

/// Turns the method flags into a spec, rejecting flags the method does not
/// take.
pub fn spec_from_flags(method: Method, d: Option<usize>, u: Option<usize>, lambda: Option<f64>) -> Result<MethodSpec> {
    let need = |name: &str| CliError::Usage(format!("--method {method} requires --{name}"));
    let reject = |name: &str, given: bool| {
        if given {
            Err(CliError::Usage(format!("--method {method} does not take --{name}")))
        } else {
            Ok(())
        }
    };
    Ok(match method {
        Method::Pcr | Method::Simpls => {
            reject("u", u.is_some())?;
            reject("lambda", lambda.is_some())?;
            let d = d.ok_or_else(|| need("d"))?;
            if method == Method::Pcr {
                MethodSpec::Pcr { d }
            } else {
                MethodSpec::Simpls { d }
            }
        }
        Method::Ridge => {
            reject("d", d.is_some())?;
            reject("u", u.is_some())?;
            MethodSpec::Ridge {
                lambda: lambda.ok_or_else(|| need("lambda"))?,
            }
        }
        Method::Niece => {
            reject("lambda", lambda.is_some())?;
            MethodSpec::Niece {
                u: u.ok_or_else(|| need("u"))?,
                d,
            }
        }
        Method::EgReg => {
            reject("u", u.is_some())?;
            MethodSpec::EgReg {
                d,
                lambda: lambda.ok_or_else(|| need("lambda"))?,
            }
        }
    })
}

fn fit_and_save(data: &LabeledData, spec: &MethodSpec, out: &Path) -> Result<ModelFile> {
    let model = fit(&data.data, spec)?;
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        predictors: data.predictors.clone(),
        responses: data.responses.clone(),
        model,
    };
    file.save(out)?;
    Ok(file)
}

fn cmd_fit(a: FitArgs, manifest: Option<PathBuf>) -> Result<()> {
    let mut mb = ManifestBuilder::new("fit");
    let spec = spec_from_flags(a.method, a.d, a.u, a.lambda)?;
    mb.param("spec", &spec);
    let data = load_data(&a.data, &mut mb)?;
    let file = fit_and_save(&data, &spec, &a.out)?;
    if file.model.zero_score_limit {
        eprintln!("note: zero envelope scores at lambda = 0; those directions contribute nothing");
    }
    mb.output(&a.out);
    finish(mb, manifest, &a.out)
}

fn cmd_predict(a: PredictArgs, manifest: Option<PathBuf>) -> Result<()> {
    let mut mb = ManifestBuilder::new("predict");
    mb.input_file("model", &a.model)?;
    mb.input_file("data", &a.data)?;
    let model = ModelFile::load(&a.model)?;
    let x = read_table(&a.data)?.columns(&model.predictors)?;
    let yhat = predict(&model.model, &x)?;
    write_file(&a.out, &table_to_csv(&model.responses, &yhat))?;
    mb.output(&a.out);
    finish(mb, manifest, &a.out)
}

/// `a:b`, `a:b:step` or `a,b,c`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse dimension grid '{s}'"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let out: Vec<usize> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let step = match parts.get(2) {
            Some(t) => num(t)?,
            None => 1,
        };
        if parts.len() > 3 || step == 0 || lo > hi {
            return Err(bad());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

fn cv_grid(a: &CvArgs, data: &LabeledData) -> Result<Vec<MethodSpec>> {
    let design = Design::new(data.data.ensure_centered()?.x().clone())?;
    let r = design.rank();
    let dims = |g: &Option<String>| -> Result<Vec<usize>> {
        match g {
            Some(s) => parse_dims(s),
            None => Ok((1..=r).collect()),
        }
    };
    let lambdas = |anchor: f64| -> Result<Vec<f64>> {
        if !a.grid_lambda.is_empty() {
            return Ok(a.grid_lambda.clone());
        }
        if !(a.grid_lambda_min > 0.0 && a.grid_lambda_max >= a.grid_lambda_min) || a.grid_lambda_count == 0 {
            return Err(CliError::Usage("need 0 < --grid-lambda-min <= --grid-lambda-max and a positive count".into()));
        }
        let anchor = if anchor > 0.0 { anchor } else { 1.0 };
        Ok(log_grid(a.grid_lambda_min * anchor, a.grid_lambda_max * anchor, a.grid_lambda_count))
    };
    let reject = |flag: &str, given: bool| {
        if given {
            Err(CliError::Usage(format!("--method {} does not take --{flag}", a.method)))
        } else {
            Ok(())
        }
    };
    Ok(match a.method {
        Method::Pcr | Method::Simpls => {
            reject("grid-u", a.grid_u.is_some())?;
            let pcr = a.method == Method::Pcr;
            dims(&a.grid_d)?
                .into_iter()
                .map(|d| if pcr { MethodSpec::Pcr { d } } else { MethodSpec::Simpls { d } })
                .collect()
        }
        Method::Niece => {
            reject("grid-d", a.grid_d.is_some())?;
            let cap = a.d.unwrap_or(r);
            dims(&a.grid_u)?
                .into_iter()
                .filter(|&u| u <= cap)
                .map(|u| MethodSpec::Niece { u, d: a.d })
                .collect()
        }
        Method::Ridge => {
            reject("grid-d", a.grid_d.is_some())?;
            reject("grid-u", a.grid_u.is_some())?;
            let s1 = design.svd().d[0];
            lambdas(s1 * s1)?.into_iter().map(|lambda| MethodSpec::Ridge { lambda }).collect()
        }
        Method::EgReg => {
            reject("grid-u", a.grid_u.is_some())?;
            let uty = design.project(data.data.ensure_centered()?.y());
            let top = design.scores(&uty, r).phi.max();
            let ls = lambdas(top)?;
            let ds = dims(&a.grid_d)?;
            ds.iter()
                .flat_map(|&d| ls.iter().map(move |&lambda| MethodSpec::EgReg { d: Some(d), lambda }))
                .collect()
        }
    })
}

fn cmd_cv(a: CvArgs, manifest: Option<PathBuf>) -> Result<()> {
    let mut mb = ManifestBuilder::new("cv");
    mb.param("method", &a.method);
    mb.param("folds", &a.folds);
    mb.seed(a.seed);
    let data = load_data(&a.data, &mut mb)?;
    let grid = cv_grid(&a, &data)?;
    if grid.is_empty() {
        return Err(CliError::Usage("the tuning grid is empty".into()));
    }
    mb.param("grid", &grid);
    let res = kfold_cv(&data.data, a.method, &grid, a.folds, a.seed)?;

    let mut csv = String::from("method,d,u,lambda,score\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for row in &res.table {
        let s = &row.spec;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.method(),
            opt(s.d().map(|d| d.to_string())),
            opt(s.u().map(|u| u.to_string())),
            opt(s.lambda().map(format_sig17)),
            format_sig17(row.score)
        ));
    }
    write_file(&a.out, &csv)?;
    mb.output(&a.out);
    if let Some(path) = &a.model_out {
        fit_and_save(&data, &res.best, path)?;
        mb.output(path);
    }
    println!("{}", serde_json::to_string(&res.best).expect("spec serializes"));
    finish(mb, manifest, &a.out)
}

fn cmd_evaluate_rpe(a: RpeArgs, manifest: Option<PathBuf>) -> Result<()> {
    let mut mb = ManifestBuilder::new("evaluate-rpe");
    mb.input_file("data", &a.data)?;
    mb.param("response", &a.response);
    let table = read_table(&a.data)?;
    let y = table.columns(&a.response)?;
    let mut rows = Vec::new();
    for path in &a.models {
        mb.input_file("model", path)?;
        let m = ModelFile::load(path)?;
        if m.responses != a.response {
            return Err(CliError::Usage(format!(
                "{}: model predicts {:?}, test responses are {:?}",
                path.display(),
                m.responses,
                a.response
            )));
        }
        let yhat = predict(&m.model, &table.columns(&m.predictors)?)?;
        rows.push((path.clone(), m.model.method(), (&y - yhat).norm_squared()));
    }
    let reference = rows
        .iter()
        .find(|r| r.1 == Method::Simpls)
        .map(|r| r.2)
        .ok_or_else(|| egreg_core::Error::Contract("RPE needs a SIMPLS model as the reference".into()))?;
    let mut csv = String::from("model,method,sse,rpe\n");
    for (path, method, sse) in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            path.display(),
            method,
            format_sig17(*sse),
            format_sig17(sse / reference)
        ));
    }
    write_file(&a.out, &csv)?;
    mb.output(&a.out);
    finish(mb, manifest, &a.out)
}

fn cmd_theory(a: TheoryArgs, manifest: Option<PathBuf>) -> Result<()> {
    let mut mb = ManifestBuilder::new("theory");
    let grid = if a.grid_gamma.is_empty() {
        let n = a.grid_gamma_count;
        if n == 0 || !(a.grid_gamma_min > 0.0 && a.grid_gamma_max > a.grid_gamma_min) {
            return Err(CliError::Usage("need 0 < --grid-gamma-min < --grid-gamma-max and a positive count".into()));
        }
        if n == 1 {
            vec![a.grid_gamma_min]
        } else {
            let step = (a.grid_gamma_max - a.grid_gamma_min) / (n - 1) as f64;
            (0..n).map(|i| a.grid_gamma_min + step * i as f64).collect()
        }
    } else {
        a.grid_gamma.clone()
    };
    let base = LimitConfig::new(1.0, a.c_sq, a.tr_sigma_eps)?;
    mb.param("base", &base);
    mb.param("grid", &grid);
    let curve = risk_curve(&base, &grid)?;
    let mut csv = String::from("gamma,niece_risk,egreg_risk,lambda_star\n");
    for i in 0..curve.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            format_sig17(curve.gamma_grid[i]),
            format_sig17(curve.niece_risk[i]),
            format_sig17(curve.egreg_risk_at_opt[i]),
            format_sig17(curve.lambda_star[i])
        ));
    }
    write_file(&a.out, &csv)?;
    mb.output(&a.out);
    finish(mb, manifest, &a.out)
}

/// A study file holds either one study at the top level or a `[[studies]]`
/// array.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyList {
    studies: Vec<StudyConfig>,
}

pub fn parse_study_file(text: &str) -> Result<Vec<StudyConfig>> {
    let value: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid TOML: {e}")))?;
    let schema = |e: toml::de::Error| CliError::Usage(format!("study configuration: {e}"));
    if value.contains_key("studies") {
        let list: StudyList = toml::from_str(text).map_err(schema)?;
        if list.studies.is_empty() {
            return Err(CliError::Usage("study configuration: 'studies' is empty".into()));
        }
        Ok(list.studies)
    } else {
        Ok(vec![toml::from_str(text).map_err(schema)?])
    }
}

fn cmd_simulate(a: SimulateArgs, manifest: Option<PathBuf>) -> Result<()> {
    let mut mb = ManifestBuilder::new("simulate");
    let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let mut studies = parse_study_file(&text)?;
    for s in &mut studies {
        if let Some(seed) = a.seed {
            s.seed = seed;
        }
        if let Some(r) = a.replications {
            s.replications = r;
        }
    }
    // validate everything before the first long run
    for s in &studies {
        s.points()?;
    }
    mb.param("studies", &studies);
    if let [only] = studies.as_slice() {
        mb.seed(only.seed);
    }
    let mut used = std::collections::HashMap::new();
    for s in &studies {
        let count = used.entry(s.study).or_insert(0usize);
        let name = if *count == 0 {
            format!("{}.csv", s.study)
        } else {
            format!("{}_{}.csv", s.study, count)
        };
        *count += 1;
        let result = run_study(s)?;
        let path = a.out_dir.join(name);
        write_file(&path, &result.to_csv())?;
        eprintln!("wrote {}", path.display());
        mb.output(&path);
    }
    let path = manifest.unwrap_or_else(|| a.out_dir.join("manifest.json"));
    write_manifest(&path, &mb.finish())
}
