//! Command-line surface: CSV ingestion, path and inference reports in JSON,
//! and the Monte Carlo calibration harness behind `selinf simulate`.
//!
//! Everything here is deterministic given the seed and the input bytes; the
//! JSON reports echo the configuration, the library version, and the seed so
//! runs can be reproduced byte for byte.

mod simulate;

pub use simulate::{cmd_simulate, Scenario, SimConfig, SimReport};

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::inference::{
    selective_ci, selective_pvalue, significance_pvalue, significance_test, spacing_test, Method,
    Sided, SignificanceMode, SpacingVariant,
};
use crate::lars::{c_star, lars_path};
use crate::lasso::{lasso_fit, lasso_model_region, DEFAULT_MAX_SIGN_PATTERNS};
use crate::linmodel::{least_squares, standardize, DesignMatrix, ThinQr, DEFAULT_RANK_TOL};
use crate::polytope::{line_search_region, slice, slice_union, TruncationRegion};
use crate::stepwise::{fs_path, fs_polyhedron};
use crate::truncnorm::Interval;

/// JSON schema tag stamped on every report.
pub const SCHEMA: &str = "selinf/1";

/// Selection method driving a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Lasso,
    Lars,
    Fs,
}

/// Noise level: supplied or estimated from the full least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    Known(f64),
    Estimate,
}

impl Serialize for SigmaSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SigmaSpec::Known(v) => ser.serialize_f64(*v),
            SigmaSpec::Estimate => ser.serialize_str("estimate"),
        }
    }
}

impl SigmaSpec {
    pub fn parse(text: &str) -> Result<Self> {
        if text.eq_ignore_ascii_case("estimate") {
            return Ok(SigmaSpec::Estimate);
        }
        text.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(SigmaSpec::Known)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "sigma must be a positive number or \"estimate\", got {text:?}"
                ))
            })
    }
}

/// Configuration shared by `path` and `infer`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub method: MethodKind,
    pub lambda: Option<f64>,
    pub steps: Option<usize>,
    pub sigma: SigmaSpec,
    pub alpha: f64,
    pub seed: u64,
    pub normalize: bool,
    /// Build the Lasso region by line search instead of sign enumeration.
    pub line_search: bool,
    /// Spacing variant for LARS inference.
    pub spacing_simplified: bool,
    /// Untruncated sanity mode: reproduces the classical z-test.
    pub no_condition: bool,
    pub max_signs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: MethodKind::Lars,
            lambda: None,
            steps: None,
            sigma: SigmaSpec::Known(1.0),
            alpha: 0.05,
            seed: 0,
            normalize: true,
            line_search: false,
            spacing_simplified: false,
            no_condition: false,
            max_signs: DEFAULT_MAX_SIGN_PATTERNS,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        match self.method {
            MethodKind::Lasso => {
                if self.lambda.is_none() || self.steps.is_some() {
                    return Err(Error::InvalidConfig(
                        "method=lasso takes --lambda (a fixed penalty) and no --steps; \
                         conditioning on a data-chosen lambda would invalidate the polyhedron"
                            .into(),
                    ));
                }
            }
            MethodKind::Lars | MethodKind::Fs => {
                if self.steps.is_none() || self.lambda.is_some() {
                    return Err(Error::InvalidConfig(
                        "methods lars/fs take --steps and no --lambda".into(),
                    ));
                }
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "lambda must be positive, got {l}"
                )));
            }
        }
        Ok(())
    }
}

/// What `infer` targets: a path step or a fitted variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Step(usize),
    Variable(usize),
}

/// Reads a rectangular CSV with a header row; the response column is matched
/// by name first, then as a zero-based index. Returns the standardized design
/// and the centered response.
pub fn ingest(
    csv_path: &Path,
    response_column: &str,
    normalize: bool,
) -> Result<(DesignMatrix, Array1<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(csv_path)
        .map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::ParseError {
            line: 1,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .or_else(|| {
            response_column
                .parse::<usize>()
                .ok()
                .filter(|idx| *idx < headers.len())
        })
        .ok_or_else(|| Error::MissingResponse(response_column.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y_raw: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // header occupies line 1
        let record = record.map_err(|e| Error::ParseError {
            line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::ParseError {
                line,
                column: record.len(),
                message: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::NonNumericCell {
                line,
                column: col,
                content: field.to_string(),
            })?;
            if col == response_idx {
                y_raw.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 data rows, found {n}"
        )));
    }
    let p = headers.len() - 1;
    if p < 1 {
        return Err(Error::InvalidConfig(
            "need at least one predictor column besides the response".into(),
        ));
    }
    let mut x = Array2::zeros((n, p));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let y = Array1::from_vec(y_raw);
    standardize(&x, &y, normalize)
}

/// Sigma from the config: either as given or the usual root-mean-square
/// residual from the full least-squares fit. Estimation is a plug-in; the
/// exactness statements assume a known sigma.
pub fn resolve_sigma(spec: &SigmaSpec, x: &DesignMatrix, y: &Array1<f64>) -> Result<f64> {
    match spec {
        SigmaSpec::Known(v) => Ok(*v),
        SigmaSpec::Estimate => {
            let (n, p) = (x.n(), x.p());
            if n <= p + 1 {
                return Err(Error::InvalidConfig(format!(
                    "sigma estimation needs n > p + 1, got n={n}, p={p}"
                )));
            }
            let all: Vec<usize> = (0..p).collect();
            let beta = least_squares(x, &all, y.view())?;
            let r = crate::linmodel::residual(x, &all, &beta, y.view());
            Ok((r.dot(&r) / (n - p) as f64).sqrt())
        }
    }
}

fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

fn envelope(command: &str, config: Value, result: Value) -> Value {
    json!({
        "schema": SCHEMA,
        "version": version(),
        "command": command,
        "config": config,
        "result": result,
    })
}

fn config_json(config: &RunConfig) -> Value {
    serde_json::to_value(config).unwrap_or_else(|_| json!({}))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn intervals_json(intervals: &[Interval]) -> Value {
    Value::Array(
        intervals
            .iter()
            .map(|iv| json!({"lo": finite_or_null(iv.lo), "hi": finite_or_null(iv.hi)}))
            .collect(),
    )
}

/// Runs the selection path for the configured method and reports it.
pub fn cmd_path(config: &RunConfig, x: &DesignMatrix, y: &Array1<f64>) -> Result<Value> {
    config.validate()?;
    let result = match config.method {
        MethodKind::Lasso => {
            let lambda = config.lambda.expect("validated");
            let sol = lasso_fit(x, y.view(), lambda, 1e-12, 200_000)?;
            json!({
                "lambda": lambda,
                "active": sol.active,
                "signs": sol.signs,
                "beta": sol.beta_hat.to_vec(),
                "dual_gap": sol.dual_gap,
                "sweeps": sol.sweeps,
            })
        }
        MethodKind::Lars => {
            let steps = config.steps.expect("validated");
            let path = lars_path(x, y.view(), steps)?;
            let betas: Vec<Vec<f64>> =
                path.steps().iter().map(|s| s.beta.to_vec()).collect();
            json!({
                "knots": path.knots(),
                "entries": path.entries(),
                "beta_at_knots": betas,
            })
        }
        MethodKind::Fs => {
            let steps = config.steps.expect("validated");
            let path = fs_path(x, y.view(), steps)?;
            json!({
                "order": path.order,
                "signs": path.signs,
                "rss": path.rss,
            })
        }
    };
    Ok(envelope("path", config_json(config), result))
}

fn untruncated_region(eta: Array1<f64>, y: &Array1<f64>) -> TruncationRegion {
    let stat = eta.dot(y);
    let c = eta.mapv(|v| v / eta.dot(&eta));
    let mut z0 = y.clone();
    z0.scaled_add(-stat, &c);
    TruncationRegion::from_intervals(
        vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)],
        eta,
        z0,
    )
}

/// Contrast for the j-th variable inside the model `m`:
/// `eta = X_M (X_M'X_M)^-1 e_pos(j)`, so `eta'y` is the fitted coefficient.
fn coefficient_contrast(x: &DesignMatrix, m: &[usize], j: usize) -> Result<Array1<f64>> {
    let pos = m
        .iter()
        .position(|&v| v == j)
        .ok_or_else(|| Error::InvalidConfig(format!("variable {j} is not in the model")))?;
    let qr = ThinQr::factor(x.submatrix(m).view(), DEFAULT_RANK_TOL)?;
    let mut e = Array1::zeros(m.len());
    e[pos] = 1.0;
    Ok(qr.pinv_transpose_apply(e.view()))
}

/// Selective inference report for a step or a variable.
pub fn cmd_infer(
    config: &RunConfig,
    x: &DesignMatrix,
    y: &Array1<f64>,
    target: Target,
) -> Result<Value> {
    config.validate()?;
    let sigma = resolve_sigma(&config.sigma, x, y)?;
    let result = match config.method {
        MethodKind::Lasso => infer_lasso(config, x, y, sigma, target)?,
        MethodKind::Lars => infer_lars(config, x, y, sigma, target)?,
        MethodKind::Fs => infer_fs(config, x, y, sigma, target)?,
    };
    Ok(envelope("infer", config_json(config), result))
}

fn infer_lasso(
    config: &RunConfig,
    x: &DesignMatrix,
    y: &Array1<f64>,
    sigma: f64,
    target: Target,
) -> Result<Value> {
    let lambda = config.lambda.expect("validated");
    let j = match target {
        Target::Variable(j) => j,
        Target::Step(_) => {
            return Err(Error::InvalidConfig(
                "method=lasso infers on --target-variable, not a step".into(),
            ))
        }
    };
    let sol = lasso_fit(x, y.view(), lambda, 1e-12, 200_000)?;
    let eta = coefficient_contrast(x, &sol.active, j)?;
    let stat = eta.dot(y);
    let scale = sigma * eta.dot(&eta).sqrt();

    let (region, used_line_search) = if config.no_condition {
        (untruncated_region(eta.clone(), y), false)
    } else if config.line_search {
        let selector = |yv: ndarray::ArrayView1<'_, f64>| -> Result<Vec<usize>> {
            crate::lasso::lasso_support(x, yv, lambda)
        };
        (
            line_search_region(selector, y.view(), eta.view(), sigma * sigma, 20.0, 10_000)?,
            true,
        )
    } else {
        let polys = lasso_model_region(x, &sol.active, lambda, config.max_signs)?;
        (
            slice_union(&polys, eta.view(), sigma * sigma, y.view())?,
            false,
        )
    };

    let p = selective_pvalue(y.view(), eta.view(), sigma, &region, 0.0, Sided::Two)?;
    let ci = selective_ci(y.view(), eta.view(), sigma, &region, config.alpha)?;
    Ok(json!({
        "method": Method::Polyhedral,
        "variable": j,
        "active": sol.active,
        "signs": sol.signs,
        "statistic": stat,
        "scale": scale,
        "sigma": sigma,
        "region": intervals_json(region.intervals()),
        "p_value": p,
        "ci": [finite_or_null(ci[0]), finite_or_null(ci[1])],
        "alpha": config.alpha,
        "line_search": used_line_search,
        "no_condition": config.no_condition,
    }))
}

fn infer_lars(
    config: &RunConfig,
    x: &DesignMatrix,
    y: &Array1<f64>,
    sigma: f64,
    target: Target,
) -> Result<Value> {
    let steps = config.steps.expect("validated");
    let k = match target {
        Target::Step(k) => k,
        Target::Variable(_) => {
            return Err(Error::InvalidConfig(
                "method=lars infers on --target-step".into(),
            ))
        }
    };
    if k < 1 || k > steps {
        return Err(Error::InvalidConfig(format!(
            "target step must lie in 1..={steps}, got {k}"
        )));
    }
    let path = lars_path(x, y.view(), steps)?;
    let eta = path.step(k).c_entry.clone();
    let stat = path.knot(k);
    let scale = sigma * eta.dot(&eta).sqrt();

    if config.no_condition {
        let region = untruncated_region(eta.clone(), y);
        let p = selective_pvalue(y.view(), eta.view(), sigma, &region, 0.0, Sided::Two)?;
        let ci = selective_ci(y.view(), eta.view(), sigma, &region, config.alpha)?;
        return Ok(json!({
            "method": Method::Polyhedral,
            "k": k,
            "entered": path.step(k).j,
            "sign": path.step(k).s,
            "statistic": stat,
            "scale": scale,
            "sigma": sigma,
            "region": intervals_json(region.intervals()),
            "p_value": p,
            "ci": [finite_or_null(ci[0]), finite_or_null(ci[1])],
            "alpha": config.alpha,
            "no_condition": true,
        }));
    }

    let variant = if config.spacing_simplified {
        SpacingVariant::Simplified
    } else {
        SpacingVariant::Exact
    };
    let (t, p) = spacing_test(&path, k, sigma, variant)?;
    let lower = match variant {
        SpacingVariant::Exact => c_star(&path, k)?,
        SpacingVariant::Simplified => path.knot(k + 1),
    };
    let region_intervals = [Interval::new(lower, path.knot(k - 1))];
    let ci = crate::inference::ci_from_stat(stat, scale, &region_intervals, config.alpha)?;

    // Companion statistics so the exact <= simplified ordering and the
    // exponential approximation are visible side by side.
    let spacing_exact = spacing_test(&path, k, sigma, SpacingVariant::Exact).ok();
    let spacing_simplified = spacing_test(&path, k, sigma, SpacingVariant::Simplified).ok();
    let significance = significance_test(&path, k, sigma, SignificanceMode::ClosedForm)
        .ok()
        .map(|t_sig| json!({"t": t_sig, "p_exp1": significance_pvalue(t_sig, 1)}));

    Ok(json!({
        "method": if config.spacing_simplified { Method::SpacingSimplified } else { Method::SpacingExact },
        "k": k,
        "entered": path.step(k).j,
        "sign": path.step(k).s,
        "statistic": stat,
        "scale": scale,
        "sigma": sigma,
        "omega": sigma / scale,
        "region": intervals_json(&region_intervals),
        "t": t,
        "p_value": p,
        "ci": [finite_or_null(ci[0]), finite_or_null(ci[1])],
        "alpha": config.alpha,
        "spacing_exact": spacing_exact.map(|(t, p)| json!({"t": t, "p": p})),
        "spacing_simplified": spacing_simplified.map(|(t, p)| json!({"t": t, "p": p})),
        "significance": significance,
    }))
}

fn infer_fs(
    config: &RunConfig,
    x: &DesignMatrix,
    y: &Array1<f64>,
    sigma: f64,
    target: Target,
) -> Result<Value> {
    let steps = config.steps.expect("validated");
    let k = match target {
        Target::Step(k) => k,
        Target::Variable(_) => {
            return Err(Error::InvalidConfig(
                "method=fs infers on --target-step".into(),
            ))
        }
    };
    if k < 1 || k > steps {
        return Err(Error::InvalidConfig(format!(
            "target step must lie in 1..={steps}, got {k}"
        )));
    }
    let path = fs_path(x, y.view(), steps)?;
    let j = path.order[k - 1];
    let model = path.model_at(k);
    let eta = coefficient_contrast(x, model, j)?;
    let stat = eta.dot(y);
    let scale = sigma * eta.dot(&eta).sqrt();

    let region = if config.no_condition {
        untruncated_region(eta.clone(), y)
    } else {
        let poly = fs_polyhedron(x, &path, k)?;
        slice(&poly, eta.view(), sigma * sigma, y.view())?
    };
    let p = selective_pvalue(y.view(), eta.view(), sigma, &region, 0.0, Sided::Two)?;
    let ci = selective_ci(y.view(), eta.view(), sigma, &region, config.alpha)?;
    Ok(json!({
        "method": Method::Polyhedral,
        "k": k,
        "entered": j,
        "sign": path.signs[k - 1],
        "statistic": stat,
        "scale": scale,
        "sigma": sigma,
        "region": intervals_json(region.intervals()),
        "p_value": p,
        "ci": [finite_or_null(ci[0]), finite_or_null(ci[1])],
        "alpha": config.alpha,
        "rss": path.rss.clone(),
        "no_condition": config.no_condition,
    }))
}

/// Renders an error as the report-level JSON object; the binary exits
/// nonzero whenever this appears.
pub fn error_json(err: &Error) -> Value {
    let hint = match err {
        Error::TooManySignPatterns { .. } => {
            Some("pass --line-search to scan the selection event instead of enumerating signs")
        }
        Error::MissingResponse(_) => Some("name a header column or give a zero-based index"),
        _ => None,
    };
    json!({
        "schema": SCHEMA,
        "version": version(),
        "error": {
            "kind": format!("{err:?}").split(['{', '(']).next().unwrap_or("Error").trim(),
            "message": err.to_string(),
            "hint": hint,
        }
    })
}
