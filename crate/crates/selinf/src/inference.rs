//! Selective p-values and confidence intervals, the significance test for the
//! Lasso path, and the spacing test for LARS.
//!
//! All tests share one engine: conditional on the selection event, the
//! statistic `eta'y` is Gaussian with unknown mean `eta'mu` and known scale
//! `sigma ||eta||`, truncated to the region the event carves out of the line.
//! The truncated CDF is an exact pivot; inverting it in the mean gives
//! intervals, and evaluating its upper tail gives p-values.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lars::{c_star, LarsPath};
use crate::lasso::lasso_fit;
use crate::linmodel::{pinv_transpose_apply, DesignMatrix};
use crate::polytope::TruncationRegion;
use crate::truncnorm::{tn_cdf, tn_root_mu, Interval, TruncatedGaussian};

/// Smallest reportable p-value; log-space computations never round to zero.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// Which inference produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Polyhedral,
    SpacingExact,
    SpacingSimplified,
    Significance,
}

/// Sidedness of a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sided {
    Two,
    One,
}

/// Everything a caller needs to audit one selective inference.
#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub statistic: f64,
    pub eta: Array1<f64>,
    /// `sigma * ||eta||`, the scale of the statistic.
    pub scale: f64,
    pub region: TruncationRegion,
    pub p_value: f64,
    pub ci: [f64; 2],
    pub method: Method,
    /// Step index for path-based tests.
    pub k: Option<usize>,
}

fn clip_p(p: f64) -> f64 {
    p.clamp(P_VALUE_FLOOR, 1.0)
}

/// Survival probability of the statistic within `region` under mean `mu0`.
pub fn survival_from_stat(
    stat: f64,
    scale: f64,
    intervals: &[Interval],
    mu0: f64,
) -> Result<f64> {
    let tg = TruncatedGaussian::new(mu0, scale, intervals.to_vec())?;
    Ok(1.0 - tn_cdf(stat, &tg)?)
}

/// Selective p-value for `H0: eta'mu = mu0` given the truncation region.
///
/// Two-sided returns `2 min(nu, 1 - nu)` for the survival value `nu`;
/// one-sided returns the survival value itself (evidence of a positive
/// mean shift).
pub fn selective_pvalue(
    y_obs: ArrayView1<'_, f64>,
    eta: ArrayView1<'_, f64>,
    sigma: f64,
    region: &TruncationRegion,
    mu0: f64,
    sided: Sided,
) -> Result<f64> {
    let stat = eta.dot(&y_obs);
    let scale = sigma * eta.dot(&eta).sqrt();
    if !region.contains(stat) {
        return Err(Error::OutsideRegion { stat });
    }
    let nu = survival_from_stat(stat, scale, region.intervals(), mu0)?;
    Ok(match sided {
        Sided::Two => clip_p(2.0 * nu.min(1.0 - nu)),
        Sided::One => clip_p(nu),
    })
}

/// Core of the confidence interval: invert the pivot in the mean at both
/// tail targets. Monotonicity of the truncated CDF in the mean makes both
/// roots unique and ordered.
pub fn ci_from_stat(stat: f64, scale: f64, intervals: &[Interval], alpha: f64) -> Result<[f64; 2]> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    let lower = tn_root_mu(stat, 1.0 - alpha / 2.0, intervals, scale)?;
    let upper = tn_root_mu(stat, alpha / 2.0, intervals, scale)?;
    Ok([lower.min(upper), lower.max(upper)])
}

/// Selective confidence interval for `eta'mu` at level `1 - alpha`.
pub fn selective_ci(
    y_obs: ArrayView1<'_, f64>,
    eta: ArrayView1<'_, f64>,
    sigma: f64,
    region: &TruncationRegion,
    alpha: f64,
) -> Result<[f64; 2]> {
    let stat = eta.dot(&y_obs);
    let scale = sigma * eta.dot(&eta).sqrt();
    if !region.contains(stat) {
        return Err(Error::OutsideRegion { stat });
    }
    ci_from_stat(stat, scale, region.intervals(), alpha)
}

/// `omega_k = || (X_Mk^+)' s_Mk - (X_Mprev^+)' s_Mprev ||_2` for nested
/// active sets differing by one variable.
pub fn omega(
    x: &DesignMatrix,
    m_prev: &[usize],
    s_prev: &[i8],
    m_cur: &[usize],
    s_cur: &[i8],
) -> Result<f64> {
    if m_cur.len() != m_prev.len() + 1 || !m_prev.iter().all(|j| m_cur.contains(j)) {
        return Err(Error::ModelNotNested {
            prev: m_prev.len(),
            cur: m_cur.len(),
        });
    }
    let s_cur_vec = Array1::from_iter(s_cur.iter().map(|&v| v as f64));
    let w_cur = pinv_transpose_apply(m_cur, x, s_cur_vec.view())?;
    let mut diff = w_cur;
    if !m_prev.is_empty() {
        let s_prev_vec = Array1::from_iter(s_prev.iter().map(|&v| v as f64));
        let w_prev = pinv_transpose_apply(m_prev, x, s_prev_vec.view())?;
        diff -= &w_prev;
    }
    Ok(diff.dot(&diff).sqrt())
}

/// How to evaluate the path-entry covariance statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificanceMode {
    /// Solve both Lasso problems at the next knot and difference the fitted
    /// inner products.
    Direct,
    /// The closed form `omega_k^2 lambda_k (lambda_k - lambda_{k+1}) / sigma^2`.
    ClosedForm,
}

/// Closed-form covariance statistic from the knots.
pub fn significance_from_knots(omega_k: f64, lambda_k: f64, lambda_next: f64, sigma: f64) -> f64 {
    omega_k * omega_k * lambda_k * (lambda_k - lambda_next) / (sigma * sigma)
}

/// The covariance statistic `T_k` for the k-th entry along the path.
pub fn significance_test(
    path: &LarsPath,
    k: usize,
    sigma: f64,
    mode: SignificanceMode,
) -> Result<f64> {
    if k < 1 || k > path.len() {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..={}, got {k}",
            path.len()
        )));
    }
    if k + 1 > path.len() {
        return Err(Error::MissingNextKnot { k });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let lambda_k = path.knot(k);
    let lambda_next = path.knot(k + 1);
    match mode {
        SignificanceMode::ClosedForm => {
            let w = omega(
                path.design(),
                &path.active_at(k - 1),
                &path.signs_at(k - 1),
                &path.active_at(k),
                &path.signs_at(k),
            )?;
            Ok(significance_from_knots(w, lambda_k, lambda_next, sigma))
        }
        SignificanceMode::Direct => {
            let x = path.design();
            let y = path.y();
            if !(lambda_next > 0.0) {
                return Err(Error::InvalidConfig(
                    "direct mode needs a positive next knot".into(),
                ));
            }
            // Full problem at the next knot, polished to machine precision
            // on the discovered support.
            let full = solve_polished(x, y, lambda_next)?;
            let mut fit_full = Array1::zeros(x.n());
            for j in 0..x.p() {
                if full[j] != 0.0 {
                    fit_full.scaled_add(full[j], &x.column(j));
                }
            }
            // Restricted problem on the previous active set.
            let m_prev = path.active_at(k - 1);
            let mut fit_restricted = Array1::zeros(x.n());
            if !m_prev.is_empty() {
                let x_prev = x.restrict(&m_prev)?;
                let restricted = solve_polished(&x_prev, y, lambda_next)?;
                for idx in 0..m_prev.len() {
                    if restricted[idx] != 0.0 {
                        fit_restricted.scaled_add(restricted[idx], &x_prev.column(idx));
                    }
                }
            }
            Ok((y.dot(&fit_full) - y.dot(&fit_restricted)) / (sigma * sigma))
        }
    }
}

/// Coordinate descent followed by an exact solve on the discovered support;
/// falls back to the raw iterate when the polished point fails the KKT check.
fn solve_polished(
    x: &DesignMatrix,
    y: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    let sol = lasso_fit(x, y, lambda, 1e-12, 200_000)?;
    let polished = crate::lasso::polish_on_support(x, y, lambda, &sol.active, &sol.signs)?;
    let (_, violation) = crate::lasso::kkt_check(x, y, lambda, &polished);
    if violation <= 1e-8 {
        Ok(polished)
    } else {
        Ok(sol.beta_hat)
    }
}

/// Survival p-value of the exponential null for the covariance statistic.
/// `rate_index = 1` is the finite-sample recommendation (Exp(1)); larger
/// indices give the Exp(1/r) limits for later post-signal entries and are
/// asymptotic only.
pub fn significance_pvalue(t: f64, rate_index: u32) -> f64 {
    clip_p((-(rate_index as f64) * t).exp())
}

/// Spacing-test flavor: exact uses the competitor bound `c*_{k+1}'y`, the
/// simplified form substitutes the next knot (conservative).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpacingVariant {
    Exact,
    Simplified,
}

/// Spacing statistic from the knot window: the survival of the truncated
/// Gaussian with scale `sigma/omega` on `[lower, lambda_prev]` at
/// `lambda_k`.
pub fn spacing_from_bounds(
    lambda_prev: f64,
    lambda_k: f64,
    lower: f64,
    scale: f64,
) -> Result<f64> {
    let region = [Interval::new(lower, lambda_prev)];
    survival_from_stat(lambda_k, scale, &region, 0.0)
}

/// The spacing test at step `k`: returns `(T_k, two-sided p)`. Under the null
/// that the k-th entered coefficient is zero, the exact variant is uniform
/// conditional on the selection event; the simplified variant is
/// stochastically larger (conservative).
pub fn spacing_test(
    path: &LarsPath,
    k: usize,
    sigma: f64,
    variant: SpacingVariant,
) -> Result<(f64, f64)> {
    if k < 1 || k > path.len() {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..={}, got {k}",
            path.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let w = omega(
        path.design(),
        &path.active_at(k - 1),
        &path.signs_at(k - 1),
        &path.active_at(k),
        &path.signs_at(k),
    )?;
    let lambda_prev = path.knot(k - 1);
    let lambda_k = path.knot(k);
    let lower = match variant {
        SpacingVariant::Exact => c_star(path, k)?,
        SpacingVariant::Simplified => {
            if k + 1 > path.len() {
                return Err(Error::MissingNextKnot { k });
            }
            path.knot(k + 1)
        }
    };
    let t = spacing_from_bounds(lambda_prev, lambda_k, lower, sigma / w)?;
    let p = clip_p(2.0 * t.min(1.0 - t));
    Ok((t, p))
}
