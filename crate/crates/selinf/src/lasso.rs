//! Lasso solver, KKT-based active-set extraction, and the sign-conditioned
//! selection polyhedron.
//!
//! For the objective `1/2 ||y - X beta||^2 + lambda ||beta||_1`, stationarity
//! reads `X'(X beta - y) + lambda s = 0` with `s_j = sign(beta_j)` on the
//! active set and `|s_j| <= 1` off it. Conditioning on the realized active
//! set `M` and signs `s`, those conditions are linear in `y`:
//!
//! ```text
//! [  (1/lambda) X_-M' P_M_perp ]        [ 1 - X_-M' (X_M')^+ s          ]
//! [ -(1/lambda) X_-M' P_M_perp ]  y <=  [ 1 + X_-M' (X_M')^+ s          ]
//! [ -diag(s) X_M^+             ]        [ -lambda diag(s) (X_M'X_M)^-1 s ]
//! ```
//!
//! which is the `(2p - m)`-row selection event used for conditional inference.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linmodel::{DesignMatrix, ThinQr, DEFAULT_RANK_TOL};
use crate::polytope::{Polyhedron, RowTag};

/// Relative threshold under which a fitted coordinate counts as zero.
pub const ACTIVE_SET_REL_TOL: f64 = 1e-10;

/// Default cap on enumerated sign patterns (2^20).
pub const DEFAULT_MAX_SIGN_PATTERNS: usize = 1 << 20;

/// A fitted Lasso problem at a fixed penalty.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta_hat: Array1<f64>,
    pub lambda: f64,
    /// Active coordinates, ascending.
    pub active: Vec<usize>,
    /// Signs of the active coordinates, matching `active`.
    pub signs: Vec<i8>,
    pub dual_gap: f64,
    pub sweeps: usize,
}

impl LassoSolution {
    /// Signs as a float vector aligned with `active`.
    pub fn sign_vector(&self) -> Array1<f64> {
        Array1::from_iter(self.signs.iter().map(|&s| s as f64))
    }
}

/// Reads the active set and signs off a coefficient vector, declaring zero
/// every coordinate below `rel_tol * max|beta|`.
pub fn active_set(beta: &Array1<f64>, rel_tol: f64) -> (Vec<usize>, Vec<i8>) {
    let max_abs = beta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thr = rel_tol * max_abs;
    let mut active = Vec::new();
    let mut signs = Vec::new();
    for (j, &b) in beta.iter().enumerate() {
        if b.abs() > thr && b != 0.0 {
            active.push(j);
            signs.push(if b > 0.0 { 1 } else { -1 });
        }
    }
    (active, signs)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent with a duality-gap stopping rule: iteration ends
/// once `gap <= tol * (1/2 ||y||^2)`.
pub fn lasso_fit(
    x: &DesignMatrix,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::InvalidConfig(format!(
            "response length {} does not match n = {n}",
            y.len()
        )));
    }

    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).dot(&x.column(j))).collect();
    let half_y2 = 0.5 * y.dot(&y);
    let gap_target = tol * half_y2;

    let mut beta = Array1::zeros(p);
    let mut r = y.to_owned();
    let mut gap = duality_gap(x, y, &beta, &r, lambda);
    let mut sweeps = 0usize;

    while gap > gap_target {
        if sweeps >= max_iter {
            return Err(Error::DidNotConverge {
                iters: sweeps,
                gap,
                beta: beta.to_vec(),
            });
        }
        for j in 0..p {
            let g = col_sq[j];
            if g <= 1e-24 {
                continue;
            }
            let old = beta[j];
            let rho = x.column(j).dot(&r) + g * old;
            let new = soft_threshold(rho, lambda) / g;
            if new != old {
                r.scaled_add(old - new, &x.column(j));
                beta[j] = new;
            }
        }
        sweeps += 1;
        gap = duality_gap(x, y, &beta, &r, lambda);
    }

    let (active, signs) = active_set(&beta, ACTIVE_SET_REL_TOL);
    Ok(LassoSolution {
        beta_hat: beta,
        lambda,
        active,
        signs,
        dual_gap: gap,
        sweeps,
    })
}

/// Primal-dual gap at `beta` with residual `r = y - X beta`; the dual point
/// is the residual scaled into the feasible set `||X' theta||_inf <= lambda`.
fn duality_gap(
    x: &DesignMatrix,
    y: ArrayView1<'_, f64>,
    beta: &Array1<f64>,
    r: &Array1<f64>,
    lambda: f64,
) -> f64 {
    let p = x.p();
    let mut corr_inf = 0.0f64;
    for j in 0..p {
        corr_inf = corr_inf.max(x.column(j).dot(r).abs());
    }
    let scale = if corr_inf > lambda {
        lambda / corr_inf
    } else {
        1.0
    };
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let primal = 0.5 * r.dot(r) + lambda * l1;
    let mut y_minus_theta = y.to_owned();
    y_minus_theta.scaled_add(-scale, r);
    let dual = 0.5 * y.dot(&y) - 0.5 * y_minus_theta.dot(&y_minus_theta);
    (primal - dual).max(0.0)
}

/// Subgradient vector `s_hat = X'(y - X beta)/lambda` and the worst KKT
/// violation: `|s_j - sign(beta_j)|` on the active set, `max(0, |s_j| - 1)`
/// off it. A solution passes at violation <= 1e-6.
pub fn kkt_check(
    x: &DesignMatrix,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    beta_hat: &Array1<f64>,
) -> (Array1<f64>, f64) {
    let p = x.p();
    let mut r = y.to_owned();
    for j in 0..p {
        if beta_hat[j] != 0.0 {
            r.scaled_add(-beta_hat[j], &x.column(j));
        }
    }
    let s_hat = Array1::from_shape_fn(p, |j| x.column(j).dot(&r) / lambda);
    let (active, signs) = active_set(beta_hat, ACTIVE_SET_REL_TOL);
    let mut violation = 0.0f64;
    let mut is_active = vec![false; p];
    for (&j, &s) in active.iter().zip(&signs) {
        is_active[j] = true;
        violation = violation.max((s_hat[j] - s as f64).abs());
    }
    for j in 0..p {
        if !is_active[j] {
            violation = violation.max((s_hat[j].abs() - 1.0).max(0.0));
        }
    }
    (s_hat, violation)
}

/// The `(2p - m)`-row polyhedron of `{active set = m, signs = s}` at the
/// given penalty.
pub fn lasso_polyhedron(
    x: &DesignMatrix,
    m: &[usize],
    s: &[i8],
    lambda: f64,
) -> Result<Polyhedron> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if m.len() != s.len() {
        return Err(Error::InvalidConfig(format!(
            "active set has {} indices but {} signs",
            m.len(),
            s.len()
        )));
    }
    let (n, p) = (x.n(), x.p());
    let inactive: Vec<usize> = (0..p).filter(|j| !m.contains(j)).collect();

    let mut rows: Vec<(Array1<f64>, f64, RowTag)> = Vec::with_capacity(2 * p - m.len());
    if m.is_empty() {
        for &j in &inactive {
            let col = x.column(j).to_owned();
            rows.push((col.mapv(|v| v / lambda), 1.0, RowTag::LassoInactive));
        }
        for &j in &inactive {
            let col = x.column(j).to_owned();
            rows.push((col.mapv(|v| -v / lambda), 1.0, RowTag::LassoInactive));
        }
        return Polyhedron::from_rows(n, rows);
    }

    let qr = ThinQr::factor(x.submatrix(m).view(), DEFAULT_RANK_TOL)?;
    let s_vec = Array1::from_iter(s.iter().map(|&v| v as f64));
    // w = X_M (X_M'X_M)^-1 s and g = (X_M'X_M)^-1 s drive both offset blocks.
    let w = qr.pinv_transpose_apply(s_vec.view());
    let g = qr.gram_inverse_apply(s_vec.view());

    let mut upper = Vec::with_capacity(inactive.len());
    let mut lower = Vec::with_capacity(inactive.len());
    for &j in &inactive {
        let col = x.column(j);
        let proj = qr.project_complement(col);
        let shift = col.dot(&w);
        upper.push((proj.mapv(|v| v / lambda), 1.0 - shift, RowTag::LassoInactive));
        lower.push((proj.mapv(|v| -v / lambda), 1.0 + shift, RowTag::LassoInactive));
    }
    rows.extend(upper);
    rows.extend(lower);

    for (i, &si) in s.iter().enumerate() {
        let mut e_i = Array1::zeros(m.len());
        e_i[i] = 1.0;
        let w_i = qr.pinv_transpose_apply(e_i.view());
        rows.push((
            w_i.mapv(|v| -(si as f64) * v),
            -lambda * (si as f64) * g[i],
            RowTag::LassoSign,
        ));
    }
    Polyhedron::from_rows(n, rows)
}

/// Active set at the given penalty, pushed to coordinate-descent
/// stagnation. Used as the selection key in line searches, where the event
/// boundary must be located well below the comparison tolerance; a duality
/// gap that stalls above the (unreachable) target is accepted and the last
/// iterate is used.
pub fn lasso_support(
    x: &DesignMatrix,
    y: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<Vec<usize>> {
    match lasso_fit(x, y, lambda, 1e-15, 3000) {
        Ok(sol) => Ok(sol.active),
        Err(Error::DidNotConverge { beta, .. }) => {
            Ok(active_set(&Array1::from_vec(beta), ACTIVE_SET_REL_TOL).0)
        }
        Err(e) => Err(e),
    }
}

/// Exact minimizer restricted to a known support: the stationarity system
/// `X_A'X_A beta_A = X_A'y - lambda s_A` solved by QR. Used to polish a
/// coordinate-descent iterate to machine precision once the support has
/// stabilized; the caller should re-check the KKT conditions afterwards.
pub fn polish_on_support(
    x: &DesignMatrix,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    active: &[usize],
    signs: &[i8],
) -> Result<Array1<f64>> {
    let mut beta = Array1::zeros(x.p());
    if active.is_empty() {
        return Ok(beta);
    }
    let qr = ThinQr::factor(x.submatrix(active).view(), DEFAULT_RANK_TOL)?;
    let sub = x.submatrix(active);
    let mut rhs = sub.t().dot(&y);
    for (i, &s) in signs.iter().enumerate() {
        rhs[i] -= lambda * s as f64;
    }
    let coefs = qr.gram_inverse_apply(rhs.view());
    for (i, &j) in active.iter().enumerate() {
        beta[j] = coefs[i];
    }
    Ok(beta)
}

/// One polyhedron per sign pattern; their union is the event
/// `{active set = m}` regardless of signs. Patterns are enumerated in binary
/// order with `+1` for a zero bit, so the all-plus pattern comes first.
pub fn lasso_model_region(
    x: &DesignMatrix,
    m: &[usize],
    lambda: f64,
    max_signs: usize,
) -> Result<Vec<Polyhedron>> {
    let k = m.len();
    if k >= usize::BITS as usize - 1 || (1usize << k) > max_signs {
        return Err(Error::TooManySignPatterns {
            m: k,
            cap: max_signs,
        });
    }
    let mut out = Vec::with_capacity(1 << k);
    for mask in 0u64..(1u64 << k) {
        let signs: Vec<i8> = (0..k)
            .map(|i| if mask & (1 << i) == 0 { 1 } else { -1 })
            .collect();
        out.push(lasso_polyhedron(x, m, &signs, lambda)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::sample_standard_normal;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((n, p), |_| sample_standard_normal(&mut rng));
        DesignMatrix::new(data).unwrap()
    }

    #[test]
    fn orthonormal_soft_threshold_oracle() {
        // With X'X = I the minimizer is coordinatewise soft thresholding of
        // X'y; the identity design realizes it directly.
        let x = DesignMatrix::new(Array2::eye(3)).unwrap();
        let y = arr1(&[3.0, -1.0, 0.5]);
        let sol = lasso_fit(&x, y.view(), 1.0, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(sol.beta_hat[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.beta_hat[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.beta_hat[2], 0.0, epsilon = 1e-12);
        assert_eq!(sol.active, vec![0]);
        assert_eq!(sol.signs, vec![1]);
    }

    #[test]
    fn lambda_above_first_knot_gives_zero() {
        let x = random_design(10, 4, 3);
        let y = arr1(&(0..10).map(|i| (i as f64 * 0.9).sin()).collect::<Vec<_>>());
        let lambda_max = (0..4)
            .map(|j| x.column(j).dot(&y).abs())
            .fold(0.0f64, f64::max);
        let sol = lasso_fit(&x, y.view(), lambda_max * 1.0001, 1e-12, 1000).unwrap();
        assert!(sol.active.is_empty());
        assert!(sol.beta_hat.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn vanishing_penalty_recovers_least_squares() {
        let x = random_design(15, 3, 11);
        let y = arr1(&(0..15).map(|i| (i as f64 * 0.37).cos()).collect::<Vec<_>>());
        let sol = lasso_fit(&x, y.view(), 1e-9, 1e-14, 100_000).unwrap();
        let ols = crate::linmodel::least_squares(&x, &[0, 1, 2], y.view()).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(sol.beta_hat[j], ols[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn kkt_passes_on_exact_solution() {
        let x = DesignMatrix::new(Array2::eye(4)).unwrap();
        let y = arr1(&[2.0, -3.0, 0.2, 0.0]);
        let lambda = 0.5;
        // Exact orthonormal solution by soft thresholding.
        let beta = arr1(&[1.5, -2.5, 0.0, 0.0]);
        let (_, viol) = kkt_check(&x, y.view(), lambda, &beta);
        assert!(viol <= 1e-10, "violation {viol}");
    }

    #[test]
    fn kkt_zero_solution_far_from_threshold() {
        let x = random_design(8, 3, 19);
        let y = arr1(&(0..8).map(|i| 0.3 * i as f64 - 1.0).collect::<Vec<_>>());
        let lambda_max = (0..3)
            .map(|j| x.column(j).dot(&y).abs())
            .fold(0.0f64, f64::max);
        let beta = Array1::zeros(3);
        let (s_hat, viol) = kkt_check(&x, y.view(), 2.0 * lambda_max, &beta);
        assert_eq!(viol, 0.0);
        assert!(s_hat.iter().all(|s| s.abs() <= 0.5 + 1e-12));
    }

    #[test]
    fn kkt_detects_perturbation() {
        let x = DesignMatrix::new(Array2::eye(3)).unwrap();
        let y = arr1(&[3.0, -1.0, 0.5]);
        let sol = lasso_fit(&x, y.view(), 1.0, 1e-12, 1000).unwrap();
        let mut beta = sol.beta_hat.clone();
        beta[0] += 0.1;
        let (_, viol) = kkt_check(&x, y.view(), 1.0, &beta);
        assert!(viol > 0.01, "violation {viol}");
    }

    #[test]
    fn monotone_descent_across_sweeps() {
        let x = random_design(12, 5, 29);
        let y = arr1(&(0..12).map(|i| (i as f64).sin() + 0.2).collect::<Vec<_>>());
        let lambda = 0.4;
        let objective = |beta: &[f64]| -> f64 {
            let mut r = y.clone();
            for (j, &b) in beta.iter().enumerate() {
                r.scaled_add(-b, &x.column(j));
            }
            0.5 * r.dot(&r) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
        };
        let mut prev = objective(&vec![0.0; 5]);
        for k in 1..8 {
            // tol = 0 forces the sweep budget to bind; read off the iterate.
            let err = lasso_fit(&x, y.view(), lambda, 0.0, k).unwrap_err();
            match err {
                Error::DidNotConverge { beta, .. } => {
                    let obj = objective(&beta);
                    assert!(obj <= prev + 1e-12, "sweep {k}: {obj} > {prev}");
                    prev = obj;
                }
                other => panic!("expected DidNotConverge, got {other:?}"),
            }
        }
    }

    #[test]
    fn solution_invariant_to_column_permutation() {
        let x = random_design(14, 4, 37);
        let y = arr1(&(0..14).map(|i| (i as f64 * 0.51).sin()).collect::<Vec<_>>());
        let lambda = 0.3;
        let sol = lasso_fit(&x, y.view(), lambda, 1e-13, 10_000).unwrap();

        let perm = [2usize, 0, 3, 1];
        let x_perm = DesignMatrix::new(x.submatrix(&perm)).unwrap();
        let sol_perm = lasso_fit(&x_perm, y.view(), lambda, 1e-13, 10_000).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            assert_abs_diff_eq!(sol_perm.beta_hat[k], sol.beta_hat[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn polyhedron_single_column_specialization() {
        // p = 1, M = {0}, s = +1, unit-norm column: one row -X_1' with
        // offset -lambda, i.e. membership means X_1'y >= lambda.
        let x = DesignMatrix::new(arr1(&[0.6, 0.8]).insert_axis(ndarray::Axis(1))).unwrap();
        let lambda = 0.7;
        let poly = lasso_polyhedron(&x, &[0], &[1], lambda).unwrap();
        assert_eq!(poly.nrows(), 1);
        assert_abs_diff_eq!(poly.a()[(0, 0)], -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(poly.a()[(0, 1)], -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(poly.b()[0], -lambda, epsilon = 1e-12);

        let y_in = arr1(&[0.9, 1.2]); // X_1'y = 1.5 >= 0.7
        assert!(poly.contains(y_in.view(), 0.0));
        let y_out = arr1(&[0.1, 0.1]);
        assert!(!poly.contains(y_out.view(), 0.0));
    }

    #[test]
    fn polyhedron_contains_its_own_fit() {
        let x = random_design(20, 5, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let y = Array1::from_shape_fn(20, |_| sample_standard_normal(&mut rng));
        let sol = lasso_fit(&x, y.view(), 1.5, 1e-13, 50_000).unwrap();
        assert!(!sol.active.is_empty(), "want a nonempty event for the test");
        let poly = lasso_polyhedron(&x, &sol.active, &sol.signs, 1.5).unwrap();
        let (_, violation) = poly.max_violation(y.view());
        assert!(violation <= 1e-9, "violation {violation}");
        assert_eq!(poly.nrows(), 2 * 5 - sol.active.len());
    }

    #[test]
    fn flipped_sign_pattern_is_violated() {
        let x = random_design(20, 5, 59);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let y = Array1::from_shape_fn(20, |_| sample_standard_normal(&mut rng));
        let sol = lasso_fit(&x, y.view(), 1.2, 1e-13, 50_000).unwrap();
        assert!(!sol.active.is_empty());
        let mut flipped = sol.signs.clone();
        flipped[0] = -flipped[0];
        let poly = lasso_polyhedron(&x, &sol.active, &flipped, 1.2).unwrap();
        let (_, violation) = poly.max_violation(y.view());
        assert!(violation > 0.0, "flipped signs must exclude the observation");
    }

    #[test]
    fn model_region_counts_and_caps() {
        let x = random_design(6, 2, 71);
        // m = 1 -> exactly 2 polyhedra.
        let polys = lasso_model_region(&x, &[0], 0.5, DEFAULT_MAX_SIGN_PATTERNS).unwrap();
        assert_eq!(polys.len(), 2);
        // m = 0 -> a single polyhedron with 2p rows.
        let polys0 = lasso_model_region(&x, &[], 0.5, DEFAULT_MAX_SIGN_PATTERNS).unwrap();
        assert_eq!(polys0.len(), 1);
        assert_eq!(polys0[0].nrows(), 4);
        // Cap rule.
        let m21: Vec<usize> = (0..21).collect();
        match lasso_model_region(&x, &m21, 0.5, DEFAULT_MAX_SIGN_PATTERNS) {
            Err(Error::TooManySignPatterns { m: 21, .. }) => {}
            other => panic!("expected TooManySignPatterns, got {other:?}"),
        }
    }

    #[test]
    fn selection_event_equivalence_small_instances() {
        // Resampled equivalence of the KKT characterization: the fitted
        // (M, s) polyhedron contains y, and no other pattern's polyhedron
        // contains y strictly. The acceptance suite runs this at scale.
        let x = random_design(6, 3, 83);
        let lambda = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let patterns = all_patterns(3);
        for _ in 0..100 {
            let y = Array1::from_shape_fn(6, |_| sample_standard_normal(&mut rng));
            let sol = lasso_fit(&x, y.view(), lambda, 1e-14, 100_000).unwrap();
            let own = lasso_polyhedron(&x, &sol.active, &sol.signs, lambda).unwrap();
            assert!(
                own.contains(y.view(), 1e-7),
                "own polyhedron must contain the sample"
            );
            for (m, s) in &patterns {
                if *m == sol.active && *s == sol.signs {
                    continue;
                }
                if let Ok(poly) = lasso_polyhedron(&x, m, s, lambda) {
                    assert!(
                        !poly.contains(y.view(), -1e-7),
                        "pattern {m:?}/{s:?} strictly contains a sample fitted as {:?}/{:?}",
                        sol.active,
                        sol.signs
                    );
                }
            }
        }
    }

    /// Every (subset, sign) pattern over p variables.
    fn all_patterns(p: usize) -> Vec<(Vec<usize>, Vec<i8>)> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << p) {
            let subset: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
            let k = subset.len();
            for smask in 0u32..(1 << k) {
                let signs: Vec<i8> = (0..k)
                    .map(|i| if smask & (1 << i) == 0 { 1 } else { -1 })
                    .collect();
                out.push((subset.clone(), signs));
            }
        }
        out
    }
}
