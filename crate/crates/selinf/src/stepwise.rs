//! Forward stepwise selection: the greedy path, its residual recursion, the
//! naive RSS-drop statistic, and the stepwise selection polyhedron.
//!
//! At step k the procedure adds the candidate maximizing
//! `|X_j' P_perp_{k-1} y| / ||P_perp_{k-1} X_j||`, which is the same as
//! minimizing the post-fit residual norm. Selecting `j_k` with sign `s_k`
//! against every other candidate is a pair of linear inequalities in `y`, so
//! an m-step path pins down a polyhedron with `2pm - m^2 - m` rows.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linmodel::DesignMatrix;
use crate::polytope::{Polyhedron, RowTag};

/// Candidates whose projected column norm falls below this multiple of the
/// original column norm are treated as collinear and skipped.
const COLLINEAR_REL_TOL: f64 = 1e-10;

/// A fitted forward-stepwise path.
#[derive(Debug, Clone)]
pub struct FsPath {
    /// Selected columns, in entry order.
    pub order: Vec<usize>,
    /// Sign of the entering coefficient at each step.
    pub signs: Vec<i8>,
    /// Residuals `r_0 = y, r_1, ..., r_m`.
    pub residuals: Vec<Array1<f64>>,
    /// Residual sums of squares `||r_0||^2, ..., ||r_m||^2` (nonincreasing).
    pub rss: Vec<f64>,
}

impl FsPath {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Active set after `k` steps.
    pub fn model_at(&self, k: usize) -> &[usize] {
        &self.order[..k]
    }
}

struct Deflation {
    /// Projected columns `P_perp_{k-1} X_j` for every j.
    cols: Vec<Array1<f64>>,
    /// Original column norms, the collinearity reference scale.
    base_norms: Vec<f64>,
    /// Current residual `P_perp_{k-1} y`.
    resid: Array1<f64>,
}

impl Deflation {
    fn new(x: &DesignMatrix, y: ArrayView1<'_, f64>) -> Self {
        let cols: Vec<Array1<f64>> = (0..x.p()).map(|j| x.column(j).to_owned()).collect();
        let base_norms = cols.iter().map(|c| c.dot(c).sqrt()).collect();
        Deflation {
            cols,
            base_norms,
            resid: y.to_owned(),
        }
    }

    /// Orthonormalizes against the winner and deflates everything.
    fn absorb(&mut self, j_win: usize) {
        let w = &self.cols[j_win];
        let norm = w.dot(w).sqrt();
        let u = w.mapv(|v| v / norm);
        for col in self.cols.iter_mut() {
            let coef = u.dot(col);
            col.scaled_add(-coef, &u);
        }
        let coef = u.dot(&self.resid);
        self.resid.scaled_add(-coef, &u);
    }

    fn usable(&self, j: usize) -> bool {
        self.cols[j].dot(&self.cols[j]).sqrt() > COLLINEAR_REL_TOL * self.base_norms[j].max(1e-300)
    }
}

/// Runs forward stepwise for `steps` steps. Ties break toward the smallest
/// column index; candidates collinear with the current model are skipped, and
/// the step errors only when every remaining candidate is collinear.
pub fn fs_path(x: &DesignMatrix, y: ArrayView1<'_, f64>, steps: usize) -> Result<FsPath> {
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::InvalidConfig(format!(
            "response length {} does not match n = {n}",
            y.len()
        )));
    }
    let max_steps = p.min(n.saturating_sub(1));
    if steps < 1 || steps > max_steps {
        return Err(Error::InvalidConfig(format!(
            "steps must lie in 1..={max_steps}, got {steps}"
        )));
    }

    let mut state = Deflation::new(x, y);
    let mut selected = vec![false; p];
    let mut order = Vec::with_capacity(steps);
    let mut signs = Vec::with_capacity(steps);
    let mut residuals = vec![y.to_owned()];
    let mut rss = vec![y.dot(&y)];

    for k in 1..=steps {
        let mut best: Option<(usize, f64, f64)> = None; // (j, score, correlation)
        for j in 0..p {
            if selected[j] || !state.usable(j) {
                continue;
            }
            let w = &state.cols[j];
            let corr = w.dot(&state.resid);
            let score = corr.abs() / w.dot(w).sqrt();
            if best.map_or(true, |(_, s, _)| score > s) {
                best = Some((j, score, corr));
            }
        }
        let (j_win, _, corr) = best.ok_or(Error::CollinearCandidate { step: k })?;
        order.push(j_win);
        signs.push(if corr >= 0.0 { 1 } else { -1 });
        selected[j_win] = true;
        state.absorb(j_win);
        residuals.push(state.resid.clone());
        rss.push(state.resid.dot(&state.resid));
    }

    Ok(FsPath {
        order,
        signs,
        residuals,
        rss,
    })
}

/// The selection polyhedron of the first `m` steps: for each step k and each
/// candidate j outside the k-step model, the two rows
/// `(+- X_j'P_perp/||X_j'P_perp|| - s_k X_jk'P_perp/||X_jk'P_perp||) y <= 0`.
/// Full row count is `sum_k 2(p - k) = 2pm - m^2 - m` when no candidate is
/// collinear.
pub fn fs_polyhedron(x: &DesignMatrix, path: &FsPath, m: usize) -> Result<Polyhedron> {
    let (n, p) = (x.n(), x.p());
    if m < 1 || m > path.len() {
        return Err(Error::InvalidConfig(format!(
            "m must lie in 1..={}, got {m}",
            path.len()
        )));
    }

    // Replay the deflation along the recorded order; y is not needed.
    let mut state = Deflation::new(x, Array1::zeros(n).view());
    let mut rows: Vec<(Array1<f64>, f64, RowTag)> = Vec::with_capacity(2 * p * m);
    for k in 1..=m {
        let j_k = path.order[k - 1];
        let s_k = path.signs[k - 1] as f64;
        let w = &state.cols[j_k];
        let w_unit = w.mapv(|v| v / w.dot(w).sqrt());
        for j in 0..p {
            if path.order[..k].contains(&j) || !state.usable(j) {
                continue;
            }
            let v = &state.cols[j];
            let v_unit = v.mapv(|c| c / v.dot(v).sqrt());
            let mut row_plus = v_unit.clone();
            row_plus.scaled_add(-s_k, &w_unit);
            let mut row_minus = v_unit.mapv(|c| -c);
            row_minus.scaled_add(-s_k, &w_unit);
            rows.push((row_plus, 0.0, RowTag::FsStep(k)));
            rows.push((row_minus, 0.0, RowTag::FsStep(k)));
        }
        state.absorb(j_k);
    }
    Polyhedron::from_rows(n, rows)
}

/// The naive RSS-drop statistic `R_k = (RSS_{k-1} - RSS_k) / sigma^2`. Under
/// the global null it is stochastically larger than chi-square(1) because the
/// step picks the best of all remaining candidates.
pub fn r_stat(path: &FsPath, k: usize, sigma: f64) -> Result<f64> {
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
    Ok(((path.rss[k - 1] - path.rss[k]) / (sigma * sigma)).max(0.0))
}
