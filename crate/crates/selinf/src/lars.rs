//! Least angle regression: the knot path, the candidate direction vectors
//! `c_k(j,s)`, competitor bookkeeping, and the selection polyhedron in exact
//! and reduced (k+1 row) forms.
//!
//! With the active set `M` and signs `s_M` fixed, a candidate pair `(j, s)`
//! enters when `c_k(j,s)'y` hits the current penalty level, where
//!
//! ```text
//! c_k(j,s) = P_perp_{M} X_j / (s - X_j' (X_M^+)' s_M)
//! ```
//!
//! The knots are `lambda_k = c_k(j_k,s_k)'y` in nonincreasing order, active
//! coordinates keep `X_j'r(lambda) = +-lambda` all the way down, and the
//! whole selection history is a polyhedron in `y`.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linmodel::{DesignMatrix, ThinQr, DEFAULT_RANK_TOL};
use crate::polytope::{Polyhedron, RowTag};

/// Candidate denominators smaller than this are treated as degenerate and the
/// pair is excluded from competition.
const DENOM_GUARD: f64 = 1e-12;

/// Projected candidate columns below this relative norm are collinear with
/// the active set and dropped.
const COLLINEAR_REL_TOL: f64 = 1e-10;

/// A candidate direction `c_k(j, s)`.
#[derive(Debug, Clone)]
pub struct CVector {
    pub j: usize,
    pub s: i8,
    pub vector: Array1<f64>,
}

/// Bookkeeping for one `(j, s)` pair examined at a step.
#[derive(Debug, Clone)]
pub struct CandidateRecord {
    pub j: usize,
    pub s: i8,
    /// `c_k(j,s)'y`; the knot this pair would enter at.
    pub value: f64,
    /// `c_k(j,s)'c_k(j_k,s_k)`, used to classify the competitor sets.
    pub dot_entry: f64,
    /// Whether the pair is a competitor (value at most the previous knot).
    pub competitor: bool,
    /// Set when the denominator guard tripped; such pairs carry no vector.
    pub degenerate: bool,
    pub vector: Option<Array1<f64>>,
}

/// One step of the path.
#[derive(Debug, Clone)]
pub struct LarsStep {
    pub j: usize,
    pub s: i8,
    pub lambda: f64,
    /// Realized direction `c_k(j_k, s_k)`.
    pub c_entry: Array1<f64>,
    /// Every pair examined at this step, including the winner.
    pub candidates: Vec<CandidateRecord>,
    /// Coefficients at this knot (length p).
    pub beta: Array1<f64>,
    /// Residual `y - X beta` at this knot.
    pub residual: Array1<f64>,
}

/// A fitted LARS path. The design and response are kept so polyhedra and
/// downstream tests can be built from the path alone.
#[derive(Debug, Clone)]
pub struct LarsPath {
    design: DesignMatrix,
    y: Array1<f64>,
    steps: Vec<LarsStep>,
}

impl LarsPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn steps(&self) -> &[LarsStep] {
        &self.steps
    }

    pub fn step(&self, k: usize) -> &LarsStep {
        &self.steps[k - 1]
    }

    pub fn knots(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda).collect()
    }

    pub fn entries(&self) -> Vec<(usize, i8)> {
        self.steps.iter().map(|s| (s.j, s.s)).collect()
    }

    /// Knot `lambda_k`, with `lambda_0 = +inf`.
    pub fn knot(&self, k: usize) -> f64 {
        if k == 0 {
            f64::INFINITY
        } else {
            self.steps[k - 1].lambda
        }
    }

    /// Active set after `k` steps, in entry order.
    pub fn active_at(&self, k: usize) -> Vec<usize> {
        self.steps[..k].iter().map(|s| s.j).collect()
    }

    /// Entry signs after `k` steps.
    pub fn signs_at(&self, k: usize) -> Vec<i8> {
        self.steps[..k].iter().map(|s| s.s).collect()
    }

    /// Competitor and non-competitor pairs recorded at step `k`.
    pub fn competitors(&self, k: usize) -> (Vec<(usize, i8)>, Vec<(usize, i8)>) {
        let mut c = Vec::new();
        let mut d = Vec::new();
        for rec in &self.steps[k - 1].candidates {
            if rec.competitor {
                c.push((rec.j, rec.s));
            } else {
                d.push((rec.j, rec.s));
            }
        }
        (c, d)
    }
}

/// The direction vector `c_k(j, s)` for candidate `j` with sign `s`, given
/// the active set `m_prev` with signs `s_prev`.
pub fn lars_c(
    x: &DesignMatrix,
    m_prev: &[usize],
    s_prev: &[i8],
    j: usize,
    s: i8,
) -> Result<CVector> {
    if m_prev.contains(&j) {
        return Err(Error::InvalidConfig(format!(
            "candidate {j} already belongs to the active set"
        )));
    }
    if m_prev.len() != s_prev.len() {
        return Err(Error::InvalidConfig(
            "active set and sign vector lengths differ".into(),
        ));
    }
    let col = x.column(j).to_owned();
    let (proj, shift) = if m_prev.is_empty() {
        (col, 0.0)
    } else {
        let qr = ThinQr::factor(x.submatrix(m_prev).view(), DEFAULT_RANK_TOL)?;
        let s_vec = Array1::from_iter(s_prev.iter().map(|&v| v as f64));
        let w = qr.pinv_transpose_apply(s_vec.view());
        (qr.project_complement(x.column(j)), x.column(j).dot(&w))
    };
    let denom = s as f64 - shift;
    if denom.abs() <= DENOM_GUARD {
        return Err(Error::DegenerateDenominator { j, s });
    }
    Ok(CVector {
        j,
        s,
        vector: proj.mapv(|v| v / denom),
    })
}

/// Runs LARS for `steps` knots. Ties break toward the smallest index, then
/// the positive sign.
pub fn lars_path(x: &DesignMatrix, y: ArrayView1<'_, f64>, steps: usize) -> Result<LarsPath> {
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

    let mut path_steps: Vec<LarsStep> = Vec::with_capacity(steps);
    let mut beta = Array1::<f64>::zeros(p);
    let mut residual = y.to_owned();

    for k in 1..=steps {
        let active: Vec<usize> = path_steps.iter().map(|s| s.j).collect();
        let lambda_prev = if k == 1 {
            f64::INFINITY
        } else {
            path_steps[k - 2].lambda
        };

        // Shared projection data for this step.
        let qr = if active.is_empty() {
            None
        } else {
            Some(ThinQr::factor(x.submatrix(&active).view(), DEFAULT_RANK_TOL)?)
        };
        let w = qr.as_ref().map(|qr| {
            let s_vec =
                Array1::from_iter(path_steps.iter().map(|st| st.s as f64));
            qr.pinv_transpose_apply(s_vec.view())
        });

        let mut candidates: Vec<CandidateRecord> = Vec::new();
        let mut any_usable = false;
        for j in 0..p {
            if active.contains(&j) {
                continue;
            }
            let col = x.column(j);
            let proj = match &qr {
                Some(qr) => qr.project_complement(col),
                None => col.to_owned(),
            };
            let col_norm = col.dot(&col).sqrt();
            if proj.dot(&proj).sqrt() <= COLLINEAR_REL_TOL * col_norm.max(1e-300) {
                continue;
            }
            any_usable = true;
            let shift = match &w {
                Some(w) => col.dot(w),
                None => 0.0,
            };
            let proj_y = proj.dot(&y);
            for s in [1i8, -1i8] {
                let denom = s as f64 - shift;
                if denom.abs() <= DENOM_GUARD {
                    candidates.push(CandidateRecord {
                        j,
                        s,
                        value: f64::NAN,
                        dot_entry: f64::NAN,
                        competitor: false,
                        degenerate: true,
                        vector: None,
                    });
                    continue;
                }
                let vector = proj.mapv(|v| v / denom);
                let value = proj_y / denom;
                candidates.push(CandidateRecord {
                    j,
                    s,
                    value,
                    dot_entry: 0.0,
                    competitor: !value.is_nan() && value <= lambda_prev,
                    degenerate: false,
                    vector: Some(vector),
                });
            }
        }
        if !any_usable {
            return Err(Error::CollinearCandidate { step: k });
        }

        // Winner: largest competitor value in [0, lambda_prev].
        let mut winner: Option<usize> = None;
        for (idx, rec) in candidates.iter().enumerate() {
            if rec.degenerate || !rec.competitor || rec.value < 0.0 {
                continue;
            }
            let better = match winner {
                None => true,
                Some(w_idx) => {
                    let w_rec = &candidates[w_idx];
                    rec.value > w_rec.value
                        || (rec.value == w_rec.value
                            && (rec.j < w_rec.j || (rec.j == w_rec.j && rec.s > w_rec.s)))
                }
            };
            if better {
                winner = Some(idx);
            }
        }
        let w_idx = winner.ok_or(Error::NoFeasibleEntry { step: k })?;
        let lambda_k = candidates[w_idx].value;
        let (j_k, s_k) = (candidates[w_idx].j, candidates[w_idx].s);
        let c_entry = candidates[w_idx].vector.clone().expect("winner has a vector");

        for rec in candidates.iter_mut() {
            if let Some(v) = &rec.vector {
                rec.dot_entry = v.dot(&c_entry);
            }
        }

        // Path update: beta moves along the restricted least-squares
        // direction until the new knot.
        if let Some(qr) = &qr {
            let coef = qr.solve_ls(residual.view());
            let scale = 1.0 - lambda_k / lambda_prev;
            for (idx, &j) in active.iter().enumerate() {
                beta[j] += scale * coef[idx];
            }
            residual = y.to_owned();
            for j in 0..p {
                if beta[j] != 0.0 {
                    residual.scaled_add(-beta[j], &x.column(j));
                }
            }
        }

        path_steps.push(LarsStep {
            j: j_k,
            s: s_k,
            lambda: lambda_k,
            c_entry,
            candidates,
            beta: beta.clone(),
            residual: residual.clone(),
        });
    }

    Ok(LarsPath {
        design: x.clone(),
        y: y.to_owned(),
        steps: path_steps,
    })
}

/// Pairs in the set `S_k^+` at step `k`: candidates outside the step-k model
/// whose direction is not steeper than the entry (`c'c_entry <= ||c_entry||^2`)
/// and whose knot value did not exceed `lambda_k`.
fn s_plus_pairs(path: &LarsPath, k: usize) -> Vec<(usize, i8)> {
    let step = path.step(k);
    let norm2 = step.c_entry.dot(&step.c_entry);
    let lambda_k = step.lambda;
    step.candidates
        .iter()
        .filter(|rec| {
            !rec.degenerate
                && rec.j != step.j
                && rec.dot_entry <= norm2 * (1.0 + 1e-10)
                && rec.value <= lambda_k * (1.0 + 1e-10) + 1e-12
        })
        .map(|rec| (rec.j, rec.s))
        .collect()
}

/// Pairs in `S_l^-`: direction strictly steeper than the entry, value not
/// above `lambda_l`.
fn s_minus_pairs(path: &LarsPath, l: usize) -> Vec<(usize, i8)> {
    let step = path.step(l);
    let norm2 = step.c_entry.dot(&step.c_entry);
    let lambda_l = step.lambda;
    step.candidates
        .iter()
        .filter(|rec| {
            !rec.degenerate
                && rec.j != step.j
                && rec.dot_entry > norm2 * (1.0 + 1e-10)
                && rec.value <= lambda_l * (1.0 + 1e-10) + 1e-12
        })
        .map(|rec| (rec.j, rec.s))
        .collect()
}

/// `c*_{k+1}`: the largest next-step knot among `S_k^+`, the lower truncation
/// endpoint of the spacing test. Falls back to 0 when the set is empty, which
/// degenerates the bound to `lambda_k >= 0`.
pub fn c_star(path: &LarsPath, k: usize) -> Result<f64> {
    if k < 1 || k > path.len() {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..={}, got {k}",
            path.len()
        )));
    }
    let pairs = s_plus_pairs(path, k);
    if pairs.is_empty() {
        return Ok(0.0);
    }
    // One factorization of X_{M_k} serves every candidate pair.
    let m_k = path.active_at(k);
    let s_k = path.signs_at(k);
    let qr = ThinQr::factor(path.design.submatrix(&m_k).view(), DEFAULT_RANK_TOL)?;
    let s_vec = Array1::from_iter(s_k.iter().map(|&v| v as f64));
    let w = qr.pinv_transpose_apply(s_vec.view());
    let mut best: Option<f64> = None;
    let mut proj_y_cache: std::collections::HashMap<usize, (f64, f64)> = Default::default();
    for (j, s) in pairs {
        let (proj_y, shift) = *proj_y_cache.entry(j).or_insert_with(|| {
            let col = path.design.column(j);
            let proj = qr.project_complement(col);
            (proj.dot(&path.y), col.dot(&w))
        });
        let denom = s as f64 - shift;
        if denom.abs() <= DENOM_GUARD {
            continue;
        }
        let v = proj_y / denom;
        if best.map_or(true, |b| v > b) {
            best = Some(v);
        }
    }
    Ok(best.unwrap_or(0.0))
}

/// Polyhedron form selector for [`lars_polyhedron`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyhedronMode {
    /// Every competitor inequality, fully linear in `y`.
    Exact,
    /// The `k+1`-row form: knot ordering plus the frozen `c*_{k+1}` bound.
    Reduced,
}

/// Builds the selection polyhedron of the first `k` steps.
///
/// Reduced mode emits the rows `-c_l + c_{l+1}` for `l < k`, `-c_k` twice,
/// with offsets `0, ..., 0, -c*_{k+1}`; the last offset freezes the competitor
/// bound at its observed value, which is exact along the observed line
/// `z0 + c u` (the only place the polyhedron is ever sliced). Exact mode
/// instead emits every competitor inequality as a linear row.
pub fn lars_polyhedron(path: &LarsPath, k: usize, mode: PolyhedronMode) -> Result<Polyhedron> {
    if k < 1 || k > path.len() {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..={}, got {k}",
            path.len()
        )));
    }
    let n = path.design.n();
    let mut rows: Vec<(Array1<f64>, f64, RowTag)> = Vec::new();

    // Knot ordering: c_l'y >= c_{l+1}'y for l < k.
    for l in 1..k {
        let mut row = path.step(l + 1).c_entry.clone();
        row -= &path.step(l).c_entry;
        rows.push((row, 0.0, RowTag::LarsOrder));
    }

    match mode {
        PolyhedronMode::Reduced => {
            let c_k = &path.step(k).c_entry;
            rows.push((c_k.mapv(|v| -v), 0.0, RowTag::LarsOrder));
            let star = c_star(path, k)?;
            rows.push((c_k.mapv(|v| -v), -star, RowTag::LarsCompete));
        }
        PolyhedronMode::Exact => {
            // lambda_l >= 0 for every step.
            for l in 1..=k {
                rows.push((path.step(l).c_entry.mapv(|v| -v), 0.0, RowTag::LarsOrder));
            }
            for l in 1..=k {
                let step = path.step(l);
                for rec in &step.candidates {
                    if rec.degenerate {
                        continue;
                    }
                    let is_entry = rec.j == step.j && rec.s == step.s;
                    let vec = rec.vector.as_ref().expect("non-degenerate record");
                    if rec.competitor {
                        if !is_entry {
                            // value <= lambda_{l-1} (competitor membership).
                            if l >= 2 {
                                let mut row = vec.clone();
                                row -= &path.step(l - 1).c_entry;
                                rows.push((row, 0.0, RowTag::LarsCompete));
                            }
                            // value <= lambda_l (the entry dominates).
                            let mut row = vec.clone();
                            row -= &step.c_entry;
                            rows.push((row, 0.0, RowTag::LarsCompete));
                        }
                    } else if l >= 2 {
                        // Excluded pairs stay above the previous knot.
                        let mut row = path.step(l - 1).c_entry.clone();
                        row -= vec;
                        rows.push((row, 0.0, RowTag::LarsCompete));
                    }
                }
            }
            // Next-step dominance over S_k^+ (the c* bound, per pair).
            let m_k = path.active_at(k);
            let s_k = path.signs_at(k);
            for (j, s) in s_plus_pairs(path, k) {
                match lars_c(&path.design, &m_k, &s_k, j, s) {
                    Ok(cv) => {
                        let mut row = cv.vector;
                        row -= &path.step(k).c_entry;
                        rows.push((row, 0.0, RowTag::LarsCompete));
                    }
                    Err(Error::DegenerateDenominator { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            // Steeper-than-entry directions bound the knot from above at
            // every step.
            for l in 1..=k {
                let m_l = path.active_at(l);
                let s_l = path.signs_at(l);
                for (j, s) in s_minus_pairs(path, l) {
                    match lars_c(&path.design, &m_l, &s_l, j, s) {
                        Ok(cv) => {
                            let mut row = path.step(l).c_entry.clone();
                            row -= &cv.vector;
                            rows.push((row, 0.0, RowTag::LarsCompete));
                        }
                        Err(Error::DegenerateDenominator { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    Polyhedron::from_rows(n, rows)
}
